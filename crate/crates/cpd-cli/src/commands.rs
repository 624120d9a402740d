//! Command implementations: mesh, validate, simulate, generate, train,
//! evaluate, report.

use anyhow::{bail, Context, Result};
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use cpd::dataset::{
    self, build_training_tensors, crack_outcome, mesh_for, read_trajectory, trapping_classifier,
    write_trajectory, TensorOptions, TrainSplit,
};
use cpd::geometry::{self, region_of_interest, DomainSpec};
use cpd::operator::{
    predict_displacements, read_checkpoint, relative_l2_over_time, train as train_model,
    write_checkpoint, OperatorModel, TrainConfig,
};
use cpd::solver::{run_quasi_static, LoadingProtocol};
use cpd::trajectory::Trajectory;
use cpd::validation::{
    extract_profile, kirsch, profile_error, westergaard, ExtractionLine, StressProfile,
};
use cpd::vec2::Vec2;

use crate::config::Resolved;
use crate::svg::{Chart, MeshPlot, Series, SeriesStyle};

/// Exit status for partial success (some samples failed).
pub const EXIT_PARTIAL: i32 = 3;
/// Exit status for benchmark thresholds not met.
pub const EXIT_THRESHOLD: i32 = 2;

fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

pub fn cmd_mesh(cfg: &Resolved) -> Result<i32> {
    let dir = cfg.run_dir("mesh")?;
    let system = geometry::seed_particles(&cfg.domain)?;
    let tri = geometry::triangulate(&system, &cfg.domain)?;
    let roi = region_of_interest(&cfg.domain);

    // single-frame export: the reference configuration record
    let traj = Trajectory {
        sample_id: 0,
        geometry_param: cfg.domain.notch_height,
        domain: cfg.domain.clone(),
        ref_positions: system.ref_positions.clone(),
        frames: vec![cpd::trajectory::Frame {
            positions: system.ref_positions.clone(),
            alive: vec![true; tri.len()],
        }],
    };
    write_trajectory(&traj, &dir.join("mesh.cpd"))?;

    let plot = MeshPlot {
        title: format!(
            "reference mesh: {} particles, {} triangles",
            system.len(),
            tri.len()
        ),
        particles: system.ref_positions.iter().map(|p| (p.x, p.y)).collect(),
        dead: vec![],
        window: (0.0, 0.0, cfg.domain.width, cfg.domain.height),
    };
    write_text(&dir.join("mesh.svg"), &plot.render())?;

    let mut summary = String::new();
    let _ = writeln!(summary, "particles: {}", system.len());
    let _ = writeln!(summary, "triangles: {}", tri.len());
    let _ = writeln!(
        summary,
        "roi: [{:.3}, {:.3}] x [{:.3}, {:.3}]",
        roi.min.x, roi.max.x, roi.min.y, roi.max.y
    );
    write_text(&dir.join("summary.txt"), &summary)?;
    println!("mesh written to {}", dir.display());
    print!("{summary}");
    Ok(0)
}

struct Benchmark {
    name: &'static str,
    spec: DomainSpec,
    /// Distance origin and discontinuity radius for the analytic profile.
    origin_x: f64,
    edge: f64,
    two_sided: bool,
    analytic: Option<fn(f64, f64, f64) -> Result<f64, cpd::validation::ValidationError>>,
    rms_threshold: Option<f64>,
    check_scf: bool,
}

fn profile_csv(profile: &StressProfile, analytic: impl Fn(f64) -> Option<f64>) -> String {
    let mut out = String::from("x_cm,sigma_sim_GPa,sigma_analytic_GPa,rel_err\n");
    for (&x, &s) in profile.sample_x.iter().zip(&profile.sigma_yy) {
        match analytic(x) {
            Some(a) => {
                let _ = writeln!(out, "{x},{s},{a},{}", (s - a) / a);
            }
            None => {
                let _ = writeln!(out, "{x},{s},,");
            }
        }
    }
    out
}

pub fn cmd_validate(cfg: &Resolved) -> Result<i32> {
    let dir = cfg.run_dir("validate")?;
    let v = &cfg.validate;
    let mid = Vec2::new(v.width / 2.0, v.height / 2.0);

    let benchmarks = [
        Benchmark {
            name: "crack",
            spec: DomainSpec {
                width: v.width,
                height: v.height,
                hole_center: mid,
                hole_radius: 0.0,
                notch_tip_x: v.crack_length,
                notch_height: 0.0,
                target_spacing: v.target_spacing,
                seed: v.seed,
            },
            origin_x: 0.0,
            edge: v.crack_length,
            two_sided: false,
            analytic: Some(westergaard),
            rms_threshold: Some(v.crack_rms_threshold),
            check_scf: false,
        },
        Benchmark {
            name: "hole",
            spec: DomainSpec {
                width: v.width,
                height: v.height,
                hole_center: mid,
                hole_radius: v.hole_radius,
                notch_tip_x: 0.0,
                notch_height: 0.0,
                target_spacing: v.target_spacing,
                seed: v.seed,
            },
            origin_x: mid.x,
            edge: v.hole_radius,
            two_sided: true,
            analytic: Some(kirsch),
            rms_threshold: Some(v.hole_rms_threshold),
            check_scf: true,
        },
        Benchmark {
            name: "interaction",
            spec: DomainSpec {
                width: v.width,
                height: v.height,
                hole_center: Vec2::new(mid.x, mid.y - v.hole_radius - 0.5),
                hole_radius: v.hole_radius,
                notch_tip_x: v.crack_length,
                notch_height: 0.5,
                target_spacing: v.target_spacing,
                seed: v.seed,
            },
            origin_x: 0.0,
            edge: v.crack_length,
            two_sided: false,
            analytic: None, // no closed form; reported qualitatively
            rms_threshold: None,
            check_scf: false,
        },
    ];

    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "scale: {}",
        match cfg.scale {
            crate::config::Scale::Desk => "desk",
            crate::config::Scale::Paper => "paper",
        }
    );
    let mut all_ok = true;
    for b in &benchmarks {
        let t0 = Instant::now();
        let protocol = LoadingProtocol {
            total_displacement: v.total_displacement,
            n_load_steps: v.n_load_steps,
            relax_substeps: v.relax_substeps,
            dt: 0.9 * cpd::solver::stable_dt(&b.spec, &cfg.material),
            equilibration_steps: v.equilibration_steps,
        };
        let traj = run_quasi_static(&b.spec, &cfg.material, &protocol, false, 0, 0.0)?;
        let system = geometry::seed_particles(&b.spec)?;
        let tri = geometry::triangulate(&system, &b.spec)?;
        let last = traj.frames.last().unwrap();
        let bin = v.bin_factor * v.target_spacing;
        let line = ExtractionLine {
            y_level: if b.name == "hole" { mid.y } else { b.spec.notch_line_y() },
            origin_x: b.origin_x,
            dist_min: b.edge,
            dist_max: 4.5 * b.edge.max(v.hole_radius),
            two_sided: b.two_sided,
        };
        let profile = extract_profile(
            &traj.ref_positions,
            &last.positions,
            &tri,
            &cfg.material,
            &line,
            bin,
            b.spec.width,
        )?;
        let sinf = profile.far_field;
        let elapsed = t0.elapsed().as_secs_f64();

        let analytic_at = |x: f64| -> Option<f64> {
            b.analytic.and_then(|f| f(x, b.edge, sinf).ok())
        };
        write_text(
            &dir.join(format!("{}_profile.csv", b.name)),
            &profile_csv(&profile, analytic_at),
        )?;

        // overlay chart
        let mut series = vec![Series {
            label: "simulated".into(),
            color: "#204a87",
            points: profile
                .sample_x
                .iter()
                .zip(&profile.sigma_yy)
                .map(|(&x, &s)| (x / b.edge, s / sinf))
                .collect(),
            style: SeriesStyle::Dots,
        }];
        if b.analytic.is_some() {
            let analytic_pts: Vec<(f64, f64)> = (0..400)
                .filter_map(|i| {
                    let x = b.edge * (1.001 + 3.5 * i as f64 / 399.0);
                    analytic_at(x).map(|a| (x / b.edge, a / sinf))
                })
                .collect();
            series.push(Series {
                label: "analytic".into(),
                color: "#cc0000",
                points: analytic_pts,
                style: SeriesStyle::Line,
            });
        }
        let chart = Chart {
            title: format!("{} benchmark: sigma_yy / far field", b.name),
            x_label: "x / discontinuity size".into(),
            y_label: "sigma_yy / sigma_inf".into(),
            series,
            log_y: false,
        };
        write_text(&dir.join(format!("{}_overlay.svg", b.name)), &chart.render())?;

        let _ = writeln!(
            summary,
            "{}: {} particles, far field {:.4} GPa, {:.1} s",
            b.name,
            system.len(),
            sinf,
            elapsed
        );

        if let (Some(f), Some(threshold)) = (b.analytic, b.rms_threshold) {
            // restrict to x/edge in [1.2, 4] for the error metric
            let idx: Vec<usize> = profile
                .sample_x
                .iter()
                .enumerate()
                .filter(|(_, &x)| x >= 1.2 * b.edge && x <= 4.0 * b.edge)
                .map(|(i, _)| i)
                .collect();
            let sub = StressProfile {
                sample_x: idx.iter().map(|&i| profile.sample_x[i]).collect(),
                sigma_yy: idx.iter().map(|&i| profile.sigma_yy[i]).collect(),
                far_field: sinf,
            };
            let err = profile_error(&sub, |x| f(x, b.edge, sinf))?;
            let rms_ok = err.rms_rel < threshold;
            let _ = writeln!(
                summary,
                "  rms_rel = {:.4} (threshold {threshold}), max_rel = {:.4} -> {}",
                err.rms_rel,
                err.max_rel,
                if rms_ok { "pass" } else { "FAIL" }
            );
            all_ok &= rms_ok;

            if b.check_scf {
                let scf = profile.sigma_yy[0] / sinf;
                let miss = (scf - 3.0).abs() / 3.0;
                let scf_ok = miss <= cfg.validate.scf_threshold;
                let _ = writeln!(
                    summary,
                    "  nearest-bin SCF = {scf:.3} (vs 3, miss {:.1}%) -> {}",
                    100.0 * miss,
                    if scf_ok { "pass" } else { "FAIL" }
                );
                all_ok &= scf_ok;
            }
        }
    }

    write_text(&dir.join("summary.txt"), &summary)?;
    print!("{summary}");
    println!("reports in {}", dir.display());
    Ok(if all_ok { 0 } else { EXIT_THRESHOLD })
}

pub fn cmd_simulate(cfg: &Resolved) -> Result<i32> {
    let dir = cfg.run_dir("simulate")?;
    let traj = run_quasi_static(
        &cfg.domain,
        &cfg.material,
        &cfg.protocol,
        cfg.case.fracture,
        0,
        cfg.domain.notch_height,
    )?;
    write_trajectory(&traj, &dir.join("trajectory.cpd"))?;

    let (system, tri) = mesh_for(&traj)?;
    let outcome = crack_outcome(&traj, &system, &tri);
    let roi = region_of_interest(&cfg.domain);
    let last = traj.frames.last().unwrap();
    let dead: Vec<(f64, f64)> = (0..tri.len())
        .filter(|&t| !last.alive[t])
        .map(|t| {
            let v = tri.triangles[t];
            let c = (system.ref_positions[v[0] as usize]
                + system.ref_positions[v[1] as usize]
                + system.ref_positions[v[2] as usize])
                * (1.0 / 3.0);
            (c.x, c.y)
        })
        .collect();
    let plot = MeshPlot {
        title: format!(
            "final configuration (onset tau = {:?}, merged = {}, passed = {})",
            outcome.onset_tau, outcome.merged, outcome.passed
        ),
        particles: last.positions.iter().map(|p| (p.x, p.y)).collect(),
        dead,
        window: (roi.min.x, roi.min.y, roi.max.x, roi.max.y),
    };
    write_text(&dir.join("crack_path.svg"), &plot.render())?;

    let mut summary = String::new();
    let _ = writeln!(summary, "particles: {}", traj.num_particles());
    let _ = writeln!(summary, "onset tau: {:?}", outcome.onset_tau);
    let _ = writeln!(summary, "dead triangles: {}", traj.dead_count(100));
    let _ = writeln!(summary, "merged: {}", outcome.merged);
    let _ = writeln!(summary, "passed: {}", outcome.passed);
    write_text(&dir.join("summary.txt"), &summary)?;
    print!("{summary}");
    println!("trajectory in {}", dir.display());
    Ok(0)
}

pub fn cmd_generate(cfg: &Resolved) -> Result<i32> {
    let dir = cfg.run_dir("generate")?;
    let case = cfg.case_spec();
    let base = cfg.base_domain();
    let t0 = Instant::now();
    let runs = dataset::generate_case(
        &case,
        &base,
        &cfg.material,
        &cfg.protocol,
        cfg.case.base_seed,
        cfg.case.workers,
    );
    let elapsed = t0.elapsed().as_secs_f64();

    let mut manifest = String::from("# sample_id param status path\n");
    let mut outcomes = String::from("sample_id,param,onset_tau,merged,passed,trapping_pred\n");
    let mut failures = 0usize;
    for run in &runs {
        match &run.result {
            Ok(traj) => {
                let name = format!("sample_{:03}.cpd", run.sample_id);
                write_trajectory(traj, &dir.join(&name))?;
                let _ = writeln!(
                    manifest,
                    "{} {:.6} ok {name}",
                    run.sample_id, run.param
                );
                let (system, tri) = mesh_for(traj)?;
                let o = crack_outcome(traj, &system, &tri);
                let pred = trapping_classifier(
                    traj.domain.hole_radius,
                    traj.domain.notch_height,
                );
                let _ = writeln!(
                    outcomes,
                    "{},{},{},{},{},{}",
                    run.sample_id,
                    run.param,
                    o.onset_tau.map(|t| t.to_string()).unwrap_or_default(),
                    o.merged,
                    o.passed,
                    pred
                );
            }
            Err(e) => {
                failures += 1;
                let _ = writeln!(
                    manifest,
                    "{} {:.6} failed:{} -",
                    run.sample_id,
                    run.param,
                    e.to_string().replace(' ', "_")
                );
            }
        }
    }
    write_text(&dir.join("manifest.txt"), &manifest)?;
    write_text(&dir.join("outcomes.csv"), &outcomes)?;
    println!(
        "{} samples ({failures} failed) in {elapsed:.1} s -> {}",
        runs.len(),
        dir.display()
    );
    Ok(if failures == 0 { 0 } else { EXIT_PARTIAL })
}

/// Parse a manifest and read its trajectories.
pub fn load_dataset(dir: &Path) -> Result<Vec<Trajectory>> {
    let manifest = std::fs::read_to_string(dir.join("manifest.txt"))
        .with_context(|| format!("no manifest in {}", dir.display()))?;
    let mut trajs = Vec::new();
    for line in manifest.lines() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            bail!("malformed manifest line: {line}");
        }
        if fields[2] != "ok" {
            continue;
        }
        trajs.push(read_trajectory(&dir.join(fields[3]))?);
    }
    if trajs.is_empty() {
        bail!("dataset {} has no usable samples", dir.display());
    }
    Ok(trajs)
}

pub fn cmd_train(cfg: &Resolved) -> Result<i32> {
    let dataset_dir = cfg
        .dataset_dir
        .clone()
        .context("train needs io.dataset_dir pointing at a generated dataset")?;
    let dir = cfg.run_dir("train")?;
    let trajs = load_dataset(&dataset_dir)?;
    let split = TrainSplit::evenly(trajs.len(), cfg.case.n_test);
    let tensors = build_training_tensors(
        &trajs,
        &split,
        TensorOptions {
            particle_stride: cfg.train.particle_stride,
            tau_stride: cfg.train.tau_stride,
        },
    )?;

    let model = OperatorModel::init(cfg.train.variant, cfg.train.arch, 1, cfg.train.seed);
    let mut config = TrainConfig::new(cfg.train.schedule, cfg.train.iterations, cfg.train.seed);
    config.record_every = cfg.train.record_every;
    let t0 = Instant::now();
    let result = train_model(model, &tensors, &config)?;
    let elapsed = t0.elapsed().as_secs_f64();

    let ckpt = dir.join(format!("{}.onet", cfg.train.variant.label()));
    write_checkpoint(&result.model, &tensors.norm, &ckpt)?;
    let mut loss_csv = String::from("iteration,mse\n");
    for (it, mse) in &result.loss_history {
        let _ = writeln!(loss_csv, "{it},{mse}");
    }
    write_text(&dir.join("loss.csv"), &loss_csv)?;
    let chart = Chart {
        title: format!("training loss ({})", cfg.train.variant.label()),
        x_label: "iteration".into(),
        y_label: "mse".into(),
        series: vec![Series {
            label: cfg.train.variant.label().into(),
            color: "#204a87",
            points: result
                .loss_history
                .iter()
                .map(|&(i, m)| (i as f64, m))
                .collect(),
            style: SeriesStyle::Line,
        }],
        log_y: true,
    };
    write_text(&dir.join("loss.svg"), &chart.render())?;

    println!(
        "{}: {} iterations in {elapsed:.1} s, final mse = {:.4e}",
        cfg.train.variant.label(),
        cfg.train.iterations,
        result.final_mse
    );
    println!("checkpoint: {}", ckpt.display());
    Ok(0)
}

pub fn cmd_evaluate(cfg: &Resolved) -> Result<i32> {
    let dataset_dir = cfg
        .dataset_dir
        .clone()
        .context("evaluate needs io.dataset_dir")?;
    let ckpt_path = cfg
        .checkpoint
        .clone()
        .context("evaluate needs io.checkpoint")?;
    let dir = cfg.run_dir("evaluate")?;
    let trajs = load_dataset(&dataset_dir)?;
    let split = TrainSplit::evenly(trajs.len(), cfg.case.n_test);
    let (model, norm) = read_checkpoint(&ckpt_path)?;

    let test: Vec<&Trajectory> = split.test_ids.iter().map(|&i| &trajs[i]).collect();
    let curve = relative_l2_over_time(&model, &test, &norm)?;
    let mut csv = String::from("tau,rel_l2\n");
    for (tau, e) in &curve {
        let _ = writeln!(csv, "{tau},{e}");
    }
    write_text(&dir.join("rel_l2.csv"), &csv)?;
    let chart = Chart {
        title: format!("relative L2 error over stages ({})", model.variant.label()),
        x_label: "tau".into(),
        y_label: "relative L2".into(),
        series: vec![Series {
            label: model.variant.label().into(),
            color: "#cc0000",
            points: curve.iter().map(|&(t, e)| (t as f64, e)).collect(),
            style: SeriesStyle::Line,
        }],
        log_y: true,
    };
    write_text(&dir.join("rel_l2.svg"), &chart.render())?;

    // predicted vs true scatter at the reporting stages
    for &tau in &[40usize, 99] {
        for traj in &test {
            let pred = predict_displacements(&model, traj, tau, &norm)?;
            let mut csv = String::from("x_true,y_true,x_pred,y_pred\n");
            let mut true_pts = Vec::new();
            let mut pred_pts = Vec::new();
            for (p, u) in pred.iter().enumerate() {
                let truth = traj.frames[tau].positions[p];
                let predicted = traj.ref_positions[p] + *u;
                let _ = writeln!(csv, "{},{},{},{}", truth.x, truth.y, predicted.x, predicted.y);
                true_pts.push((truth.x, truth.y));
                pred_pts.push((predicted.x, predicted.y));
            }
            let stem = format!("sample_{:03}_tau{:03}", traj.sample_id, tau);
            write_text(&dir.join(format!("{stem}.csv")), &csv)?;
            let chart = Chart {
                title: format!(
                    "sample {} (param {:.3}) at tau = {tau}",
                    traj.sample_id, traj.geometry_param
                ),
                x_label: "x (cm)".into(),
                y_label: "y (cm)".into(),
                series: vec![
                    Series {
                        label: "true".into(),
                        color: "#204a87",
                        points: true_pts,
                        style: SeriesStyle::HollowDots,
                    },
                    Series {
                        label: "predicted".into(),
                        color: "#cc0000",
                        points: pred_pts,
                        style: SeriesStyle::Dots,
                    },
                ],
                log_y: false,
            };
            write_text(&dir.join(format!("{stem}.svg")), &chart.render())?;
        }
    }

    let mean_err = curve.iter().map(|&(_, e)| e).sum::<f64>() / curve.len() as f64;
    let (argmax, max_err) = curve
        .iter()
        .fold((0usize, 0.0), |acc, &(t, e)| if e > acc.1 { (t, e) } else { acc });
    let mut summary = String::new();
    let _ = writeln!(summary, "variant: {}", model.variant.label());
    let _ = writeln!(summary, "test samples: {:?}", split.test_ids);
    let _ = writeln!(summary, "mean rel L2: {mean_err:.4}");
    let _ = writeln!(summary, "max rel L2: {max_err:.4} at tau = {argmax}");
    write_text(&dir.join("summary.txt"), &summary)?;
    print!("{summary}");
    println!("evaluation in {}", dir.display());
    Ok(0)
}

/// Re-render charts from the CSV artifacts of a previous run directory.
pub fn cmd_report(run_dir: &Path) -> Result<i32> {
    if !run_dir.is_dir() {
        bail!("{} is not a run directory", run_dir.display());
    }
    let mut report = String::new();
    let mut rendered = 0usize;
    for entry in std::fs::read_dir(run_dir)? {
        let path = entry?.path();
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        if !name.ends_with(".csv") {
            continue;
        }
        let content = std::fs::read_to_string(&path)?;
        let mut lines = content.lines();
        let header: Vec<String> = lines
            .next()
            .unwrap_or_default()
            .split(',')
            .map(|s| s.to_string())
            .collect();
        let rows: Vec<Vec<f64>> = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split(',')
                    .map(|v| v.parse::<f64>().unwrap_or(f64::NAN))
                    .collect()
            })
            .collect();
        if header.len() < 2 || rows.is_empty() {
            continue;
        }
        let series: Vec<Series> = (1..header.len())
            .map(|c| Series {
                label: header[c].clone(),
                color: ["#204a87", "#cc0000", "#4e9a06", "#75507b"][(c - 1) % 4],
                points: rows
                    .iter()
                    .filter(|r| r.len() > c && r[0].is_finite() && r[c].is_finite())
                    .map(|r| (r[0], r[c]))
                    .collect(),
                style: SeriesStyle::Line,
            })
            .collect();
        let chart = Chart {
            title: name.trim_end_matches(".csv").replace('_', " "),
            x_label: header[0].clone(),
            y_label: "value".into(),
            series,
            log_y: false,
        };
        let out = path.with_extension("report.svg");
        write_text(&out, &chart.render())?;
        let _ = writeln!(report, "rendered {}", out.file_name().unwrap().to_string_lossy());
        rendered += 1;
    }
    if let Ok(summary) = std::fs::read_to_string(run_dir.join("summary.txt")) {
        let _ = writeln!(report, "--- summary.txt ---\n{summary}");
    }
    write_text(&run_dir.join("report.txt"), &report)?;
    print!("{report}");
    println!("{rendered} charts rendered in {}", run_dir.display());
    Ok(0)
}
