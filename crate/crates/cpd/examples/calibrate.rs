//! Scratch calibration runs (not part of the deliverable test suite).

use std::time::Instant;

use cpd::geometry::DomainSpec;
use cpd::material::MaterialModel;
use cpd::solver::{run_quasi_static, stable_dt, LoadingProtocol};
use cpd::validation::{extract_profile, kirsch, profile_error, ExtractionLine};
use cpd::vec2::Vec2;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(String::as_str).unwrap_or("kirsch");
    match which {
        "kirsch" => kirsch_run(
            args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.21),
            args.get(3).and_then(|s| s.parse().ok()).unwrap_or(2400),
            args.get(4).and_then(|s| s.parse().ok()).unwrap_or(10.0),
        ),
        "crack" => crack_run(
            args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.21),
            args.get(3).and_then(|s| s.parse().ok()).unwrap_or(2400),
        ),
        "trap" => trap_run(
            args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1.0),   // sigma_t
            args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0.045), // delta
            args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.26),  // spacing
        ),
        "train" => train_run(
            args.get(2).and_then(|s| s.parse().ok()).unwrap_or(200),  // iterations
            args.get(3).and_then(|s| s.parse().ok()).unwrap_or(25),   // particle stride
            args.get(4).and_then(|s| s.parse().ok()).unwrap_or(4),    // tau stride
        ),
        other => eprintln!("unknown mode {other}"),
    }
}

fn train_run(iterations: usize, particle_stride: usize, tau_stride: usize) {
    use cpd::dataset::{
        build_training_tensors, crack_outcome, mesh_for, BaseDomain, CaseId, CaseSpec,
        TensorOptions, TrainSplit,
    };
    use cpd::operator::{
        relative_l2_over_time, train, OperatorArch, OperatorModel, Schedule, TrainConfig, Variant,
    };

    let case = CaseSpec::with_samples(CaseId::Case2, 10, true);
    let base = BaseDomain::default();
    let mat = MaterialModel::steel(1.0, 10.0, 1.0);
    let spec0 = case.domain_for(1.0, &base, 0);
    let dt = 0.9 * stable_dt(&spec0, &mat);
    let protocol = LoadingProtocol {
        total_displacement: 0.045,
        n_load_steps: 100,
        relax_substeps: 60,
        dt,
        equilibration_steps: 3000,
    };
    let t0 = Instant::now();
    let runs = cpd::dataset::generate_case(&case, &base, &mat, &protocol, 100, 2);
    println!("dataset: {:.1} s", t0.elapsed().as_secs_f64());
    let trajs: Vec<_> = runs
        .into_iter()
        .map(|r| r.result.expect("sample run"))
        .collect();
    for traj in &trajs {
        let (sys, tri) = mesh_for(traj).unwrap();
        let o = crack_outcome(traj, &sys, &tri);
        println!(
            "  h = {:.3}: onset = {:?}, merged = {}, passed = {}",
            traj.geometry_param, o.onset_tau, o.merged, o.passed
        );
    }
    let split = TrainSplit::evenly(10, 2);
    println!("split: train {:?}, test {:?}", split.train_ids, split.test_ids);
    let opts = TensorOptions {
        particle_stride,
        tau_stride,
    };
    let tensors = build_training_tensors(&trajs, &split, opts).unwrap();
    let rows: usize = tensors
        .train_samples()
        .map(|s| s.trunk.nrows())
        .sum();
    println!("training rows: {rows}");

    for (variant, arch, schedule) in [
        (
            Variant::Fusion,
            OperatorArch::fusion_default(),
            Schedule::fusion_default(),
        ),
        (
            Variant::Vanilla,
            OperatorArch::vanilla_default(),
            Schedule::vanilla_default(),
        ),
    ] {
        let model = OperatorModel::init(variant, arch, 1, 7);
        let config = TrainConfig::new(schedule, iterations, 7);
        let t0 = Instant::now();
        let result = train(model, &tensors, &config).unwrap();
        let dt_s = t0.elapsed().as_secs_f64();
        println!(
            "{}: {iterations} iters in {dt_s:.1} s ({:.1} ms/iter), final mse = {:.4e}",
            variant.label(),
            1e3 * dt_s / iterations as f64,
            result.final_mse
        );
        let hist: Vec<_> = result
            .loss_history
            .iter()
            .step_by((result.loss_history.len() / 10).max(1))
            .collect();
        println!("  history: {hist:?}");
        let test_trajs: Vec<&cpd::trajectory::Trajectory> =
            split.test_ids.iter().map(|&i| &trajs[i]).collect();
        let t0 = Instant::now();
        let curve = relative_l2_over_time(&result.model, &test_trajs, &tensors.norm).unwrap();
        let (argmax, max) = curve
            .iter()
            .fold((0usize, 0.0f64), |acc, &(t, e)| {
                if e > acc.1 {
                    (t, e)
                } else {
                    acc
                }
            });
        println!(
            "  rel-L2: eval {:.1} s, tau=1 {:.3}, tau=20 {:.3}, tau=50 {:.3}, tau=100 {:.3}, max {:.3} at tau={argmax}",
            t0.elapsed().as_secs_f64(),
            curve[0].1,
            curve[19].1,
            curve[49].1,
            curve[99].1,
            max
        );
    }
}

fn trap_run(sigma_t: f64, delta: f64, spacing: f64) {
    let case3 = std::env::args().nth(5).map(|s| s == "case3").unwrap_or(false);
    let seed: u64 = std::env::args().nth(6).and_then(|s| s.parse().ok()).unwrap_or(7);
    let cx: f64 = std::env::args().nth(7).and_then(|s| s.parse().ok()).unwrap_or(3.5);
    let params: &[f64] = if case3 {
        &[0.7, 0.85, 1.0, 1.1, 1.35, 1.45]
    } else {
        &[0.1, 0.4, 1.0, 1.9]
    };
    for &h in params {
        let (radius, height) = if case3 { (h, 1.5 - h) } else { (1.0, h) };
        let spec = DomainSpec {
            width: 10.0,
            height: 10.0,
            hole_center: Vec2::new(cx, 3.5),
            hole_radius: radius,
            notch_tip_x: 1.0,
            notch_height: height,
            target_spacing: spacing,
            seed,
        };
        let mat = MaterialModel::steel(sigma_t, 10.0 * sigma_t, 1.0);
        let dt = 0.9 * stable_dt(&spec, &mat);
        let protocol = LoadingProtocol {
            total_displacement: delta,
            n_load_steps: 100,
            relax_substeps: 60,
            dt,
            equilibration_steps: 3000,
        };
        let t0 = Instant::now();
        let traj = match run_quasi_static(&spec, &mat, &protocol, true, 0, h) {
            Ok(t) => t,
            Err(e) => {
                println!("h = {h}: FAILED: {e}");
                continue;
            }
        };
        let elapsed = t0.elapsed().as_secs_f64();

        let system = cpd::geometry::seed_particles(&spec).unwrap();
        let tri = cpd::geometry::triangulate(&system, &spec).unwrap();
        let onset = traj.first_failure_tau();
        let last = traj.frames.last().unwrap();
        let killed: Vec<usize> = (0..tri.len()).filter(|&t| !last.alive[t]).collect();
        let centroid = |t: usize| -> Vec2 {
            let v = tri.triangles[t];
            (system.ref_positions[v[0] as usize]
                + system.ref_positions[v[1] as usize]
                + system.ref_positions[v[2] as usize])
                * (1.0 / 3.0)
        };
        let min_dist_hole = killed
            .iter()
            .map(|&t| centroid(t).dist(spec.hole_center))
            .fold(f64::INFINITY, f64::min);
        let max_x = killed.iter().map(|&t| centroid(t).x).fold(0.0, f64::max);

        // connected-component merge test: does the kill path from the notch
        // tip reach the hole rim through adjacent killed triangles?
        let tip = Vec2::new(spec.notch_tip_x, spec.notch_line_y());
        let seeds: Vec<usize> = killed
            .iter()
            .copied()
            .filter(|&t| centroid(t).dist(tip) <= 3.0 * spacing)
            .collect();
        let rim_tol = spec.hole_radius + 0.75 * spacing;
        let is_rim = |t: usize| {
            tri.triangles[t]
                .iter()
                .any(|&v| system.ref_positions[v as usize].dist(spec.hole_center) <= rim_tol)
        };
        // vertex adjacency among killed triangles
        use std::collections::{HashMap, VecDeque};
        let killed_set: std::collections::HashSet<usize> = killed.iter().copied().collect();
        let mut by_vertex: HashMap<u32, Vec<usize>> = HashMap::new();
        for &t in &killed {
            for &v in &tri.triangles[t] {
                by_vertex.entry(v).or_default().push(t);
            }
        }
        let mut visited: std::collections::HashSet<usize> = seeds.iter().copied().collect();
        let mut queue: VecDeque<usize> = seeds.iter().copied().collect();
        let mut touches_rim = false;
        let mut reach = f64::NEG_INFINITY;
        let mut min_rim_gap = f64::INFINITY;
        while let Some(t) = queue.pop_front() {
            if is_rim(t) {
                touches_rim = true;
            }
            reach = reach.max(centroid(t).x);
            let gap = tri.triangles[t]
                .iter()
                .map(|&v| system.ref_positions[v as usize].dist(spec.hole_center) - spec.hole_radius)
                .fold(f64::INFINITY, f64::min);
            min_rim_gap = min_rim_gap.min(gap);
            for &v in &tri.triangles[t] {
                for &u in &by_vertex[&v] {
                    if killed_set.contains(&u) && visited.insert(u) {
                        queue.push_back(u);
                    }
                }
            }
        }
        // merged: the tip crack's kill component reaches the rim, or it is
        // absorbed (never crosses the near edge of the hole yet its front
        // ends within a couple of elements of the rim)
        let absorbed = reach < spec.hole_center.x - spec.hole_radius && min_rim_gap <= 2.2 * spacing;
        let merged = touches_rim || absorbed;
        let passed = max_x >= spec.hole_center.x + spec.hole_radius && !merged;
        println!(
            "h = {h}: onset tau = {onset:?}, killed = {}, min dist = {min_dist_hole:.2}, max x = {max_x:.2}, seeds = {}, comp = {}, reach = {reach:.2}, rim_gap = {min_rim_gap:.2}, touches = {touches_rim}, absorbed = {absorbed}, merged = {merged}, passed = {passed} ({elapsed:.1} s)",
            killed.len(),
            seeds.len(),
            visited.len()
        );
        if std::env::var("DUMP_KILLS").is_ok() {
            let mut out = String::new();
            let kill_tau = |t: usize| {
                traj.frames
                    .iter()
                    .position(|f| !f.alive[t])
                    .unwrap_or(usize::MAX)
            };
            for &t in &killed {
                let c = centroid(t);
                out.push_str(&format!("{h} {} {:.4} {:.4} {}\n", t, c.x, c.y, kill_tau(t)));
            }
            std::fs::write(format!("/tmp/kills_{h}.txt"), out).unwrap();
        }
    }
}

fn crack_run(spacing: f64, equilibration: usize) {
    let spec = DomainSpec {
        width: 10.0,
        height: 10.0,
        hole_center: Vec2::new(5.0, 5.0),
        hole_radius: 0.0,
        notch_tip_x: 1.0,
        notch_height: 0.0, // notch line at y = 5
        target_spacing: spacing,
        seed: 1,
    };
    let mat = MaterialModel::steel(100.0, 100.0, 1.0);
    let dt = 0.9 * stable_dt(&spec, &mat);
    let protocol = LoadingProtocol {
        total_displacement: 0.02,
        n_load_steps: 40,
        relax_substeps: 60,
        dt,
        equilibration_steps: equilibration,
    };
    let t0 = Instant::now();
    let traj = run_quasi_static(&spec, &mat, &protocol, false, 0, 0.0).unwrap();
    println!(
        "crack run: {} particles, {:.1} s",
        traj.num_particles(),
        t0.elapsed().as_secs_f64()
    );
    let system = cpd::geometry::seed_particles(&spec).unwrap();
    let tri = cpd::geometry::triangulate(&system, &spec).unwrap();
    let a = spec.notch_tip_x;
    let last = traj.frames.last().unwrap();
    for bin_mult in [0.7, 1.0, 1.5] {
        let bin = bin_mult * spacing;
        let line = ExtractionLine {
            y_level: spec.notch_line_y(),
            origin_x: 0.0,
            dist_min: a,
            dist_max: 4.5 * a,
            two_sided: false,
        };
        match extract_profile(
            &traj.ref_positions,
            &last.positions,
            &tri,
            &mat,
            &line,
            bin,
            spec.width,
        ) {
            Ok(profile) => {
                let sinf = profile.far_field;
                println!("bin = {bin:.3}: far field = {sinf:.5}, {} samples", profile.sample_x.len());
                let restricted_idx: Vec<usize> = profile
                    .sample_x
                    .iter()
                    .enumerate()
                    .filter(|(_, &x)| (1.2 * a..=4.0 * a).contains(&x))
                    .map(|(i, _)| i)
                    .collect();
                let sub = cpd::validation::StressProfile {
                    sample_x: restricted_idx.iter().map(|&i| profile.sample_x[i]).collect(),
                    sigma_yy: restricted_idx.iter().map(|&i| profile.sigma_yy[i]).collect(),
                    far_field: sinf,
                };
                match profile_error(&sub, |x| cpd::validation::westergaard(x, a, sinf)) {
                    Ok(err) => println!(
                        "  rms_rel = {:.4}, max_rel = {:.4} over {}",
                        err.rms_rel, err.max_rel, sub.sample_x.len()
                    ),
                    Err(e) => println!("  metric failed: {e}"),
                }
                for (x, s) in sub.sample_x.iter().zip(&sub.sigma_yy) {
                    let an = cpd::validation::westergaard(*x, a, sinf).unwrap();
                    println!(
                        "    x = {x:.3}  sim = {:.4}  westergaard = {:.4}  rel = {:+.3}",
                        s / sinf,
                        an / sinf,
                        (s - an) / an
                    );
                }
            }
            Err(e) => println!("bin = {bin:.3}: extraction failed: {e}"),
        }
    }
}

fn kirsch_run(spacing: f64, equilibration: usize, width: f64) {
    let spec = DomainSpec {
        width,
        height: width,
        hole_center: Vec2::new(width / 2.0, width / 2.0),
        hole_radius: 1.0,
        notch_tip_x: 0.0,
        notch_height: 0.0,
        target_spacing: spacing,
        seed: 1,
    };
    let mat = MaterialModel::steel(100.0, 100.0, 1.0); // strengths irrelevant, fracture off
    let dt = 0.9 * stable_dt(&spec, &mat);
    let protocol = LoadingProtocol {
        total_displacement: 0.002 * width,
        n_load_steps: 40,
        relax_substeps: 60,
        dt,
        equilibration_steps: equilibration,
    };
    let t0 = Instant::now();
    let traj = run_quasi_static(&spec, &mat, &protocol, false, 0, 0.0).unwrap();
    let elapsed = t0.elapsed();
    println!(
        "run: {} particles, {:.1} s, {} substeps",
        traj.num_particles(),
        elapsed.as_secs_f64(),
        protocol.total_substeps()
    );

    // rebuild mesh to get the triangulation (same deterministic path)
    let system = cpd::geometry::seed_particles(&spec).unwrap();
    let tri = cpd::geometry::triangulate(&system, &spec).unwrap();
    println!("triangles: {}", tri.len());

    let last = traj.frames.last().unwrap();
    for bin_mult in [0.6, 0.7, 0.8, 1.0, 1.5] {
        let bin = bin_mult * spacing;
        let line = ExtractionLine {
            y_level: spec.hole_center.y,
            origin_x: spec.hole_center.x,
            dist_min: 1.0,
            dist_max: 4.5,
            two_sided: true,
        };
        match extract_profile(
            &traj.ref_positions,
            &last.positions,
            &tri,
            &mat,
            &line,
            bin,
            spec.width,
        ) {
            Ok(profile) => {
                let sinf = profile.far_field;
                println!(
                    "bin = {bin:.3}: far field = {sinf:.5} GPa, {} samples",
                    profile.sample_x.len()
                );
                // nearest-bin SCF
                let first = profile.sigma_yy[0] / sinf;
                println!(
                    "  nearest bin x = {:.3}, sigma/sinf = {:.3} (SCF 3 miss {:.1}%)",
                    profile.sample_x[0],
                    first,
                    100.0 * (first - 3.0).abs() / 3.0
                );
                // rms over x/r in [1.2, 4]
                let restricted_idx: Vec<usize> = profile
                    .sample_x
                    .iter()
                    .enumerate()
                    .filter(|(_, &x)| (1.2..=4.0).contains(&x))
                    .map(|(i, _)| i)
                    .collect();
                let sub = cpd::validation::StressProfile {
                    sample_x: restricted_idx.iter().map(|&i| profile.sample_x[i]).collect(),
                    sigma_yy: restricted_idx.iter().map(|&i| profile.sigma_yy[i]).collect(),
                    far_field: sinf,
                };
                match profile_error(&sub, |x| kirsch(x, 1.0, sinf)) {
                    Ok(err) => println!(
                        "  rms_rel = {:.4}, max_rel = {:.4} over {} samples",
                        err.rms_rel,
                        err.max_rel,
                        sub.sample_x.len()
                    ),
                    Err(e) => println!("  error metric failed: {e}"),
                }
                for (x, s) in sub.sample_x.iter().zip(&sub.sigma_yy) {
                    let a = kirsch(*x, 1.0, sinf).unwrap();
                    println!("    x = {x:.3}  sim = {:.4}  kirsch = {:.4}  rel = {:+.3}", s / sinf, a / sinf, (s - a) / a);
                }
            }
            Err(e) => println!("bin = {bin:.3}: extraction failed: {e}"),
        }
    }
}
