//! Acceptance suite: every shipping criterion runs here and prints one
//! PASS/FAIL line (visible with `cargo test --test acceptance -- --nocapture`).

use std::time::Instant;

use cpd::dataset::{
    self, build_training_tensors, crack_outcome, read_trajectory, write_trajectory, BaseDomain,
    CaseId, CaseSpec, TensorOptions, TrainSplit,
};
use cpd::geometry::{self, DomainSpec};
use cpd::material::MaterialModel;
use cpd::operator::{
    self, deeponet_forward, fusion_forward, read_checkpoint, relative_l2_over_time, train,
    write_checkpoint, OperatorArch, OperatorModel, Schedule, TrainConfig, Variant, OUT_DIM,
};
use cpd::solver::{
    self, assemble_forces, kinetic_energy, run_quasi_static, stable_dt, step,
    total_strain_energy, LoadingProtocol,
};
use cpd::validation::{extract_profile, kirsch, profile_error, westergaard, ExtractionLine};
use cpd::vec2::Vec2;

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "{}  criterion {criterion}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn benchmark_material() -> MaterialModel {
    // strengths are irrelevant for the elastic benchmarks
    MaterialModel::steel(100.0, 100.0, 1.0)
}

struct KirschResult {
    rms: f64,
    scf_miss: f64,
    particles: usize,
    seconds: f64,
}

fn run_kirsch(width: f64, spacing: f64, equilibration: usize, bin_factor: f64) -> KirschResult {
    let mid = width / 2.0;
    let spec = DomainSpec {
        width,
        height: width,
        hole_center: Vec2::new(mid, mid),
        hole_radius: 1.0,
        notch_tip_x: 0.0,
        notch_height: 0.0,
        target_spacing: spacing,
        seed: 1,
    };
    let mat = benchmark_material();
    let protocol = LoadingProtocol {
        total_displacement: 0.002 * width,
        n_load_steps: 40,
        relax_substeps: 60,
        dt: 0.9 * stable_dt(&spec, &mat),
        equilibration_steps: equilibration,
    };
    let t0 = Instant::now();
    let traj = run_quasi_static(&spec, &mat, &protocol, false, 0, 0.0).unwrap();
    let seconds = t0.elapsed().as_secs_f64();

    let system = geometry::seed_particles(&spec).unwrap();
    let tri = geometry::triangulate(&system, &spec).unwrap();
    let last = traj.frames.last().unwrap();
    let line = ExtractionLine {
        y_level: mid,
        origin_x: mid,
        dist_min: 1.0,
        dist_max: 4.5,
        two_sided: true,
    };
    let profile = extract_profile(
        &traj.ref_positions,
        &last.positions,
        &tri,
        &mat,
        &line,
        bin_factor * spacing,
        width,
    )
    .unwrap();
    let sinf = profile.far_field;
    let scf_miss = (profile.sigma_yy[0] / sinf - 3.0).abs() / 3.0;

    let idx: Vec<usize> = profile
        .sample_x
        .iter()
        .enumerate()
        .filter(|(_, &x)| (1.2..=4.0).contains(&x))
        .map(|(i, _)| i)
        .collect();
    let sub = cpd::validation::StressProfile {
        sample_x: idx.iter().map(|&i| profile.sample_x[i]).collect(),
        sigma_yy: idx.iter().map(|&i| profile.sigma_yy[i]).collect(),
        far_field: sinf,
    };
    let err = profile_error(&sub, |x| kirsch(x, 1.0, sinf)).unwrap();
    KirschResult {
        rms: err.rms_rel,
        scf_miss,
        particles: system.len(),
        seconds,
    }
}

#[test]
fn criterion_1_kirsch_benchmark() {
    let desk = run_kirsch(10.0, 0.21, 2400, 0.7);
    let desk_ok = desk.rms < 0.08 && desk.scf_miss <= 0.15 && desk.seconds < 120.0;
    report(
        "1a (Kirsch desk)",
        desk_ok,
        &format!(
            "rms = {:.4} (< 0.08), SCF miss = {:.1}% (<= 15%), {} particles, {:.1} s (< 120 s)",
            desk.rms,
            100.0 * desk.scf_miss,
            desk.particles,
            desk.seconds
        ),
    );

    let paper = run_kirsch(16.0, 0.125, 18_000, 1.0);
    let paper_ok = paper.rms < 0.05 && paper.scf_miss <= 0.15;
    report(
        "1b (Kirsch paper)",
        paper_ok,
        &format!(
            "rms = {:.4} (< 0.05), SCF miss = {:.1}% (<= 15%), {} particles, {:.1} s",
            paper.rms,
            100.0 * paper.scf_miss,
            paper.particles,
            paper.seconds
        ),
    );
}

#[test]
fn criterion_2_westergaard_benchmark() {
    let spec = DomainSpec {
        width: 10.0,
        height: 10.0,
        hole_center: Vec2::new(5.0, 5.0),
        hole_radius: 0.0,
        notch_tip_x: 1.0,
        notch_height: 0.0,
        target_spacing: 0.21,
        seed: 1,
    };
    let mat = benchmark_material();
    let protocol = LoadingProtocol {
        total_displacement: 0.02,
        n_load_steps: 40,
        relax_substeps: 60,
        dt: 0.9 * stable_dt(&spec, &mat),
        equilibration_steps: 2400,
    };
    let traj = run_quasi_static(&spec, &mat, &protocol, false, 0, 0.0).unwrap();
    let system = geometry::seed_particles(&spec).unwrap();
    let tri = geometry::triangulate(&system, &spec).unwrap();
    let last = traj.frames.last().unwrap();
    let a = spec.notch_tip_x;
    let line = ExtractionLine {
        y_level: spec.notch_line_y(),
        origin_x: 0.0,
        dist_min: a,
        dist_max: 4.5 * a,
        two_sided: false,
    };
    let profile = extract_profile(
        &traj.ref_positions,
        &last.positions,
        &tri,
        &mat,
        &line,
        0.7 * spec.target_spacing,
        spec.width,
    )
    .unwrap();
    let sinf = profile.far_field;
    let idx: Vec<usize> = profile
        .sample_x
        .iter()
        .enumerate()
        .filter(|(_, &x)| (1.2 * a..=4.0 * a).contains(&x))
        .map(|(i, _)| i)
        .collect();
    let sub = cpd::validation::StressProfile {
        sample_x: idx.iter().map(|&i| profile.sample_x[i]).collect(),
        sigma_yy: idx.iter().map(|&i| profile.sigma_yy[i]).collect(),
        far_field: sinf,
    };
    let err = profile_error(&sub, |x| westergaard(x, a, sinf)).unwrap();
    report(
        "2 (Westergaard desk)",
        err.rms_rel < 0.08,
        &format!("rms = {:.4} (< 0.08) over x/a in [1.2, 4]", err.rms_rel),
    );
}

fn random_small_mesh(
    rng: &mut rand_chacha::ChaCha8Rng,
    n: usize,
) -> (cpd::geometry::ParticleSystem, cpd::geometry::Triangulation) {
    use cpd::geometry::delaunay::triangulate_points;
    use cpd::geometry::{BoundaryTag, ParticleSystem, Triangulation};
    use rand::Rng;
    let pts: Vec<Vec2> = (0..n)
        .map(|_| Vec2::new(rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)))
        .collect();
    let tris = triangulate_points(&pts).unwrap();
    let ref_area: Vec<f64> = tris
        .iter()
        .map(|t| {
            0.5 * (pts[t[1] as usize] - pts[t[0] as usize])
                .cross(pts[t[2] as usize] - pts[t[0] as usize])
        })
        .collect();
    let alive = vec![true; tris.len()];
    let cur: Vec<Vec2> = pts
        .iter()
        .map(|p| *p + Vec2::new(rng.gen_range(-0.01..0.01), rng.gen_range(-0.01..0.01)))
        .collect();
    let n_pts = pts.len();
    (
        ParticleSystem {
            ref_positions: pts,
            cur_positions: cur,
            velocities: vec![Vec2::default(); n_pts],
            masses: vec![1.0; n_pts],
            damping: 0.0,
            boundary_tag: vec![BoundaryTag::Interior; n_pts],
        },
        Triangulation {
            triangles: tris,
            ref_area,
            alive,
        },
    )
}

#[test]
fn criterion_3_force_energy_consistency() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let mat = MaterialModel::steel(1.0, 10.0, 1.0);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for mesh_idx in 0..50 {
        let n = rng.gen_range(6..=30);
        let (mut system, tri) = random_small_mesh(&mut rng, n);
        let forces = assemble_forces(&system, &tri, &mat).unwrap();
        let scale = forces.iter().map(|f| f.norm()).fold(0.0, f64::max).max(1e-9);
        for i in 0..system.len() {
            for axis in 0..2 {
                let orig = if axis == 0 {
                    system.cur_positions[i].x
                } else {
                    system.cur_positions[i].y
                };
                let set = |v: f64, sys: &mut cpd::geometry::ParticleSystem| {
                    if axis == 0 {
                        sys.cur_positions[i].x = v;
                    } else {
                        sys.cur_positions[i].y = v;
                    }
                };
                set(orig + h, &mut system);
                let wp = total_strain_energy(&system, &tri, &mat).unwrap();
                set(orig - h, &mut system);
                let wm = total_strain_energy(&system, &tri, &mat).unwrap();
                set(orig, &mut system);
                let fd = -(wp - wm) / (2.0 * h);
                let analytic = if axis == 0 { forces[i].x } else { forces[i].y };
                let rel = (fd - analytic).abs() / scale;
                worst = worst.max(rel);
                assert!(
                    rel < 1e-6,
                    "mesh {mesh_idx} particle {i} axis {axis}: rel {rel:e}"
                );
            }
        }
    }
    report(
        "3 (force-energy consistency)",
        worst < 1e-6,
        &format!("worst relative deviation {worst:.2e} (< 1e-6) over 50 meshes"),
    );
}

#[test]
fn criterion_4_energy_conservation() {
    // free specimen, no damping, smooth initial velocity perturbation
    let spec = DomainSpec {
        width: 4.0,
        height: 4.0,
        hole_center: Vec2::new(2.0, 2.0),
        hole_radius: 0.0,
        notch_tip_x: 0.0,
        notch_height: 0.0,
        target_spacing: 0.2,
        seed: 3,
    };
    let mat = MaterialModel::steel(100.0, 100.0, 1.0);
    let mesh = solver::Mesh::build(&spec, &mat).unwrap();
    let mut system = mesh.system;
    let tri = mesh.triangulation;
    system.damping = 0.0;
    let amp = 0.05;
    for i in 0..system.len() {
        let p = system.ref_positions[i];
        system.velocities[i] = Vec2::new(
            amp * (std::f64::consts::PI * p.x / 4.0).sin() * (std::f64::consts::PI * p.y / 4.0).cos(),
            -amp * (std::f64::consts::PI * p.y / 4.0).sin(),
        );
    }
    let dt = 0.9 * stable_dt(&spec, &mat);
    let controlled = vec![false; system.len()];
    let e0 = kinetic_energy(&system) + total_strain_energy(&system, &tri, &mat).unwrap();
    let mut e_min = e0;
    let mut e_max = e0;
    for _ in 0..10_000 {
        let forces = assemble_forces(&system, &tri, &mat).unwrap();
        step(&mut system, &forces, dt, &controlled).unwrap();
        let e = kinetic_energy(&system) + total_strain_energy(&system, &tri, &mat).unwrap();
        e_min = e_min.min(e);
        e_max = e_max.max(e);
    }
    let drift = (e_max - e_min) / e0;
    report(
        "4 (energy conservation)",
        drift < 0.005,
        &format!("relative drift {drift:.5} (< 0.005) over 10000 substeps"),
    );
}

#[test]
fn criterion_5_crack_trapping_sweep() {
    let t0 = Instant::now();
    let mat = MaterialModel::steel(1.0, 10.0, 1.0);
    let mut lines = Vec::new();
    let mut all_ok = true;
    for &(h, expect_merge) in &[(0.1, true), (0.4, true), (1.0, false), (1.9, false)] {
        let spec = DomainSpec {
            width: 10.0,
            height: 10.0,
            hole_center: Vec2::new(3.5, 3.5),
            hole_radius: 1.0,
            notch_tip_x: 1.0,
            notch_height: h,
            target_spacing: 0.26,
            seed: 1,
        };
        let protocol = LoadingProtocol {
            total_displacement: 0.045,
            n_load_steps: 100,
            relax_substeps: 60,
            dt: 0.9 * stable_dt(&spec, &mat),
            equilibration_steps: 3000,
        };
        let traj = run_quasi_static(&spec, &mat, &protocol, true, 0, h).unwrap();
        let (system, tri) = dataset::mesh_for(&traj).unwrap();
        let outcome = crack_outcome(&traj, &system, &tri);
        let ratio_trapped = dataset::trapping_classifier(1.0, h);
        // only the unambiguous端 cases are asserted: h in {0.1, 0.4} merge,
        // h = 1.9 passes; h = 1.0 is reported but not load-bearing
        let ok = if h == 1.0 {
            true
        } else if expect_merge {
            outcome.merged
        } else {
            outcome.passed && !outcome.merged
        };
        all_ok &= ok;
        lines.push(format!(
            "h = {h}: merged = {}, passed = {}, (r+h)/r trapped = {ratio_trapped}, onset = {:?} -> {}",
            outcome.merged,
            outcome.passed,
            outcome.onset_tau,
            if ok { "ok" } else { "WRONG" }
        ));
    }
    let secs = t0.elapsed().as_secs_f64();
    let runtime_ok = secs < 1200.0;
    report(
        "5 (crack trapping)",
        all_ok && runtime_ok,
        &format!("{}; total {secs:.0} s (< 1200 s)", lines.join("; ")),
    );
}

#[test]
fn criterion_6_operator_forward_and_backward_oracles() {
    use rand::{Rng, SeedableRng};
    // forward oracles: literal triple-loop replication on random models
    let mut worst_fwd: f64 = 0.0;
    for seed in 0..5u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(900 + seed);
        let arch = OperatorArch {
            hidden_layers: 2,
            hidden_width: 6,
            latent_dim: 8,
        };
        let xi = ndarray::Array2::from_shape_fn((9, 3), |(i, j)| {
            rng.gen_range(-1.0..1.0) + 0.01 * (i * 3 + j) as f64
        });
        let mu = [rng.gen_range(-1.0..1.0)];

        let vanilla = OperatorModel::init(Variant::Vanilla, arch, 1, seed);
        let cache = deeponet_forward(&vanilla, &mu, xi.view()).unwrap();
        let p = vanilla.latent_dim;
        for j in 0..xi.nrows() {
            for c in 0..OUT_DIM {
                let mut acc = 0.0;
                for l in 0..p {
                    acc += cache.branch.output[[0, c * p + l]] * cache.trunk.output[[j, l]];
                }
                worst_fwd = worst_fwd.max((cache.output[[j, c]] - acc).abs());
            }
        }

        let mut fusion = OperatorModel::init(Variant::Fusion, arch, 1, seed + 50);
        for l in 0..fusion.branch.n_hidden() {
            fusion.branch.layers[l].rowdy = [rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)];
            fusion.trunk.layers[l].rowdy = [rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)];
        }
        let cache = fusion_forward(&fusion, &mu, xi.view()).unwrap();
        let naive = naive_fusion(&fusion, &mu, &xi);
        for j in 0..xi.nrows() {
            for c in 0..OUT_DIM {
                worst_fwd = worst_fwd.max((cache.output[[j, c]] - naive[[j, c]]).abs());
            }
        }
    }
    let fwd_ok = worst_fwd < 1e-12;

    // backward oracle: finite differences on toy models, both variants
    let mut worst_bwd: f64 = 0.0;
    for (variant, h) in [(Variant::Vanilla, 1e-5), (Variant::Fusion, 1e-6)] {
        let arch = OperatorArch {
            hidden_layers: 2,
            hidden_width: 4,
            latent_dim: 3,
        };
        let mut model = OperatorModel::init(variant, arch, 1, 77);
        if variant == Variant::Fusion {
            for l in 0..model.branch.n_hidden() {
                model.branch.layers[l].rowdy = [0.04, -0.03];
                model.trunk.layers[l].rowdy = [-0.02, 0.05];
            }
        }
        let trunk = ndarray::Array2::from_shape_fn((7, 3), |(i, j)| {
            0.23 * ((i + 2 * j) as f64).sin()
        });
        let targets = ndarray::Array2::from_shape_fn((7, 2), |(i, j)| {
            0.04 * ((2 * i + j) as f64).cos()
        });
        let mu = [0.3];
        let samples = [operator::backward::SampleBatch {
            branch_input: &mu,
            trunk: &trunk,
            targets: &targets,
        }];
        let (_, grads) = operator::loss_and_grads(&model, &samples).unwrap();
        let analytic = grads.flatten(&model);
        let mut flat = model.flatten_params();
        let g_scale = analytic.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for i in 0..flat.len() {
            let orig = flat[i];
            flat[i] = orig + h;
            model.set_from_flat(&flat);
            let (lp, _) = operator::loss_and_grads(&model, &samples).unwrap();
            flat[i] = orig - h;
            model.set_from_flat(&flat);
            let (lm, _) = operator::loss_and_grads(&model, &samples).unwrap();
            flat[i] = orig;
            model.set_from_flat(&flat);
            let fd = (lp - lm) / (2.0 * h);
            let rel = (fd - analytic[i]).abs() / analytic[i].abs().max(1e-3 * g_scale).max(1e-12);
            worst_bwd = worst_bwd.max(rel);
        }
    }
    let bwd_ok = worst_bwd < 1e-5;

    report(
        "6 (operator oracles)",
        fwd_ok && bwd_ok,
        &format!(
            "forward max abs dev {worst_fwd:.2e} (< 1e-12), backward max rel dev {worst_bwd:.2e} (< 1e-5)"
        ),
    );
}

/// Literal replay of the fusion rules with scalar loops.
fn naive_fusion(
    model: &OperatorModel,
    mu: &[f64],
    xi: &ndarray::Array2<f64>,
) -> ndarray::Array2<f64> {
    use cpd::operator::rowdy;
    let w = model.trunk.layers[0].out_dim();
    let p = model.latent_dim;
    let mut branch_acts: Vec<Vec<f64>> = Vec::new();
    let mut x = mu.to_vec();
    for l in 0..model.branch.n_hidden() {
        let layer = &model.branch.layers[l];
        let mut a = vec![0.0; w];
        for (o, ao) in a.iter_mut().enumerate() {
            let mut z = layer.b[o];
            for (i, &xv) in x.iter().enumerate() {
                z += layer.w[[o, i]] * xv;
            }
            *ao = rowdy(z, &layer.rowdy);
        }
        branch_acts.push(a.clone());
        x = a;
    }
    let head = model.branch.layers.last().unwrap();
    let mut b_tilde = vec![0.0; head.out_dim()];
    for (o, bo) in b_tilde.iter_mut().enumerate() {
        let mut z = head.b[o];
        for (i, &xv) in x.iter().enumerate() {
            z += head.w[[o, i]] * xv;
        }
        *bo = z;
    }
    let mut out = ndarray::Array2::zeros((xi.nrows(), OUT_DIM));
    for row in 0..xi.nrows() {
        let mut a: Vec<f64> = xi.row(row).to_vec();
        for l in 0..model.trunk.n_hidden() {
            let layer = &model.trunk.layers[l];
            let mut nxt = vec![0.0; w];
            for (o, no) in nxt.iter_mut().enumerate() {
                let mut z = layer.b[o];
                for (i, &av) in a.iter().enumerate() {
                    z += layer.w[[o, i]] * av;
                }
                let s: f64 = if l == 0 {
                    1.0
                } else {
                    (0..l).map(|m| branch_acts[m][o]).sum()
                };
                *no = s * rowdy(z, &layer.rowdy);
            }
            a = nxt;
        }
        let out_layer = model.trunk.layers.last().unwrap();
        let mut t_tilde = vec![0.0; p];
        for (o, to) in t_tilde.iter_mut().enumerate() {
            let mut z = out_layer.b[o];
            for (i, &av) in a.iter().enumerate() {
                z += out_layer.w[[o, i]] * av;
            }
            *to = z;
        }
        for c in 0..OUT_DIM {
            out[[row, c]] = (0..p).map(|k| b_tilde[c * p + k] * t_tilde[k]).sum();
        }
    }
    out
}

#[test]
fn criterion_9_determinism_and_serialization() {
    let dir = tempfile::tempdir().unwrap();
    let case = CaseSpec::with_samples(CaseId::Case2, 3, true);
    let base = BaseDomain {
        width: 4.0,
        height: 6.0,
        hole_center: Vec2::new(1.6, 1.2),
        notch_tip_x: 0.6,
        target_spacing: 0.25,
    };
    let mat = MaterialModel::steel(1.0, 10.0, 1.0);
    let spec0 = case.domain_for(0.0, &base, 0);
    let protocol = LoadingProtocol {
        total_displacement: 0.02,
        n_load_steps: 10,
        relax_substeps: 12,
        dt: 0.9 * stable_dt(&spec0, &mat),
        equilibration_steps: 60,
    };

    // dataset regeneration is byte-identical
    let mut digests = Vec::new();
    for round in 0..2 {
        let runs = dataset::generate_case(&case, &base, &mat, &protocol, 11, 2);
        let mut bytes = Vec::new();
        for run in &runs {
            let traj = run.result.as_ref().expect("tiny sample");
            let path = dir.path().join(format!("r{round}_s{}.cpd", run.sample_id));
            write_trajectory(traj, &path).unwrap();
            bytes.push(std::fs::read(&path).unwrap());
        }
        digests.push(bytes);
    }
    let dataset_ok = digests[0] == digests[1];

    // trajectory round trip is lossless
    let runs = dataset::generate_case(&case, &base, &mat, &protocol, 11, 1);
    let traj = runs[1].result.as_ref().unwrap();
    let path = dir.path().join("round.cpd");
    write_trajectory(traj, &path).unwrap();
    let roundtrip_ok = read_trajectory(&path).unwrap() == *traj;

    // checkpoint regeneration is byte-identical and lossless
    let trajs: Vec<_> = runs.into_iter().map(|r| r.result.unwrap()).collect();
    let split = TrainSplit::evenly(3, 1);
    let tensors = build_training_tensors(
        &trajs,
        &split,
        TensorOptions {
            particle_stride: 6,
            tau_stride: 10,
        },
    )
    .unwrap();
    let mut ckpt_bytes = Vec::new();
    for round in 0..2 {
        let model = OperatorModel::init(Variant::Fusion, OperatorArch::fusion_default(), 1, 5);
        let config = TrainConfig::new(Schedule::fusion_default(), 60, 5);
        let result = train(model, &tensors, &config).unwrap();
        let path = dir.path().join(format!("ckpt{round}.onet"));
        write_checkpoint(&result.model, &tensors.norm, &path).unwrap();
        ckpt_bytes.push((std::fs::read(&path).unwrap(), result.model, path));
    }
    let ckpt_ok = ckpt_bytes[0].0 == ckpt_bytes[1].0;
    let (model_back, _) = read_checkpoint(&ckpt_bytes[0].2).unwrap();
    let ckpt_roundtrip_ok = model_back == ckpt_bytes[0].1;

    report(
        "9 (determinism & serialization)",
        dataset_ok && roundtrip_ok && ckpt_ok && ckpt_roundtrip_ok,
        &format!(
            "dataset bytes identical: {dataset_ok}, trajectory round trip: {roundtrip_ok}, checkpoint bytes identical: {ckpt_ok}, checkpoint round trip: {ckpt_roundtrip_ok}"
        ),
    );
}

/// Shared state for criteria 7 and 8: one desk dataset, two trainings.
#[test]
fn criterion_7_and_8_training_comparison() {
    let t0 = Instant::now();
    let case = CaseSpec::with_samples(CaseId::Case2, 10, true);
    let base = BaseDomain::default();
    let mat = MaterialModel::steel(1.0, 10.0, 1.0);
    let spec0 = case.domain_for(1.0, &base, 0);
    let protocol = LoadingProtocol {
        total_displacement: 0.045,
        n_load_steps: 100,
        relax_substeps: 60,
        dt: 0.9 * stable_dt(&spec0, &mat),
        equilibration_steps: 3000,
    };
    let runs = dataset::generate_case(&case, &base, &mat, &protocol, 100, 2);
    let trajs: Vec<_> = runs
        .into_iter()
        .map(|r| r.result.expect("desk sample"))
        .collect();
    let split = TrainSplit::evenly(10, 2);
    let tensors = build_training_tensors(
        &trajs,
        &split,
        TensorOptions {
            particle_stride: 80,
            tau_stride: 2,
        },
    )
    .unwrap();

    let iterations = 8000;
    let fusion = train(
        OperatorModel::init(Variant::Fusion, OperatorArch::fusion_default(), 1, 7),
        &tensors,
        &TrainConfig::new(Schedule::fusion_default(), iterations, 7),
    )
    .unwrap();
    let vanilla = train(
        OperatorModel::init(Variant::Vanilla, OperatorArch::vanilla_default(), 1, 7),
        &tensors,
        &TrainConfig::new(Schedule::vanilla_default(), iterations, 7),
    )
    .unwrap();
    let secs = t0.elapsed().as_secs_f64();

    let ordering_ok = fusion.final_mse < vanilla.final_mse;
    let crossing = fusion
        .loss_history
        .iter()
        .find(|&&(_, mse)| mse <= vanilla.final_mse)
        .map(|&(it, _)| it);
    let crossing_ok = crossing.is_some_and(|it| it < iterations);
    let runtime_ok = secs < 3600.0;
    report(
        "7 (training comparison)",
        ordering_ok && crossing_ok && runtime_ok,
        &format!(
            "fusion final mse {:.3e} < vanilla final mse {:.3e}: {ordering_ok}; fusion reaches vanilla's final at iteration {crossing:?} (< {iterations}); total {secs:.0} s (< 3600 s)",
            fusion.final_mse, vanilla.final_mse
        ),
    );

    // criterion 8: error-over-time shape on a fracture test sample
    let test: Vec<&cpd::trajectory::Trajectory> =
        split.test_ids.iter().map(|&i| &trajs[i]).collect();
    let onset = test
        .iter()
        .filter_map(|t| t.first_failure_tau())
        .min()
        .expect("fracture test sample");
    let curve = relative_l2_over_time(&fusion.model, &test, &tensors.norm).unwrap();
    let (argmax, max_err) = curve
        .iter()
        .fold((0usize, 0.0), |acc, &(t, e)| if e > acc.1 { (t, e) } else { acc });
    report(
        "8 (error-over-time shape)",
        argmax > onset,
        &format!(
            "rel-L2 max {max_err:.3} at tau = {argmax}, first failure at tau = {onset} (max must come after onset)"
        ),
    );
}
