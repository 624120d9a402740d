//! Damped Newtonian dynamics under quasi-static displacement loading.
//!
//! Loading is displacement-controlled on the top and bottom particle rows
//! (vertical component prescribed, horizontal left free so the grips are
//! frictionless); each increment is followed by damped relaxation substeps,
//! with the failure criterion checked every substep, and the run ends with
//! an equilibration phase without further loading.

pub mod kinematics;

use thiserror::Error;

use crate::geometry::{self, BoundaryTag, DomainSpec, ParticleSystem, Triangulation};
use crate::material::MaterialModel;
use crate::trajectory::{Frame, Trajectory, NUM_FRAMES};
use crate::vec2::Vec2;

use kinematics::{triangle_response, RefInverse};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("degenerate reference triangle {triangle:?}")]
    DegenerateTriangle { triangle: [u32; 3] },
    #[error("dynamics diverged at particle {particle}, substep {substep} (tau {tau}): {detail}")]
    Divergence {
        particle: usize,
        substep: usize,
        tau: usize,
        detail: String,
    },
    #[error("dt = {dt} exceeds stability bound {bound}")]
    DtTooLarge { dt: f64, bound: f64 },
    #[error("invalid loading protocol: {0}")]
    Protocol(String),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
}

/// Displacement-controlled loading schedule.
///
/// `total_displacement` is split symmetrically: +delta/2 on the top row,
/// -delta/2 on the bottom row, applied over `n_load_steps` increments with
/// `relax_substeps` dynamics substeps after each, then `equilibration_steps`
/// substeps without further loading.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadingProtocol {
    pub total_displacement: f64,
    pub n_load_steps: usize,
    pub relax_substeps: usize,
    pub dt: f64,
    pub equilibration_steps: usize,
}

impl LoadingProtocol {
    pub fn total_substeps(&self) -> usize {
        self.n_load_steps * self.relax_substeps + self.equilibration_steps
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.n_load_steps == 0 {
            return Err(SolverError::Protocol("n_load_steps must be > 0".into()));
        }
        if self.relax_substeps == 0 {
            return Err(SolverError::Protocol("relax_substeps must be >= 1".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SolverError::Protocol("dt must be positive".into()));
        }
        if self.total_substeps() < NUM_FRAMES - 1 {
            return Err(SolverError::Protocol(format!(
                "{} substeps cannot resolve {} snapshot stages",
                self.total_substeps(),
                NUM_FRAMES
            )));
        }
        Ok(())
    }
}

/// CFL-like stability bound on the dynamics substep.
pub fn stable_dt(spec: &DomainSpec, mat: &MaterialModel) -> f64 {
    0.2 * spec.target_spacing * (mat.density / mat.youngs_modulus).sqrt()
}

/// Near-critical damping for quasi-static relaxation:
/// c = 2 zeta sqrt(k_eff m) with k_eff = E * spacing and m the mean mass.
pub fn default_damping(spec: &DomainSpec, mat: &MaterialModel, mean_mass: f64) -> f64 {
    let zeta = 0.7;
    let k_eff = mat.youngs_modulus * spec.target_spacing;
    2.0 * zeta * (k_eff * mean_mass).sqrt()
}

/// Lump particle masses from incident triangle areas:
/// m_i = rho * (sum of incident reference areas) / 3.
/// Particles with no incident triangle get the mean lumped mass so masses
/// stay strictly positive; they carry no forces either way.
pub fn lump_masses(system: &mut ParticleSystem, tri: &Triangulation, mat: &MaterialModel) {
    let mut incident_area = vec![0.0_f64; system.len()];
    for (t, &v) in tri.triangles.iter().enumerate() {
        for &p in &v {
            incident_area[p as usize] += tri.ref_area[t];
        }
    }
    let total: f64 = tri.ref_area.iter().sum();
    let fallback = mat.density * total / system.len() as f64;
    for (m, &a) in system.masses.iter_mut().zip(&incident_area) {
        *m = if a > 0.0 {
            mat.density * a / 3.0
        } else {
            fallback
        };
    }
}

/// Net force per particle: sum of triangle forces over alive triangles.
pub fn assemble_forces(
    system: &ParticleSystem,
    tri: &Triangulation,
    mat: &MaterialModel,
) -> Result<Vec<Vec2>, SolverError> {
    let mut forces = vec![Vec2::default(); system.len()];
    for (t, &v) in tri.triangles.iter().enumerate() {
        if !tri.alive[t] {
            continue;
        }
        let inv = kinematics::ref_inverse(v, &system.ref_positions)?;
        let (f, _, _) = triangle_response(v, &system.cur_positions, &inv, tri.ref_area[t], mat);
        for (i, &p) in v.iter().enumerate() {
            forces[p as usize] += f[i];
        }
    }
    Ok(forces)
}

/// Kill every alive triangle whose principal stresses violate the failure
/// criterion; returns the newly killed ids in ascending order. All triangles
/// exceeding the threshold in this pass die simultaneously.
pub fn apply_failure(
    tri: &mut Triangulation,
    principal: &[(f64, f64)],
    mat: &MaterialModel,
) -> Vec<u32> {
    let mut killed = Vec::new();
    for t in 0..tri.triangles.len() {
        if !tri.alive[t] {
            continue;
        }
        let (s1, s2) = principal[t];
        if s1 >= mat.tensile_strength || s2 <= -mat.compressive_strength {
            tri.alive[t] = false;
            killed.push(t as u32);
        }
    }
    killed
}

/// One semi-implicit Euler substep:
/// v <- (v + (f/m) dt) / (1 + (c/m) dt), y <- y + v dt.
/// Particles flagged in `controlled_y` keep their prescribed vertical
/// position and velocity; their horizontal component stays dynamic.
pub fn step(
    system: &mut ParticleSystem,
    forces: &[Vec2],
    dt: f64,
    controlled_y: &[bool],
) -> Result<(), SolverError> {
    let c = system.damping;
    for i in 0..system.len() {
        let f = forces[i];
        if !f.is_finite() {
            return Err(SolverError::Divergence {
                particle: i,
                substep: 0,
                tau: 0,
                detail: "non-finite force".into(),
            });
        }
        let m = system.masses[i];
        let drag = 1.0 / (1.0 + (c / m) * dt);
        let v = &mut system.velocities[i];
        let vx = (v.x + (f.x / m) * dt) * drag;
        v.x = vx;
        system.cur_positions[i].x += vx * dt;
        if !controlled_y[i] {
            let vy = (v.y + (f.y / m) * dt) * drag;
            v.y = vy;
            system.cur_positions[i].y += vy * dt;
        }
        if !system.cur_positions[i].is_finite() {
            return Err(SolverError::Divergence {
                particle: i,
                substep: 0,
                tau: 0,
                detail: "non-finite position".into(),
            });
        }
    }
    Ok(())
}

/// Total strain energy over alive triangles.
pub fn total_strain_energy(
    system: &ParticleSystem,
    tri: &Triangulation,
    mat: &MaterialModel,
) -> Result<f64, SolverError> {
    let mut w = 0.0;
    for (t, &v) in tri.triangles.iter().enumerate() {
        if !tri.alive[t] {
            continue;
        }
        let f = kinematics::deformation_gradient(v, &system.ref_positions, &system.cur_positions)?;
        w += kinematics::triangle_energy(kinematics::lagrangian_strain(f), tri.ref_area[t], mat);
    }
    Ok(w)
}

pub fn kinetic_energy(system: &ParticleSystem) -> f64 {
    system
        .velocities
        .iter()
        .zip(&system.masses)
        .map(|(v, &m)| 0.5 * m * v.norm_sq())
        .sum()
}

/// Prebuilt mesh with cached per-triangle reference data.
pub struct Mesh {
    pub system: ParticleSystem,
    pub triangulation: Triangulation,
    ref_inv: Vec<RefInverse>,
}

impl Mesh {
    /// Seed, triangulate, lump masses, and set default damping.
    pub fn build(spec: &DomainSpec, mat: &MaterialModel) -> Result<Mesh, SolverError> {
        let mut system = geometry::seed_particles(spec)?;
        let triangulation = geometry::triangulate(&system, spec)?;
        lump_masses(&mut system, &triangulation, mat);
        let mean_mass = system.masses.iter().sum::<f64>() / system.len() as f64;
        system.damping = default_damping(spec, mat, mean_mass);
        let ref_inv = triangulation
            .triangles
            .iter()
            .map(|&v| kinematics::ref_inverse(v, &system.ref_positions))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Mesh {
            system,
            triangulation,
            ref_inv,
        })
    }
}

/// Run the full quasi-static loading protocol and record a trajectory.
///
/// With `fracture_enabled = false` the failure check is skipped entirely and
/// the alive set stays constant. Deterministic for fixed inputs.
pub fn run_quasi_static(
    spec: &DomainSpec,
    mat: &MaterialModel,
    protocol: &LoadingProtocol,
    fracture_enabled: bool,
    sample_id: u32,
    geometry_param: f64,
) -> Result<Trajectory, SolverError> {
    protocol.validate()?;
    let bound = stable_dt(spec, mat);
    if protocol.dt > bound {
        return Err(SolverError::DtTooLarge {
            dt: protocol.dt,
            bound,
        });
    }

    let mesh = Mesh::build(spec, mat)?;
    run_on_mesh(mesh, spec, mat, protocol, fracture_enabled, sample_id, geometry_param)
}

fn run_on_mesh(
    mesh: Mesh,
    _spec: &DomainSpec,
    mat: &MaterialModel,
    protocol: &LoadingProtocol,
    fracture_enabled: bool,
    sample_id: u32,
    geometry_param: f64,
) -> Result<Trajectory, SolverError> {
    let Mesh {
        mut system,
        mut triangulation,
        ref_inv,
    } = mesh;
    let n = system.len();
    let n_tris = triangulation.len();

    let controlled_y: Vec<bool> = system
        .boundary_tag
        .iter()
        .map(|t| matches!(t, BoundaryTag::Top | BoundaryTag::Bottom))
        .collect();
    let load_sign: Vec<f64> = system
        .boundary_tag
        .iter()
        .map(|t| match t {
            BoundaryTag::Top => 1.0,
            BoundaryTag::Bottom => -1.0,
            _ => 0.0,
        })
        .collect();

    let total = protocol.total_substeps();
    let increment = protocol.total_displacement / (2.0 * protocol.n_load_steps as f64);
    let dt = protocol.dt;

    // snapshot substep indices, tau = 0..=100 uniform over the substep count
    let snapshot_at: Vec<usize> = (0..NUM_FRAMES)
        .map(|tau| ((tau * total) as f64 / (NUM_FRAMES - 1) as f64).round() as usize)
        .collect();

    let mut frames: Vec<Frame> = Vec::with_capacity(NUM_FRAMES);
    let record = |system: &ParticleSystem, tri: &Triangulation, frames: &mut Vec<Frame>| {
        frames.push(Frame {
            positions: system.cur_positions.clone(),
            alive: tri.alive.clone(),
        });
    };
    record(&system, &triangulation, &mut frames);

    let mut forces = vec![Vec2::default(); n];
    let mut principal = vec![(0.0_f64, 0.0_f64); n_tris];
    let mut tri_forces: Vec<[Vec2; 3]> = vec![[Vec2::default(); 3]; n_tris];
    let mut tau_recorded = 0usize;

    for substep in 1..=total {
        // loading: instantaneous increment at the start of each load step
        let in_loading = substep <= protocol.n_load_steps * protocol.relax_substeps;
        let moves_now = in_loading && (substep - 1) % protocol.relax_substeps == 0;
        if moves_now {
            let load_step = (substep - 1) / protocol.relax_substeps + 1;
            let offset = increment * load_step as f64;
            for i in 0..n {
                if controlled_y[i] {
                    system.cur_positions[i].y =
                        system.ref_positions[i].y + load_sign[i] * offset;
                    system.velocities[i].y = load_sign[i] * increment / dt;
                }
            }
        } else {
            for i in 0..n {
                if controlled_y[i] {
                    system.velocities[i].y = 0.0;
                }
            }
        }

        // fused per-triangle pass: forces and principal stresses
        for t in 0..n_tris {
            if !triangulation.alive[t] {
                continue;
            }
            let (f, p, _) = triangle_response(
                triangulation.triangles[t],
                &system.cur_positions,
                &ref_inv[t],
                triangulation.ref_area[t],
                mat,
            );
            tri_forces[t] = f;
            principal[t] = p;
        }

        if fracture_enabled {
            // newly killed triangles exert no force in this substep
            for &t in &apply_failure(&mut triangulation, &principal, mat) {
                tri_forces[t as usize] = [Vec2::default(); 3];
            }
        }

        for f in forces.iter_mut() {
            *f = Vec2::default();
        }
        for t in 0..n_tris {
            if !triangulation.alive[t] {
                continue;
            }
            let v = triangulation.triangles[t];
            for (i, &p) in v.iter().enumerate() {
                forces[p as usize] += tri_forces[t][i];
            }
        }

        step(&mut system, &forces, dt, &controlled_y).map_err(|e| match e {
            SolverError::Divergence {
                particle, detail, ..
            } => SolverError::Divergence {
                particle,
                substep,
                tau: tau_recorded,
                detail,
            },
            other => other,
        })?;

        while tau_recorded + 1 < NUM_FRAMES && snapshot_at[tau_recorded + 1] == substep {
            record(&system, &triangulation, &mut frames);
            tau_recorded += 1;
        }
    }

    debug_assert_eq!(frames.len(), NUM_FRAMES);
    Ok(Trajectory {
        sample_id,
        geometry_param,
        domain: _spec.clone(),
        ref_positions: system.ref_positions,
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec2::Vec2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mat() -> MaterialModel {
        MaterialModel::steel(1.0, 10.0, 1.0)
    }

    fn free_particle_system(n: usize) -> ParticleSystem {
        ParticleSystem {
            ref_positions: vec![Vec2::default(); n],
            cur_positions: vec![Vec2::default(); n],
            velocities: vec![Vec2::default(); n],
            masses: vec![1.0; n],
            damping: 0.0,
            boundary_tag: vec![BoundaryTag::Interior; n],
        }
    }

    #[test]
    fn zero_force_zero_velocity_is_a_fixed_point() {
        let mut sys = free_particle_system(3);
        let before = sys.clone();
        step(&mut sys, &[Vec2::default(); 3], 0.01, &[false; 3]).unwrap();
        assert_eq!(sys, before);
    }

    #[test]
    fn constant_force_matches_discrete_recurrence() {
        let mut sys = free_particle_system(1);
        let f = Vec2::new(0.3, -0.1);
        let dt = 0.01;
        for _ in 0..100 {
            step(&mut sys, &[f], dt, &[false]).unwrap();
        }
        // closed form of the semi-implicit recurrence with c = 0, v0 = 0:
        // y_n = f/m * dt^2 * n (n + 1) / 2
        let n = 100.0;
        let expect = f * (dt * dt * n * (n + 1.0) / 2.0);
        assert!((sys.cur_positions[0] - expect).norm() < 1e-12);
    }

    #[test]
    fn damping_contracts_velocity_under_zero_force() {
        let mut sys = free_particle_system(1);
        sys.damping = 50.0;
        sys.velocities[0] = Vec2::new(1.0, -2.0);
        let mut prev = sys.velocities[0].norm();
        for _ in 0..50 {
            step(&mut sys, &[Vec2::default()], 0.01, &[false]).unwrap();
            let cur = sys.velocities[0].norm();
            assert!(cur < prev);
            prev = cur;
        }
    }

    #[test]
    fn non_finite_force_reports_particle() {
        let mut sys = free_particle_system(2);
        let err = step(
            &mut sys,
            &[Vec2::default(), Vec2::new(f64::NAN, 0.0)],
            0.01,
            &[false; 2],
        )
        .unwrap_err();
        match err {
            SolverError::Divergence { particle, .. } => assert_eq!(particle, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    /// Two unit triangles forming a square, uniform vertical stretch.
    #[test]
    fn two_triangle_hand_assembled_forces() {
        let x = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let stretch = 1.001;
        let y: Vec<Vec2> = x.iter().map(|p| Vec2::new(p.x, p.y * stretch)).collect();
        let tris = vec![[0u32, 1, 2], [0u32, 2, 3]];
        let m = mat();

        let system = ParticleSystem {
            ref_positions: x.clone(),
            cur_positions: y.clone(),
            velocities: vec![Vec2::default(); 4],
            masses: vec![1.0; 4],
            damping: 0.0,
            boundary_tag: vec![BoundaryTag::Interior; 4],
        };
        let tri = Triangulation {
            triangles: tris.clone(),
            ref_area: vec![0.5, 0.5],
            alive: vec![true, true],
        };
        let assembled = assemble_forces(&system, &tri, &m).unwrap();

        // hand assembly: sum per-triangle forces at shared particles
        let f0 = kinematics::triangle_forces(tris[0], &x, &y, &m).unwrap();
        let f1 = kinematics::triangle_forces(tris[1], &x, &y, &m).unwrap();
        let mut expect = vec![Vec2::default(); 4];
        for (i, &p) in tris[0].iter().enumerate() {
            expect[p as usize] += f0[i];
        }
        for (i, &p) in tris[1].iter().enumerate() {
            expect[p as usize] += f1[i];
        }
        for i in 0..4 {
            assert!((assembled[i] - expect[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn dead_triangles_contribute_nothing() {
        let x = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.5, 1.0),
        ];
        let y: Vec<Vec2> = x.iter().map(|p| Vec2::new(p.x * 1.1, p.y)).collect();
        let system = ParticleSystem {
            ref_positions: x,
            cur_positions: y,
            velocities: vec![Vec2::default(); 3],
            masses: vec![1.0; 3],
            damping: 0.0,
            boundary_tag: vec![BoundaryTag::Interior; 3],
        };
        let tri = Triangulation {
            triangles: vec![[0, 1, 2]],
            ref_area: vec![0.5],
            alive: vec![false],
        };
        let f = assemble_forces(&system, &tri, &mat()).unwrap();
        assert!(f.iter().all(|v| v.norm() == 0.0));
    }

    fn random_small_mesh(rng: &mut ChaCha8Rng, n: usize) -> (ParticleSystem, Triangulation) {
        use crate::geometry::delaunay::triangulate_points;
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
        (
            ParticleSystem {
                ref_positions: pts,
                cur_positions: cur,
                velocities: vec![Vec2::default(); n],
                masses: vec![1.0; n],
                damping: 0.0,
                boundary_tag: vec![BoundaryTag::Interior; n],
            },
            Triangulation {
                triangles: tris,
                ref_area,
                alive,
            },
        )
    }

    #[test]
    fn assembled_forces_match_energy_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let m = mat();
        let step_len = 1e-6;
        for _ in 0..5 {
            let (mut system, tri) = random_small_mesh(&mut rng, 20);
            let forces = assemble_forces(&system, &tri, &m).unwrap();
            let scale = forces.iter().map(|f| f.norm()).fold(0.0, f64::max);
            for i in 0..system.len() {
                for axis in 0..2 {
                    let orig = if axis == 0 {
                        system.cur_positions[i].x
                    } else {
                        system.cur_positions[i].y
                    };
                    let set = |sys: &mut ParticleSystem, v: f64| {
                        if axis == 0 {
                            sys.cur_positions[i].x = v;
                        } else {
                            sys.cur_positions[i].y = v;
                        }
                    };
                    set(&mut system, orig + step_len);
                    let wp = total_strain_energy(&system, &tri, &m).unwrap();
                    set(&mut system, orig - step_len);
                    let wm = total_strain_energy(&system, &tri, &m).unwrap();
                    set(&mut system, orig);
                    let fd = -(wp - wm) / (2.0 * step_len);
                    let analytic = if axis == 0 { forces[i].x } else { forces[i].y };
                    assert!(
                        (fd - analytic).abs() <= 1e-6 * scale.max(1e-9),
                        "particle {i} axis {axis}: fd {fd:e} vs {analytic:e}"
                    );
                }
            }
        }
    }

    #[test]
    fn translation_and_rotation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let m = mat();
        let (mut system, tri) = random_small_mesh(&mut rng, 15);
        let w0 = total_strain_energy(&system, &tri, &m).unwrap();
        let f0 = assemble_forces(&system, &tri, &m).unwrap();

        let shift = Vec2::new(3.7, -1.2);
        for p in system.cur_positions.iter_mut() {
            *p += shift;
        }
        let w1 = total_strain_energy(&system, &tri, &m).unwrap();
        let f1 = assemble_forces(&system, &tri, &m).unwrap();
        assert!((w1 - w0).abs() <= 1e-10 * w0.abs().max(1e-30));
        let fscale = f0.iter().map(|f| f.norm()).fold(0.0, f64::max);
        for (a, b) in f0.iter().zip(&f1) {
            assert!((*a - *b).norm() <= 1e-10 * fscale.max(1e-30));
        }
        for p in system.cur_positions.iter_mut() {
            *p -= shift;
        }

        let theta = 0.7_f64;
        let (s, c) = theta.sin_cos();
        for p in system.cur_positions.iter_mut() {
            *p = Vec2::new(c * p.x - s * p.y, s * p.x + c * p.y);
        }
        let w2 = total_strain_energy(&system, &tri, &m).unwrap();
        assert!(
            (w2 - w0).abs() <= 1e-8 * w0.abs().max(1e-30),
            "rotation changed energy: {w0:e} -> {w2:e}"
        );
    }

    #[test]
    fn failure_kills_exactly_the_violating_triangles() {
        let m = mat();
        let mut tri = Triangulation {
            triangles: vec![[0, 1, 2]; 5],
            ref_area: vec![0.1; 5],
            alive: vec![true; 5],
        };
        let principal = vec![
            (0.5, -0.1),
            (1.01 * m.tensile_strength, 0.0),
            (0.2, -1.5 * m.compressive_strength),
            (0.99 * m.tensile_strength, -0.99 * m.compressive_strength),
            (2.0, -0.2),
        ];
        let killed = apply_failure(&mut tri, &principal, &m);
        assert_eq!(killed, vec![1, 2, 4]);
        assert_eq!(tri.alive, vec![true, false, false, true, false]);
        // idempotent on unchanged kinematics
        let again = apply_failure(&mut tri, &principal, &m);
        assert!(again.is_empty());
    }

    #[test]
    fn no_failure_when_within_bounds() {
        let m = mat();
        let mut tri = Triangulation {
            triangles: vec![[0, 1, 2]; 3],
            ref_area: vec![0.1; 3],
            alive: vec![true; 3],
        };
        let principal = vec![(0.5, -0.5); 3];
        assert!(apply_failure(&mut tri, &principal, &m).is_empty());
        assert_eq!(tri.alive, vec![true; 3]);
    }
}
