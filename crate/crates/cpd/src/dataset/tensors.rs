//! Training tensors: geometry scalar for the branch network, space-time
//! coordinates for the trunk, displacement targets, and the normalization
//! constants needed to invert predictions.

use ndarray::Array2;

use crate::trajectory::{Trajectory, NUM_FRAMES};

use super::{DatasetError, TrainSplit};

/// Row subsampling for reduced-budget training runs; 1/1 keeps every
/// particle and every stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorOptions {
    pub particle_stride: usize,
    pub tau_stride: usize,
}

impl Default for TensorOptions {
    fn default() -> Self {
        TensorOptions {
            particle_stride: 1,
            tau_stride: 1,
        }
    }
}

/// Min-max and standardization constants fitted on the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub geom_min: f64,
    pub geom_max: f64,
    /// (x, y, tau/100) minima and maxima.
    pub coord_min: [f64; 3],
    pub coord_max: [f64; 3],
    /// Per-component displacement mean and standard deviation (cm).
    pub target_mean: [f64; 2],
    pub target_std: [f64; 2],
}

impl Normalization {
    pub fn norm_geom(&self, g: f64) -> f64 {
        min_max(g, self.geom_min, self.geom_max)
    }

    pub fn norm_coord(&self, c: [f64; 3]) -> [f64; 3] {
        [
            min_max(c[0], self.coord_min[0], self.coord_max[0]),
            min_max(c[1], self.coord_min[1], self.coord_max[1]),
            min_max(c[2], self.coord_min[2], self.coord_max[2]),
        ]
    }

    pub fn norm_target(&self, u: [f64; 2]) -> [f64; 2] {
        [
            (u[0] - self.target_mean[0]) / self.target_std[0],
            (u[1] - self.target_mean[1]) / self.target_std[1],
        ]
    }

    /// Inverse of [`Self::norm_target`]; recovers displacement in cm.
    pub fn denorm_target(&self, t: [f64; 2]) -> [f64; 2] {
        [
            t[0] * self.target_std[0] + self.target_mean[0],
            t[1] * self.target_std[1] + self.target_mean[1],
        ]
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.geom_min, self.geom_max];
        v.extend_from_slice(&self.coord_min);
        v.extend_from_slice(&self.coord_max);
        v.extend_from_slice(&self.target_mean);
        v.extend_from_slice(&self.target_std);
        v
    }

    pub fn from_vec(v: &[f64]) -> Option<Self> {
        if v.len() != 12 {
            return None;
        }
        Some(Normalization {
            geom_min: v[0],
            geom_max: v[1],
            coord_min: [v[2], v[3], v[4]],
            coord_max: [v[5], v[6], v[7]],
            target_mean: [v[8], v[9]],
            target_std: [v[10], v[11]],
        })
    }
}

fn min_max(v: f64, lo: f64, hi: f64) -> f64 {
    2.0 * (v - lo) / (hi - lo) - 1.0
}

/// One sample's rows: a single normalized geometry scalar, trunk coordinates
/// (rows x 3), and standardized displacement targets (rows x 2).
#[derive(Debug, Clone)]
pub struct SampleTensors {
    pub sample_id: u32,
    pub geometry_raw: f64,
    pub branch_input: Vec<f64>,
    pub trunk: Array2<f64>,
    pub targets: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainingTensors {
    pub samples: Vec<SampleTensors>,
    pub split: TrainSplit,
    pub norm: Normalization,
    pub options: TensorOptions,
}

impl TrainingTensors {
    pub fn train_samples(&self) -> impl Iterator<Item = &SampleTensors> {
        self.split.train_ids.iter().map(|&i| &self.samples[i])
    }

    pub fn test_samples(&self) -> impl Iterator<Item = &SampleTensors> {
        self.split.test_ids.iter().map(|&i| &self.samples[i])
    }
}

fn strided_taus(stride: usize) -> Vec<usize> {
    (0..NUM_FRAMES).step_by(stride.max(1)).collect()
}

/// Assemble normalized tensors from trajectories.
///
/// Each sample keeps its own coordinate set (meshes are sample-specific).
/// Branch input is the geometry scalar min-max scaled to [-1, 1] over the
/// training split; trunk coordinates (x, y, tau/100) are min-max scaled the
/// same way; targets u = y(tau) - x are standardized per component by
/// training-split statistics.
pub fn build_training_tensors(
    trajectories: &[Trajectory],
    split: &TrainSplit,
    options: TensorOptions,
) -> Result<TrainingTensors, DatasetError> {
    split.validate(trajectories.len())?;
    for traj in trajectories {
        if traj.frames.len() != NUM_FRAMES {
            return Err(DatasetError::Format(format!(
                "sample {} has {} frames, expected {NUM_FRAMES}",
                traj.sample_id,
                traj.frames.len()
            )));
        }
    }
    let taus = strided_taus(options.tau_stride);
    let pstride = options.particle_stride.max(1);

    // pass 1: statistics over the training split
    let mut geom_min = f64::INFINITY;
    let mut geom_max = f64::NEG_INFINITY;
    let mut coord_min = [f64::INFINITY; 3];
    let mut coord_max = [f64::NEG_INFINITY; 3];
    let mut sum = [0.0_f64; 2];
    let mut sum_sq = [0.0_f64; 2];
    let mut count = 0usize;
    for &i in &split.train_ids {
        let traj = &trajectories[i];
        geom_min = geom_min.min(traj.geometry_param);
        geom_max = geom_max.max(traj.geometry_param);
        for p in (0..traj.num_particles()).step_by(pstride) {
            let r = traj.ref_positions[p];
            for (c, v) in [r.x, r.y].into_iter().enumerate() {
                coord_min[c] = coord_min[c].min(v);
                coord_max[c] = coord_max[c].max(v);
            }
            for &tau in &taus {
                let t_norm = tau as f64 / (NUM_FRAMES - 1) as f64;
                coord_min[2] = coord_min[2].min(t_norm);
                coord_max[2] = coord_max[2].max(t_norm);
                let u = traj.displacement(tau, p);
                sum[0] += u.x;
                sum[1] += u.y;
                sum_sq[0] += u.x * u.x;
                sum_sq[1] += u.y * u.y;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(DatasetError::Config("empty training split".into()));
    }
    let mean = [sum[0] / count as f64, sum[1] / count as f64];
    let var = [
        (sum_sq[0] / count as f64 - mean[0] * mean[0]).max(0.0),
        (sum_sq[1] / count as f64 - mean[1] * mean[1]).max(0.0),
    ];
    let std = [var[0].sqrt(), var[1].sqrt()];
    for (name, lo, hi) in [
        ("geometry parameter", geom_min, geom_max),
        ("x coordinate", coord_min[0], coord_max[0]),
        ("y coordinate", coord_min[1], coord_max[1]),
        ("time coordinate", coord_min[2], coord_max[2]),
    ] {
        if !(hi - lo).is_finite() || hi - lo <= 0.0 {
            return Err(DatasetError::Config(format!(
                "degenerate normalization range for {name}: [{lo}, {hi}]"
            )));
        }
    }
    for c in 0..2 {
        if !(std[c].is_finite() && std[c] > 0.0) {
            return Err(DatasetError::Config(format!(
                "degenerate target standard deviation for component {c}"
            )));
        }
    }
    let norm = Normalization {
        geom_min,
        geom_max,
        coord_min,
        coord_max,
        target_mean: mean,
        target_std: std,
    };

    // pass 2: materialize rows
    let samples = trajectories
        .iter()
        .map(|traj| {
            let particles: Vec<usize> = (0..traj.num_particles()).step_by(pstride).collect();
            let rows = particles.len() * taus.len();
            let mut trunk = Array2::zeros((rows, 3));
            let mut targets = Array2::zeros((rows, 2));
            let mut row = 0;
            for &p in &particles {
                let r = traj.ref_positions[p];
                for &tau in &taus {
                    let t_norm = tau as f64 / (NUM_FRAMES - 1) as f64;
                    let c = norm.norm_coord([r.x, r.y, t_norm]);
                    trunk[[row, 0]] = c[0];
                    trunk[[row, 1]] = c[1];
                    trunk[[row, 2]] = c[2];
                    let u = traj.displacement(tau, p);
                    let t = norm.norm_target([u.x, u.y]);
                    targets[[row, 0]] = t[0];
                    targets[[row, 1]] = t[1];
                    row += 1;
                }
            }
            SampleTensors {
                sample_id: traj.sample_id,
                geometry_raw: traj.geometry_param,
                branch_input: vec![norm.norm_geom(traj.geometry_param)],
                trunk,
                targets,
            }
        })
        .collect();

    Ok(TrainingTensors {
        samples,
        split: split.clone(),
        norm,
        options,
    })
}

/// Trunk rows for every particle of one trajectory at one stage, normalized
/// with training constants (used at evaluation time).
pub fn eval_trunk_rows(traj: &Trajectory, tau: usize, norm: &Normalization) -> Array2<f64> {
    let n = traj.num_particles();
    let mut trunk = Array2::zeros((n, 3));
    let t_norm = tau as f64 / (NUM_FRAMES - 1) as f64;
    for p in 0..n {
        let r = traj.ref_positions[p];
        let c = norm.norm_coord([r.x, r.y, t_norm]);
        trunk[[p, 0]] = c[0];
        trunk[[p, 1]] = c[1];
        trunk[[p, 2]] = c[2];
    }
    trunk
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;
    use crate::trajectory::Frame;
    use crate::vec2::Vec2;

    fn synthetic_trajectory(id: u32, param: f64, n_particles: usize) -> Trajectory {
        let domain = DomainSpec {
            width: 4.0,
            height: 4.0,
            hole_center: Vec2::new(2.0, 2.0),
            hole_radius: 0.0,
            notch_tip_x: 0.0,
            notch_height: 0.0,
            target_spacing: 1.0,
            seed: id as u64,
        };
        let ref_positions: Vec<Vec2> = (0..n_particles)
            .map(|i| Vec2::new(i as f64 * 0.37 % 4.0, (i as f64 * 0.61 + param) % 4.0))
            .collect();
        let frames = (0..NUM_FRAMES)
            .map(|tau| Frame {
                positions: ref_positions
                    .iter()
                    .map(|p| *p + Vec2::new(1e-4 * tau as f64 * param, -2e-4 * tau as f64))
                    .collect(),
                alive: vec![true; 4],
            })
            .collect();
        Trajectory {
            sample_id: id,
            geometry_param: param,
            domain,
            ref_positions,
            frames,
        }
    }

    fn three_sample_set() -> (Vec<Trajectory>, TrainSplit) {
        let trajs = vec![
            synthetic_trajectory(0, 0.5, 12),
            synthetic_trajectory(1, 1.0, 15),
            synthetic_trajectory(2, 1.5, 9),
        ];
        let split = TrainSplit {
            train_ids: vec![0, 2],
            test_ids: vec![1],
        };
        (trajs, split)
    }

    #[test]
    fn row_count_is_particles_times_frames() {
        let (trajs, split) = three_sample_set();
        let t = build_training_tensors(&trajs, &split, TensorOptions::default()).unwrap();
        for (traj, sample) in trajs.iter().zip(&t.samples) {
            assert_eq!(sample.trunk.nrows(), traj.num_particles() * NUM_FRAMES);
            assert_eq!(sample.targets.nrows(), sample.trunk.nrows());
        }
    }

    #[test]
    fn tau_zero_targets_are_exactly_minus_mean_over_std() {
        let (trajs, split) = three_sample_set();
        let t = build_training_tensors(&trajs, &split, TensorOptions::default()).unwrap();
        // displacement at tau = 0 is exactly zero, so the standardized
        // target must be -mean/std
        let expect = [
            -t.norm.target_mean[0] / t.norm.target_std[0],
            -t.norm.target_mean[1] / t.norm.target_std[1],
        ];
        let s = &t.samples[0];
        // rows are (particle-major, tau-minor): tau = 0 is every NUM_FRAMES-th row
        for p in 0..trajs[0].num_particles() {
            let row = p * NUM_FRAMES;
            assert!((s.targets[[row, 0]] - expect[0]).abs() < 1e-12);
            assert!((s.targets[[row, 1]] - expect[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_denormalize_round_trip() {
        let (trajs, split) = three_sample_set();
        let t = build_training_tensors(&trajs, &split, TensorOptions::default()).unwrap();
        for u in [[0.0, 0.0], [1e-3, -2e-3], [0.3, 0.7]] {
            let back = t.norm.denorm_target(t.norm.norm_target(u));
            assert!((back[0] - u[0]).abs() < 1e-12);
            assert!((back[1] - u[1]).abs() < 1e-12);
        }
        let v = t.norm.to_vec();
        assert_eq!(Normalization::from_vec(&v).unwrap(), t.norm);
    }

    #[test]
    fn branch_inputs_span_minus_one_to_one_over_training() {
        let (trajs, split) = three_sample_set();
        let t = build_training_tensors(&trajs, &split, TensorOptions::default()).unwrap();
        assert!((t.samples[0].branch_input[0] + 1.0).abs() < 1e-12);
        assert!((t.samples[2].branch_input[0] - 1.0).abs() < 1e-12);
        // test sample interpolates
        assert!(t.samples[1].branch_input[0].abs() < 1e-12);
    }

    #[test]
    fn degenerate_geometry_range_is_rejected() {
        let trajs = vec![
            synthetic_trajectory(0, 1.0, 8),
            synthetic_trajectory(1, 1.0, 8),
        ];
        let split = TrainSplit {
            train_ids: vec![0, 1],
            test_ids: vec![],
        };
        assert!(matches!(
            build_training_tensors(&trajs, &split, TensorOptions::default()),
            Err(DatasetError::Config(_))
        ));
    }

    #[test]
    fn strides_reduce_rows() {
        let (trajs, split) = three_sample_set();
        let opts = TensorOptions {
            particle_stride: 3,
            tau_stride: 4,
        };
        let t = build_training_tensors(&trajs, &split, opts).unwrap();
        let expect_taus = (0..NUM_FRAMES).step_by(4).count();
        assert_eq!(t.samples[0].trunk.nrows(), 4 * expect_taus); // 12 particles / 3
    }
}
