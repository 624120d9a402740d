//! Case-study sample families, trajectory serialization, and training
//! tensors for the operator networks.

pub mod io;
pub mod tensors;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{self, DomainSpec, ParticleSystem, Triangulation};
use crate::material::MaterialModel;
use crate::solver::{self, LoadingProtocol};
use crate::trajectory::Trajectory;
use crate::vec2::Vec2;

pub use io::{read_trajectory, write_trajectory};
pub use tensors::{build_training_tensors, Normalization, TensorOptions, TrainingTensors};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("file truncated")]
    Truncated,
    #[error("checksum mismatch (stored {stored:#010x}, computed {expect:#010x})")]
    Checksum { stored: u32, expect: u32 },
    #[error("unsupported format version {found} (expected {expect})")]
    Version { found: u32, expect: u32 },
    #[error("format error: {0}")]
    Format(String),
    #[error("invalid case configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] solver::SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseId {
    Case1,
    Case2,
    Case3,
}

impl CaseId {
    pub fn label(self) -> &'static str {
        match self {
            CaseId::Case1 => "case1",
            CaseId::Case2 => "case2",
            CaseId::Case3 => "case3",
        }
    }
}

/// One sample family: which geometry scalar varies, over what range, and
/// whether the failure criterion is active.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseSpec {
    pub case_id: CaseId,
    /// The varied scalar per sample: notch height h (cases 1-2), radius r (case 3).
    pub param_values: Vec<f64>,
    /// The held-fixed scalar: r = 1 for cases 1-2; the crack-to-hole-center
    /// distance 1.5 for case 3.
    pub fixed_param: f64,
    pub fracture_enabled: bool,
}

impl CaseSpec {
    /// Full-size family as studied: 40 / 50 / 51 samples, h in [0, 2] or
    /// r in [0.5, 1.5], fracture off only for case 1.
    pub fn paper(case_id: CaseId) -> CaseSpec {
        let (n, fracture) = match case_id {
            CaseId::Case1 => (40, false),
            CaseId::Case2 => (50, true),
            CaseId::Case3 => (51, true),
        };
        Self::with_samples(case_id, n, fracture)
    }

    /// Same parameter ranges with a custom sample count (reduced presets).
    pub fn with_samples(case_id: CaseId, n_samples: usize, fracture_enabled: bool) -> CaseSpec {
        let (lo, hi, fixed) = match case_id {
            CaseId::Case1 | CaseId::Case2 => (0.0, 2.0, 1.0),
            CaseId::Case3 => (0.5, 1.5, 1.5),
        };
        let param_values = linspace(lo, hi, n_samples);
        CaseSpec {
            case_id,
            param_values,
            fixed_param: fixed,
            fracture_enabled,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.param_values.len()
    }

    /// Check the full-size family against its defining ranges and counts.
    pub fn validate_paper(&self) -> Result<(), DatasetError> {
        let (n, lo, hi, fixed, fracture) = match self.case_id {
            CaseId::Case1 => (40, 0.0, 2.0, 1.0, false),
            CaseId::Case2 => (50, 0.0, 2.0, 1.0, true),
            CaseId::Case3 => (51, 0.5, 1.5, 1.5, true),
        };
        if self.n_samples() != n {
            return Err(DatasetError::Config(format!(
                "{} expects {n} samples, got {}",
                self.case_id.label(),
                self.n_samples()
            )));
        }
        let (&first, &last) = (
            self.param_values.first().unwrap(),
            self.param_values.last().unwrap(),
        );
        if (first - lo).abs() > 1e-12 || (last - hi).abs() > 1e-12 {
            return Err(DatasetError::Config("parameter range mismatch".into()));
        }
        if (self.fixed_param - fixed).abs() > 1e-12 || self.fracture_enabled != fracture {
            return Err(DatasetError::Config("fixed parameter mismatch".into()));
        }
        Ok(())
    }

    /// Concrete specimen for one parameter value.
    ///
    /// Cases 1-2 vary the notch height above the hole top at fixed r = 1.
    /// Case 3 keeps the notch line 1.5 cm above the hole center and varies
    /// the radius, so the stored notch height is 1.5 - r.
    pub fn domain_for(&self, param: f64, base: &BaseDomain, seed: u64) -> DomainSpec {
        let (radius, notch_height) = match self.case_id {
            CaseId::Case1 | CaseId::Case2 => (self.fixed_param, param),
            CaseId::Case3 => (param, self.fixed_param - param),
        };
        DomainSpec {
            width: base.width,
            height: base.height,
            hole_center: base.hole_center,
            hole_radius: radius,
            notch_tip_x: base.notch_tip_x,
            notch_height,
            target_spacing: base.target_spacing,
            seed,
        }
    }
}

/// Specimen parameters shared by every sample of a family.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseDomain {
    pub width: f64,
    pub height: f64,
    pub hole_center: Vec2,
    pub notch_tip_x: f64,
    pub target_spacing: f64,
}

impl Default for BaseDomain {
    fn default() -> Self {
        BaseDomain {
            width: 10.0,
            height: 10.0,
            hole_center: Vec2::new(3.5, 3.5),
            notch_tip_x: 1.0,
            target_spacing: 0.26,
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Crack-trapping prediction: (r + h)/r <= 1.4 with h the crack offset
/// above the hole top. The threshold itself counts as trapped; rounding in
/// the ratio must not flip exact-boundary inputs like (r, h) = (1.5, 0.6).
pub fn trapping_classifier(r: f64, h: f64) -> bool {
    (r + h) / r <= 1.4 * (1.0 + 1e-12)
}

/// Result of one sample simulation; diverged runs carry the error message.
#[derive(Debug)]
pub struct SampleRun {
    pub sample_id: u32,
    pub param: f64,
    pub seed: u64,
    pub result: Result<Trajectory, DatasetError>,
}

/// Simulate a whole sample family; embarrassingly parallel over samples.
/// Failed runs are reported in-place, never dropped.
pub fn generate_case(
    case: &CaseSpec,
    base: &BaseDomain,
    mat: &MaterialModel,
    protocol: &LoadingProtocol,
    base_seed: u64,
    workers: usize,
) -> Vec<SampleRun> {
    let run_one = |(i, &param): (usize, &f64)| -> SampleRun {
        let seed = base_seed + i as u64;
        let spec = case.domain_for(param, base, seed);
        let result = solver::run_quasi_static(
            &spec,
            mat,
            protocol,
            case.fracture_enabled,
            i as u32,
            param,
        )
        .map_err(DatasetError::from);
        SampleRun {
            sample_id: i as u32,
            param,
            seed,
            result,
        }
    };

    if workers <= 1 {
        case.param_values.iter().enumerate().map(run_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool");
        pool.install(|| {
            case.param_values
                .par_iter()
                .enumerate()
                .map(run_one)
                .collect()
        })
    }
}

/// How the notch crack interacted with the hole over one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrackOutcome {
    pub onset_tau: Option<usize>,
    /// Kill path from the notch tip reaches the hole rim (or is absorbed
    /// just short of it without ever crossing the hole).
    pub merged: bool,
    /// Crack activity continues past the far side of the hole without merging.
    pub passed: bool,
}

/// Classify crack-hole interaction from the final frame's dead triangles.
///
/// The kill component seeded at the notch tip is grown over vertex-adjacent
/// dead triangles. Merged means that component reaches the rim, or stalls
/// before the near edge of the hole with its front within two elements of
/// the rim (the crack was swallowed). Passed means overall crack activity
/// reaches beyond the far side without merging.
pub fn crack_outcome(
    traj: &Trajectory,
    system: &ParticleSystem,
    tri: &Triangulation,
) -> CrackOutcome {
    let spec = &traj.domain;
    let spacing = spec.target_spacing;
    let last = traj.frames.last().expect("non-empty trajectory");
    let killed: Vec<usize> = (0..tri.len()).filter(|&t| !last.alive[t]).collect();
    let onset_tau = traj.first_failure_tau();
    if killed.is_empty() || !spec.has_hole() {
        return CrackOutcome {
            onset_tau,
            merged: false,
            passed: false,
        };
    }

    let centroid = |t: usize| -> Vec2 {
        let v = tri.triangles[t];
        (system.ref_positions[v[0] as usize]
            + system.ref_positions[v[1] as usize]
            + system.ref_positions[v[2] as usize])
            * (1.0 / 3.0)
    };

    let tip = Vec2::new(spec.notch_tip_x, spec.notch_line_y());
    let mut seeds: Vec<usize> = killed
        .iter()
        .copied()
        .filter(|&t| centroid(t).dist(tip) <= 3.0 * spacing)
        .collect();
    if seeds.is_empty() {
        // fall back to the earliest kills
        let first_dead_tau = onset_tau.unwrap_or(0);
        seeds = killed
            .iter()
            .copied()
            .filter(|&t| !traj.frames[first_dead_tau].alive[t])
            .collect();
    }

    let killed_flag: Vec<bool> = (0..tri.len()).map(|t| !last.alive[t]).collect();
    let mut incident: std::collections::HashMap<u32, Vec<usize>> =
        std::collections::HashMap::new();
    for &t in &killed {
        for &v in &tri.triangles[t] {
            incident.entry(v).or_default().push(t);
        }
    }

    let rim_tol = spec.hole_radius + 0.75 * spacing;
    let mut visited = vec![false; tri.len()];
    let mut queue: std::collections::VecDeque<usize> = seeds.iter().copied().collect();
    for &s in &seeds {
        visited[s] = true;
    }
    let mut touches_rim = false;
    let mut reach = f64::NEG_INFINITY;
    let mut min_rim_gap = f64::INFINITY;
    while let Some(t) = queue.pop_front() {
        reach = reach.max(centroid(t).x);
        for &v in &tri.triangles[t] {
            let gap = system.ref_positions[v as usize].dist(spec.hole_center) - spec.hole_radius;
            min_rim_gap = min_rim_gap.min(gap);
            if system.ref_positions[v as usize].dist(spec.hole_center) <= rim_tol {
                touches_rim = true;
            }
            for &u in &incident[&v] {
                if killed_flag[u] && !visited[u] {
                    visited[u] = true;
                    queue.push_back(u);
                }
            }
        }
    }

    let absorbed =
        reach < spec.hole_center.x - spec.hole_radius && min_rim_gap <= 2.2 * spacing;
    let merged = touches_rim || absorbed;
    let max_x = killed.iter().map(|&t| centroid(t).x).fold(0.0, f64::max);
    let passed = !merged && max_x >= spec.hole_center.x + spec.hole_radius;
    CrackOutcome {
        onset_tau,
        merged,
        passed,
    }
}

/// Rebuild the deterministic mesh a trajectory was recorded on.
pub fn mesh_for(traj: &Trajectory) -> Result<(ParticleSystem, Triangulation), DatasetError> {
    let system = geometry::seed_particles(&traj.domain)
        .map_err(|e| DatasetError::Config(e.to_string()))?;
    let tri = geometry::triangulate(&system, &traj.domain)
        .map_err(|e| DatasetError::Config(e.to_string()))?;
    if system.ref_positions != traj.ref_positions {
        return Err(DatasetError::Format(
            "trajectory reference positions do not match its domain spec".into(),
        ));
    }
    Ok((system, tri))
}

/// Disjoint train/test index lists over a sample family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainSplit {
    pub train_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
}

impl TrainSplit {
    /// Test samples spread evenly across the parameter range.
    pub fn evenly(n_samples: usize, n_test: usize) -> TrainSplit {
        assert!(n_test < n_samples, "need at least one training sample");
        let test_ids: Vec<usize> = (0..n_test)
            .map(|i| ((i as f64 + 0.5) * n_samples as f64 / n_test as f64) as usize)
            .collect();
        let train_ids = (0..n_samples)
            .filter(|i| !test_ids.contains(i))
            .collect();
        TrainSplit {
            train_ids,
            test_ids,
        }
    }

    /// The studied splits: 35/5, 45/5, and 45/6.
    pub fn paper(case_id: CaseId) -> TrainSplit {
        match case_id {
            CaseId::Case1 => Self::evenly(40, 5),
            CaseId::Case2 => Self::evenly(50, 5),
            CaseId::Case3 => Self::evenly(51, 6),
        }
    }

    pub fn validate(&self, n_samples: usize) -> Result<(), DatasetError> {
        let mut seen = vec![false; n_samples];
        for &i in self.train_ids.iter().chain(&self.test_ids) {
            if i >= n_samples {
                return Err(DatasetError::Config(format!("split index {i} out of range")));
            }
            if seen[i] {
                return Err(DatasetError::Config(format!("split index {i} duplicated")));
            }
            seen[i] = true;
        }
        if !seen.iter().all(|&s| s) {
            return Err(DatasetError::Config("split does not cover all samples".into()));
        }
        Ok(())
    }
}
