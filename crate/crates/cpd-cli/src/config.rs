//! Run configuration: TOML sections with per-scale presets.
//!
//! Every workflow is driven by one config file so a run is reproducible from
//! a single artifact. Unknown keys are rejected; omitted keys fall back to
//! the preset selected by `scale` ("desk" or "paper"). All values are
//! range-checked before any compute starts.

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use std::path::{Path, PathBuf};

use cpd::dataset::{BaseDomain, CaseId, CaseSpec};
use cpd::geometry::DomainSpec;
use cpd::material::{Closure2D, MaterialModel};
use cpd::operator::{OperatorArch, Schedule, Variant};
use cpd::solver::{stable_dt, LoadingProtocol};
use cpd::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Paper,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scale: Option<String>,
    domain: Option<RawDomain>,
    material: Option<RawMaterial>,
    protocol: Option<RawProtocol>,
    case: Option<RawCase>,
    train: Option<RawTrain>,
    validate: Option<RawValidate>,
    io: Option<RawIo>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    width: Option<f64>,
    height: Option<f64>,
    hole_center: Option<[f64; 2]>,
    hole_radius: Option<f64>,
    notch_tip_x: Option<f64>,
    notch_height: Option<f64>,
    target_spacing: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawMaterial {
    youngs_modulus: Option<f64>,
    poisson_ratio: Option<f64>,
    closure: Option<String>,
    tensile_strength: Option<f64>,
    compressive_strength: Option<f64>,
    density: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawProtocol {
    total_displacement: Option<f64>,
    n_load_steps: Option<usize>,
    relax_substeps: Option<usize>,
    equilibration_steps: Option<usize>,
    /// Fraction of the stability bound; mutually exclusive with `dt`.
    dt_factor: Option<f64>,
    dt: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawCase {
    id: Option<String>,
    n_samples: Option<usize>,
    n_test: Option<usize>,
    workers: Option<usize>,
    base_seed: Option<u64>,
    fracture: Option<bool>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTrain {
    variant: Option<String>,
    iterations: Option<usize>,
    seed: Option<u64>,
    particle_stride: Option<usize>,
    tau_stride: Option<usize>,
    record_every: Option<usize>,
    learning_rate: Option<f64>,
    exp_init: Option<f64>,
    exp_decay_steps: Option<usize>,
    exp_decay_rate: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawValidate {
    width: Option<f64>,
    height: Option<f64>,
    target_spacing: Option<f64>,
    hole_radius: Option<f64>,
    crack_length: Option<f64>,
    total_displacement: Option<f64>,
    n_load_steps: Option<usize>,
    relax_substeps: Option<usize>,
    equilibration_steps: Option<usize>,
    bin_factor: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawIo {
    out_root: Option<PathBuf>,
    dataset_dir: Option<PathBuf>,
    checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct CaseConfig {
    pub id: CaseId,
    pub n_samples: usize,
    pub n_test: usize,
    pub workers: usize,
    pub base_seed: u64,
    pub fracture: bool,
}

#[derive(Debug, Clone)]
pub struct TrainSettings {
    pub variant: Variant,
    pub arch: OperatorArch,
    pub schedule: Schedule,
    pub iterations: usize,
    pub seed: u64,
    pub particle_stride: usize,
    pub tau_stride: usize,
    pub record_every: usize,
}

#[derive(Debug, Clone)]
pub struct ValidateSettings {
    pub width: f64,
    pub height: f64,
    pub target_spacing: f64,
    pub hole_radius: f64,
    pub crack_length: f64,
    pub total_displacement: f64,
    pub n_load_steps: usize,
    pub relax_substeps: usize,
    pub equilibration_steps: usize,
    /// Extraction bin width as a multiple of the particle spacing.
    pub bin_factor: f64,
    pub seed: u64,
    pub hole_rms_threshold: f64,
    pub crack_rms_threshold: f64,
    pub scf_threshold: f64,
}

#[derive(Debug, Clone)]
pub struct Resolved {
    pub scale: Scale,
    pub domain: DomainSpec,
    pub material: MaterialModel,
    pub protocol: LoadingProtocol,
    pub case: CaseConfig,
    pub train: TrainSettings,
    pub validate: ValidateSettings,
    pub out_root: PathBuf,
    pub dataset_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Hash of the raw config file.
    pub config_hash: String,
}

struct Presets {
    spacing: f64,
    protocol_loads: (usize, usize, usize), // load steps, relax, equilibration
    case_samples: fn(CaseId) -> usize,
    case_tests: fn(CaseId) -> usize,
    strides: (usize, usize),
    iterations: fn(Variant) -> usize,
    val_size: f64,
    val_spacing: f64,
    val_equilibration: usize,
    val_bin_factor: f64,
    hole_rms: f64,
}

fn presets(scale: Scale) -> Presets {
    match scale {
        Scale::Desk => Presets {
            spacing: 0.26,
            protocol_loads: (100, 60, 3000),
            case_samples: |_| 10,
            case_tests: |_| 2,
            strides: (35, 5),
            iterations: |_| 8000,
            val_size: 10.0,
            val_spacing: 0.21,
            val_equilibration: 2400,
            val_bin_factor: 0.7,
            hole_rms: 0.08,
        },
        Scale::Paper => Presets {
            spacing: 0.079,
            protocol_loads: (100, 100, 9000),
            case_samples: |id| CaseSpec::paper(id).n_samples(),
            case_tests: |id| match id {
                CaseId::Case1 | CaseId::Case2 => 5,
                CaseId::Case3 => 6,
            },
            strides: (1, 1),
            iterations: |v| match v {
                Variant::Vanilla => 60_000,
                Variant::Fusion => 50_000,
            },
            val_size: 16.0,
            val_spacing: 0.125,
            val_equilibration: 18_000,
            val_bin_factor: 1.0,
            hole_rms: 0.05,
        },
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        bail!("`{name}` must be positive, got {v}")
    }
}

pub fn load(path: &Path) -> Result<Resolved> {
    let bytes = std::fs::read(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let raw: RawConfig = toml::from_str(std::str::from_utf8(&bytes).context("config is not UTF-8")?)
        .context("config parse failed")?;
    let hash = {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(&bytes);
        digest.iter().take(5).map(|b| format!("{b:02x}")).collect::<String>()
    };
    resolve(raw, hash)
}

pub fn load_default() -> Result<Resolved> {
    resolve(RawConfig::default(), "default".into())
}

fn resolve(raw: RawConfig, config_hash: String) -> Result<Resolved> {
    let scale = match raw.scale.as_deref() {
        None | Some("desk") => Scale::Desk,
        Some("paper") => Scale::Paper,
        Some(other) => bail!("unknown scale `{other}` (expected `desk` or `paper`)"),
    };
    let p = presets(scale);

    let d = raw.domain.unwrap_or_default();
    let base = BaseDomain::default();
    let domain = DomainSpec {
        width: positive("domain.width", d.width.unwrap_or(base.width))?,
        height: positive("domain.height", d.height.unwrap_or(base.height))?,
        hole_center: d
            .hole_center
            .map(|c| Vec2::new(c[0], c[1]))
            .unwrap_or(base.hole_center),
        hole_radius: d.hole_radius.unwrap_or(1.0),
        notch_tip_x: d.notch_tip_x.unwrap_or(base.notch_tip_x),
        notch_height: d.notch_height.unwrap_or(0.5),
        target_spacing: positive(
            "domain.target_spacing",
            d.target_spacing.unwrap_or(p.spacing),
        )?,
        seed: d.seed.unwrap_or(1),
    };
    domain.validate().map_err(|e| anyhow::anyhow!("{e}"))?;

    let m = raw.material.unwrap_or_default();
    let closure = match m.closure.as_deref() {
        None | Some("plane_stress") => Closure2D::PlaneStress,
        Some("plane_strain") => Closure2D::PlaneStrain,
        Some(other) => bail!("unknown closure `{other}`"),
    };
    let material = MaterialModel::new(
        m.youngs_modulus.unwrap_or(210.0),
        m.poisson_ratio.unwrap_or(0.3),
        closure,
        m.tensile_strength.unwrap_or(1.0),
        m.compressive_strength.unwrap_or(10.0),
        m.density.unwrap_or(1.0),
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;

    let pr = raw.protocol.unwrap_or_default();
    let (loads, relax, equil) = p.protocol_loads;
    let dt = match (pr.dt, pr.dt_factor) {
        (Some(_), Some(_)) => bail!("set either protocol.dt or protocol.dt_factor, not both"),
        (Some(dt), None) => positive("protocol.dt", dt)?,
        (None, f) => {
            let factor = f.unwrap_or(0.9);
            if !(0.0 < factor && factor <= 1.0) {
                bail!("protocol.dt_factor must lie in (0, 1], got {factor}");
            }
            factor * stable_dt(&domain, &material)
        }
    };
    let protocol = LoadingProtocol {
        total_displacement: pr.total_displacement.unwrap_or(0.045),
        n_load_steps: pr.n_load_steps.unwrap_or(loads),
        relax_substeps: pr.relax_substeps.unwrap_or(relax),
        dt,
        equilibration_steps: pr.equilibration_steps.unwrap_or(equil),
    };
    protocol.validate().map_err(|e| anyhow::anyhow!("{e}"))?;

    let c = raw.case.unwrap_or_default();
    let id = match c.id.as_deref() {
        None | Some("case2") => CaseId::Case2,
        Some("case1") => CaseId::Case1,
        Some("case3") => CaseId::Case3,
        Some(other) => bail!("unknown case id `{other}`"),
    };
    let n_samples = c.n_samples.unwrap_or((p.case_samples)(id));
    let n_test = c.n_test.unwrap_or((p.case_tests)(id));
    if n_samples < 2 {
        bail!("case.n_samples must be at least 2");
    }
    if n_test >= n_samples {
        bail!("case.n_test must leave at least one training sample");
    }
    let case = CaseConfig {
        id,
        n_samples,
        n_test,
        workers: c.workers.unwrap_or(2).max(1),
        base_seed: c.base_seed.unwrap_or(100),
        fracture: c.fracture.unwrap_or(id != CaseId::Case1),
    };

    let t = raw.train.unwrap_or_default();
    let variant = match t.variant.as_deref() {
        None | Some("fusion") => Variant::Fusion,
        Some("vanilla") => Variant::Vanilla,
        Some(other) => bail!("unknown variant `{other}`"),
    };
    let arch = match variant {
        Variant::Vanilla => OperatorArch::vanilla_default(),
        Variant::Fusion => OperatorArch::fusion_default(),
    };
    let schedule = match (t.learning_rate, t.exp_init) {
        (Some(_), Some(_)) => bail!("set either train.learning_rate or train.exp_*, not both"),
        (Some(lr), None) => Schedule::Constant {
            lr: positive("train.learning_rate", lr)?,
        },
        (None, Some(init)) => Schedule::Exponential {
            init: positive("train.exp_init", init)?,
            decay_steps: t.exp_decay_steps.unwrap_or(2000),
            decay_rate: t.exp_decay_rate.unwrap_or(0.91),
        },
        (None, None) => match variant {
            Variant::Vanilla => Schedule::vanilla_default(),
            Variant::Fusion => Schedule::fusion_default(),
        },
    };
    let train = TrainSettings {
        variant,
        arch,
        schedule,
        iterations: t.iterations.unwrap_or((p.iterations)(variant)),
        seed: t.seed.unwrap_or(7),
        particle_stride: t.particle_stride.unwrap_or(p.strides.0).max(1),
        tau_stride: t.tau_stride.unwrap_or(p.strides.1).max(1),
        record_every: t.record_every.unwrap_or(100).max(1),
    };

    let v = raw.validate.unwrap_or_default();
    let validate = ValidateSettings {
        width: positive("validate.width", v.width.unwrap_or(p.val_size))?,
        height: positive("validate.height", v.height.unwrap_or(p.val_size))?,
        target_spacing: positive(
            "validate.target_spacing",
            v.target_spacing.unwrap_or(p.val_spacing),
        )?,
        hole_radius: positive("validate.hole_radius", v.hole_radius.unwrap_or(1.0))?,
        crack_length: positive("validate.crack_length", v.crack_length.unwrap_or(1.0))?,
        total_displacement: positive(
            "validate.total_displacement",
            v.total_displacement
                .unwrap_or(0.002 * v.height.unwrap_or(p.val_size)),
        )?,
        n_load_steps: v.n_load_steps.unwrap_or(40).max(1),
        relax_substeps: v.relax_substeps.unwrap_or(60).max(1),
        equilibration_steps: v.equilibration_steps.unwrap_or(p.val_equilibration),
        bin_factor: positive("validate.bin_factor", v.bin_factor.unwrap_or(p.val_bin_factor))?,
        seed: v.seed.unwrap_or(1),
        hole_rms_threshold: p.hole_rms,
        crack_rms_threshold: 0.08,
        scf_threshold: 0.15,
    };

    let io = raw.io.unwrap_or_default();
    let out_root = io
        .out_root
        .or_else(|| std::env::var_os("CPD_RUN_ROOT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"));

    Ok(Resolved {
        scale,
        domain,
        material,
        protocol,
        case,
        train,
        validate,
        out_root,
        dataset_dir: io.dataset_dir,
        checkpoint: io.checkpoint,
        config_hash,
    })
}

impl Resolved {
    /// Fresh run directory named by the command and the config hash.
    pub fn run_dir(&self, command: &str) -> Result<PathBuf> {
        let dir = self.out_root.join(format!("{command}-{}", self.config_hash));
        std::fs::create_dir_all(&dir)
            .with_context(|| format!("cannot create run dir {}", dir.display()))?;
        Ok(dir)
    }

    pub fn case_spec(&self) -> CaseSpec {
        CaseSpec::with_samples(self.case.id, self.case.n_samples, self.case.fracture)
    }

    pub fn base_domain(&self) -> BaseDomain {
        BaseDomain {
            width: self.domain.width,
            height: self.domain.height,
            hole_center: self.domain.hole_center,
            notch_tip_x: self.domain.notch_tip_x,
            target_spacing: self.domain.target_spacing,
        }
    }
}
