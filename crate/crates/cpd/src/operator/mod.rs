//! Branch/trunk operator networks with hand-written forward and backward
//! passes.
//!
//! Two variants are implemented. The plain one contracts independent branch
//! and trunk latent vectors. The fusion one additionally modulates every
//! trunk hidden layer with the cumulative sum of preceding branch hidden
//! activations and uses a trainable harmonic (rowdy) activation, which makes
//! the trunk's learned basis geometry-aware layer by layer.

pub mod backward;
pub mod checkpoint;
pub mod eval;
pub mod train;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use backward::{loss_and_grads, ModelGrads};
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use eval::{predict_displacements, relative_l2_over_time};
pub use train::{train, AdamParams, Schedule, TrainConfig, TrainResult};

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("training diverged at iteration {iteration}: loss = {loss}")]
    Diverged { iteration: usize, loss: f64 },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Harmonic count and frequency scale of the rowdy activation.
pub const ROWDY_HARMONICS: usize = 2;
pub const ROWDY_SCALE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    /// tanh plus trainable harmonic perturbations; equals tanh while the
    /// per-layer coefficients are zero.
    Rowdy,
}

/// phi(x) = tanh(x) + sum_k a_k * n * sin(k * n * x).
pub fn rowdy(x: f64, coeffs: &[f64; ROWDY_HARMONICS]) -> f64 {
    let mut v = x.tanh();
    for (k, &a) in coeffs.iter().enumerate() {
        let freq = (k + 1) as f64 * ROWDY_SCALE;
        v += a * ROWDY_SCALE * (freq * x).sin();
    }
    v
}

/// d phi / dx.
pub fn rowdy_dx(x: f64, coeffs: &[f64; ROWDY_HARMONICS]) -> f64 {
    let t = x.tanh();
    let mut v = 1.0 - t * t;
    for (k, &a) in coeffs.iter().enumerate() {
        let freq = (k + 1) as f64 * ROWDY_SCALE;
        v += a * ROWDY_SCALE * freq * (freq * x).cos();
    }
    v
}

/// d phi / d a_k.
pub fn rowdy_dcoeff(x: f64, k: usize) -> f64 {
    let freq = (k + 1) as f64 * ROWDY_SCALE;
    ROWDY_SCALE * (freq * x).sin()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// Weight matrix, shape (out, in).
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    /// Trainable activation coefficients; used only on hidden layers of
    /// rowdy networks.
    pub rowdy: [f64; ROWDY_HARMONICS],
}

impl DenseLayer {
    fn glorot(out: usize, inp: usize, rng: &mut ChaCha8Rng) -> DenseLayer {
        let lim = (6.0 / (out + inp) as f64).sqrt();
        let w = Array2::from_shape_fn((out, inp), |_| rng.gen_range(-lim..lim));
        DenseLayer {
            w,
            b: Array1::zeros(out),
            rowdy: [0.0; ROWDY_HARMONICS],
        }
    }

    pub fn out_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.w.ncols()
    }
}

/// Dense network; the listed activation applies to every layer except the
/// last, which stays linear.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<DenseLayer>,
    pub activation: Activation,
}

impl MlpParams {
    pub fn new(widths: &[usize], activation: Activation, rng: &mut ChaCha8Rng) -> MlpParams {
        assert!(widths.len() >= 2, "need at least input and output widths");
        let layers = widths
            .windows(2)
            .map(|w| DenseLayer::glorot(w[1], w[0], rng))
            .collect();
        MlpParams { layers, activation }
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim())
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim())
    }

    pub fn n_hidden(&self) -> usize {
        self.layers.len().saturating_sub(1)
    }

    fn activate(&self, z: &Array2<f64>, layer: usize) -> Array2<f64> {
        match self.activation {
            Activation::Tanh => z.mapv(f64::tanh),
            Activation::Rowdy => {
                let coeffs = &self.layers[layer].rowdy;
                z.mapv(|x| rowdy(x, coeffs))
            }
        }
    }
}

/// Forward-pass cache: per-layer pre-activations and activations, needed by
/// the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Layer inputs: input batch, then each hidden activation (len = layers).
    pub inputs: Vec<Array2<f64>>,
    /// Pre-activations per layer (len = layers).
    pub pre: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

/// Plain MLP forward: affine + activation per hidden layer, linear output.
pub fn mlp_forward(params: &MlpParams, input: ArrayView2<f64>) -> Result<MlpCache, OperatorError> {
    if input.ncols() != params.in_dim() {
        return Err(OperatorError::Dimension(format!(
            "input width {} vs first layer {}",
            input.ncols(),
            params.in_dim()
        )));
    }
    let n_layers = params.layers.len();
    let mut inputs = Vec::with_capacity(n_layers);
    let mut pre = Vec::with_capacity(n_layers);
    let mut x = input.to_owned();
    for (l, layer) in params.layers.iter().enumerate() {
        let z = x.dot(&layer.w.t()) + &layer.b;
        inputs.push(x);
        let is_last = l + 1 == n_layers;
        x = if is_last {
            z.clone()
        } else {
            params.activate(&z, l)
        };
        pre.push(z);
    }
    Ok(MlpCache {
        inputs,
        pre,
        output: x,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Vanilla,
    Fusion,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::Vanilla => "vanilla",
            Variant::Fusion => "fusion",
        }
    }
}

/// Layer sizing of one operator model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OperatorArch {
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub latent_dim: usize,
}

impl OperatorArch {
    /// Five hidden layers of 100, latent 200.
    pub fn vanilla_default() -> OperatorArch {
        OperatorArch {
            hidden_layers: 5,
            hidden_width: 100,
            latent_dim: 200,
        }
    }

    /// Three hidden layers of 64, latent 64; trunk and branch widths match
    /// so layer-wise modulation is well-defined.
    pub fn fusion_default() -> OperatorArch {
        OperatorArch {
            hidden_layers: 3,
            hidden_width: 64,
            latent_dim: 64,
        }
    }
}

/// Output displacement components.
pub const OUT_DIM: usize = 2;
/// Trunk input: (x, y, tau).
pub const TRUNK_IN: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorModel {
    pub variant: Variant,
    pub branch: MlpParams,
    pub trunk: MlpParams,
    pub latent_dim: usize,
    pub branch_in: usize,
}

impl OperatorModel {
    /// Fresh model with seeded Glorot-uniform weights and zero rowdy
    /// coefficients (fusion starts exactly at its tanh baseline).
    pub fn init(variant: Variant, arch: OperatorArch, branch_in: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let activation = match variant {
            Variant::Vanilla => Activation::Tanh,
            Variant::Fusion => Activation::Rowdy,
        };
        let mut branch_widths = vec![branch_in];
        branch_widths.extend(std::iter::repeat_n(arch.hidden_width, arch.hidden_layers));
        branch_widths.push(OUT_DIM * arch.latent_dim);
        let mut trunk_widths = vec![TRUNK_IN];
        trunk_widths.extend(std::iter::repeat_n(arch.hidden_width, arch.hidden_layers));
        trunk_widths.push(arch.latent_dim);
        let branch = MlpParams::new(&branch_widths, activation, &mut rng);
        let trunk = MlpParams::new(&trunk_widths, activation, &mut rng);
        OperatorModel {
            variant,
            branch,
            trunk,
            latent_dim: arch.latent_dim,
            branch_in,
        }
    }

    pub fn forward(&self, mu: &[f64], xi: ArrayView2<f64>) -> Result<Array2<f64>, OperatorError> {
        Ok(match self.variant {
            Variant::Vanilla => deeponet_forward(self, mu, xi)?.output,
            Variant::Fusion => fusion_forward(self, mu, xi)?.output,
        })
    }
}

/// Contract branch latent (1 x d*p) with trunk latent (rows x p):
/// u_c(xi_j) = sum_l B[c*p + l] Phi[j][l].
fn contract(b_flat: &Array2<f64>, phi: &Array2<f64>, p: usize) -> Array2<f64> {
    let d = b_flat.len() / p;
    let b = b_flat
        .view()
        .into_shape_with_order((d, p))
        .expect("branch head reshape");
    phi.dot(&b.t())
}

#[derive(Debug, Clone)]
pub struct VanillaCache {
    pub branch: MlpCache,
    pub trunk: MlpCache,
    pub output: Array2<f64>,
}

/// Plain branch-trunk prediction over a batch of query points.
pub fn deeponet_forward(
    model: &OperatorModel,
    mu: &[f64],
    xi: ArrayView2<f64>,
) -> Result<VanillaCache, OperatorError> {
    let p = model.latent_dim;
    if model.branch.out_dim() != OUT_DIM * p || model.trunk.out_dim() != p {
        return Err(OperatorError::Dimension(
            "branch/trunk head widths do not match the latent dimension".into(),
        ));
    }
    let mu_arr = Array2::from_shape_vec((1, mu.len()), mu.to_vec())
        .map_err(|e| OperatorError::Dimension(e.to_string()))?;
    let branch = mlp_forward(&model.branch, mu_arr.view())?;
    let trunk = mlp_forward(&model.trunk, xi)?;
    let output = contract(&branch.output, &trunk.output, p);
    Ok(VanillaCache {
        branch,
        trunk,
        output,
    })
}

#[derive(Debug, Clone)]
pub struct FusionCache {
    pub branch: MlpCache,
    /// Cumulative branch-feature modulation vectors per trunk hidden layer.
    pub mods: Vec<Array1<f64>>,
    /// Trunk layer inputs, pre-activations, and raw activations sigma(z)
    /// before modulation.
    pub trunk_inputs: Vec<Array2<f64>>,
    pub trunk_pre: Vec<Array2<f64>>,
    pub trunk_sigma: Vec<Array2<f64>>,
    pub trunk_latent: Array2<f64>,
    pub output: Array2<f64>,
}

/// Fusion prediction: trunk hidden layer l is scaled elementwise by the sum
/// of branch hidden activations 1..l-1 (layer 1 is unmodulated), then the
/// usual branch-trunk contraction is applied to the fused latent.
pub fn fusion_forward(
    model: &OperatorModel,
    mu: &[f64],
    xi: ArrayView2<f64>,
) -> Result<FusionCache, OperatorError> {
    let p = model.latent_dim;
    let w = model
        .trunk
        .layers
        .first()
        .map_or(0, |l| l.out_dim());
    for (l, layer) in model.trunk.layers.iter().enumerate().take(model.trunk.n_hidden()) {
        if layer.out_dim() != w {
            return Err(OperatorError::Dimension(format!(
                "trunk hidden layer {l} width {} != {w}",
                layer.out_dim()
            )));
        }
    }
    for (l, layer) in model
        .branch
        .layers
        .iter()
        .enumerate()
        .take(model.branch.n_hidden())
    {
        if layer.out_dim() != w {
            return Err(OperatorError::Dimension(format!(
                "branch hidden layer {l} width {} does not match trunk width {w}",
                layer.out_dim()
            )));
        }
    }
    if model.branch.n_hidden() != model.trunk.n_hidden() {
        return Err(OperatorError::Dimension(
            "fusion needs matching hidden layer counts".into(),
        ));
    }

    let mu_arr = Array2::from_shape_vec((1, mu.len()), mu.to_vec())
        .map_err(|e| OperatorError::Dimension(e.to_string()))?;
    let branch = mlp_forward(&model.branch, mu_arr.view())?;

    // cumulative modulation vectors: S_1 = 1, S_l = sum_{m<l} a_B^(m)
    let n_hidden = model.trunk.n_hidden();
    let mut mods: Vec<Array1<f64>> = Vec::with_capacity(n_hidden);
    let mut running = Array1::ones(w);
    for l in 0..n_hidden {
        mods.push(running.clone());
        let hidden_act = &branch.inputs[l + 1]; // activation of branch layer l
        let add = hidden_act.index_axis(Axis(0), 0).to_owned();
        if l == 0 {
            running = add;
        } else {
            running += &add;
        }
    }

    if xi.ncols() != model.trunk.in_dim() {
        return Err(OperatorError::Dimension(format!(
            "trunk input width {} vs {}",
            xi.ncols(),
            model.trunk.in_dim()
        )));
    }
    let mut trunk_inputs = Vec::with_capacity(n_hidden + 1);
    let mut trunk_pre = Vec::with_capacity(n_hidden + 1);
    let mut trunk_sigma = Vec::with_capacity(n_hidden);
    let mut x = xi.to_owned();
    for l in 0..n_hidden {
        let layer = &model.trunk.layers[l];
        let z = x.dot(&layer.w.t()) + &layer.b;
        let sigma = model.trunk.activate(&z, l);
        trunk_inputs.push(x);
        let fused = &sigma * &mods[l];
        trunk_pre.push(z);
        trunk_sigma.push(sigma);
        x = fused;
    }
    let out_layer = model.trunk.layers.last().expect("trunk output layer");
    let latent = x.dot(&out_layer.w.t()) + &out_layer.b;
    trunk_inputs.push(x);
    trunk_pre.push(latent.clone());

    let output = contract(&branch.output, &latent, p);
    Ok(FusionCache {
        branch,
        mods,
        trunk_inputs,
        trunk_pre,
        trunk_sigma,
        trunk_latent: latent,
        output,
    })
}
