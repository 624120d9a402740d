//! Reverse-mode gradients of the mean-squared-error loss for both operator
//! variants, including the Hadamard fusion path, the cumulative branch sums,
//! and the trainable activation coefficients.

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;

use super::{
    deeponet_forward, fusion_forward, rowdy_dcoeff, rowdy_dx, Activation, FusionCache, MlpCache,
    MlpParams, OperatorError, OperatorModel, VanillaCache, OUT_DIM, ROWDY_HARMONICS,
};

#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub dw: Array2<f64>,
    pub db: Array1<f64>,
    pub drowdy: [f64; ROWDY_HARMONICS],
}

#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub layers: Vec<LayerGrads>,
}

impl MlpGrads {
    fn zeros_like(params: &MlpParams) -> MlpGrads {
        MlpGrads {
            layers: params
                .layers
                .iter()
                .map(|l| LayerGrads {
                    dw: Array2::zeros(l.w.dim()),
                    db: Array1::zeros(l.b.len()),
                    drowdy: [0.0; ROWDY_HARMONICS],
                })
                .collect(),
        }
    }

    fn add(&mut self, other: &MlpGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.dw += &b.dw;
            a.db += &b.db;
            for k in 0..ROWDY_HARMONICS {
                a.drowdy[k] += b.drowdy[k];
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub branch: MlpGrads,
    pub trunk: MlpGrads,
}

impl ModelGrads {
    pub fn zeros_like(model: &OperatorModel) -> ModelGrads {
        ModelGrads {
            branch: MlpGrads::zeros_like(&model.branch),
            trunk: MlpGrads::zeros_like(&model.trunk),
        }
    }

    pub fn add(&mut self, other: &ModelGrads) {
        self.branch.add(&other.branch);
        self.trunk.add(&other.trunk);
    }
}

/// Flattened parameter order shared by the optimizer and the gradient
/// checker: branch then trunk; per layer weights row-major, biases, then
/// rowdy coefficients (rowdy networks only, hidden layers only).
fn visit_mlp<F: FnMut(f64) -> f64>(params: &mut MlpParams, f: &mut F) {
    let n_hidden = params.n_hidden();
    let rowdy = params.activation == Activation::Rowdy;
    for (l, layer) in params.layers.iter_mut().enumerate() {
        for v in layer.w.iter_mut() {
            *v = f(*v);
        }
        for v in layer.b.iter_mut() {
            *v = f(*v);
        }
        if rowdy && l < n_hidden {
            for v in layer.rowdy.iter_mut() {
                *v = f(*v);
            }
        }
    }
}

fn visit_mlp_grads<F: FnMut(f64)>(params: &MlpParams, grads: &MlpGrads, f: &mut F) {
    let n_hidden = params.n_hidden();
    let rowdy = params.activation == Activation::Rowdy;
    for (l, layer) in grads.layers.iter().enumerate() {
        for &v in layer.dw.iter() {
            f(v);
        }
        for &v in layer.db.iter() {
            f(v);
        }
        if rowdy && l < n_hidden {
            for &v in layer.drowdy.iter() {
                f(v);
            }
        }
    }
}

impl OperatorModel {
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut clone = self.clone();
        visit_mlp(&mut clone.branch, &mut |v| {
            out.push(v);
            v
        });
        visit_mlp(&mut clone.trunk, &mut |v| {
            out.push(v);
            v
        });
        out
    }

    pub fn set_from_flat(&mut self, flat: &[f64]) {
        let mut it = flat.iter();
        visit_mlp(&mut self.branch, &mut |_| *it.next().expect("flat length"));
        visit_mlp(&mut self.trunk, &mut |_| *it.next().expect("flat length"));
        assert!(it.next().is_none(), "flat parameter vector too long");
    }

    pub fn n_params(&self) -> usize {
        self.flatten_params().len()
    }
}

impl ModelGrads {
    pub fn flatten(&self, model: &OperatorModel) -> Vec<f64> {
        let mut out = Vec::new();
        visit_mlp_grads(&model.branch, &self.branch, &mut |v| out.push(v));
        visit_mlp_grads(&model.trunk, &self.trunk, &mut |v| out.push(v));
        out
    }
}

/// Derivative of the hidden activation at z times the incoming gradient,
/// plus the activation-coefficient gradients.
fn activation_backward(
    params: &MlpParams,
    layer: usize,
    z: &Array2<f64>,
    d_act: &Array2<f64>,
) -> (Array2<f64>, [f64; ROWDY_HARMONICS]) {
    match params.activation {
        Activation::Tanh => {
            let dz = z.mapv(|v| {
                let t = v.tanh();
                1.0 - t * t
            }) * d_act;
            (dz, [0.0; ROWDY_HARMONICS])
        }
        Activation::Rowdy => {
            let coeffs = params.layers[layer].rowdy;
            let dz = z.mapv(|v| rowdy_dx(v, &coeffs)) * d_act;
            let mut dcoeff = [0.0; ROWDY_HARMONICS];
            for (k, dc) in dcoeff.iter_mut().enumerate() {
                *dc = z
                    .iter()
                    .zip(d_act.iter())
                    .map(|(&zv, &dv)| rowdy_dcoeff(zv, k) * dv)
                    .sum();
            }
            (dz, dcoeff)
        }
    }
}

/// Standard dense backward pass from the gradient at the network output.
fn mlp_backward(params: &MlpParams, cache: &MlpCache, d_out: Array2<f64>) -> MlpGrads {
    let mut grads = MlpGrads::zeros_like(params);
    let n_layers = params.layers.len();
    let mut d = d_out;
    for l in (0..n_layers).rev() {
        let is_last = l + 1 == n_layers;
        let (dz, drowdy) = if is_last {
            (d, [0.0; ROWDY_HARMONICS])
        } else {
            activation_backward(params, l, &cache.pre[l], &d)
        };
        grads.layers[l].dw = dz.t().dot(&cache.inputs[l]);
        grads.layers[l].db = dz.sum_axis(Axis(0));
        grads.layers[l].drowdy = drowdy;
        d = dz.dot(&params.layers[l].w);
    }
    grads
}

fn reshape_branch(b: &Array2<f64>, p: usize) -> Array2<f64> {
    b.view()
        .into_shape_with_order((OUT_DIM, p))
        .expect("branch head reshape")
        .to_owned()
}

/// Gradients of 0.5-free squared error `sum (u - t)^2 * scale` for one
/// vanilla sample; `d_out` must already be `2 * scale * (u - t)`.
fn vanilla_backward(
    model: &OperatorModel,
    cache: &VanillaCache,
    d_out: &Array2<f64>,
) -> ModelGrads {
    let p = model.latent_dim;
    let bc = reshape_branch(&cache.branch.output, p);
    let d_phi = d_out.dot(&bc);
    let d_bc = d_out.t().dot(&cache.trunk.output);
    let d_b = d_bc
        .into_shape_with_order((1, OUT_DIM * p))
        .expect("head gradient reshape");
    ModelGrads {
        branch: mlp_backward(&model.branch, &cache.branch, d_b),
        trunk: mlp_backward(&model.trunk, &cache.trunk, d_phi),
    }
}

/// Fusion backward: contraction, trunk output layer, modulated hidden
/// layers (with gradients flowing into the cumulative branch sums), then
/// the branch network with those extra activation gradients.
fn fusion_backward(model: &OperatorModel, cache: &FusionCache, d_out: &Array2<f64>) -> ModelGrads {
    let p = model.latent_dim;
    let n_hidden = model.trunk.n_hidden();
    let mut trunk_grads = MlpGrads::zeros_like(&model.trunk);

    let bc = reshape_branch(&cache.branch.output, p);
    let d_latent = d_out.dot(&bc);
    let d_bc = d_out.t().dot(&cache.trunk_latent);
    let d_b = d_bc
        .into_shape_with_order((1, OUT_DIM * p))
        .expect("head gradient reshape");

    // trunk output layer (linear)
    let out_idx = n_hidden;
    trunk_grads.layers[out_idx].dw = d_latent.t().dot(&cache.trunk_inputs[out_idx]);
    trunk_grads.layers[out_idx].db = d_latent.sum_axis(Axis(0));
    let mut d_fused = d_latent.dot(&model.trunk.layers[out_idx].w);

    // modulated hidden layers, collecting gradients for the S vectors
    let mut d_mods: Vec<Array1<f64>> = vec![Array1::zeros(0); n_hidden];
    for l in (0..n_hidden).rev() {
        let sigma = &cache.trunk_sigma[l];
        let d_sigma = &d_fused * &cache.mods[l];
        if l > 0 {
            d_mods[l] = (&d_fused * sigma).sum_axis(Axis(0));
        }
        let (dz, drowdy) = activation_backward(&model.trunk, l, &cache.trunk_pre[l], &d_sigma);
        trunk_grads.layers[l].dw = dz.t().dot(&cache.trunk_inputs[l]);
        trunk_grads.layers[l].db = dz.sum_axis(Axis(0));
        trunk_grads.layers[l].drowdy = drowdy;
        d_fused = dz.dot(&model.trunk.layers[l].w);
    }

    // suffix sums: branch hidden activation m feeds every S_l with l > m
    let w = model
        .trunk
        .layers
        .first()
        .map_or(0, |l| l.out_dim());
    let mut suffix: Vec<Array1<f64>> = vec![Array1::zeros(w); n_hidden];
    let mut running = Array1::zeros(w);
    for m in (0..n_hidden).rev() {
        if m + 1 < n_hidden {
            running += &d_mods[m + 1];
        }
        suffix[m] = running.clone();
    }

    // branch backward with the extra per-hidden-layer gradients
    let mut branch_grads = MlpGrads::zeros_like(&model.branch);
    let head_idx = model.branch.layers.len() - 1;
    branch_grads.layers[head_idx].dw = d_b.t().dot(&cache.branch.inputs[head_idx]);
    branch_grads.layers[head_idx].db = d_b.sum_axis(Axis(0));
    let mut d_act = d_b.dot(&model.branch.layers[head_idx].w);
    for m in (0..head_idx).rev() {
        let extra = &suffix[m];
        let d_total = &d_act
            + &extra
                .view()
                .into_shape_with_order((1, extra.len()))
                .expect("suffix reshape");
        let (dz, drowdy) = activation_backward(&model.branch, m, &cache.branch.pre[m], &d_total);
        branch_grads.layers[m].dw = dz.t().dot(&cache.branch.inputs[m]);
        branch_grads.layers[m].db = dz.sum_axis(Axis(0));
        branch_grads.layers[m].drowdy = drowdy;
        d_act = dz.dot(&model.branch.layers[m].w);
    }

    ModelGrads {
        branch: branch_grads,
        trunk: trunk_grads,
    }
}

/// One training sample as seen by the optimizer.
pub struct SampleBatch<'a> {
    pub branch_input: &'a [f64],
    pub trunk: &'a Array2<f64>,
    pub targets: &'a Array2<f64>,
}

/// Mean-squared-error loss and exact gradients over a set of samples.
/// Per-sample work runs in parallel; the reduction folds in sample order so
/// results do not depend on the worker count.
pub fn loss_and_grads(
    model: &OperatorModel,
    samples: &[SampleBatch<'_>],
) -> Result<(f64, ModelGrads), OperatorError> {
    let total_rows: usize = samples.iter().map(|s| s.trunk.nrows()).sum();
    if total_rows == 0 {
        return Err(OperatorError::Dimension("empty batch".into()));
    }
    let scale = 1.0 / (total_rows * OUT_DIM) as f64;

    let per_sample: Vec<Result<(f64, ModelGrads), OperatorError>> = samples
        .par_iter()
        .map(|s| {
            let (diff, grads) = match model.variant {
                super::Variant::Vanilla => {
                    let cache = deeponet_forward(model, s.branch_input, s.trunk.view())?;
                    let diff = &cache.output - s.targets;
                    let d_out = &diff * (2.0 * scale);
                    (diff, vanilla_backward(model, &cache, &d_out))
                }
                super::Variant::Fusion => {
                    let cache = fusion_forward(model, s.branch_input, s.trunk.view())?;
                    let diff = &cache.output - s.targets;
                    let d_out = &diff * (2.0 * scale);
                    (diff, fusion_backward(model, &cache, &d_out))
                }
            };
            let sse: f64 = diff.iter().map(|v| v * v).sum();
            Ok((sse, grads))
        })
        .collect();

    let mut total_sse = 0.0;
    let mut grads = ModelGrads::zeros_like(model);
    for r in per_sample {
        let (sse, g) = r?;
        total_sse += sse;
        grads.add(&g);
    }
    Ok((total_sse * scale, grads))
}

/// Plain loss without gradients (used for recording and evaluation).
pub fn batch_mse(
    model: &OperatorModel,
    samples: &[SampleBatch<'_>],
) -> Result<f64, OperatorError> {
    let total_rows: usize = samples.iter().map(|s| s.trunk.nrows()).sum();
    let scale = 1.0 / (total_rows * OUT_DIM) as f64;
    let sse: f64 = samples
        .par_iter()
        .map(|s| -> Result<f64, OperatorError> {
            let out = model.forward(s.branch_input, s.trunk.view())?;
            Ok((&out - s.targets).iter().map(|v| v * v).sum())
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .sum();
    Ok(sse * scale)
}
