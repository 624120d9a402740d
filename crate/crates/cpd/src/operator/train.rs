//! Full-batch Adam training loop with the two learning-rate schedules used
//! by the study: a constant rate for the plain variant and an exponential
//! decay for the fusion variant.

use super::backward::{batch_mse, loss_and_grads, SampleBatch};
use super::{OperatorError, OperatorModel};
use crate::dataset::TrainingTensors;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Constant { lr: f64 },
    /// lr(t) = init * rate^(t / steps) with a continuous exponent.
    Exponential { init: f64, decay_steps: usize, decay_rate: f64 },
}

impl Schedule {
    /// Learning rate at 0-based iteration index t.
    pub fn lr_at(&self, t: usize) -> f64 {
        match *self {
            Schedule::Constant { lr } => lr,
            Schedule::Exponential {
                init,
                decay_steps,
                decay_rate,
            } => init * decay_rate.powf(t as f64 / decay_steps as f64),
        }
    }

    /// The study's settings: constant 1e-4 for vanilla, exponential decay
    /// from 1e-3 with step 2000 and rate 0.91 for fusion.
    pub fn vanilla_default() -> Schedule {
        Schedule::Constant { lr: 1e-4 }
    }

    pub fn fusion_default() -> Schedule {
        Schedule::Exponential {
            init: 1e-3,
            decay_steps: 2000,
            decay_rate: 0.91,
        }
    }

    pub fn validate(&self) -> Result<(), OperatorError> {
        let ok = match *self {
            Schedule::Constant { lr } => lr > 0.0 && lr.is_finite(),
            Schedule::Exponential {
                init,
                decay_steps,
                decay_rate,
            } => init > 0.0 && decay_steps > 0 && (0.0..1.0).contains(&decay_rate),
        };
        if ok {
            Ok(())
        } else {
            Err(OperatorError::Dimension("invalid schedule".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment estimates over the flattened parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Completed steps (bias correction uses step + 1).
    pub step: usize,
}

impl AdamState {
    pub fn new(n_params: usize) -> AdamState {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }
}

/// One Adam update with bias correction, in place on the flat parameters.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    adam: &AdamParams,
    lr: f64,
) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - adam.beta1.powf(t);
    let bc2 = 1.0 - adam.beta2.powf(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = adam.beta1 * state.m[i] + (1.0 - adam.beta1) * g;
        state.v[i] = adam.beta2 * state.v[i] + (1.0 - adam.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + adam.epsilon);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub schedule: Schedule,
    pub iterations: usize,
    pub seed: u64,
    pub adam: AdamParams,
    /// Record the loss every this many iterations.
    pub record_every: usize,
}

impl TrainConfig {
    pub fn new(schedule: Schedule, iterations: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            schedule,
            iterations,
            seed,
            adam: AdamParams::default(),
            record_every: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub model: OperatorModel,
    /// (iteration, mse) pairs, recorded every `record_every` iterations.
    pub loss_history: Vec<(usize, f64)>,
    pub final_mse: f64,
}

/// Full-batch gradient descent over the training split.
///
/// Deterministic for a fixed seed: the initial weights come from the seeded
/// generator and the batch reduction is worker-count independent.
pub fn train(
    mut model: OperatorModel,
    tensors: &TrainingTensors,
    config: &TrainConfig,
) -> Result<TrainResult, OperatorError> {
    config.schedule.validate()?;
    let samples: Vec<SampleBatch<'_>> = tensors
        .train_samples()
        .map(|s| SampleBatch {
            branch_input: &s.branch_input,
            trunk: &s.trunk,
            targets: &s.targets,
        })
        .collect();
    if samples.is_empty() {
        return Err(OperatorError::Dimension("no training samples".into()));
    }

    let mut flat = model.flatten_params();
    let mut state = AdamState::new(flat.len());
    let mut loss_history = Vec::with_capacity(config.iterations / config.record_every + 1);
    let mut last_loss = f64::NAN;

    for iter in 1..=config.iterations {
        let (mse, grads) = loss_and_grads(&model, &samples)?;
        if !mse.is_finite() {
            return Err(OperatorError::Diverged {
                iteration: iter,
                loss: mse,
            });
        }
        let g = grads.flatten(&model);
        let lr = config.schedule.lr_at(iter - 1);
        adam_step(&mut flat, &g, &mut state, &config.adam, lr);
        model.set_from_flat(&flat);
        last_loss = mse;
        if iter % config.record_every == 0 {
            loss_history.push((iter, mse));
        }
    }
    let final_mse = if config.iterations == 0 {
        batch_mse(&model, &samples)?
    } else {
        last_loss
    };
    Ok(TrainResult {
        model,
        loss_history,
        final_mse,
    })
}
