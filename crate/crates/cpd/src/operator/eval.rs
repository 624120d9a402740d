//! Model evaluation against recorded trajectories.

use ndarray::Array2;

use crate::dataset::tensors::eval_trunk_rows;
use crate::dataset::Normalization;
use crate::trajectory::{Trajectory, NUM_FRAMES};
use crate::vec2::Vec2;

use super::{OperatorError, OperatorModel};

/// Predicted displacements (cm) for every particle of a trajectory at one
/// stage; branch input and trunk coordinates are normalized internally.
pub fn predict_displacements(
    model: &OperatorModel,
    traj: &Trajectory,
    tau: usize,
    norm: &Normalization,
) -> Result<Vec<Vec2>, OperatorError> {
    let trunk = eval_trunk_rows(traj, tau, norm);
    let mu = [norm.norm_geom(traj.geometry_param)];
    let out: Array2<f64> = model.forward(&mu, trunk.view())?;
    Ok(out
        .rows()
        .into_iter()
        .map(|r| {
            let u = norm.denorm_target([r[0], r[1]]);
            Vec2::new(u[0], u[1])
        })
        .collect())
}

/// Pooled relative L2 error per stage over a set of test trajectories:
/// sqrt(sum |u_pred - u_true|^2) / sqrt(sum |u_true|^2), tau = 1..=100.
pub fn relative_l2_over_time(
    model: &OperatorModel,
    test: &[&Trajectory],
    norm: &Normalization,
) -> Result<Vec<(usize, f64)>, OperatorError> {
    let mut curve = Vec::with_capacity(NUM_FRAMES - 1);
    for tau in 1..NUM_FRAMES {
        let mut err_sq = 0.0;
        let mut ref_sq = 0.0;
        for traj in test {
            let pred = predict_displacements(model, traj, tau, norm)?;
            for (p, u_pred) in pred.iter().enumerate() {
                let u_true = traj.displacement(tau, p);
                err_sq += (*u_pred - u_true).norm_sq();
                ref_sq += u_true.norm_sq();
            }
        }
        let rel = if ref_sq > 0.0 {
            (err_sq / ref_sq).sqrt()
        } else {
            f64::NAN
        };
        curve.push((tau, rel));
    }
    Ok(curve)
}
