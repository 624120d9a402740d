//! Analytic stress-concentration benchmarks.
//!
//! Simulated sigma_yy profiles along the crack line / hole midline are
//! compared against the Westergaard crack-tip closure and the Kirsch
//! circular-hole closure. Per-triangle stress is the model's native
//! resolution, so profiles are bin-averaged triangle centroids rather than
//! interpolated point samples.

use thiserror::Error;

use crate::geometry::Triangulation;
use crate::material::MaterialModel;
use crate::solver::kinematics;
use crate::vec2::Vec2;

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("analytic profile undefined at x = {x} (discontinuity at {edge})")]
    Domain { x: f64, edge: f64 },
    #[error("profile extraction failed: {0}")]
    Extraction(String),
}

/// sigma_yy ahead of a crack tip: sigma_inf / sqrt(1 - (a/x)^2), x > a.
pub fn westergaard(x: f64, a: f64, sigma_inf: f64) -> Result<f64, ValidationError> {
    if !(a > 0.0) || x <= a {
        return Err(ValidationError::Domain { x, edge: a });
    }
    let q = a / x;
    Ok(sigma_inf / (1.0 - q * q).sqrt())
}

/// sigma_yy beside a circular hole:
/// (sigma_inf/2)(1 + (r/x)^2) + (sigma_inf/2)(1 + 3 (r/x)^4), x >= r.
pub fn kirsch(x: f64, r: f64, sigma_inf: f64) -> Result<f64, ValidationError> {
    if !(r > 0.0) || x < r {
        return Err(ValidationError::Domain { x, edge: r });
    }
    let q = r / x;
    let q2 = q * q;
    Ok(0.5 * sigma_inf * (1.0 + q2) + 0.5 * sigma_inf * (1.0 + 3.0 * q2 * q2))
}

/// Bin-averaged sigma_yy samples along a horizontal extraction line.
#[derive(Debug, Clone)]
pub struct StressProfile {
    /// Distance from the discontinuity along the line (cm), strictly increasing.
    pub sample_x: Vec<f64>,
    pub sigma_yy: Vec<f64>,
    /// Far-field stress estimated from the outer band of the domain.
    pub far_field: f64,
}

/// Extraction line: horizontal at `y_level`, distances measured from
/// `origin_x` outward; samples are kept for distance in [dist_min, dist_max].
/// `two_sided` mirrors the left side of the origin onto the same distance
/// axis (used for the hole, which is symmetric).
#[derive(Debug, Clone, Copy)]
pub struct ExtractionLine {
    pub y_level: f64,
    pub origin_x: f64,
    pub dist_min: f64,
    pub dist_max: f64,
    pub two_sided: bool,
}

/// Per-triangle sigma_yy at the reference centroid for one snapshot.
fn triangle_sigma_yy(
    ref_positions: &[Vec2],
    positions: &[Vec2],
    tri: &Triangulation,
    mat: &MaterialModel,
    t: usize,
) -> Option<(Vec2, f64, f64)> {
    if !tri.alive[t] {
        return None;
    }
    let v = tri.triangles[t];
    let f = kinematics::deformation_gradient(v, ref_positions, positions).ok()?;
    let eps = kinematics::voigt(kinematics::lagrangian_strain(f));
    let s = mat.stress(eps);
    let centroid = (ref_positions[v[0] as usize]
        + ref_positions[v[1] as usize]
        + ref_positions[v[2] as usize])
        * (1.0 / 3.0);
    Some((centroid, s[1], tri.ref_area[t]))
}

/// Extract a bin-averaged sigma_yy profile from one snapshot.
///
/// Triangle centroids within bin_width/2 of the line are binned by distance
/// from the origin (bins of `bin_width` starting at `dist_min`) and
/// area-weight averaged. Empty bins are omitted. The far field is the mean
/// sigma_yy over triangles in the rightmost 10% of the domain width.
pub fn extract_profile(
    ref_positions: &[Vec2],
    positions: &[Vec2],
    tri: &Triangulation,
    mat: &MaterialModel,
    line: &ExtractionLine,
    bin_width: f64,
    domain_width: f64,
) -> Result<StressProfile, ValidationError> {
    if !(bin_width > 0.0) {
        return Err(ValidationError::Extraction("bin_width must be positive".into()));
    }
    let n_bins = ((line.dist_max - line.dist_min) / bin_width).ceil() as usize;
    if n_bins == 0 {
        return Err(ValidationError::Extraction("empty extraction range".into()));
    }
    let mut weighted = vec![0.0_f64; n_bins];
    let mut weights = vec![0.0_f64; n_bins];
    let mut far_sum = 0.0;
    let mut far_weight = 0.0;

    for t in 0..tri.len() {
        let Some((centroid, s_yy, area)) = triangle_sigma_yy(ref_positions, positions, tri, mat, t)
        else {
            continue;
        };
        if centroid.x >= 0.9 * domain_width {
            far_sum += s_yy * area;
            far_weight += area;
        }
        if (centroid.y - line.y_level).abs() > 0.5 * bin_width {
            continue;
        }
        let dist = if line.two_sided {
            (centroid.x - line.origin_x).abs()
        } else {
            centroid.x - line.origin_x
        };
        if dist < line.dist_min || dist >= line.dist_max {
            continue;
        }
        let b = ((dist - line.dist_min) / bin_width) as usize;
        if b < n_bins {
            weighted[b] += s_yy * area;
            weights[b] += area;
        }
    }

    if far_weight <= 0.0 {
        return Err(ValidationError::Extraction("empty far-field band".into()));
    }
    let far_field = far_sum / far_weight;

    let mut sample_x = Vec::new();
    let mut sigma_yy = Vec::new();
    for b in 0..n_bins {
        if weights[b] > 0.0 {
            sample_x.push(line.dist_min + (b as f64 + 0.5) * bin_width);
            sigma_yy.push(weighted[b] / weights[b]);
        }
    }
    if sample_x.len() < 5 {
        return Err(ValidationError::Extraction(format!(
            "only {} non-empty bins, need at least 5",
            sample_x.len()
        )));
    }
    Ok(StressProfile {
        sample_x,
        sigma_yy,
        far_field,
    })
}

/// Relative RMS and max error of a simulated profile against an analytic
/// closure, excluding the sample nearest the discontinuity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileError {
    pub rms_rel: f64,
    pub max_rel: f64,
}

pub fn profile_error<F>(sim: &StressProfile, analytic: F) -> Result<ProfileError, ValidationError>
where
    F: Fn(f64) -> Result<f64, ValidationError>,
{
    if sim.sample_x.len() < 5 {
        return Err(ValidationError::Extraction(
            "need at least 5 samples for an error metric".into(),
        ));
    }
    let mut sq_sum = 0.0;
    let mut max_rel: f64 = 0.0;
    let mut count = 0usize;
    // skip the first (nearest-to-discontinuity) sample
    for (&x, &s) in sim.sample_x.iter().zip(&sim.sigma_yy).skip(1) {
        let a = analytic(x)?;
        let rel = (s - a) / a;
        sq_sum += rel * rel;
        max_rel = max_rel.max(rel.abs());
        count += 1;
    }
    Ok(ProfileError {
        rms_rel: (sq_sum / count as f64).sqrt(),
        max_rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn westergaard_hand_values() {
        // x = a sqrt(2) -> sigma sqrt(2)
        let v = westergaard(2.0_f64.sqrt(), 1.0, 1.0).unwrap();
        assert!((v - 2.0_f64.sqrt()).abs() < 1e-12);
        // a = 1, sigma = 1, x = 1.25 -> 1 / sqrt(1 - 0.64)
        let v = westergaard(1.25, 1.0, 1.0).unwrap();
        assert!((v - 1.0 / (1.0 - 0.64_f64).sqrt()).abs() < 1e-12);
        assert!((v - 1.6667).abs() < 1e-4);
        // asymptote: 1/sqrt(1 - 0.01) at x = 10 a, ~0.5% above far field
        let v = westergaard(10.0, 1.0, 3.0).unwrap();
        assert!((v - 3.0 / 0.99_f64.sqrt()).abs() < 1e-12);
        assert!((v - 3.0).abs() / 3.0 < 0.0051);
    }

    #[test]
    fn westergaard_domain_errors() {
        assert!(westergaard(1.0, 1.0, 1.0).is_err());
        assert!(westergaard(0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn kirsch_hand_values() {
        // stress concentration factor 3 at the rim
        let v = kirsch(1.0, 1.0, 1.0).unwrap();
        assert!((v - 3.0).abs() < 1e-12);
        // r = 1, sigma = 1, x = 2 -> 0.5 * 1.25 + 0.5 * 1.1875
        let v = kirsch(2.0, 1.0, 1.0).unwrap();
        assert!((v - 1.21875).abs() < 1e-12);
        // asymptote
        let v = kirsch(1000.0, 1.0, 2.0).unwrap();
        assert!((v - 2.0).abs() / 2.0 < 1e-5);
        assert!(kirsch(0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn closures_decrease_monotonically_to_far_field() {
        let n = 1000;
        let mut prev_w = f64::INFINITY;
        let mut prev_k = f64::INFINITY;
        for i in 0..n {
            let x = 1.01 + 20.0 * i as f64 / n as f64;
            let w = westergaard(x, 1.0, 1.0).unwrap();
            let k = kirsch(x, 1.0, 1.0).unwrap();
            assert!(w < prev_w && w > 1.0);
            assert!(k < prev_k && k > 1.0);
            prev_w = w;
            prev_k = k;
        }
        assert!(prev_w < 1.005 && prev_k < 1.005);
    }

    #[test]
    fn profile_error_zero_for_exact_and_scale_for_biased() {
        let xs: Vec<f64> = (0..10).map(|i| 1.2 + 0.2 * i as f64).collect();
        let exact: Vec<f64> = xs.iter().map(|&x| kirsch(x, 1.0, 1.0).unwrap()).collect();
        let sim = StressProfile {
            sample_x: xs.clone(),
            sigma_yy: exact.clone(),
            far_field: 1.0,
        };
        let err = profile_error(&sim, |x| kirsch(x, 1.0, 1.0)).unwrap();
        assert!(err.rms_rel < 1e-14 && err.max_rel < 1e-14);

        let sim_biased = StressProfile {
            sample_x: xs,
            sigma_yy: exact.iter().map(|v| 1.1 * v).collect(),
            far_field: 1.0,
        };
        let err = profile_error(&sim_biased, |x| kirsch(x, 1.0, 1.0)).unwrap();
        assert!((err.rms_rel - 0.1).abs() < 1e-12);
        assert!((err.max_rel - 0.1).abs() < 1e-12);
    }

    #[test]
    fn profile_error_needs_five_samples() {
        let sim = StressProfile {
            sample_x: vec![1.2, 1.4],
            sigma_yy: vec![1.0, 1.0],
            far_field: 1.0,
        };
        assert!(profile_error(&sim, |x| kirsch(x, 1.0, 1.0)).is_err());
    }
}
