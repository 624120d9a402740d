//! Per-triangle kinematics: deformation gradient, Lagrangian strain, energy,
//! analytic force gradients, and principal stresses.
//!
//! Each interaction triangle carries a linear map F_d taking reference edge
//! vectors to deformed edge vectors. Energy is the elastic density at the
//! Lagrangian strain of F_d times the reference area; forces are the exact
//! negative gradient of that energy with respect to the deformed corner
//! positions.

use crate::material::MaterialModel;
use crate::vec2::Vec2;

use super::SolverError;

/// Determinant threshold for a degenerate reference edge matrix.
pub const DET_EPSILON: f64 = 1e-12;

pub type Mat2 = [[f64; 2]; 2];

/// Inverse of the reference edge matrix [r_ba | r_ca]; cached per triangle.
#[derive(Debug, Clone, Copy)]
pub struct RefInverse(pub Mat2);

pub fn ref_inverse(tri: [u32; 3], x: &[Vec2]) -> Result<RefInverse, SolverError> {
    let a = x[tri[0] as usize];
    let r1 = x[tri[1] as usize] - a;
    let r2 = x[tri[2] as usize] - a;
    let det = r1.x * r2.y - r2.x * r1.y;
    if det.abs() < DET_EPSILON {
        return Err(SolverError::DegenerateTriangle { triangle: tri });
    }
    let inv = 1.0 / det;
    Ok(RefInverse([
        [r2.y * inv, -r2.x * inv],
        [-r1.y * inv, r1.x * inv],
    ]))
}

fn def_grad_from_inv(tri: [u32; 3], y: &[Vec2], inv: &RefInverse) -> Mat2 {
    let a = y[tri[0] as usize];
    let d1 = y[tri[1] as usize] - a;
    let d2 = y[tri[2] as usize] - a;
    let m = &inv.0;
    // F = [d1 | d2] * R^-1
    [
        [d1.x * m[0][0] + d2.x * m[1][0], d1.x * m[0][1] + d2.x * m[1][1]],
        [d1.y * m[0][0] + d2.y * m[1][0], d1.y * m[0][1] + d2.y * m[1][1]],
    ]
}

/// Discrete deformation gradient of one triangle: solves
/// d_ba = F r_ba, d_ca = F r_ca.
pub fn deformation_gradient(tri: [u32; 3], x: &[Vec2], y: &[Vec2]) -> Result<Mat2, SolverError> {
    let inv = ref_inverse(tri, x)?;
    Ok(def_grad_from_inv(tri, y, &inv))
}

/// Lagrangian strain E = (F^T F - I) / 2; symmetric by construction.
pub fn lagrangian_strain(f: Mat2) -> Mat2 {
    let c00 = f[0][0] * f[0][0] + f[1][0] * f[1][0];
    let c01 = f[0][0] * f[0][1] + f[1][0] * f[1][1];
    let c11 = f[0][1] * f[0][1] + f[1][1] * f[1][1];
    [[0.5 * (c00 - 1.0), 0.5 * c01], [0.5 * c01, 0.5 * (c11 - 1.0)]]
}

/// Voigt vector (E_xx, E_yy, 2 E_xy) of a symmetric strain tensor.
pub fn voigt(e: Mat2) -> [f64; 3] {
    [e[0][0], e[1][1], e[0][1] + e[1][0]]
}

/// Strain energy of one triangle: W = V * psi(E_d).
pub fn triangle_energy(e_d: Mat2, ref_area: f64, mat: &MaterialModel) -> f64 {
    ref_area * mat.energy_density(voigt(e_d))
}

/// Principal stresses (sigma_1 >= sigma_2) of the Voigt stress at E_d.
pub fn principal_stresses(e_d: Mat2, mat: &MaterialModel) -> (f64, f64) {
    let s = mat.stress(voigt(e_d));
    principal_of_voigt(s)
}

pub fn principal_of_voigt(s: [f64; 3]) -> (f64, f64) {
    let mean = 0.5 * (s[0] + s[1]);
    let half_diff = 0.5 * (s[0] - s[1]);
    let radius = (half_diff * half_diff + s[2] * s[2]).sqrt();
    (mean + radius, mean - radius)
}

/// Kinematic state of one triangle at one instant.
#[derive(Debug, Clone, Copy)]
pub struct TriangleKinematics {
    pub def_grad: Mat2,
    pub strain: Mat2,
    /// (sigma_1, sigma_2), sigma_1 >= sigma_2.
    pub principal: (f64, f64),
}

pub fn kinematics(tri: [u32; 3], x: &[Vec2], y: &[Vec2], mat: &MaterialModel)
    -> Result<TriangleKinematics, SolverError>
{
    let f = deformation_gradient(tri, x, y)?;
    let e = lagrangian_strain(f);
    Ok(TriangleKinematics {
        def_grad: f,
        strain: e,
        principal: principal_stresses(e, mat),
    })
}

/// Forces and stresses of one triangle from cached reference data.
/// Returns (forces on alpha/beta/gamma, principal stresses, strain energy).
pub fn triangle_response(
    tri: [u32; 3],
    y: &[Vec2],
    inv: &RefInverse,
    ref_area: f64,
    mat: &MaterialModel,
) -> ([Vec2; 3], (f64, f64), f64) {
    let f = def_grad_from_inv(tri, y, inv);
    let e = lagrangian_strain(f);
    let eps = voigt(e);
    let s = mat.stress(eps);
    let energy = ref_area * 0.5 * (s[0] * eps[0] + s[1] * eps[1] + s[2] * eps[2]);

    // P = F * S_hat with S_hat the symmetric stress tensor
    let p = [
        [f[0][0] * s[0] + f[0][1] * s[2], f[0][0] * s[2] + f[0][1] * s[1]],
        [f[1][0] * s[0] + f[1][1] * s[2], f[1][0] * s[2] + f[1][1] * s[1]],
    ];
    // G = V * P * A^T; columns are dW/d(d_ba), dW/d(d_ca)
    let a = &inv.0;
    let g = [
        [
            ref_area * (p[0][0] * a[0][0] + p[0][1] * a[0][1]),
            ref_area * (p[0][0] * a[1][0] + p[0][1] * a[1][1]),
        ],
        [
            ref_area * (p[1][0] * a[0][0] + p[1][1] * a[0][1]),
            ref_area * (p[1][0] * a[1][0] + p[1][1] * a[1][1]),
        ],
    ];
    let f_beta = Vec2::new(-g[0][0], -g[1][0]);
    let f_gamma = Vec2::new(-g[0][1], -g[1][1]);
    let f_alpha = -(f_beta + f_gamma);
    ([f_alpha, f_beta, f_gamma], principal_of_voigt(s), energy)
}

/// Force triple -dW/dy_i for i in {alpha, beta, gamma}; sums to zero.
pub fn triangle_forces(
    tri: [u32; 3],
    x: &[Vec2],
    y: &[Vec2],
    mat: &MaterialModel,
) -> Result<[Vec2; 3], SolverError> {
    let inv = ref_inverse(tri, x)?;
    let a = x[tri[0] as usize];
    let r1 = x[tri[1] as usize] - a;
    let r2 = x[tri[2] as usize] - a;
    let ref_area = 0.5 * r1.cross(r2).abs();
    let (forces, _, _) = triangle_response(tri, y, &inv, ref_area, mat);
    Ok(forces)
}
