//! Isotropic elastic material in Voigt form with failure strengths.
//!
//! Units: stress in GPa, lengths in cm, areal density in kg/cm^2. The
//! constitutive matrix relates the Voigt strain (E_xx, E_yy, 2 E_xy) to the
//! Voigt stress (S_xx, S_yy, S_xy).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MaterialError {
    #[error("invalid material parameter `{param}`: {msg}")]
    Invalid { param: &'static str, msg: String },
}

/// 2D reduction used to close the 3x3 constitutive matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Closure2D {
    #[default]
    PlaneStress,
    PlaneStrain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialModel {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub closure: Closure2D,
    /// Voigt constitutive matrix, symmetric positive definite (GPa).
    pub constitutive: [[f64; 3]; 3],
    pub tensile_strength: f64,
    pub compressive_strength: f64,
    /// Areal density (kg/cm^2).
    pub density: f64,
}

impl MaterialModel {
    pub fn new(
        youngs_modulus: f64,
        poisson_ratio: f64,
        closure: Closure2D,
        tensile_strength: f64,
        compressive_strength: f64,
        density: f64,
    ) -> Result<Self, MaterialError> {
        if !(youngs_modulus.is_finite() && youngs_modulus > 0.0) {
            return Err(MaterialError::Invalid {
                param: "youngs_modulus",
                msg: "must be positive".into(),
            });
        }
        if !(poisson_ratio > -1.0 && poisson_ratio < 0.5) {
            return Err(MaterialError::Invalid {
                param: "poisson_ratio",
                msg: format!("must lie in (-1, 0.5), got {poisson_ratio}"),
            });
        }
        for (param, v) in [
            ("tensile_strength", tensile_strength),
            ("compressive_strength", compressive_strength),
            ("density", density),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(MaterialError::Invalid {
                    param,
                    msg: "must be positive".into(),
                });
            }
        }

        let e = youngs_modulus;
        let nu = poisson_ratio;
        let shear = e / (2.0 * (1.0 + nu));
        let (c11, c12) = match closure {
            Closure2D::PlaneStress => {
                let f = e / (1.0 - nu * nu);
                (f, nu * f)
            }
            Closure2D::PlaneStrain => {
                let f = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
                (f * (1.0 - nu), f * nu)
            }
        };
        let constitutive = [[c11, c12, 0.0], [c12, c11, 0.0], [0.0, 0.0, shear]];

        Ok(MaterialModel {
            youngs_modulus,
            poisson_ratio,
            closure,
            constitutive,
            tensile_strength,
            compressive_strength,
            density,
        })
    }

    /// Steel-like benchmark material: E = 210 GPa, nu = 0.3.
    pub fn steel(tensile_strength: f64, compressive_strength: f64, density: f64) -> Self {
        Self::new(
            210.0,
            0.3,
            Closure2D::PlaneStress,
            tensile_strength,
            compressive_strength,
            density,
        )
        .expect("valid constants")
    }

    /// Voigt stress from Voigt strain (eps_xx, eps_yy, 2 eps_xy).
    pub fn stress(&self, strain: [f64; 3]) -> [f64; 3] {
        let c = &self.constitutive;
        [
            c[0][0] * strain[0] + c[0][1] * strain[1] + c[0][2] * strain[2],
            c[1][0] * strain[0] + c[1][1] * strain[1] + c[1][2] * strain[2],
            c[2][0] * strain[0] + c[2][1] * strain[1] + c[2][2] * strain[2],
        ]
    }

    /// Strain energy density (1/2) eps^T C eps.
    pub fn energy_density(&self, strain: [f64; 3]) -> f64 {
        let s = self.stress(strain);
        0.5 * (s[0] * strain[0] + s[1] * strain[1] + s[2] * strain[2])
    }
}
