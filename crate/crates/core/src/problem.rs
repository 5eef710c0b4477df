//! Material parameters and the data a Biot problem has to supply.

use thiserror::Error;

use crate::mesh::{BoundaryPartition, Mesh};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("parameter {name} = {value} must be {requirement}")]
    OutOfRange { name: &'static str, value: f64, requirement: &'static str },
}

/// Lamé coefficients, Biot–Willis coefficient, storage and permeability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    pub mu: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub s0: f64,
    pub kappa: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams { mu: 1.0, lambda: 1.0, alpha: 1.0, s0: 1.0, kappa: 1.0 }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        let check = |name, value: f64, ok: bool, requirement| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(ParamError::OutOfRange { name, value, requirement })
            }
        };
        check("mu", self.mu, self.mu > 0.0, "positive")?;
        check("lambda", self.lambda, self.lambda >= 0.0, "nonnegative")?;
        check("alpha", self.alpha, self.alpha > 0.0, "positive")?;
        check("s0", self.s0, self.s0 >= 0.0, "nonnegative")?;
        check("kappa", self.kappa, self.kappa > 0.0, "positive")
    }

    /// `λ / (2μ + 2λ)`, the trace coefficient of the compliance tensor.
    pub fn trace_coefficient(&self) -> f64 {
        self.lambda / (2.0 * self.mu + 2.0 * self.lambda)
    }

    /// Compliance `Aτ = (τ − λ/(2μ+2λ) tr(τ) I) / 2μ`, applied to any 2×2
    /// matrix (skew parts are scaled by `1/2μ`).
    pub fn apply_compliance(&self, tau: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
        let c = self.trace_coefficient();
        let tr = tau[0][0] + tau[1][1];
        let s = 0.5 / self.mu;
        [[s * (tau[0][0] - c * tr), s * tau[0][1]], [s * tau[1][0], s * (tau[1][1] - c * tr)]]
    }

    /// Stress of a displacement gradient and pressure: `2με + λ div u I − α p I`.
    pub fn stress(&self, grad_u: [[f64; 2]; 2], p: f64) -> [[f64; 2]; 2] {
        let div = grad_u[0][0] + grad_u[1][1];
        let off = self.mu * (grad_u[0][1] + grad_u[1][0]);
        let diag = self.lambda * div - self.alpha * p;
        [[2.0 * self.mu * grad_u[0][0] + diag, off], [off, 2.0 * self.mu * grad_u[1][1] + diag]]
    }
}

/// Fields of the five-field formulation at one point. The rotation is the
/// skew matrix `[[0, γ], [−γ, 0]]`, stored through `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldValues {
    pub sigma: [[f64; 2]; 2],
    pub u: [f64; 2],
    pub gamma: f64,
    pub z: [f64; 2],
    pub p: f64,
}

/// Data of a Biot problem on the unit square.
///
/// Boundary data on `Γ_d`/`Γ_p` enter as natural terms; traction and normal
/// flux on `Γ_t`/`Γ_f` are imposed essentially. `normal` is the outward unit
/// normal.
pub trait BiotProblem {
    fn params(&self) -> MaterialParams;
    fn boundary(&self, mesh: &Mesh) -> BoundaryPartition;
    fn body_force(&self, t: f64, x: [f64; 2]) -> [f64; 2];
    fn source(&self, t: f64, x: [f64; 2]) -> f64;
    fn displacement_bc(&self, _t: f64, _x: [f64; 2]) -> [f64; 2] {
        [0.0; 2]
    }
    fn pressure_bc(&self, _t: f64, _x: [f64; 2]) -> f64 {
        0.0
    }
    fn traction_bc(&self, _t: f64, _x: [f64; 2], _normal: [f64; 2]) -> [f64; 2] {
        [0.0; 2]
    }
    fn flux_bc(&self, _t: f64, _x: [f64; 2], _normal: [f64; 2]) -> f64 {
        0.0
    }
    /// Initial data for all five fields.
    fn initial(&self, _x: [f64; 2]) -> FieldValues {
        FieldValues::default()
    }
}

/// Analytic solution used for error measurement.
pub trait ExactSolution {
    fn fields(&self, t: f64, x: [f64; 2]) -> FieldValues;
}
