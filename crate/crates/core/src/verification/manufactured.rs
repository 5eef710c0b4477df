//! Closed-form manufactured solution on the unit square with displacement
//! `(x cos t, (1 + y²) cos(t + 1) sin πx)` and pressure `x² y cos t²`.

use std::f64::consts::PI;

use crate::mesh::{BoundaryPartition, Mesh};
use crate::problem::{BiotProblem, ExactSolution, FieldValues, MaterialParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedCase {
    pub params: MaterialParams,
}

impl ManufacturedCase {
    pub fn new(params: MaterialParams) -> Self {
        ManufacturedCase { params }
    }

    pub fn displacement(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        let [x, y] = x;
        [x * t.cos(), (1.0 + y * y) * (t + 1.0).cos() * (PI * x).sin()]
    }

    pub fn pressure(&self, t: f64, x: [f64; 2]) -> f64 {
        x[0] * x[0] * x[1] * (t * t).cos()
    }

    /// `∇u` with rows indexed by displacement component.
    pub fn grad_displacement(&self, t: f64, x: [f64; 2]) -> [[f64; 2]; 2] {
        let [x, y] = x;
        let c1 = (t + 1.0).cos();
        [[t.cos(), 0.0], [PI * (1.0 + y * y) * c1 * (PI * x).cos(), 2.0 * y * c1 * (PI * x).sin()]]
    }

    pub fn stress(&self, t: f64, x: [f64; 2]) -> [[f64; 2]; 2] {
        self.params.stress(self.grad_displacement(t, x), self.pressure(t, x))
    }

    /// Off-diagonal entry of the skew part of `∇u`.
    pub fn rotation(&self, t: f64, x: [f64; 2]) -> f64 {
        let g = self.grad_displacement(t, x);
        0.5 * (g[0][1] - g[1][0])
    }

    /// `κ∇p`.
    pub fn flux(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        let [x, y] = x;
        let c = (t * t).cos();
        [self.params.kappa * 2.0 * x * y * c, self.params.kappa * x * x * c]
    }

    /// `f = −div σ`.
    pub fn body_force(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        let MaterialParams { mu, lambda, alpha, .. } = self.params;
        let [x, y] = x;
        let c1 = (t + 1.0).cos();
        let ct = (t * t).cos();
        let (sx, cx) = (PI * x).sin_cos();
        let f1 = 2.0 * lambda * PI * y * c1 * cx - 2.0 * alpha * x * y * ct + 2.0 * mu * PI * y * c1 * cx;
        let f2 = -mu * PI * PI * (1.0 + y * y) * c1 * sx + 4.0 * mu * c1 * sx + 2.0 * lambda * c1 * sx - alpha * x * x * ct;
        [-f1, -f2]
    }

    /// `g = s₀ ṗ + α div u̇ − div(κ∇p)`.
    pub fn source(&self, t: f64, x: [f64; 2]) -> f64 {
        let MaterialParams { alpha, s0, kappa, .. } = self.params;
        let [x, y] = x;
        let p_t = -2.0 * t * x * x * y * (t * t).sin();
        let divu_t = -t.sin() - 2.0 * y * (t + 1.0).sin() * (PI * x).sin();
        let lap_p = 2.0 * y * (t * t).cos();
        s0 * p_t + alpha * divu_t - kappa * lap_p
    }
}

impl ExactSolution for ManufacturedCase {
    fn fields(&self, t: f64, x: [f64; 2]) -> FieldValues {
        FieldValues {
            sigma: self.stress(t, x),
            u: self.displacement(t, x),
            gamma: self.rotation(t, x),
            z: self.flux(t, x),
            p: self.pressure(t, x),
        }
    }
}

impl BiotProblem for ManufacturedCase {
    fn params(&self) -> MaterialParams {
        self.params
    }
    fn boundary(&self, mesh: &Mesh) -> BoundaryPartition {
        BoundaryPartition::all_dirichlet(mesh)
    }
    fn body_force(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        ManufacturedCase::body_force(self, t, x)
    }
    fn source(&self, t: f64, x: [f64; 2]) -> f64 {
        ManufacturedCase::source(self, t, x)
    }
    fn displacement_bc(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        self.displacement(t, x)
    }
    fn pressure_bc(&self, t: f64, x: [f64; 2]) -> f64 {
        self.pressure(t, x)
    }
    fn traction_bc(&self, t: f64, x: [f64; 2], n: [f64; 2]) -> [f64; 2] {
        let s = self.stress(t, x);
        [s[0][0] * n[0] + s[0][1] * n[1], s[1][0] * n[0] + s[1][1] * n[1]]
    }
    fn flux_bc(&self, t: f64, x: [f64; 2], n: [f64; 2]) -> f64 {
        let z = self.flux(t, x);
        z[0] * n[0] + z[1] * n[1]
    }
    fn initial(&self, x: [f64; 2]) -> FieldValues {
        self.fields(0.0, x)
    }
}
