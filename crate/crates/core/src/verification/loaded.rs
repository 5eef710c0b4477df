//! Fixed-load problem without a known solution: body force `(xy, sin t)`,
//! no fluid source, traction-free and impermeable except on the top edge,
//! where displacement and pressure vanish.

use crate::mesh::{BoundaryPartition, Mesh, Side};
use crate::problem::{BiotProblem, MaterialParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadProblem {
    pub params: MaterialParams,
}

impl LoadProblem {
    /// `μ = 10`, `κ = 1`, `α = 1`, `s₀ = 10⁻³` and the given `λ`.
    pub fn with_lambda(lambda: f64) -> Self {
        LoadProblem { params: MaterialParams { mu: 10.0, lambda, alpha: 1.0, s0: 1e-3, kappa: 1.0 } }
    }
}

const FREE_SIDES: [Side; 3] = [Side::Bottom, Side::Right, Side::Left];

impl BiotProblem for LoadProblem {
    fn params(&self) -> MaterialParams {
        self.params
    }
    fn boundary(&self, mesh: &Mesh) -> BoundaryPartition {
        BoundaryPartition::by_sides(mesh, &FREE_SIDES, &FREE_SIDES)
    }
    fn body_force(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        [x[0] * x[1], t.sin()]
    }
    fn source(&self, _t: f64, _x: [f64; 2]) -> f64 {
        0.0
    }
}
