//! L² errors of a discrete state against an exact solution, and relative
//! errors against a numerical solution on a nested finer mesh.

use crate::assembly::MixedSpaces;
use crate::problem::{ExactSolution, MaterialParams};
use crate::quadrature::quadrature;
use crate::solver::DiscreteState;
use crate::space::FunctionSpace;
use crate::verification::postprocess::{postprocess_displacement, recovered_space};

/// L² errors of all fields at one time. The rotation error is measured on the
/// scalar `γ₁₂`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldErrors {
    pub sigma: f64,
    pub u: f64,
    pub ustar: f64,
    pub gamma: f64,
    pub z: f64,
    pub p: f64,
}

impl FieldErrors {
    /// Errors in table order `σ, u, u*, γ, z, p`.
    pub fn as_array(&self) -> [f64; 6] {
        [self.sigma, self.u, self.ustar, self.gamma, self.z, self.p]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        FieldErrors { sigma: a[0], u: a[1], ustar: a[2], gamma: a[3], z: a[4], p: a[5] }
    }

    pub fn compute(spaces: &MixedSpaces, params: &MaterialParams, state: &DiscreteState, exact: &dyn ExactSolution) -> Self {
        let t = state.time;
        let sigma = spaces.sigma.l2_error(&state.sigma, |x, out| {
            let s = exact.fields(t, x).sigma;
            out.copy_from_slice(&[s[0][0], s[0][1], s[1][0], s[1][1]]);
        });
        let disp = |x: [f64; 2], out: &mut [f64]| out.copy_from_slice(&exact.fields(t, x).u);
        let u = spaces.u.l2_error(&state.u, disp);
        let rec = recovered_space(spaces).expect("linear space on a valid mesh");
        let ustar_coeffs = postprocess_displacement(spaces, params, state, &rec);
        let ustar = rec.l2_error(&ustar_coeffs, disp);
        let gamma = spaces.gamma.l2_error(&state.gamma, |x, out| out[0] = exact.fields(t, x).gamma);
        let z = spaces.z.l2_error(&state.z, |x, out| out.copy_from_slice(&exact.fields(t, x).z));
        let p = spaces.p.l2_error(&state.p, |x, out| out[0] = exact.fields(t, x).p);
        FieldErrors { sigma, u, ustar, gamma, z, p }
    }
}

/// `‖f_c − f_f‖ / ‖f_f‖` where `f_c` lives on a coarse mesh and `f_f` on a
/// finer mesh whose cells each lie inside one coarse cell. Integration uses
/// the fine mesh quadrature.
pub fn relative_error_on_fine(coarse: &FunctionSpace, coarse_coeffs: &[f64], fine: &FunctionSpace, fine_coeffs: &[f64]) -> f64 {
    assert_eq!(coarse.value_size(), fine.value_size(), "fields must have the same shape");
    let rule = quadrature(6).expect("degree 6");
    let tab = fine.element().tabulate(&rule.points);
    let cmesh = coarse.mesh();
    let fmesh = fine.mesh();
    let vs = fine.value_size();
    let (mut vals, mut divs) = (Vec::new(), Vec::new());
    let (mut vf, mut vc) = ([0.0; 8], [0.0; 8]);
    let (mut diff, mut norm) = (0.0, 0.0);
    for c in 0..fmesh.num_cells() {
        let map = fine.map(c);
        let jac = map.det.abs();
        let coarse_cell = cmesh.locate(fmesh.cell_centroid(c)).expect("fine cell inside the coarse domain");
        let cmap = coarse.map(coarse_cell);
        fine.physical_values(c, &tab, &mut vals, &mut divs);
        let (dofs, _) = fine.cell_dofs(c);
        let l = dofs.len();
        for (q, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            fine.combine_physical(fine_coeffs, dofs, &vals[q * l..(q + 1) * l], &mut vf);
            let x = map.to_physical(p);
            coarse.evaluate(coarse_coeffs, coarse_cell, cmap.to_reference(x), &mut vc);
            for k in 0..vs {
                diff += w * jac * (vc[k] - vf[k]).powi(2);
                norm += w * jac * vf[k].powi(2);
            }
        }
    }
    if norm > 0.0 {
        (diff / norm).sqrt()
    } else {
        diff.sqrt()
    }
}
