//! Local recovery of a cellwise linear displacement.
//!
//! On each cell `u*` keeps the cell mean of `u_h` and takes as its constant
//! gradient the L² projection of `A(σ_h + αp_h I) + γ_h` onto constants, which
//! is the solution of the local problem `(∇u*, ∇v) = (A(σ_h + αp_h I) + γ_h, ∇v)`
//! over mean-free linear `v`.

use std::sync::Arc;

use crate::assembly::MixedSpaces;
use crate::element::{ElementKind, FeError};
use crate::problem::MaterialParams;
use crate::quadrature::quadrature;
use crate::solver::DiscreteState;
use crate::space::{FieldRole, FunctionSpace};

/// Space of the recovered displacement: two discontinuous linear components.
pub fn recovered_space(spaces: &MixedSpaces) -> Result<FunctionSpace, FeError> {
    FunctionSpace::new(Arc::clone(spaces.mesh()), ElementKind::Dg1, FieldRole::Recovered)
}

/// Cell means of the displacement gradient surrogate
/// `A(σ_h + αp_h I) + γ_h`, one 2×2 matrix per cell.
pub fn cell_gradients(spaces: &MixedSpaces, params: &MaterialParams, state: &DiscreteState) -> Vec<[[f64; 2]; 2]> {
    let mesh = spaces.mesh();
    let rule = quadrature(2).expect("degree 2");
    let tabs = [
        spaces.sigma.element().tabulate(&rule.points),
        spaces.gamma.element().tabulate(&rule.points),
        spaces.p.element().tabulate(&rule.points),
    ];
    let (mut vs, mut vg, mut vp, mut scratch) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut out = Vec::with_capacity(mesh.num_cells());
    let (mut sig, mut g, mut p) = ([0.0; 4], [0.0; 1], [0.0; 1]);
    for c in 0..mesh.num_cells() {
        spaces.sigma.physical_values(c, &tabs[0], &mut vs, &mut scratch);
        spaces.gamma.physical_values(c, &tabs[1], &mut vg, &mut scratch);
        spaces.p.physical_values(c, &tabs[2], &mut vp, &mut scratch);
        let (sd, _) = spaces.sigma.cell_dofs(c);
        let (gd, _) = spaces.gamma.cell_dofs(c);
        let (pd, _) = spaces.p.cell_dofs(c);
        let (ls, lg, lp) = (sd.len(), gd.len(), pd.len());
        let mut mean = [[0.0; 2]; 2];
        // weights sum to 1/2 on the reference cell
        for (q, &w) in rule.weights.iter().enumerate() {
            spaces.sigma.combine_physical(&state.sigma, sd, &vs[q * ls..(q + 1) * ls], &mut sig);
            spaces.gamma.combine_physical(&state.gamma, gd, &vg[q * lg..(q + 1) * lg], &mut g);
            spaces.p.combine_physical(&state.p, pd, &vp[q * lp..(q + 1) * lp], &mut p);
            let ap = params.alpha * p[0];
            let a = params.apply_compliance([[sig[0] + ap, sig[1]], [sig[2], sig[3] + ap]]);
            let w = 2.0 * w;
            mean[0][0] += w * a[0][0];
            mean[0][1] += w * (a[0][1] + g[0]);
            mean[1][0] += w * (a[1][0] - g[0]);
            mean[1][1] += w * a[1][1];
        }
        out.push(mean);
    }
    out
}

/// Recovered displacement as coefficients in [`recovered_space`] (vertex
/// values per cell).
pub fn postprocess_displacement(
    spaces: &MixedSpaces,
    params: &MaterialParams,
    state: &DiscreteState,
    recovered: &FunctionSpace,
) -> Vec<f64> {
    let mesh = spaces.mesh();
    let grads = cell_gradients(spaces, params, state);
    let mut out = vec![0.0; recovered.dim()];
    let base = recovered.base_dim();
    let ubase = spaces.u.base_dim();
    for c in 0..mesh.num_cells() {
        let xc = mesh.cell_centroid(c);
        let verts = mesh.cell_vertices(c);
        let (ud, _) = spaces.u.cell_dofs(c);
        let (rd, _) = recovered.cell_dofs(c);
        for r in 0..2 {
            let mean = state.u[r * ubase + ud[0]];
            for k in 0..3 {
                let dx = [verts[k][0] - xc[0], verts[k][1] - xc[1]];
                out[r * base + rd[k]] = mean + grads[c][r][0] * dx[0] + grads[c][r][1] * dx[1];
            }
        }
    }
    out
}
