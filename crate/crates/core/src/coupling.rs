//! Node trace data and junction fluxes.
//!
//! The central scheme closes the junction with linear trace systems instead of
//! a nonlinear Riemann solver. For each step the traces `(u_R, v_R)` per
//! incoming edge and `(u_L, v_L)` per outgoing edge are determined by
//!
//! * the incoming characteristic invariant `v_R + lambda_in u_R = v + lambda_in u`
//!   evaluated at the last incoming cell,
//! * the outgoing characteristic invariant `v_L - lambda_out u_L = v - lambda_out u`
//!   evaluated at the first outgoing cell,
//! * conservation of the flux trace `sum v_R = sum v_L`,
//! * conservation of the second trace `sum lambda^2 u_R = sum lambda^2 u_L`,
//! * and, with two outgoing edges, the distribution rule `v_L^2 = alpha v_R`.
//!
//! Written in increment form these are the published node systems up to the
//! sign of the outgoing entries in the first row of the u-system (as printed
//! that row makes the system singular for equal relaxation speeds; the
//! condition-based form above is nonsingular for all positive speeds). In the
//! limit scheme the `v` inputs are `f_k` of the adjacent cell averages; the
//! relaxation scheme passes its evolved auxiliary averages instead.

use crate::flux::FluxModel;
use crate::network::Edge;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error(
        "singular node system for lambdas {lambdas:?}, alpha {alpha}: pivot {pivot:e} below tolerance"
    )]
    Singular {
        lambdas: Vec<f64>,
        alpha: f64,
        pivot: f64,
    },
    #[error("edge {edge}: junction state {value} outside [{lo}, {hi}]")]
    StateOutOfRange {
        edge: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("coupling input has shape {incoming}-to-{outgoing}; supported: 1-to-1, 1-to-2")]
    UnsupportedShape { incoming: usize, outgoing: usize },
}

/// A state/flux-variable pair at one side of the node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UvPair {
    pub u: f64,
    pub v: f64,
}

impl UvPair {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// Cell data adjacent to the node: the last cell of each incoming edge and
/// the first cell of each outgoing edge.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeInput {
    pub incoming: Vec<UvPair>,
    pub outgoing: Vec<UvPair>,
}

/// Solved trace data `(u_R, v_R)` / `(u_L, v_L)` per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingData {
    pub incoming: Vec<UvPair>,
    pub outgoing: Vec<UvPair>,
}

/// Numerical fluxes through the node interface, per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFluxes {
    pub incoming: Vec<f64>,
    pub outgoing: Vec<f64>,
}

/// Closed-form trace solve for a 1-to-1 node. The reduced 2x2 systems have
/// determinant `l_in * l_out * (l_in + l_out) > 0`, so the solve never fails.
pub fn solve_coupling_1to1(inflow: UvPair, outflow: UvPair, l_in: f64, l_out: f64) -> CouplingData {
    let w = inflow.v + l_in * inflow.u;
    let z = outflow.v - l_out * outflow.u;
    let u_r = l_out * (w - z) / (l_in * (l_in + l_out));
    let u_l = (l_in * l_in) / (l_out * l_out) * u_r;
    let v_r = w - l_in * u_r;
    let v_l = z + l_out * u_l;
    CouplingData {
        incoming: vec![UvPair::new(u_r, v_r)],
        outgoing: vec![UvPair::new(u_l, v_l)],
    }
}

/// Trace solve for a 1-to-2 node with distribution rate `alpha`: two 3x3
/// solves with partial pivoting, one for the `u` traces and one for the `v`
/// traces. Both matrices are nonsingular for all positive speeds and
/// `alpha` in `[0, 1]`; the singularity guard is defensive only.
pub fn solve_coupling_1to2(
    inflow: UvPair,
    outflow: [UvPair; 2],
    lambdas: [f64; 3],
    alpha: f64,
) -> Result<CouplingData, CouplingError> {
    let [l1, l2, l3] = lambdas;
    let rhs = [
        inflow.v - outflow[0].v - outflow[1].v,
        l1 * l1 * inflow.u - l2 * l2 * outflow[0].u - l3 * l3 * outflow[1].u,
        -alpha * inflow.v + outflow[0].v,
    ];
    let u_matrix = [
        [l1, l2, l3],
        [-l1 * l1, l2 * l2, l3 * l3],
        [-alpha * l1, -l2, 0.0],
    ];
    let v_matrix = [[-1.0, 1.0, 1.0], [l1, l2, l3], [alpha, -1.0, 0.0]];
    let singular = |pivot| CouplingError::Singular {
        lambdas: lambdas.to_vec(),
        alpha,
        pivot,
    };
    let du = solve3(u_matrix, rhs).map_err(singular)?;
    let dv = solve3(v_matrix, rhs).map_err(singular)?;
    Ok(CouplingData {
        incoming: vec![UvPair::new(inflow.u + du[0], inflow.v + dv[0])],
        outgoing: vec![
            UvPair::new(outflow[0].u + du[1], outflow[0].v + dv[1]),
            UvPair::new(outflow[1].u + du[2], outflow[1].v + dv[2]),
        ],
    })
}

/// Dispatches on the node shape; `alpha` is ignored for 1-to-1.
pub fn solve_coupling(
    input: &NodeInput,
    lambdas_in: &[f64],
    lambdas_out: &[f64],
    alpha: Option<f64>,
) -> Result<CouplingData, CouplingError> {
    match (input.incoming.len(), input.outgoing.len()) {
        (1, 1) => Ok(solve_coupling_1to1(
            input.incoming[0],
            input.outgoing[0],
            lambdas_in[0],
            lambdas_out[0],
        )),
        (1, 2) => solve_coupling_1to2(
            input.incoming[0],
            [input.outgoing[0], input.outgoing[1]],
            [lambdas_in[0], lambdas_out[0], lambdas_out[1]],
            alpha.expect("validated topology carries alpha for 1-to-2"),
        ),
        (i, o) => Err(CouplingError::UnsupportedShape {
            incoming: i,
            outgoing: o,
        }),
    }
}

/// Node fluxes of the central scheme. The incoming formula collapses to
/// `v_R` and the outgoing one to `v_L` whenever the characteristic
/// invariants hold, which is what makes the node conservative.
pub fn node_fluxes_central(
    input: &NodeInput,
    data: &CouplingData,
    lambdas_in: &[f64],
    lambdas_out: &[f64],
) -> NodeFluxes {
    let incoming = input
        .incoming
        .iter()
        .zip(&data.incoming)
        .zip(lambdas_in)
        .map(|((cell, trace), l)| 0.5 * (trace.v + cell.v) - 0.5 * l * (trace.u - cell.u))
        .collect();
    let outgoing = input
        .outgoing
        .iter()
        .zip(&data.outgoing)
        .zip(lambdas_out)
        .map(|((cell, trace), l)| 0.5 * (cell.v + trace.v) - 0.5 * l * (cell.u - trace.u))
        .collect();
    NodeFluxes { incoming, outgoing }
}

/// Flow-maximization node fluxes for a 1-to-2 junction:
/// `F1 = min(d1(u), s2(u2)/alpha, s3(u3)/(1-alpha))`, `F2 = alpha F1`,
/// `F3 = F1 - F2`. At `alpha` of exactly 0 or 1 the corresponding supply
/// constraint is dropped. `F3` is defined as the remainder so the split sums
/// to `F1` exactly.
pub fn node_fluxes_flowmax(
    incoming: (&Edge, f64),
    outgoing: [(&Edge, f64); 2],
    alpha: f64,
) -> Result<NodeFluxes, CouplingError> {
    let out_of_range = |edge: &Edge, model: &FluxModel, value| {
        let (lo, hi) = model.state_interval();
        CouplingError::StateOutOfRange {
            edge: edge.id,
            value,
            lo,
            hi,
        }
    };
    let (edge_in, u_in) = incoming;
    let demand = edge_in
        .flux
        .demand(u_in)
        .map_err(|_| out_of_range(edge_in, &edge_in.flux, u_in))?;
    let mut flux_total = demand;
    let (edge2, u2) = outgoing[0];
    let (edge3, u3) = outgoing[1];
    let supply2 = edge2
        .flux
        .supply(u2)
        .map_err(|_| out_of_range(edge2, &edge2.flux, u2))?;
    let supply3 = edge3
        .flux
        .supply(u3)
        .map_err(|_| out_of_range(edge3, &edge3.flux, u3))?;
    if alpha > 0.0 {
        flux_total = flux_total.min(supply2 / alpha);
    }
    if alpha < 1.0 {
        flux_total = flux_total.min(supply3 / (1.0 - alpha));
    }
    let flux2 = alpha * flux_total;
    let flux3 = flux_total - flux2;
    Ok(NodeFluxes {
        incoming: vec![flux_total],
        outgoing: vec![flux2, flux3],
    })
}

/// 3x3 Gaussian elimination with partial pivoting. `Err` carries the failing
/// pivot magnitude.
fn solve3(matrix: [[f64; 3]; 3], rhs: [f64; 3]) -> Result<[f64; 3], f64> {
    let mut a = matrix;
    let mut b = rhs;
    let scale = a
        .iter()
        .flatten()
        .fold(0.0_f64, |acc, &x| acc.max(x.abs()))
        .max(1.0);
    for col in 0..3 {
        let pivot_row = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        let pivot = a[pivot_row][col];
        if pivot.abs() < 1e-14 * scale {
            return Err(pivot.abs());
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..3 {
            let factor = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in row + 1..3 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Residuals of the three trace identities; all should vanish for a valid
/// solve.
pub fn trace_residuals(data: &CouplingData, lambdas_in: &[f64], lambdas_out: &[f64], alpha: Option<f64>) -> [f64; 3] {
    let v_in: f64 = data.incoming.iter().map(|p| p.v).sum();
    let v_out: f64 = data.outgoing.iter().map(|p| p.v).sum();
    let lu_in: f64 = data
        .incoming
        .iter()
        .zip(lambdas_in)
        .map(|(p, l)| l * l * p.u)
        .sum();
    let lu_out: f64 = data
        .outgoing
        .iter()
        .zip(lambdas_out)
        .map(|(p, l)| l * l * p.u)
        .sum();
    let distribution = match alpha {
        Some(alpha) if data.outgoing.len() == 2 => data.outgoing[0].v - alpha * v_in,
        _ => 0.0,
    };
    [v_in - v_out, lu_in - lu_out, distribution]
}
