//! Time integration of the limit scheme: conservative update with central
//! relaxation-type numerical fluxes, optional second-order correction, node
//! coupling and the CFL step rule.

use crate::coupling::{
    self, CouplingData, CouplingError, NodeFluxes, NodeInput, UvPair,
};
use crate::flux::FluxModel;
use crate::network::{Coupling, Edge, NetworkState, NetworkTopology, Orientation};
use crate::relaxation;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("state does not match the topology grid")]
    GridMismatch,
    #[error("edge {edge} has the wrong orientation for this boundary, expected {expected:?}")]
    OrientationMismatch { edge: usize, expected: Orientation },
    #[error("non-finite state at t = {t}, edge {edge}, cell {cell}")]
    NonFinite { t: f64, edge: usize, cell: usize },
    #[error("relaxation stepping requires auxiliary cell averages")]
    MissingAuxiliary,
    #[error("flow maximization is not available in relaxation mode")]
    UnsupportedCoupling,
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error("observer failed: {0}")]
    Observer(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeOrder {
    First,
    Second,
}

impl SchemeOrder {
    /// Courant numbers used by the reference experiments.
    pub fn default_cfl(self) -> f64 {
        match self {
            SchemeOrder::First => 0.9,
            SchemeOrder::Second => 0.24,
        }
    }
}

/// Scheme selection and stepping parameters for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub order: SchemeOrder,
    pub cfl: f64,
    pub t_final: f64,
    /// Relaxation parameter; `None` selects the limit scheme.
    pub epsilon: Option<f64>,
    pub snapshot_times: Vec<f64>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), SchemeError> {
        let fail = |msg: String| Err(SchemeError::Config(msg));
        if !(self.cfl.is_finite() && self.cfl > 0.0 && self.cfl <= 1.0) {
            return fail(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return fail(format!("t_final must be nonnegative, got {}", self.t_final));
        }
        if let Some(eps) = self.epsilon {
            if !(eps.is_finite() && eps > 0.0) {
                return fail(format!("epsilon must be positive, got {eps}"));
            }
        }
        for &s in &self.snapshot_times {
            if !(s.is_finite() && (0.0..=self.t_final).contains(&s)) {
                return fail(format!(
                    "snapshot time {s} outside [0, {}]",
                    self.t_final
                ));
            }
        }
        Ok(())
    }
}

/// Audit data of one conservative step. The defining identity is
/// `mass_after = mass_before + dt * (sum influx - sum outflux)`: the node
/// fluxes cancel between edges, so only the outer boundaries move mass.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub dt: f64,
    pub node_flux_in: Vec<f64>,
    pub node_flux_out: Vec<f64>,
    /// Outer-boundary inflow per incoming edge.
    pub boundary_influx: Vec<f64>,
    /// Outer-boundary outflow per outgoing edge.
    pub boundary_outflux: Vec<f64>,
    pub mass_before: f64,
    pub mass_after: f64,
}

/// Snapshots, per-step audit reports and the final state of a run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<(f64, NetworkState)>,
    pub reports: Vec<StepReport>,
    pub final_state: NetworkState,
}

/// CFL time increment `cfl * dx / max_k lambda_k`.
pub fn compute_dt(topo: &NetworkTopology, cfl: f64) -> f64 {
    cfl * topo.dx() / topo.max_lambda()
}

pub(crate) fn pair_flux(lambda: f64, u_left: f64, w_left: f64, u_right: f64, w_right: f64) -> f64 {
    0.5 * (w_right + w_left) - 0.5 * lambda * (u_right - u_left)
}

/// Interior numerical flux at the interface between `u_left` and `u_right`.
pub fn interior_flux(edge: &Edge, u_left: f64, u_right: f64, correction: f64) -> f64 {
    pair_flux(
        edge.lambda,
        u_left,
        edge.flux.eval(u_left),
        u_right,
        edge.flux.eval(u_right),
    ) - correction
}

pub fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() <= b.abs() {
        a
    } else {
        b
    }
}

/// Second-order flux correction from limited slopes of the characteristic
/// variables `w = f(u) + lambda u` and `z = f(u) - lambda u`.
///
/// `stencil` holds the four cell averages `[u_{j-2}, u_{j-1}, u_j, u_{j+1}]`
/// around the interface `j - 1/2`; the returned value is
/// `S = (1 - nu)/4 * (dz_j - dw_{j-1})` with minmod-limited undivided slopes
/// and `nu = lambda dt / dx`.
pub fn second_order_correction(edge: &Edge, stencil: [f64; 4], dt: f64) -> f64 {
    let nu = edge.lambda * dt / edge.dx();
    correction_raw(&edge.flux, edge.lambda, nu, stencil)
}

pub(crate) fn correction_raw(model: &FluxModel, lambda: f64, nu: f64, u: [f64; 4]) -> f64 {
    let w = |x: f64| model.eval(x) + lambda * x;
    let z = |x: f64| model.eval(x) - lambda * x;
    let dw = minmod(w(u[2]) - w(u[1]), w(u[1]) - w(u[0]));
    let dz = minmod(z(u[3]) - z(u[2]), z(u[2]) - z(u[1]));
    0.25 * (1.0 - nu) * (dz - dw)
}

/// Sustained inflow at the outer end `x = -1` of an incoming edge: a
/// ghost-cell copy collapses the interface flux to `f(u_first)`, feeding the
/// edge at the rate its boundary state carries. A zero interface flux would
/// instead drain the edge from the outer end whenever `f(u_first) != 0`.
pub fn left_boundary_flux(edge: &Edge, u_first: f64) -> Result<f64, SchemeError> {
    if edge.orientation != Orientation::Incoming {
        return Err(SchemeError::OrientationMismatch {
            edge: edge.id,
            expected: Orientation::Incoming,
        });
    }
    Ok(edge.flux.eval(u_first))
}

/// Homogeneous Neumann condition at the outer end `x = 1` of an outgoing
/// edge; the ghost-cell copy collapses the interface flux to `f(u_last)`.
pub fn right_boundary_flux(edge: &Edge, u_last: f64) -> Result<f64, SchemeError> {
    if edge.orientation != Orientation::Outgoing {
        return Err(SchemeError::OrientationMismatch {
            edge: edge.id,
            expected: Orientation::Outgoing,
        });
    }
    Ok(edge.flux.eval(u_last))
}

/// Cell data adjacent to the node. With `use_aux` the flux-variable entries
/// are the evolved auxiliary averages, otherwise `f_k` of the cell averages.
pub(crate) fn node_input(
    state: &NetworkState,
    topo: &NetworkTopology,
    use_aux: bool,
) -> Result<NodeInput, SchemeError> {
    let pair = |edge: &Edge, es: &crate::network::EdgeState| -> Result<UvPair, SchemeError> {
        let j = match edge.orientation {
            Orientation::Incoming => edge.cells - 1,
            Orientation::Outgoing => 0,
        };
        let u = es.u[j];
        let v = if use_aux {
            es.v.as_ref().ok_or(SchemeError::MissingAuxiliary)?[j]
        } else {
            edge.flux.eval(u)
        };
        Ok(UvPair::new(u, v))
    };
    let n_in = topo.incoming().len();
    let mut incoming = Vec::with_capacity(n_in);
    let mut outgoing = Vec::with_capacity(topo.outgoing().len());
    for (edge, es) in topo.edges().zip(&state.edges) {
        match edge.orientation {
            Orientation::Incoming => incoming.push(pair(edge, es)?),
            Orientation::Outgoing => outgoing.push(pair(edge, es)?),
        }
    }
    Ok(NodeInput { incoming, outgoing })
}

pub(crate) fn lambdas(topo: &NetworkTopology) -> (Vec<f64>, Vec<f64>) {
    (
        topo.incoming().iter().map(|e| e.lambda).collect(),
        topo.outgoing().iter().map(|e| e.lambda).collect(),
    )
}

/// Junction fluxes for the configured coupling rule; the trace data is
/// returned as well where the rule produces it (the relaxation scheme reuses
/// it for the auxiliary fluxes).
pub(crate) fn junction_fluxes(
    input: &NodeInput,
    topo: &NetworkTopology,
) -> Result<(Option<CouplingData>, NodeFluxes), SchemeError> {
    let (l_in, l_out) = lambdas(topo);
    match topo.coupling() {
        Coupling::Central { alpha } => {
            let data = coupling::solve_coupling(input, &l_in, &l_out, alpha)?;
            let fluxes = coupling::node_fluxes_central(input, &data, &l_in, &l_out);
            Ok((Some(data), fluxes))
        }
        Coupling::FlowMax { alpha } => {
            let fluxes = coupling::node_fluxes_flowmax(
                (&topo.incoming()[0], input.incoming[0].u),
                [
                    (&topo.outgoing()[0], input.outgoing[0].u),
                    (&topo.outgoing()[1], input.outgoing[1].u),
                ],
                alpha,
            )?;
            Ok((None, fluxes))
        }
    }
}

pub(crate) fn conservative_update(u: &[f64], fluxes: &[f64], dt_over_dx: f64) -> Vec<f64> {
    u.iter()
        .enumerate()
        .map(|(j, &uj)| uj - dt_over_dx * (fluxes[j + 1] - fluxes[j]))
        .collect()
}

pub(crate) fn check_finite(state: &NetworkState, topo: &NetworkTopology) -> Result<(), SchemeError> {
    for (edge, es) in topo.edges().zip(&state.edges) {
        let scan = |values: &[f64]| {
            values
                .iter()
                .position(|x| !x.is_finite())
                .map(|cell| SchemeError::NonFinite {
                    t: state.t,
                    edge: edge.id,
                    cell,
                })
        };
        if let Some(err) = scan(&es.u).or_else(|| es.v.as_deref().and_then(scan)) {
            return Err(err);
        }
    }
    Ok(())
}

/// One step of the limit scheme with the given time increment. Coupling data
/// is computed once, then every edge is updated independently.
pub fn step_network(
    state: &NetworkState,
    topo: &NetworkTopology,
    cfg: &RunConfig,
    dt: f64,
) -> Result<(NetworkState, StepReport), SchemeError> {
    let dx = topo.dx();
    let mass_before = state.mass(dx);
    let input = node_input(state, topo, false)?;
    let (_, node) = junction_fluxes(&input, topo)?;
    let mut edges = Vec::with_capacity(state.edges.len());
    let mut boundary_outflux = Vec::new();
    let n_in = topo.incoming().len();
    for (k, (edge, es)) in topo.edges().zip(&state.edges).enumerate() {
        let node_flux = match edge.orientation {
            Orientation::Incoming => node.incoming[k],
            Orientation::Outgoing => node.outgoing[k - n_in],
        };
        let fluxes = limit_edge_fluxes(edge, &es.u, node_flux, cfg.order, dt);
        if edge.orientation == Orientation::Outgoing {
            boundary_outflux.push(fluxes[edge.cells]);
        }
        edges.push(crate::network::EdgeState {
            u: conservative_update(&es.u, &fluxes, dt / dx),
            v: None,
        });
    }
    let next = NetworkState {
        t: state.t + dt,
        edges,
    };
    let report = StepReport {
        dt,
        node_flux_in: node.incoming,
        node_flux_out: node.outgoing,
        boundary_outflux,
        mass_before,
        mass_after: next.mass(dx),
    };
    Ok((next, report))
}

fn limit_edge_fluxes(edge: &Edge, u: &[f64], node_flux: f64, order: SchemeOrder, dt: f64) -> Vec<f64> {
    let m = edge.cells;
    let mut fluxes = vec![0.0; m + 1];
    match edge.orientation {
        Orientation::Incoming => {
            fluxes[0] = 0.0;
            fluxes[m] = node_flux;
        }
        Orientation::Outgoing => {
            fluxes[0] = node_flux;
            fluxes[m] = edge.flux.eval(u[m - 1]);
        }
    }
    for i in 1..m {
        // The correction needs two cells on each side; interfaces next to the
        // node or the outer boundary fall back to first order.
        let correction = if order == SchemeOrder::Second && i >= 2 && i + 2 <= m {
            second_order_correction(edge, [u[i - 2], u[i - 1], u[i], u[i + 1]], dt)
        } else {
            0.0
        };
        fluxes[i] = interior_flux(edge, u[i - 1], u[i], correction);
    }
    fluxes
}

/// Advances the configured scheme to `t_final`, clipping steps to land on
/// each snapshot time exactly. The observer runs at every snapshot.
pub fn run<O>(
    initial: NetworkState,
    topo: &NetworkTopology,
    cfg: &RunConfig,
    mut observer: O,
) -> Result<Trajectory, SchemeError>
where
    O: FnMut(f64, &NetworkState) -> Result<(), String>,
{
    cfg.validate()?;
    if !initial.matches_grid(topo) {
        return Err(SchemeError::GridMismatch);
    }
    let relax = cfg.epsilon.is_some();
    let mut state = initial;
    if relax && !state.has_auxiliary() {
        relaxation::init_auxiliary(&mut state, topo);
    }

    let mut snap_times = cfg.snapshot_times.clone();
    snap_times.sort_by(f64::total_cmp);
    snap_times.dedup();

    let mut snapshots = Vec::new();
    let mut reports = Vec::new();
    if snap_times.first().copied() == Some(state.t) {
        snapshots.push((state.t, state.clone()));
        observer(state.t, &state).map_err(SchemeError::Observer)?;
    }

    let mut targets: Vec<(f64, bool)> = snap_times
        .iter()
        .filter(|&&s| s > state.t)
        .map(|&s| (s, true))
        .collect();
    if cfg.t_final > state.t && !targets.iter().any(|&(t, _)| t == cfg.t_final) {
        targets.push((cfg.t_final, false));
        targets.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    let dt_cfl = compute_dt(topo, cfg.cfl);
    for (target, is_snapshot) in targets {
        while state.t < target {
            let remaining = target - state.t;
            let clipped = remaining <= dt_cfl;
            let dt = if clipped { remaining } else { dt_cfl };
            let (mut next, report) = if relax {
                relaxation::relaxation_step(&state, topo, cfg, dt)?
            } else {
                step_network(&state, topo, cfg, dt)?
            };
            if clipped {
                next.t = target;
            }
            check_finite(&next, topo)?;
            reports.push(report);
            state = next;
        }
        if is_snapshot {
            snapshots.push((target, state.clone()));
            observer(target, &state).map_err(SchemeError::Observer)?;
        }
    }
    Ok(Trajectory {
        snapshots,
        reports,
        final_state: state,
    })
}

/// One step on a single periodic edge (no node); used for convergence
/// studies against smooth exact solutions.
pub fn step_periodic(
    u: &[f64],
    model: &FluxModel,
    lambda: f64,
    dt: f64,
    dx: f64,
    order: SchemeOrder,
) -> Vec<f64> {
    let m = u.len();
    let nu = lambda * dt / dx;
    let mut fluxes = vec![0.0; m];
    for i in 0..m {
        let left = (i + m - 1) % m;
        let correction = match order {
            SchemeOrder::First => 0.0,
            SchemeOrder::Second => correction_raw(
                model,
                lambda,
                nu,
                [u[(i + m - 2) % m], u[left], u[i], u[(i + 1) % m]],
            ),
        };
        fluxes[i] = pair_flux(
            lambda,
            u[left],
            model.eval(u[left]),
            u[i],
            model.eval(u[i]),
        ) - correction;
    }
    (0..m)
        .map(|j| u[j] - dt / dx * (fluxes[(j + 1) % m] - fluxes[j]))
        .collect()
}

/// Advances a single periodic edge to `t_final` under the CFL rule.
pub fn run_periodic(
    mut u: Vec<f64>,
    model: &FluxModel,
    lambda: f64,
    cfl: f64,
    t_final: f64,
    order: SchemeOrder,
) -> Vec<f64> {
    let dx = 1.0 / u.len() as f64;
    let dt_cfl = cfl * dx / lambda;
    let mut t = 0.0;
    while t < t_final {
        let remaining = t_final - t;
        let clipped = remaining <= dt_cfl;
        let dt = if clipped { remaining } else { dt_cfl };
        u = step_periodic(&u, model, lambda, dt, dx, order);
        t = if clipped { t_final } else { t + dt };
    }
    u
}
