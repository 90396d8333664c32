//! The relaxation predecessor of the limit scheme: evolves the pair `(u, v)`
//! per edge for a positive relaxation parameter `epsilon`.
//!
//! The state update reuses the conservative form of the limit scheme with
//! every `f_k(u_j)` replaced by the evolved auxiliary average `v_j`, including
//! the right-hand sides of the node systems. The auxiliary update adds the
//! fluxes below and treats the stiff source semi-implicitly; since `u` is
//! advanced first, the source solve is closed-form and the step carries no
//! `epsilon`-dependent time-step restriction.
//!
//! Both updates of a step use one set of coupling data, computed from the
//! time-level-n averages. Boundaries mirror the limit scheme: zero interface
//! flux for `F` and `G` at the outer left ends, ghost copies of `u` and `v`
//! at the outer right ends.

use crate::network::{Edge, EdgeState, NetworkState, NetworkTopology, Orientation};
use crate::scheme::{
    self, RunConfig, SchemeError, StepReport,
};
use crate::coupling::UvPair;
use crate::network::Coupling;

/// Numerical flux of the auxiliary variable between two `(u, v)` pairs:
/// `lambda^2/2 (u_l + u_r) - lambda/2 (v_r - v_l)`.
pub fn g_flux(edge: &Edge, left: (f64, f64), right: (f64, f64)) -> f64 {
    g_pair(edge.lambda, left, right)
}

fn g_pair(lambda: f64, (u_l, v_l): (f64, f64), (u_r, v_r): (f64, f64)) -> f64 {
    0.5 * lambda * lambda * (u_r + u_l) - 0.5 * lambda * (v_r - v_l)
}

/// Equilibrium initial data for the auxiliary variable: `v_j = f_k(u_j)`.
pub fn init_auxiliary(state: &mut NetworkState, topo: &NetworkTopology) {
    for (edge, es) in topo.edges().zip(&mut state.edges) {
        es.v = Some(es.u.iter().map(|&u| edge.flux.eval(u)).collect());
    }
}

/// One step of the relaxation scheme (first order in space).
pub fn relaxation_step(
    state: &NetworkState,
    topo: &NetworkTopology,
    cfg: &RunConfig,
    dt: f64,
) -> Result<(NetworkState, StepReport), SchemeError> {
    let epsilon = match cfg.epsilon {
        Some(eps) if eps > 0.0 => eps,
        _ => {
            return Err(SchemeError::Config(
                "relaxation stepping needs a positive epsilon".into(),
            ))
        }
    };
    if matches!(topo.coupling(), Coupling::FlowMax { .. }) {
        return Err(SchemeError::UnsupportedCoupling);
    }
    let dx = topo.dx();
    let mass_before = state.mass(dx);
    let input = scheme::node_input(state, topo, true)?;
    let (data, node) = scheme::junction_fluxes(&input, topo)?;
    let data = data.expect("central coupling always yields trace data");

    let stiffness = dt / epsilon;
    let mut edges = Vec::with_capacity(state.edges.len());
    let mut boundary_outflux = Vec::new();
    let n_in = topo.incoming().len();
    for (k, (edge, es)) in topo.edges().zip(&state.edges).enumerate() {
        let m = edge.cells;
        let lambda = edge.lambda;
        let u = &es.u;
        let v = es.v.as_ref().ok_or(SchemeError::MissingAuxiliary)?;

        let (node_flux, trace, cell): (f64, UvPair, UvPair) = match edge.orientation {
            Orientation::Incoming => (node.incoming[k], data.incoming[k], input.incoming[k]),
            Orientation::Outgoing => (
                node.outgoing[k - n_in],
                data.outgoing[k - n_in],
                input.outgoing[k - n_in],
            ),
        };

        let mut f = vec![0.0; m + 1];
        let mut g = vec![0.0; m + 1];
        match edge.orientation {
            Orientation::Incoming => {
                f[m] = node_flux;
                g[m] = g_pair(lambda, (cell.u, cell.v), (trace.u, trace.v));
            }
            Orientation::Outgoing => {
                f[0] = node_flux;
                g[0] = g_pair(lambda, (trace.u, trace.v), (cell.u, cell.v));
                let last = (u[m - 1], v[m - 1]);
                f[m] = scheme::pair_flux(lambda, last.0, last.1, last.0, last.1);
                g[m] = g_pair(lambda, last, last);
            }
        }
        for i in 1..m {
            f[i] = scheme::pair_flux(lambda, u[i - 1], v[i - 1], u[i], v[i]);
            g[i] = g_pair(lambda, (u[i - 1], v[i - 1]), (u[i], v[i]));
        }

        let u_next = scheme::conservative_update(u, &f, dt / dx);
        let v_next = (0..m)
            .map(|j| {
                let transported = v[j] - dt / dx * (g[j + 1] - g[j]);
                (transported + stiffness * edge.flux.eval(u_next[j])) / (1.0 + stiffness)
            })
            .collect();

        if edge.orientation == Orientation::Outgoing {
            boundary_outflux.push(f[m]);
        }
        edges.push(EdgeState {
            u: u_next,
            v: Some(v_next),
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::FluxModel;
    use crate::network::{NetworkState, NetworkTopology};
    use crate::scheme::{compute_dt, SchemeOrder};
    use approx::assert_relative_eq;

    fn edge(id: usize, orientation: Orientation, flux: FluxModel, lambda: f64, cells: usize, initial: f64) -> Edge {
        Edge { id, orientation, flux, lambda, cells, initial }
    }

    fn lwr11(cells: usize, u1: f64, u2: f64) -> NetworkTopology {
        NetworkTopology::new(
            vec![edge(1, Orientation::Incoming, FluxModel::QuadraticLwr { c: 2.0, u_max: 0.5 }, 2.0, cells, u1)],
            vec![edge(2, Orientation::Outgoing, FluxModel::QuadraticLwr { c: 1.0, u_max: 1.0 }, 2.0, cells, u2)],
            Coupling::Central { alpha: None },
        )
        .unwrap()
    }

    fn relax_config(epsilon: f64, t_final: f64) -> RunConfig {
        RunConfig {
            order: SchemeOrder::First,
            cfl: 0.9,
            t_final,
            epsilon: Some(epsilon),
            snapshot_times: vec![],
        }
    }

    #[test]
    fn g_flux_reference_values() {
        let e = edge(1, Orientation::Incoming, FluxModel::QuadraticLwr { c: 1.0, u_max: 1.0 }, 2.0, 4, 0.0);
        // Constant state: lambda^2 * c.
        assert_relative_eq!(g_flux(&e, (0.3, 0.7), (0.3, 0.7)), 4.0 * 0.3, max_relative = 1e-15);
        assert_relative_eq!(g_flux(&e, (0.0, 0.0), (1.0, 0.0)), 2.0, max_relative = 1e-15);
        let e1 = Edge { lambda: 1.0, ..e };
        assert_eq!(g_flux(&e1, (1.0, 0.0), (1.0, 2.0)), 0.0);
    }

    #[test]
    fn init_auxiliary_sets_equilibrium_data() {
        let topo = lwr11(4, 0.25, 0.5);
        let mut state = NetworkState::from_topology(&topo);
        init_auxiliary(&mut state, &topo);
        for v in state.edges[0].v.as_ref().unwrap() {
            assert_relative_eq!(*v, 0.25, max_relative = 1e-15);
        }
        for v in state.edges[1].v.as_ref().unwrap() {
            assert_relative_eq!(*v, 0.25, max_relative = 1e-15);
        }
        let zero_topo = lwr11(4, 0.0, 0.0);
        let mut zero = NetworkState::from_topology(&zero_topo);
        init_auxiliary(&mut zero, &zero_topo);
        assert!(zero.edges.iter().all(|es| es.v.as_ref().unwrap().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn flux_compatible_equilibrium_is_a_fixed_point() {
        // u = 1/3 with v = f(1/3) = 2/9 on both edges: fluxes are constant
        // along each edge, the traces reproduce the data and the source
        // vanishes.
        let topo = lwr11(30, 1.0 / 3.0, 1.0 / 3.0);
        let mut state = NetworkState::from_topology(&topo);
        init_auxiliary(&mut state, &topo);
        let cfg = relax_config(1e-2, 1.0);
        let dt = compute_dt(&topo, cfg.cfl);
        let (next, _) = relaxation_step(&state, &topo, &cfg, dt).unwrap();
        for (es, es0) in next.edges.iter().zip(&state.edges) {
            for (a, b) in es.u.iter().zip(&es0.u) {
                assert!((a - b).abs() <= 1e-14);
            }
            for (a, b) in es.v.as_ref().unwrap().iter().zip(es0.v.as_ref().unwrap()) {
                assert!((a - b).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn semi_implicit_source_fixed_point_and_stiff_limit() {
        // With zero transport the closed-form update reads
        // v' = (v + (dt/eps) f(u')) / (1 + dt/eps).
        let f_of_u: f64 = 0.25;
        let v = 0.25;
        let stiffness = 1.0;
        let v_next = (v + stiffness * f_of_u) / (1.0 + stiffness);
        assert_eq!(v_next, v);

        let stiffness = 1e6;
        let v0 = 3.0;
        let v_next = (v0 + stiffness * f_of_u) / (1.0 + stiffness);
        assert!((v_next - f_of_u).abs() / f_of_u <= 1e-5);
    }

    #[test]
    fn stiff_step_relaxes_v_toward_equilibrium() {
        // Start v away from f(u); after one stiff step v is pulled to the
        // equilibrium manifold.
        let topo = lwr11(20, 0.25, 0.25);
        let mut state = NetworkState::from_topology(&topo);
        init_auxiliary(&mut state, &topo);
        for es in &mut state.edges {
            for v in es.v.as_mut().unwrap() {
                *v += 0.5;
            }
        }
        let cfg = relax_config(1e-9, 1.0);
        let dt = compute_dt(&topo, cfg.cfl);
        let (next, _) = relaxation_step(&state, &topo, &cfg, dt).unwrap();
        for (edge, es) in topo.edges().zip(&next.edges) {
            for (u, v) in es.u.iter().zip(es.v.as_ref().unwrap()) {
                assert!((v - edge.flux.eval(*u)).abs() <= 1e-4, "v stayed off equilibrium");
            }
        }
    }

    #[test]
    fn relaxation_conserves_u_mass_per_step() {
        let topo = lwr11(200, 0.25, 0.5);
        let mut state = NetworkState::from_topology(&topo);
        init_auxiliary(&mut state, &topo);
        let cfg = relax_config(1e-3, 1.0);
        let dt = compute_dt(&topo, cfg.cfl);
        for _ in 0..50 {
            let (next, report) = relaxation_step(&state, &topo, &cfg, dt).unwrap();
            let outflux: f64 = report.boundary_outflux.iter().sum();
            let defect = (report.mass_after - report.mass_before + dt * outflux).abs();
            assert!(defect <= 1e-12, "defect {defect}");
            state = next;
        }
    }

    #[test]
    fn requires_epsilon_and_auxiliary_data() {
        let topo = lwr11(10, 0.25, 0.5);
        let state = NetworkState::from_topology(&topo);
        let cfg = relax_config(1e-3, 1.0);
        let dt = compute_dt(&topo, cfg.cfl);
        // v missing
        assert!(matches!(
            relaxation_step(&state, &topo, &cfg, dt),
            Err(SchemeError::MissingAuxiliary)
        ));
        // epsilon missing
        let mut with_v = state;
        init_auxiliary(&mut with_v, &topo);
        let no_eps = RunConfig { epsilon: None, ..cfg };
        assert!(matches!(
            relaxation_step(&with_v, &topo, &no_eps, dt),
            Err(SchemeError::Config(_))
        ));
    }
}
