//! Network topology: edges meeting at a single node at `x = 0`, their
//! discretization and the coupling rule selected for the node.

use crate::flux::{FluxError, FluxModel};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("unsupported junction shape {incoming}-to-{outgoing}; supported: 1-to-1, 1-to-2")]
    UnsupportedShape { incoming: usize, outgoing: usize },
    #[error("edge {edge}: need at least 2 cells, got {cells}")]
    TooFewCells { edge: usize, cells: usize },
    #[error("all edges must share one cell count; edge {edge} has {cells}, expected {expected}")]
    MismatchedCells { edge: usize, cells: usize, expected: usize },
    #[error("edge {edge}: relaxation speed must be positive, got {lambda}")]
    NonPositiveLambda { edge: usize, lambda: f64 },
    #[error("edge {edge}: initial state must be finite, got {value}")]
    NonFiniteInitial { edge: usize, value: f64 },
    #[error("edge {edge}: expected orientation {expected:?}")]
    MisplacedEdge { edge: usize, expected: Orientation },
    #[error("duplicate edge id {edge}")]
    DuplicateId { edge: usize },
    #[error("distribution rate alpha must lie in [0, 1], got {alpha}")]
    AlphaOutOfRange { alpha: f64 },
    #[error("distribution rate alpha is required exactly when there are two outgoing edges")]
    AlphaShapeMismatch,
    #[error("flow maximization is defined for 1-to-2 junctions only")]
    FlowMaxShape,
    #[error("edge {edge}: {source}")]
    InvalidFlux { edge: usize, source: FluxError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Domain `(-1, 0)`, the node at the right end.
    Incoming,
    /// Domain `(0, 1)`, the node at the left end.
    Outgoing,
}

/// One network edge and its discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: usize,
    pub orientation: Orientation,
    pub flux: FluxModel,
    /// Relaxation speed; also the numerical viscosity coefficient.
    pub lambda: f64,
    /// Number of cells; the mesh width is `1 / cells`.
    pub cells: usize,
    /// Constant initial state.
    pub initial: f64,
}

impl Edge {
    pub fn dx(&self) -> f64 {
        1.0 / self.cells as f64
    }

    /// Center of cell `j`, accounting for the edge's parameterization.
    pub fn cell_center(&self, j: usize) -> f64 {
        let offset = (j as f64 + 0.5) * self.dx();
        match self.orientation {
            Orientation::Incoming => -1.0 + offset,
            Orientation::Outgoing => offset,
        }
    }

    fn validate(&self, expected: Orientation, shared_cells: usize) -> Result<(), NetworkError> {
        if self.orientation != expected {
            return Err(NetworkError::MisplacedEdge {
                edge: self.id,
                expected,
            });
        }
        if self.cells < 2 {
            return Err(NetworkError::TooFewCells {
                edge: self.id,
                cells: self.cells,
            });
        }
        if self.cells != shared_cells {
            return Err(NetworkError::MismatchedCells {
                edge: self.id,
                cells: self.cells,
                expected: shared_cells,
            });
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(NetworkError::NonPositiveLambda {
                edge: self.id,
                lambda: self.lambda,
            });
        }
        if !self.initial.is_finite() {
            return Err(NetworkError::NonFiniteInitial {
                edge: self.id,
                value: self.initial,
            });
        }
        self.flux.validate().map_err(|source| NetworkError::InvalidFlux {
            edge: self.id,
            source,
        })
    }
}

/// Coupling rule applied at the node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    /// Trace data from the linear node systems of the central scheme. The
    /// distribution rate is present exactly when two edges leave the node.
    Central { alpha: Option<f64> },
    /// Classical flow maximization built from demand and supply.
    FlowMax { alpha: f64 },
}

/// A single-junction network: validated edges plus the coupling rule.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    incoming: Vec<Edge>,
    outgoing: Vec<Edge>,
    coupling: Coupling,
}

impl NetworkTopology {
    pub fn new(
        incoming: Vec<Edge>,
        outgoing: Vec<Edge>,
        coupling: Coupling,
    ) -> Result<Self, NetworkError> {
        let shape = (incoming.len(), outgoing.len());
        if !matches!(shape, (1, 1) | (1, 2)) {
            return Err(NetworkError::UnsupportedShape {
                incoming: shape.0,
                outgoing: shape.1,
            });
        }
        let shared_cells = incoming[0].cells;
        let mut ids = Vec::new();
        for edge in incoming.iter() {
            edge.validate(Orientation::Incoming, shared_cells)?;
            ids.push(edge.id);
        }
        for edge in outgoing.iter() {
            edge.validate(Orientation::Outgoing, shared_cells)?;
            ids.push(edge.id);
        }
        ids.sort_unstable();
        for pair in ids.windows(2) {
            if pair[0] == pair[1] {
                return Err(NetworkError::DuplicateId { edge: pair[0] });
            }
        }
        let alpha = match coupling {
            Coupling::Central { alpha } => {
                if alpha.is_some() != (shape.1 == 2) {
                    return Err(NetworkError::AlphaShapeMismatch);
                }
                alpha
            }
            Coupling::FlowMax { alpha } => {
                if shape.1 != 2 {
                    return Err(NetworkError::FlowMaxShape);
                }
                Some(alpha)
            }
        };
        if let Some(alpha) = alpha {
            if !(alpha.is_finite() && (0.0..=1.0).contains(&alpha)) {
                return Err(NetworkError::AlphaOutOfRange { alpha });
            }
        }
        Ok(Self {
            incoming,
            outgoing,
            coupling,
        })
    }

    pub fn incoming(&self) -> &[Edge] {
        &self.incoming
    }

    pub fn outgoing(&self) -> &[Edge] {
        &self.outgoing
    }

    pub fn coupling(&self) -> Coupling {
        self.coupling
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.incoming.len(), self.outgoing.len())
    }

    /// Edges in storage order: incoming first, then outgoing.
    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.incoming.iter().chain(self.outgoing.iter())
    }

    pub fn n_edges(&self) -> usize {
        self.incoming.len() + self.outgoing.len()
    }

    /// Shared mesh width `1 / m`.
    pub fn dx(&self) -> f64 {
        self.incoming[0].dx()
    }

    pub fn max_lambda(&self) -> f64 {
        self.edges().map(|e| e.lambda).fold(0.0, f64::max)
    }
}

/// Per-edge cell averages; `v` is carried in relaxation mode only.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeState {
    pub u: Vec<f64>,
    pub v: Option<Vec<f64>>,
}

/// Cell averages of the whole network at one time instance. Edge order
/// follows [`NetworkTopology::edges`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub t: f64,
    pub edges: Vec<EdgeState>,
}

impl NetworkState {
    /// Constant initial data from the topology's edge definitions.
    pub fn from_topology(topo: &NetworkTopology) -> Self {
        Self {
            t: 0.0,
            edges: topo
                .edges()
                .map(|e| EdgeState {
                    u: vec![e.initial; e.cells],
                    v: None,
                })
                .collect(),
        }
    }

    pub fn matches_grid(&self, topo: &NetworkTopology) -> bool {
        self.edges.len() == topo.n_edges()
            && self
                .edges
                .iter()
                .zip(topo.edges())
                .all(|(es, e)| es.u.len() == e.cells && es.v.as_ref().is_none_or(|v| v.len() == e.cells))
    }

    pub fn has_auxiliary(&self) -> bool {
        self.edges.iter().all(|es| es.v.is_some())
    }

    /// Total mass `sum_k dx * sum_j u_j^k` (compensated summation).
    pub fn mass(&self, dx: f64) -> f64 {
        let mut sum = NeumaierSum::default();
        for es in &self.edges {
            for &u in &es.u {
                sum.add(u);
            }
        }
        dx * sum.value()
    }
}

/// Compensated (Neumaier) summation; keeps the discrete mass audit well below
/// its tolerance even on fine grids.
#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Sampled check of the subcharacteristic condition `|f'(u)| <= lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubcharacteristicReport {
    pub edge: usize,
    pub lambda: f64,
    pub max_abs_speed: f64,
    pub ok: bool,
}

/// Samples `|f'|` over `[u_lo, u_hi]` and compares against the edge's
/// relaxation speed. A violation is report-level only; the scheme may still
/// run (with reduced dissipation margins).
pub fn validate_subcharacteristic(edge: &Edge, u_lo: f64, u_hi: f64) -> SubcharacteristicReport {
    let max_abs_speed = edge.flux.max_abs_speed_sampled(u_lo, u_hi);
    SubcharacteristicReport {
        edge: edge.id,
        lambda: edge.lambda,
        max_abs_speed,
        ok: max_abs_speed <= edge.lambda,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn edge(
        id: usize,
        orientation: Orientation,
        flux: FluxModel,
        lambda: f64,
        cells: usize,
        initial: f64,
    ) -> Edge {
        Edge {
            id,
            orientation,
            flux,
            lambda,
            cells,
            initial,
        }
    }

    fn lwr11(cells: usize) -> NetworkTopology {
        NetworkTopology::new(
            vec![edge(
                1,
                Orientation::Incoming,
                FluxModel::QuadraticLwr { c: 2.0, u_max: 0.5 },
                2.0,
                cells,
                0.25,
            )],
            vec![edge(
                2,
                Orientation::Outgoing,
                FluxModel::QuadraticLwr { c: 1.0, u_max: 1.0 },
                2.0,
                cells,
                0.5,
            )],
            Coupling::Central { alpha: None },
        )
        .unwrap()
    }

    #[test]
    fn cell_centers_cover_both_sides_of_the_node() {
        let topo = lwr11(2);
        let xs: Vec<f64> = topo
            .edges()
            .flat_map(|e| (0..e.cells).map(|j| e.cell_center(j)))
            .collect();
        assert_eq!(xs, vec![-0.75, -0.25, 0.25, 0.75]);
    }

    #[test]
    fn rejects_unsupported_shapes() {
        let inc = |id| {
            edge(
                id,
                Orientation::Incoming,
                FluxModel::QuadraticLwr { c: 1.0, u_max: 1.0 },
                1.0,
                4,
                0.1,
            )
        };
        let out = |id| {
            edge(
                id,
                Orientation::Outgoing,
                FluxModel::QuadraticLwr { c: 1.0, u_max: 1.0 },
                1.0,
                4,
                0.1,
            )
        };
        let err = NetworkTopology::new(
            vec![inc(1), inc(2)],
            vec![out(3)],
            Coupling::Central { alpha: None },
        )
        .unwrap_err();
        assert!(matches!(err, NetworkError::UnsupportedShape { .. }));

        let err = NetworkTopology::new(
            vec![inc(1)],
            vec![out(2), out(3), out(4)],
            Coupling::Central { alpha: Some(0.5) },
        )
        .unwrap_err();
        assert!(matches!(err, NetworkError::UnsupportedShape { .. }));
    }

    #[test]
    fn alpha_presence_must_match_shape() {
        let inc = edge(
            1,
            Orientation::Incoming,
            FluxModel::QuadraticLwr { c: 1.0, u_max: 1.0 },
            1.0,
            4,
            0.1,
        );
        let out = |id| {
            edge(
                id,
                Orientation::Outgoing,
                FluxModel::QuadraticLwr { c: 1.0, u_max: 1.0 },
                1.0,
                4,
                0.1,
            )
        };
        assert!(matches!(
            NetworkTopology::new(
                vec![inc.clone()],
                vec![out(2)],
                Coupling::Central { alpha: Some(0.5) }
            ),
            Err(NetworkError::AlphaShapeMismatch)
        ));
        assert!(matches!(
            NetworkTopology::new(
                vec![inc.clone()],
                vec![out(2), out(3)],
                Coupling::Central { alpha: None }
            ),
            Err(NetworkError::AlphaShapeMismatch)
        ));
        assert!(matches!(
            NetworkTopology::new(
                vec![inc.clone()],
                vec![out(2), out(3)],
                Coupling::Central { alpha: Some(1.5) }
            ),
            Err(NetworkError::AlphaOutOfRange { .. })
        ));
        assert!(matches!(
            NetworkTopology::new(vec![inc], vec![out(2)], Coupling::FlowMax { alpha: 0.5 }),
            Err(NetworkError::FlowMaxShape)
        ));
    }

    #[test]
    fn rejects_mismatched_grids_and_bad_edges() {
        let inc = edge(
            1,
            Orientation::Incoming,
            FluxModel::QuadraticLwr { c: 1.0, u_max: 1.0 },
            1.0,
            4,
            0.1,
        );
        let mut out = edge(
            2,
            Orientation::Outgoing,
            FluxModel::QuadraticLwr { c: 1.0, u_max: 1.0 },
            1.0,
            8,
            0.1,
        );
        assert!(matches!(
            NetworkTopology::new(
                vec![inc.clone()],
                vec![out.clone()],
                Coupling::Central { alpha: None }
            ),
            Err(NetworkError::MismatchedCells { .. })
        ));
        out.cells = 4;
        out.lambda = -1.0;
        assert!(matches!(
            NetworkTopology::new(
                vec![inc.clone()],
                vec![out.clone()],
                Coupling::Central { alpha: None }
            ),
            Err(NetworkError::NonPositiveLambda { .. })
        ));
        out.lambda = 1.0;
        out.orientation = Orientation::Incoming;
        assert!(matches!(
            NetworkTopology::new(vec![inc], vec![out], Coupling::Central { alpha: None }),
            Err(NetworkError::MisplacedEdge { .. })
        ));
    }

    #[test]
    fn initial_state_and_mass() {
        let topo = lwr11(4);
        let state = NetworkState::from_topology(&topo);
        assert!(state.matches_grid(&topo));
        assert!(!state.has_auxiliary());
        // 0.25 * 4 cells * dx + 0.5 * 4 cells * dx with dx = 1/4
        assert_relative_eq!(state.mass(topo.dx()), 0.75);
    }

    #[test]
    fn subcharacteristic_reference_reports() {
        let e1 = edge(
            1,
            Orientation::Incoming,
            FluxModel::QuadraticLwr { c: 1.0, u_max: 1.0 },
            1.0,
            4,
            0.1,
        );
        let report = validate_subcharacteristic(&e1, 0.0, 1.0);
        assert!(report.ok);
        assert!((report.max_abs_speed - 1.0).abs() < 1e-12);

        let e2 = edge(
            2,
            Orientation::Incoming,
            FluxModel::QuadraticLwr { c: 2.0, u_max: 0.5 },
            2.0,
            4,
            0.25,
        );
        let report = validate_subcharacteristic(&e2, 0.0, 0.5);
        assert!(report.ok);
        assert!((report.max_abs_speed - 2.0).abs() < 1e-12);

        let slow = Edge { lambda: 0.5, ..e1 };
        assert!(!validate_subcharacteristic(&slow, 0.0, 1.0).ok);
    }

    #[test]
    fn neumaier_sum_handles_cancellation() {
        let mut s = NeumaierSum::default();
        s.add(1e16);
        s.add(1.0);
        s.add(-1e16);
        assert_eq!(s.value(), 1.0);
    }
}
