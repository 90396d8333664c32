//! Flux-function families with their analytic helpers: evaluation, derivative,
//! critical density and the demand/supply pair used by junction flow rules.

use thiserror::Error;

/// States handed to [`FluxModel::demand`]/[`FluxModel::supply`] may exceed the
/// admissible interval by this absolute slack before they are rejected. A
/// conservative finite-volume update can over/undershoot the interval by a few
/// ulps near steep fronts; both formulas remain well defined there.
pub const DOMAIN_SLACK: f64 = 1e-8;

/// Grid resolution for sampled wave-speed bounds.
const SPEED_SAMPLES: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FluxError {
    #[error("invalid flux parameters: {0}")]
    InvalidParameters(String),
    #[error("state {value} outside admissible interval [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
}

/// Parametric flux family of a single edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FluxModel {
    /// `f(u) = c u (1 - u / u_max)`: concave traffic-flow flux with rate scale
    /// `c` and jam density `u_max`.
    QuadraticLwr { c: f64, u_max: f64 },
    /// `f(u) = u^2 / (u^2 + a (1 - u)^2)`: non-convex two-phase flow flux with
    /// mobility ratio `0 < a < 1`, strictly increasing on `[0, 1]`.
    BuckleyLeverett { a: f64 },
}

impl FluxModel {
    pub fn validate(&self) -> Result<(), FluxError> {
        match *self {
            FluxModel::QuadraticLwr { c, u_max } => {
                if !(c.is_finite() && c > 0.0) {
                    return Err(FluxError::InvalidParameters(format!(
                        "quadratic-lwr rate scale c must be positive, got {c}"
                    )));
                }
                if !(u_max.is_finite() && u_max > 0.0) {
                    return Err(FluxError::InvalidParameters(format!(
                        "quadratic-lwr jam density u_max must be positive, got {u_max}"
                    )));
                }
            }
            FluxModel::BuckleyLeverett { a } => {
                if !(a.is_finite() && a > 0.0 && a < 1.0) {
                    return Err(FluxError::InvalidParameters(format!(
                        "buckley-leverett mobility ratio a must lie in (0, 1), got {a}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            FluxModel::QuadraticLwr { c, u_max } => c * u * (1.0 - u / u_max),
            FluxModel::BuckleyLeverett { a } => {
                let u2 = u * u;
                let w = 1.0 - u;
                u2 / (u2 + a * w * w)
            }
        }
    }

    /// Analytic derivative `f'(u)`, the local wave speed.
    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            FluxModel::QuadraticLwr { c, u_max } => c * (1.0 - 2.0 * u / u_max),
            FluxModel::BuckleyLeverett { a } => {
                let w = 1.0 - u;
                let denom = u * u + a * w * w;
                2.0 * a * u * w / (denom * denom)
            }
        }
    }

    /// Admissible state interval used for validation and demand/supply; the
    /// evolved solution itself is never clipped to it.
    pub fn state_interval(&self) -> (f64, f64) {
        match *self {
            FluxModel::QuadraticLwr { u_max, .. } => (0.0, u_max),
            FluxModel::BuckleyLeverett { .. } => (0.0, 1.0),
        }
    }

    /// Critical density: the argmax of `f` on `[u_lo, u_hi]`.
    ///
    /// Closed forms for the two named families (parabola vertex for the LWR
    /// flux, right endpoint for the monotone Buckley-Leverett flux on its
    /// state interval); golden-section maximization otherwise.
    pub fn critical_density(&self, u_lo: f64, u_hi: f64) -> f64 {
        assert!(u_lo < u_hi, "critical_density needs u_lo < u_hi");
        match *self {
            FluxModel::QuadraticLwr { u_max, .. } => (0.5 * u_max).clamp(u_lo, u_hi),
            FluxModel::BuckleyLeverett { .. } if (0.0..=1.0).contains(&u_lo) && u_hi <= 1.0 => {
                u_hi
            }
            _ => golden_section_max(|u| self.eval(u), u_lo, u_hi, 1e-12),
        }
    }

    /// Demand `d(u)`: the maximal flux the upstream state can send.
    pub fn demand(&self, u: f64) -> Result<f64, FluxError> {
        let (lo, hi) = self.state_interval();
        check_in_interval(u, lo, hi)?;
        let sigma = self.critical_density(lo, hi);
        Ok(if u <= sigma {
            self.eval(u)
        } else {
            self.eval(sigma)
        })
    }

    /// Supply `s(u)`: the maximal flux the downstream state can absorb.
    pub fn supply(&self, u: f64) -> Result<f64, FluxError> {
        let (lo, hi) = self.state_interval();
        check_in_interval(u, lo, hi)?;
        let sigma = self.critical_density(lo, hi);
        Ok(if u <= sigma {
            self.eval(sigma)
        } else {
            self.eval(u)
        })
    }

    /// Largest `|f'|` on a uniform sample of `[u_lo, u_hi]`.
    pub fn max_abs_speed_sampled(&self, u_lo: f64, u_hi: f64) -> f64 {
        assert!(u_lo < u_hi, "max_abs_speed_sampled needs u_lo < u_hi");
        let step = (u_hi - u_lo) / (SPEED_SAMPLES - 1) as f64;
        (0..SPEED_SAMPLES)
            .map(|i| self.derivative(u_lo + i as f64 * step).abs())
            .fold(0.0, f64::max)
    }
}

fn check_in_interval(u: f64, lo: f64, hi: f64) -> Result<(), FluxError> {
    if u < lo - DOMAIN_SLACK || u > hi + DOMAIN_SLACK || !u.is_finite() {
        return Err(FluxError::OutOfRange { value: u, lo, hi });
    }
    Ok(())
}

/// Derivative-free maximization of a unimodal function on `[lo, hi]`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
