//! Proximal map of the cross-entropy on the probability simplex:
//!
//! ```text
//! min_z  −Σ_i y_i·log z_i + λ·‖z − x⁰‖²   s.t.  z ≥ 0, 1ᵀz = 1
//! ```
//!
//! For a fixed dual value ν each coordinate has the closed form
//! `z_i(ν) = a + sqrt(a² + y_i/(2λ))` with `a = (x⁰_i + ν)/2`, and `1ᵀz(ν)` is
//! strictly increasing in ν, so the multiplier is located by bisection inside
//! an a-priori bracket.

use crate::matrix::DenseMatrix;

use super::{check_finite, SolverError};

pub const DEFAULT_BISECTION_TOL: f64 = 1e-10;

/// A single-column instance together with its dual bracket.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexEntropyProblem {
    x0: Vec<f64>,
    y: Vec<f64>,
    lambda: f64,
    /// Objective value at the feasible point uniform over the support of `y`.
    theta: f64,
    nu_lo: f64,
    nu_hi: f64,
}

impl SimplexEntropyProblem {
    pub fn new(x0: Vec<f64>, y: Vec<f64>, lambda: f64) -> Result<Self, SolverError> {
        let p = x0.len();
        if p == 0 || y.len() != p {
            return Err(SolverError::DimensionMismatch(format!(
                "anchor length {p}, label length {}",
                y.len()
            )));
        }
        check_finite("anchor", &x0)?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(SolverError::InvalidArgument(format!("lambda = {lambda}")));
        }
        if y.iter().any(|&v| v != 0.0 && v != 1.0) || y.iter().sum::<f64>() != 1.0 {
            return Err(SolverError::InvalidArgument("label must be one-hot".into()));
        }

        let support = y.iter().filter(|&&v| v != 0.0).count() as f64;
        let z_feasible: Vec<f64> = y
            .iter()
            .map(|&v| if v != 0.0 { 1.0 / support } else { 0.0 })
            .collect();
        let theta = simplex_entropy_objective(&x0, &y, lambda, &z_feasible);

        let sum_x0: f64 = x0.iter().sum();
        let sum_y: f64 = y.iter().sum();
        let e_theta = theta.exp();
        let aggregate = (1.0 - sum_x0 - sum_y / (2.0 * lambda) * e_theta) / p as f64;
        // The aggregate bound drops the slack of coordinates clamped at zero
        // and can overshoot the root when any are. The labelled coordinate
        // alone gives ν = z_k − x_k − c/z_k ≥ −x_k − c·e^θ since z_k ≥ e^{−θ}.
        let labelled = x0
            .iter()
            .zip(&y)
            .filter(|(_, &yi)| yi != 0.0)
            .map(|(&x, &yi)| -x - yi / (2.0 * lambda) * e_theta)
            .fold(f64::INFINITY, f64::min);
        let mut nu_lo = aggregate.min(labelled);
        // e^θ can overflow; the most negative finite double is still a valid
        // lower end for the coordinate maps, which are evaluated overflow-free.
        if nu_lo == f64::NEG_INFINITY {
            nu_lo = f64::MIN;
        }
        let nu_hi = 1.0
            - x0.iter()
                .zip(&y)
                .map(|(&x, &yi)| x + yi / (2.0 * lambda))
                .fold(f64::NEG_INFINITY, f64::max);

        Ok(Self {
            x0,
            y,
            lambda,
            theta,
            nu_lo,
            nu_hi,
        })
    }

    pub fn anchor(&self) -> &[f64] {
        &self.x0
    }

    pub fn label(&self) -> &[f64] {
        &self.y
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Lower bound `e^{−θ}` on the optimal value of every labelled coordinate.
    pub fn z_min(&self) -> f64 {
        (-self.theta).exp()
    }

    pub fn bracket(&self) -> (f64, f64) {
        (self.nu_lo, self.nu_hi)
    }

    /// Primal point `z(ν)` for a given dual value.
    pub fn primal(&self, nu: f64) -> Vec<f64> {
        self.x0
            .iter()
            .zip(&self.y)
            .map(|(&x, &y)| coordinate(x, y, self.lambda, nu))
            .collect()
    }

    /// `1ᵀz(ν) − 1`.
    pub fn excess(&self, nu: f64) -> f64 {
        excess(&self.x0, &self.y, self.lambda, nu)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProxSolution {
    pub z: Vec<f64>,
    pub nu: f64,
    pub iterations: usize,
    /// `|1ᵀz − 1|` at the returned point.
    pub residual: f64,
}

/// `−Σ y_i log z_i + λ‖z − x⁰‖²`, with `0·log 0 = 0`.
pub fn simplex_entropy_objective(x0: &[f64], y: &[f64], lambda: f64, z: &[f64]) -> f64 {
    let mut value = 0.0;
    for ((&x, &yi), &zi) in x0.iter().zip(y).zip(z) {
        if yi != 0.0 {
            value -= yi * zi.ln();
        }
        value += lambda * (zi - x) * (zi - x);
    }
    value
}

/// Unique non-negative root of `z − y/(2λz) = x + ν`.
///
/// Written with `hypot` and the conjugate form for negative `a` so that it
/// neither overflows nor cancels; for `y = 0` it reduces to exactly
/// `max(0, x + ν)`.
#[inline]
fn coordinate(x: f64, y: f64, lambda: f64, nu: f64) -> f64 {
    let a = (x + nu) / 2.0;
    let c = y / (2.0 * lambda);
    if a >= 0.0 {
        a + a.hypot(c.sqrt())
    } else {
        c / (a.hypot(c.sqrt()) - a)
    }
}

#[inline]
fn excess(x0: &[f64], y: &[f64], lambda: f64, nu: f64) -> f64 {
    x0.iter()
        .zip(y)
        .map(|(&x, &yi)| coordinate(x, yi, lambda, nu))
        .sum::<f64>()
        - 1.0
}

/// Bisection state for one column.
#[derive(Clone, Copy, Debug)]
struct Bisection {
    lo: f64,
    hi: f64,
    g_lo: f64,
    g_hi: f64,
    iterations: usize,
}

enum Step {
    Continue,
    Done(f64, f64),
}

impl Bisection {
    fn start(column: usize, prob_g: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<(Self, Step), SolverError> {
        let g_lo = prob_g(lo);
        let g_hi = prob_g(hi);
        let state = Self {
            lo,
            hi,
            g_lo,
            g_hi,
            iterations: 0,
        };
        if g_lo.abs() <= tol {
            return Ok((state, Step::Done(lo, g_lo)));
        }
        if g_hi.abs() <= tol {
            return Ok((state, Step::Done(hi, g_hi)));
        }
        if !(g_lo < 0.0 && g_hi > 0.0) {
            return Err(SolverError::BracketFailure { column, lo, hi });
        }
        Ok((state, Step::Continue))
    }

    fn advance(&mut self, column: usize, prob_g: impl Fn(f64) -> f64, tol: f64) -> Result<Step, SolverError> {
        let mid = self.lo / 2.0 + self.hi / 2.0;
        if mid <= self.lo || mid >= self.hi {
            // Endpoints are adjacent doubles.
            let (nu, g) = if self.g_lo.abs() <= self.g_hi.abs() {
                (self.lo, self.g_lo)
            } else {
                (self.hi, self.g_hi)
            };
            return if g.abs() <= tol {
                Ok(Step::Done(nu, g))
            } else {
                Err(SolverError::BisectionStalled {
                    column,
                    residual: g.abs(),
                })
            };
        }
        self.iterations += 1;
        let g = prob_g(mid);
        if g.abs() <= tol {
            return Ok(Step::Done(mid, g));
        }
        if g < 0.0 {
            self.lo = mid;
            self.g_lo = g;
        } else {
            self.hi = mid;
            self.g_hi = g;
        }
        Ok(Step::Continue)
    }
}

/// Solves one column by bisection on ν until `|1ᵀz − 1| ≤ tol`.
pub fn simplex_entropy_prox(prob: &SimplexEntropyProblem, tol: f64) -> Result<ProxSolution, SolverError> {
    let g = |nu: f64| prob.excess(nu);
    let (lo, hi) = prob.bracket();
    let (mut state, mut step) = Bisection::start(0, g, lo, hi, tol)?;
    loop {
        if let Step::Done(nu, residual) = step {
            return Ok(ProxSolution {
                z: prob.primal(nu),
                nu,
                iterations: state.iterations,
                residual: residual.abs(),
            });
        }
        step = state.advance(0, g, tol)?;
    }
}

/// Column-wise prox of a `p × m` anchor matrix against one-hot label columns.
///
/// All columns are bisected in lockstep with a vector of dual values; each
/// column's iterates are exactly those of [`simplex_entropy_prox`].
pub fn simplex_entropy_prox_batch(
    x0: &DenseMatrix,
    y: &DenseMatrix,
    lambda: f64,
    tol: f64,
) -> Result<DenseMatrix, SolverError> {
    if x0.shape() != y.shape() {
        return Err(SolverError::DimensionMismatch(format!(
            "anchor {:?} vs labels {:?}",
            x0.shape(),
            y.shape()
        )));
    }
    let (p, m) = x0.shape();
    let problems: Vec<SimplexEntropyProblem> = (0..m)
        .map(|j| SimplexEntropyProblem::new(x0.column(j), y.column(j), lambda))
        .collect::<Result<_, _>>()?;

    let mut states = Vec::with_capacity(m);
    let mut nu: Vec<Option<f64>> = vec![None; m];
    for (j, prob) in problems.iter().enumerate() {
        let (lo, hi) = prob.bracket();
        let (state, step) = Bisection::start(j, |v| prob.excess(v), lo, hi, tol)?;
        if let Step::Done(v, _) = step {
            nu[j] = Some(v);
        }
        states.push(state);
    }
    while nu.iter().any(Option::is_none) {
        for (j, prob) in problems.iter().enumerate() {
            if nu[j].is_some() {
                continue;
            }
            if let Step::Done(v, _) = states[j].advance(j, |v| prob.excess(v), tol)? {
                nu[j] = Some(v);
            }
        }
    }

    let mut z = DenseMatrix::zeros(p, m);
    for (j, prob) in problems.iter().enumerate() {
        let col = prob.primal(nu[j].expect("all columns resolved"));
        for (i, v) in col.into_iter().enumerate() {
            z[(i, j)] = v;
        }
    }
    Ok(z)
}
