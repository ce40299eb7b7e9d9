//! Cell-local reaction substep.
//!
//! The sums `sigma_i = a_i + a_m` are invariant under the reaction, so each
//! cell reduces to a scalar ODE for the product,
//! `x' = (prod (sigma_i - x)^{alpha_i} - x) / phi_n`, on `[0, min sigma]`.

use serde::{Deserialize, Serialize};

use crate::kinetics::{log_mean_product, RegIndex, RegularizedRates};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ReactionSolver {
    /// Coefficients frozen at the start of the step, solved exactly.
    FrozenExponential,
    /// Backward Euler by safeguarded Newton.
    #[default]
    CellNewton,
    /// Richardson-extrapolated backward Euler (second order), clipped to
    /// the segment between the old state and the equilibrium.
    CellNewtonRichardson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSolveOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for CellSolveOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            tolerance: 1e-15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellSolveStats {
    pub newton_iterations: u32,
    /// Newton gave up and the root was finished by bisection.
    pub bisection_fallback: bool,
    /// Reaction dissipation density at the new state.
    pub dissipation: f64,
}

/// The reaction restricted to one cell, parametrized by the product value.
struct ReactionLine<'a> {
    rates: &'a RegularizedRates,
    sigma: Vec<f64>,
    sigma_total: f64,
    upper: f64,
}

impl<'a> ReactionLine<'a> {
    fn new(rates: &'a RegularizedRates, state: &[f64]) -> Self {
        let m = state.len();
        let x0 = state[m - 1];
        let sigma: Vec<f64> = state[..m - 1].iter().map(|&a| a + x0).collect();
        let upper = sigma.iter().copied().fold(f64::INFINITY, f64::min);
        Self {
            rates,
            sigma_total: sigma.iter().sum(),
            sigma,
            upper,
        }
    }

    fn product(&self, x: f64) -> f64 {
        self.sigma
            .iter()
            .zip(self.rates.system().reactant_alpha())
            .map(|(&s, &alpha)| (s - x).max(0.0).powf(alpha))
            .product()
    }

    fn total(&self, x: f64) -> f64 {
        let m = self.sigma.len() + 1;
        (self.sigma_total - (m as f64 - 2.0) * x).max(0.0)
    }

    fn phi(&self, x: f64) -> f64 {
        self.rates.phi_from_total(self.total(x))
    }

    fn rate(&self, x: f64) -> f64 {
        (self.product(x) - x) / self.phi(x)
    }

    fn rate_derivative(&self, x: f64) -> f64 {
        let p = self.product(x);
        let mut dp = 0.0;
        for (&s, &alpha) in self.sigma.iter().zip(self.rates.system().reactant_alpha()) {
            if alpha == 0.0 {
                continue;
            }
            let gap = s - x;
            if gap <= 0.0 {
                return f64::NAN;
            }
            dp -= alpha * p / gap;
        }
        let phi = self.phi(x);
        let dphi = match self.rates.n() {
            RegIndex::Infinite => 0.0,
            RegIndex::Finite(n) => {
                let m = self.sigma.len() + 1;
                let q2 = self.rates.system().q() + 2.0;
                -(m as f64 - 2.0) * q2 * self.total(x).powf(q2 - 1.0) / n
            }
        };
        (dp - 1.0) / phi - (p - x) * dphi / (phi * phi)
    }

    /// Root of `prod (sigma_i - x)^{alpha_i} = x` on `[0, upper]`.
    fn equilibrium(&self) -> f64 {
        let (mut lo, mut hi) = (0.0, self.upper);
        if self.product(hi) - hi >= 0.0 {
            return hi;
        }
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return mid;
            }
            if self.product(mid) - mid > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }

    /// Backward Euler step from `x0`: root of `x - x0 - dt R(x)`.
    fn backward_euler(&self, x0: f64, dt: f64, options: &CellSolveOptions, stats: &mut CellSolveStats) -> f64 {
        let residual = |x: f64| x - x0 - dt * self.rate(x);
        let (mut lo, mut hi) = (0.0, self.upper);
        if residual(hi) <= 0.0 {
            return hi;
        }
        if residual(lo) >= 0.0 {
            return lo;
        }
        let mut x = x0.clamp(lo, hi);
        for _ in 0..options.max_iterations {
            stats.newton_iterations += 1;
            let f = residual(x);
            if f == 0.0 {
                return x;
            }
            if f < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let slope = 1.0 - dt * self.rate_derivative(x);
            let newton = x - f / slope;
            let next = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - x).abs() <= options.tolerance * next.abs().max(f64::MIN_POSITIVE) || hi - lo <= 0.0 {
                return next;
            }
            x = next;
        }
        stats.bisection_fallback = true;
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return mid;
            }
            if residual(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
}

/// Advances one cell's state by a reaction substep of length `dt`, in place.
///
/// The result stays in the nonnegative orthant and preserves every
/// `a_i + a_m` up to rounding.
pub fn reaction_cell_solve(
    state: &mut [f64],
    rates: &RegularizedRates,
    dt: f64,
    solver: ReactionSolver,
    options: &CellSolveOptions,
) -> CellSolveStats {
    let m = state.len();
    let x0 = state[m - 1];
    let line = ReactionLine::new(rates, state);
    let mut stats = CellSolveStats::default();
    let x = if line.upper <= 0.0 {
        0.0
    } else {
        match solver {
            ReactionSolver::FrozenExponential => {
                let p0 = line.product(x0);
                let x = p0 + (x0 - p0) * (-dt / line.phi(x0)).exp();
                x.clamp(0.0, line.upper)
            }
            ReactionSolver::CellNewton => line.backward_euler(x0, dt, options, &mut stats),
            ReactionSolver::CellNewtonRichardson => {
                let full = line.backward_euler(x0, dt, options, &mut stats);
                let half = line.backward_euler(x0, 0.5 * dt, options, &mut stats);
                let twice = line.backward_euler(half, 0.5 * dt, options, &mut stats);
                let star = line.equilibrium();
                (2.0 * twice - full).clamp(x0.min(star), x0.max(star))
            }
        }
    };
    for (a, &s) in state[..m - 1].iter_mut().zip(&line.sigma) {
        *a = (s - x).max(0.0);
    }
    state[m - 1] = x;
    stats.dissipation = log_mean_product(line.product(x), x) / line.phi(x);
    stats
}

/// Equilibrium product value for the reactant-product sums of `state`.
pub fn equilibrium_product(rates: &RegularizedRates, state: &[f64]) -> f64 {
    let line = ReactionLine::new(rates, state);
    if line.upper <= 0.0 {
        0.0
    } else {
        line.equilibrium()
    }
}
