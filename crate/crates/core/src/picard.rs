//! Pointwise integrating-factor representation of a non-diffusing reactant,
//! its Picard iteration with the factorial error envelope, and an adaptive
//! Dormand-Prince integrator used as an independent oracle.
//!
//! For a non-diffusing reactant `j`, with `a_i = phi_ij + a_j` for the other
//! non-diffusing reactants, the scalar equation is
//! `a_j' = dq1 a_m - dq1 dq2(a_j) dq3 a_j` where `dq1 = 1 / phi_n`,
//! `dq2(r) = r^{alpha_j - 1} prod (phi_ij + r)^{alpha_i}` and `dq3` is the
//! product of the diffusing reactants raised to their exponents.

use serde::Serialize;
use thiserror::Error;

use crate::model::{classify, TriangularSystem};
use crate::stepper::PointTrace;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PicardError {
    #[error("trajectory `{name}` has {got} samples, expected {expected}")]
    MeshMismatch { name: String, got: usize, expected: usize },
    #[error("time mesh must be uniform, increasing and start at 0")]
    BadMesh,
    #[error("invalid pointwise inputs: {0}")]
    Invalid(String),
    #[error("iterate {iterate} reaches {value} at t = {time}, above the bound {bound}")]
    BoundBreach { iterate: usize, time: f64, value: f64, bound: f64 },
    #[error("ODE integrator failed at t = {time}: {reason}")]
    Integrator { time: f64, reason: String },
}

/// Sampled data the scalar equation of one non-diffusing reactant depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseInputs {
    pub initial: f64,
    pub alpha_j: f64,
    /// `(phi_ij, alpha_i)` for the other non-diffusing reactants.
    pub offsets: Vec<(f64, f64)>,
    pub times: Vec<f64>,
    pub driver_am: Vec<f64>,
    /// `(trajectory, alpha_i)` for the diffusing reactants.
    pub drivers_lambda2: Vec<(Vec<f64>, f64)>,
    /// Samples of `1 / phi_n`; all ones without regularization.
    pub inverse_phi: Vec<f64>,
}

impl PointwiseInputs {
    pub fn validate(&self) -> Result<(), PicardError> {
        let len = self.times.len();
        if len < 2 || self.times[0] != 0.0 {
            return Err(PicardError::BadMesh);
        }
        let h = self.step();
        if !(h > 0.0) || self.times.iter().enumerate().any(|(k, &t)| (t - k as f64 * h).abs() > 1e-9 * h.max(t)) {
            return Err(PicardError::BadMesh);
        }
        let check = |name: &str, v: &[f64]| {
            if v.len() != len {
                Err(PicardError::MeshMismatch {
                    name: name.to_string(),
                    got: v.len(),
                    expected: len,
                })
            } else if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                Err(PicardError::Invalid(format!("trajectory `{name}` must be finite and nonnegative")))
            } else {
                Ok(())
            }
        };
        check("driver_am", &self.driver_am)?;
        check("inverse_phi", &self.inverse_phi)?;
        for (k, (d, alpha)) in self.drivers_lambda2.iter().enumerate() {
            check(&format!("drivers_lambda2[{k}]"), d)?;
            if !(*alpha >= 0.0) {
                return Err(PicardError::Invalid(format!("negative exponent for driver {k}")));
            }
        }
        if !(self.initial.is_finite() && self.initial >= 0.0) {
            return Err(PicardError::Invalid("initial value must be nonnegative".into()));
        }
        if !(self.alpha_j >= 1.0) {
            return Err(PicardError::Invalid(format!(
                "exponent of the tracked reactant must be at least 1, got {}",
                self.alpha_j
            )));
        }
        for &(offset, alpha) in &self.offsets {
            if self.initial + offset < 0.0 || !(alpha >= 0.0) {
                return Err(PicardError::Invalid(format!("offset {offset} with exponent {alpha} is inadmissible")));
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("validated mesh")
    }

    fn step(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    /// `dq2(r)`.
    pub fn zeta(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        self.offsets
            .iter()
            .map(|&(offset, alpha)| (offset + r).max(0.0).powf(alpha))
            .product::<f64>()
            * r.powf(self.alpha_j - 1.0)
    }

    /// `d zeta / dr` by the product rule; infinite where a factor is singular.
    pub fn zeta_derivative(&self, r: f64) -> f64 {
        let mut factors: Vec<(f64, f64)> = self.offsets.iter().map(|&(o, a)| (o + r, a)).collect();
        factors.push((r, self.alpha_j - 1.0));
        let mut total = 0.0;
        for k in 0..factors.len() {
            let (base, exponent) = factors[k];
            if exponent == 0.0 {
                continue;
            }
            let mut term = exponent * base.powf(exponent - 1.0);
            for (l, &(b, e)) in factors.iter().enumerate() {
                if l != k {
                    term *= b.powf(e);
                }
            }
            total += term;
        }
        total
    }

    /// `dq3` at sample `k`.
    pub fn delta3(&self, k: usize) -> f64 {
        self.drivers_lambda2.iter().map(|(d, alpha)| d[k].powf(*alpha)).product()
    }

    fn interpolate(&self, values: &[f64], t: f64) -> f64 {
        let h = self.step();
        let x = (t / h).clamp(0.0, (values.len() - 1) as f64);
        let k = (x.floor() as usize).min(values.len() - 2);
        let w = x - k as f64;
        values[k] * (1.0 - w) + values[k + 1] * w
    }

    /// Right-hand side of the scalar equation with drivers interpolated
    /// linearly between samples.
    pub fn rhs(&self, t: f64, a: f64) -> f64 {
        let d1 = self.interpolate(&self.inverse_phi, t);
        let am = self.interpolate(&self.driver_am, t);
        let d3: f64 = self
            .drivers_lambda2
            .iter()
            .map(|(d, alpha)| self.interpolate(d, t).powf(*alpha))
            .product();
        d1 * am - d1 * self.zeta(a) * d3 * a
    }

    /// Largest sampled value over all drivers.
    pub fn driver_sup(&self) -> f64 {
        std::iter::once(&self.driver_am)
            .chain(self.drivers_lambda2.iter().map(|(d, _)| d))
            .flat_map(|d| d.iter().copied())
            .fold(0.0, f64::max)
    }
}

/// Evaluates the integrating-factor representation with `a_j` replaced by
/// the trial trajectory, using trapezoidal quadrature on the input mesh.
pub fn integrating_factor_eval(inputs: &PointwiseInputs, trial: &[f64]) -> Result<Vec<f64>, PicardError> {
    inputs.validate()?;
    if trial.len() != inputs.times.len() {
        return Err(PicardError::MeshMismatch {
            name: "trial".into(),
            got: trial.len(),
            expected: inputs.times.len(),
        });
    }
    let h = inputs.step();
    let decay: Vec<f64> = (0..trial.len())
        .map(|k| inputs.inverse_phi[k] * inputs.zeta(trial[k]) * inputs.delta3(k))
        .collect();
    let source: Vec<f64> = (0..trial.len())
        .map(|k| inputs.driver_am[k] * inputs.inverse_phi[k])
        .collect();
    let mut out = Vec::with_capacity(trial.len());
    let mut homogeneous = inputs.initial;
    let mut forced = 0.0;
    out.push(homogeneous);
    for k in 1..trial.len() {
        let factor = (-0.5 * h * (decay[k - 1] + decay[k])).exp();
        homogeneous *= factor;
        forced = factor * (forced + 0.5 * h * source[k - 1]) + 0.5 * h * source[k];
        out.push(homogeneous + forced);
    }
    Ok(out)
}

/// Runs the Picard iteration from the constant initial iterate; returns
/// iterates `0..=p_max`. Every iterate is checked against
/// `initial + T sup(a_m / phi_n)`.
pub fn picard_iterate(inputs: &PointwiseInputs, p_max: usize) -> Result<Vec<Vec<f64>>, PicardError> {
    inputs.validate()?;
    if p_max == 0 {
        return Err(PicardError::Invalid("at least one iteration is required".into()));
    }
    let forcing_sup = inputs
        .driver_am
        .iter()
        .zip(&inputs.inverse_phi)
        .map(|(a, d)| a * d)
        .fold(0.0, f64::max);
    let bound = inputs.initial + inputs.horizon() * forcing_sup;
    let slack = 1e-12 * bound.max(1.0);
    let mut iterates = vec![vec![inputs.initial; inputs.times.len()]];
    for p in 1..=p_max {
        let next = integrating_factor_eval(inputs, &iterates[p - 1])?;
        if let Some((k, &v)) = next.iter().enumerate().find(|(_, &v)| v > bound + slack || v < 0.0) {
            return Err(PicardError::BoundBreach {
                iterate: p,
                time: inputs.times[k],
                value: v,
                bound,
            });
        }
        iterates.push(next);
    }
    Ok(iterates)
}

/// Number of points used to sample `|zeta'|` on `[0, C4]`.
pub const ZETA_SAMPLES: usize = 10_000;
/// Inflation applied to the sampled supremum.
pub const SAFETY_FACTOR: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PicardBoundConstants {
    /// Sup bound `initial + T C~` on the iterates.
    pub c4: f64,
    /// Lipschitz aggregate of the iteration map.
    pub c5: f64,
    pub horizon: f64,
    /// Stand-in for the non-constructive driver bound: the largest sampled
    /// driver value.
    pub c_tilde: f64,
    pub zeta_slope: f64,
}

impl PicardBoundConstants {
    pub fn from_inputs(inputs: &PointwiseInputs) -> Result<Self, PicardError> {
        inputs.validate()?;
        let horizon = inputs.horizon();
        let c_tilde = inputs.driver_sup();
        let c4 = inputs.initial + horizon * c_tilde;
        let zeta_slope = (0..=ZETA_SAMPLES)
            .map(|k| inputs.zeta_derivative(c4 * k as f64 / ZETA_SAMPLES as f64).abs())
            .fold(0.0, f64::max)
            * SAFETY_FACTOR;
        let driver_factor: f64 = inputs.drivers_lambda2.iter().map(|(_, a)| c_tilde.powf(*a)).product();
        let c5 = (1.0 + horizon) * c4 * driver_factor * zeta_slope;
        Ok(Self {
            c4,
            c5,
            horizon,
            c_tilde,
            zeta_slope,
        })
    }

    /// `2 T C4 (C5 T)^p / p!`.
    pub fn envelope(&self, p: usize) -> f64 {
        let x = self.c5 * self.horizon;
        let mut term = 2.0 * self.horizon * self.c4;
        for k in 1..=p {
            term *= x / k as f64;
        }
        term
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeRow {
    pub p: usize,
    pub error: f64,
    pub envelope: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub rows: Vec<EnvelopeRow>,
    pub holds: bool,
    pub worst_p: Option<usize>,
    /// Absolute allowance for rounding in the measured errors.
    pub rounding_floor: f64,
}

/// Compares `sup_t |iterate_p - reference|` with the factorial envelope for
/// every supplied iterate. Errors at the level of floating-point rounding of
/// `C4` are accepted once the envelope drops below it.
pub fn convergence_envelope_check(
    iterates: &[Vec<f64>],
    constants: &PicardBoundConstants,
    reference: &[f64],
) -> Result<EnvelopeReport, PicardError> {
    let rounding_floor = 64.0 * f64::EPSILON * constants.c4;
    let mut rows = Vec::with_capacity(iterates.len());
    let mut worst: Option<(usize, f64)> = None;
    for (p, it) in iterates.iter().enumerate() {
        if it.len() != reference.len() {
            return Err(PicardError::MeshMismatch {
                name: format!("iterate {p}"),
                got: it.len(),
                expected: reference.len(),
            });
        }
        let error = sup_distance(it, reference);
        let envelope = constants.envelope(p);
        let pass = error <= envelope.max(rounding_floor);
        if !pass {
            let excess = error / envelope;
            if worst.is_none_or(|(_, w)| excess > w) {
                worst = Some((p, excess));
            }
        }
        rows.push(EnvelopeRow { p, error, envelope, pass });
    }
    Ok(EnvelopeReport {
        holds: worst.is_none(),
        worst_p: worst.map(|(p, _)| p),
        rows,
        rounding_floor,
    })
}

pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-13,
            initial_step: 1e-4,
            max_steps: 10_000_000,
        }
    }
}

const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B_LOW: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive Dormand-Prince 5(4) integration of `y' = f(t, y)` from
/// `times[0]`, returning the solution at every entry of `times`.
/// Steps are shortened to land on each output time exactly.
pub fn dormand_prince(
    mut f: impl FnMut(f64, &[f64], &mut [f64]),
    y0: &[f64],
    times: &[f64],
    options: &OdeOptions,
) -> Result<Vec<Vec<f64>>, PicardError> {
    let n = y0.len();
    let mut t = times.first().copied().unwrap_or(0.0);
    let mut y = y0.to_vec();
    let mut out = vec![y.clone()];
    let mut h = options.initial_step;
    let mut k = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut steps = 0;
    for &target in times.iter().skip(1) {
        while t < target {
            steps += 1;
            if steps > options.max_steps {
                return Err(PicardError::Integrator {
                    time: t,
                    reason: "step budget exhausted".into(),
                });
            }
            let last = t + h >= target;
            let step = if last { target - t } else { h };
            f(t, &y, &mut k[0]);
            for s in 1..7 {
                for i in 0..n {
                    stage[i] = y[i] + step * (0..s).map(|r| DP_A[s][r] * k[r][i]).sum::<f64>();
                }
                f(t + DP_C[s] * step, &stage, &mut k[s]);
            }
            let mut err: f64 = 0.0;
            for i in 0..n {
                y_new[i] = y[i] + step * (0..7).map(|s| DP_B[s] * k[s][i]).sum::<f64>();
                let low = y[i] + step * (0..7).map(|s| DP_B_LOW[s] * k[s][i]).sum::<f64>();
                let scale = options.atol + options.rtol * y[i].abs().max(y_new[i].abs());
                err = err.max((y_new[i] - low).abs() / scale);
            }
            if !err.is_finite() {
                return Err(PicardError::Integrator {
                    time: t,
                    reason: "non-finite error estimate".into(),
                });
            }
            if err <= 1.0 {
                t = if last { target } else { t + step };
                y.copy_from_slice(&y_new);
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (step * factor).max(1e-14);
            if h < 1e-13 && err > 1.0 {
                return Err(PicardError::Integrator {
                    time: t,
                    reason: "step size underflow".into(),
                });
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// Integrates the scalar equation of `inputs` with Dormand-Prince on its
/// time mesh.
pub fn ode_oracle(inputs: &PointwiseInputs, options: &OdeOptions) -> Result<Vec<f64>, PicardError> {
    inputs.validate()?;
    let out = dormand_prince(
        |t, y, dy| dy[0] = inputs.rhs(t, y[0]),
        &[inputs.initial],
        &inputs.times,
        options,
    )?;
    Ok(out.into_iter().map(|v| v[0]).collect())
}

/// Pointwise scenario with analytic drivers: three species, exponents
/// `(2, 1)`, only the first reactant non-diffusing, no regularization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CanonicalScenario {
    pub initial: f64,
    pub horizon: f64,
    pub mesh: usize,
}

impl Default for CanonicalScenario {
    fn default() -> Self {
        Self {
            initial: 0.4,
            horizon: 1.0,
            mesh: 2000,
        }
    }
}

impl CanonicalScenario {
    pub const ALPHA_J: f64 = 2.0;
    pub const ALPHA_DRIVER: f64 = 1.0;

    pub fn product(t: f64) -> f64 {
        0.3 + 0.2 * (2.0 * std::f64::consts::PI * t).sin()
    }

    pub fn driver(t: f64) -> f64 {
        0.4 + 0.1 * (3.0 * t).cos()
    }

    pub fn inputs(&self) -> PointwiseInputs {
        let times: Vec<f64> = (0..=self.mesh).map(|k| self.horizon * k as f64 / self.mesh as f64).collect();
        PointwiseInputs {
            initial: self.initial,
            alpha_j: Self::ALPHA_J,
            offsets: Vec::new(),
            driver_am: times.iter().map(|&t| Self::product(t)).collect(),
            drivers_lambda2: vec![(times.iter().map(|&t| Self::driver(t)).collect(), Self::ALPHA_DRIVER)],
            inverse_phi: vec![1.0; times.len()],
            times,
        }
    }

    /// Right-hand side with the exact drivers.
    pub fn rhs(t: f64, a: f64) -> f64 {
        Self::product(t) - a.powf(Self::ALPHA_J) * Self::driver(t).powf(Self::ALPHA_DRIVER)
    }

    /// Dormand-Prince solution on the scenario mesh with exact drivers.
    pub fn oracle(&self, options: &OdeOptions) -> Result<Vec<f64>, PicardError> {
        let inputs = self.inputs();
        let out = dormand_prince(|t, y, dy| dy[0] = Self::rhs(t, y[0]), &[self.initial], &inputs.times, options)?;
        Ok(out.into_iter().map(|v| v[0]).collect())
    }
}

/// Builds pointwise inputs for reactant `j` from a stepper trace at one cell.
pub fn inputs_from_trace(system: &TriangularSystem, trace: &PointTrace, j: usize) -> Result<PointwiseInputs, PicardError> {
    let classification = classify(system);
    let m = system.species();
    if j + 1 >= m || !classification.lambda1.contains(&j) {
        return Err(PicardError::Invalid(format!("species {} is not a non-diffusing reactant", j + 1)));
    }
    let first = trace
        .states
        .first()
        .ok_or_else(|| PicardError::Invalid("empty trace".into()))?;
    let offsets = classification
        .degenerate_reactants()
        .into_iter()
        .filter(|&i| i != j)
        .map(|i| (first[i] - first[j], system.alpha()[i]))
        .collect();
    let drivers_lambda2 = classification
        .diffusing_reactants()
        .into_iter()
        .map(|i| (trace.states.iter().map(|s| s[i]).collect(), system.alpha()[i]))
        .collect();
    let inputs = PointwiseInputs {
        initial: first[j],
        alpha_j: system.alpha()[j],
        offsets,
        times: trace.times.clone(),
        driver_am: trace.states.iter().map(|s| s[m - 1]).collect(),
        drivers_lambda2,
        inverse_phi: trace.inverse_phi.clone(),
    };
    inputs.validate()?;
    Ok(inputs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_inputs(initial: f64, am: f64, driver: f64, mesh: usize, horizon: f64) -> PointwiseInputs {
        let times: Vec<f64> = (0..=mesh).map(|k| horizon * k as f64 / mesh as f64).collect();
        let len = times.len();
        PointwiseInputs {
            initial,
            alpha_j: 1.0,
            offsets: Vec::new(),
            driver_am: vec![am; len],
            drivers_lambda2: vec![(vec![driver; len], 1.0)],
            inverse_phi: vec![1.0; len],
            times,
        }
    }

    #[test]
    fn no_dynamics_keeps_the_initial_value() {
        let inputs = constant_inputs(0.7, 0.0, 0.0, 100, 1.0);
        let out = integrating_factor_eval(&inputs, &vec![0.7; 101]).unwrap();
        assert!(out.iter().all(|&v| (v - 0.7).abs() < 1e-15));
    }

    #[test]
    fn linear_closed_form() {
        let inputs = constant_inputs(3.0, 1.0, 1.0, 4000, 2.0);
        let iterates = picard_iterate(&inputs, 3).unwrap();
        for (k, &t) in inputs.times.iter().enumerate() {
            let exact = 1.0 + 2.0 * (-t).exp();
            assert!((iterates[1][k] - exact).abs() < 1e-7);
        }
        assert_eq!(iterates[1], iterates[3]);
    }

    #[test]
    fn equilibrium_drivers_give_constant_iterates() {
        // a_j^2 * driver = a_m with a_j = 0.5, driver = 0.8.
        let inputs = PointwiseInputs {
            alpha_j: 2.0,
            ..constant_inputs(0.5, 0.2, 0.8, 200, 1.0)
        };
        let iterates = picard_iterate(&inputs, 4).unwrap();
        for it in &iterates {
            assert!(it.iter().all(|&v| (v - 0.5).abs() < 1e-6));
        }
    }

    #[test]
    fn canonical_constants() {
        let c = PicardBoundConstants::from_inputs(&CanonicalScenario::default().inputs()).unwrap();
        assert!((c.c_tilde - 0.5).abs() < 1e-6);
        assert!((c.c4 - 0.9).abs() < 1e-6);
        assert!((c.c5 - 1.1 * 2.0 * 0.9 * 0.5).abs() < 1e-5);
        assert!((c.envelope(0) - 1.8).abs() < 1e-5);
    }

    #[test]
    fn zeta_derivative_matches_difference_quotient() {
        let inputs = PointwiseInputs {
            offsets: vec![(0.3, 1.5), (1.0, 2.0)],
            alpha_j: 2.5,
            ..constant_inputs(0.2, 1.0, 1.0, 10, 1.0)
        };
        for r in [0.1, 0.5, 2.0] {
            let h = 1e-6;
            let fd = (inputs.zeta(r + h) - inputs.zeta(r - h)) / (2.0 * h);
            assert!((fd - inputs.zeta_derivative(r)).abs() < 1e-6 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn dormand_prince_on_exponential() {
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.3).collect();
        let out = dormand_prince(|_, y, dy| dy[0] = -y[0], &[1.0], &times, &OdeOptions::default()).unwrap();
        for (t, y) in times.iter().zip(&out) {
            assert!((y[0] - (-t).exp()).abs() < 1e-11);
        }
    }

    #[test]
    fn mesh_mismatch_is_reported() {
        let mut inputs = constant_inputs(1.0, 1.0, 1.0, 10, 1.0);
        inputs.driver_am.pop();
        assert!(matches!(picard_iterate(&inputs, 2), Err(PicardError::MeshMismatch { .. })));
        let inputs = constant_inputs(1.0, 1.0, 1.0, 10, 1.0);
        assert!(matches!(integrating_factor_eval(&inputs, &[1.0; 3]), Err(PicardError::MeshMismatch { .. })));
    }
}
