//! Entropy, dissipation, Lebesgue norms and invariant residuals of a running
//! simulation, plus post-hoc checks over a recorded series.

use serde::Serialize;
use thiserror::Error;

use crate::grid::{gradient_energy, integrate, Field, FieldSet, GradientWeight};
use crate::kinetics::{entropy_kernel, log_mean_product, reactant_product, RegularizedRates};
use crate::model::{classify, DegeneracyClassification, TriangularSystem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("Lebesgue exponent {0} is not tracked by this series")]
    ExponentNotTracked(f64),
    #[error("species {0} is out of range")]
    Species(usize),
    #[error("the series needs at least {needed} records, got {got}")]
    TooShort { needed: usize, got: usize },
}

/// `sum_i alpha_i integral (a_i (ln a_i - 1) + 1)`.
pub fn entropy(fields: &FieldSet, alpha: &[f64]) -> f64 {
    let cm = fields.grid().cell_measure();
    fields
        .fields()
        .iter()
        .zip(alpha)
        .map(|(f, &w)| w * f.values().iter().map(|&a| entropy_kernel(a)).sum::<f64>() * cm)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dissipation {
    pub gradient: f64,
    pub reaction: f64,
    pub total: f64,
}

/// `sum_i alpha_i d_i 4 integral |grad sqrt(a_i)|^2` for one species.
pub fn species_gradient_dissipation(field: &Field, alpha: f64, diffusion: f64) -> f64 {
    if alpha == 0.0 || diffusion == 0.0 {
        return 0.0;
    }
    alpha * diffusion * gradient_energy(field, GradientWeight::InverseDensity).value
}

pub fn gradient_dissipation(fields: &FieldSet, system: &TriangularSystem) -> f64 {
    (0..system.species())
        .map(|i| species_gradient_dissipation(fields.field(i), system.alpha()[i], system.diffusion()[i]))
        .sum()
}

/// `integral (a_m - P) ln(a_m / P) / phi_n` with `P = prod a_j^{alpha_j}`.
pub fn reaction_dissipation(fields: &FieldSet, rates: &RegularizedRates) -> f64 {
    let m = fields.species();
    let mut state = vec![0.0; m];
    let mut sum = 0.0;
    for cell in 0..fields.grid().cell_count() {
        fields.cell_state(cell, &mut state);
        let product = reactant_product(rates.system(), &state);
        sum += log_mean_product(product, state[m - 1]) / rates.phi_n(&state);
    }
    sum * fields.grid().cell_measure()
}

pub fn dissipation(fields: &FieldSet, rates: &RegularizedRates) -> Dissipation {
    let gradient = gradient_dissipation(fields, rates.system());
    let reaction = reaction_dissipation(fields, rates);
    Dissipation {
        gradient,
        reaction,
        total: gradient + reaction,
    }
}

/// `L^p(Omega)` norm; `p = inf` gives the maximum modulus.
pub fn lp_norm(field: &Field, p: f64) -> f64 {
    debug_assert!(p >= 1.0);
    if p.is_infinite() {
        return field.values().iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    lp_power(field, p).powf(1.0 / p)
}

/// `integral |u|^p`.
pub fn lp_power(field: &Field, p: f64) -> f64 {
    field.values().iter().map(|v| v.abs().powf(p)).sum::<f64>() * field.grid().cell_measure()
}

/// A priori `L^1` bound `max(alpha) e^2 |Omega| + (max alpha / min alpha) E(0)`,
/// where the minimum skips zero exponents.
pub fn m2_bound(alpha: &[f64], measure: f64, e0: f64) -> f64 {
    let max = alpha.iter().copied().fold(0.0, f64::max);
    let min = alpha.iter().copied().filter(|&a| a > 0.0).fold(f64::INFINITY, f64::min);
    let e = std::f64::consts::E;
    max * e * e * measure + (max / min) * e0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeciesNorms {
    pub l1: f64,
    pub l2: f64,
    /// One entry per tracked exponent.
    pub lp: Vec<f64>,
    pub sup: f64,
    /// Running `L^p(Omega_t)` norms, one per tracked exponent.
    pub spacetime_lp: Vec<f64>,
    pub spacetime_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairResidual {
    pub first: usize,
    pub second: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub step: u64,
    pub entropy: f64,
    pub dissipation: f64,
    pub dissipation_gradient: f64,
    pub dissipation_reaction: f64,
    /// Dissipation integrated by the stepper over `[0, time]`.
    pub dissipation_integral: f64,
    pub lp_exponents: Vec<f64>,
    pub species: Vec<SpeciesNorms>,
    /// `integral (a_i + a_m)` for every reactant `i`.
    pub pair_masses: Vec<f64>,
    /// Drift of `a_i - a_j` for non-diffusing reactant pairs, max over cells.
    pub degenerate_pair_residuals: Vec<PairResidual>,
    /// Drift of `a_i + a_m` for non-diffusing reactants when the product
    /// does not diffuse either, max over cells.
    pub pointwise_sum_residuals: Vec<(usize, f64)>,
    /// `integral_{Omega_t} (a_i^2 + a_i a_m)` for every reactant `i`.
    pub product_integrals: Vec<f64>,
    pub l1_total: f64,
    pub m2_bound: f64,
    pub entropy_initial: f64,
    pub l1_warning: bool,
}

impl DiagnosticsRecord {
    /// CSV header matching `csv_row`.
    pub fn csv_header(&self) -> Vec<String> {
        let mut h = vec!["time".to_string(), "E".into(), "D".into()];
        for i in 0..self.species.len() {
            let s = i + 1;
            h.push(format!("L1_{s}"));
            h.push(format!("L2_{s}"));
            for p in &self.lp_exponents {
                h.push(format!("Lp{p}_{s}"));
            }
            h.push(format!("sup_{s}"));
            for p in &self.lp_exponents {
                h.push(format!("stLp{p}_{s}"));
            }
            h.push(format!("stsup_{s}"));
        }
        h.extend(["step", "D_gradient", "D_reaction", "D_integral"].map(String::from));
        for i in 0..self.pair_masses.len() {
            h.push(format!("pair_mass_{}", i + 1));
        }
        for r in &self.degenerate_pair_residuals {
            h.push(format!("pair_drift_{}_{}", r.first + 1, r.second + 1));
        }
        for (i, _) in &self.pointwise_sum_residuals {
            h.push(format!("sum_drift_{}", i + 1));
        }
        for i in 0..self.product_integrals.len() {
            h.push(format!("product_integral_{}", i + 1));
        }
        h.extend(["L1_total", "M2", "E0", "L1_warning"].map(String::from));
        h
    }

    pub fn csv_row(&self) -> Vec<String> {
        let f = |v: f64| format!("{v:.12e}");
        let mut r = vec![f(self.time), f(self.entropy), f(self.dissipation)];
        for s in &self.species {
            r.push(f(s.l1));
            r.push(f(s.l2));
            r.extend(s.lp.iter().map(|&v| f(v)));
            r.push(f(s.sup));
            r.extend(s.spacetime_lp.iter().map(|&v| f(v)));
            r.push(f(s.spacetime_sup));
        }
        r.push(self.step.to_string());
        r.push(f(self.dissipation_gradient));
        r.push(f(self.dissipation_reaction));
        r.push(f(self.dissipation_integral));
        r.extend(self.pair_masses.iter().map(|&v| f(v)));
        r.extend(self.degenerate_pair_residuals.iter().map(|p| f(p.residual)));
        r.extend(self.pointwise_sum_residuals.iter().map(|&(_, v)| f(v)));
        r.extend(self.product_integrals.iter().map(|&v| f(v)));
        r.push(f(self.l1_total));
        r.push(f(self.m2_bound));
        r.push(f(self.entropy_initial));
        r.push(self.l1_warning.to_string());
        r
    }
}

/// Tracks references and running space-time integrals along a run and turns
/// states into `DiagnosticsRecord`s.
#[derive(Debug, Clone)]
pub struct Monitor {
    rates: RegularizedRates,
    classification: DegeneracyClassification,
    lp_exponents: Vec<f64>,
    entropy_initial: f64,
    m2: f64,
    degenerate_pairs: Vec<(usize, usize, Vec<f64>)>,
    pointwise_sums: Vec<(usize, Vec<f64>)>,
    /// `[species][exponent]` accumulated `integral_0^t integral |a|^p`.
    spacetime: Vec<Vec<f64>>,
    spacetime_sup: Vec<f64>,
    previous_powers: Vec<Vec<f64>>,
    product_integrals: Vec<f64>,
    previous_products: Vec<f64>,
}

impl Monitor {
    pub fn new(rates: RegularizedRates, initial: &FieldSet, lp_exponents: Vec<f64>) -> Self {
        let system = rates.system();
        let classification = classify(system);
        let m = system.species();
        let product = m - 1;
        let reactants = classification.degenerate_reactants();
        let mut degenerate_pairs = Vec::new();
        for (k, &i) in reactants.iter().enumerate() {
            for &j in &reactants[k + 1..] {
                let reference = difference(initial.field(i), initial.field(j), -1.0);
                degenerate_pairs.push((i, j, reference));
            }
        }
        let pointwise_sums = if classification.product_degenerate() {
            reactants
                .iter()
                .map(|&i| (i, difference(initial.field(i), initial.field(product), 1.0)))
                .collect()
        } else {
            Vec::new()
        };
        let entropy_initial = entropy(initial, system.alpha());
        let m2 = m2_bound(system.alpha(), initial.grid().measure(), entropy_initial);
        let previous_powers = species_powers(initial, &lp_exponents);
        let previous_products = product_densities(initial);
        Self {
            spacetime: vec![vec![0.0; lp_exponents.len()]; m],
            spacetime_sup: (0..m).map(|i| lp_norm(initial.field(i), f64::INFINITY)).collect(),
            product_integrals: vec![0.0; m - 1],
            rates,
            classification,
            lp_exponents,
            entropy_initial,
            m2,
            degenerate_pairs,
            pointwise_sums,
            previous_powers,
            previous_products,
        }
    }

    pub fn classification(&self) -> &DegeneracyClassification {
        &self.classification
    }

    pub fn entropy_initial(&self) -> f64 {
        self.entropy_initial
    }

    /// Advances the space-time integrals over a step of length `dt` ending in
    /// `fields` (trapezoidal rule in time).
    pub fn accumulate(&mut self, dt: f64, fields: &FieldSet) {
        let powers = species_powers(fields, &self.lp_exponents);
        for (i, row) in powers.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                self.spacetime[i][k] += 0.5 * dt * (self.previous_powers[i][k] + v);
            }
            self.spacetime_sup[i] = self.spacetime_sup[i].max(lp_norm(fields.field(i), f64::INFINITY));
        }
        self.previous_powers = powers;
        let products = product_densities(fields);
        for (acc, (&old, &new)) in self.product_integrals.iter_mut().zip(self.previous_products.iter().zip(&products)) {
            *acc += 0.5 * dt * (old + new);
        }
        self.previous_products = products;
    }

    /// Largest drift of the non-diffusing pair differences and of the
    /// pointwise reactant-product sums since the initial state.
    pub fn record_residuals(&self, fields: &FieldSet) -> (f64, f64) {
        let product = fields.species() - 1;
        let pairs = self
            .degenerate_pairs
            .iter()
            .map(|(i, j, reference)| drift(fields.field(*i), fields.field(*j), -1.0, reference))
            .fold(0.0, f64::max);
        let sums = self
            .pointwise_sums
            .iter()
            .map(|(i, reference)| drift(fields.field(*i), fields.field(product), 1.0, reference))
            .fold(0.0, f64::max);
        (pairs, sums)
    }

    pub fn record(&self, time: f64, step: u64, fields: &FieldSet, dissipation_integral: f64) -> DiagnosticsRecord {
        let system = self.rates.system();
        let m = system.species();
        let product = m - 1;
        let d = dissipation(fields, &self.rates);
        let species: Vec<SpeciesNorms> = (0..m)
            .map(|i| {
                let f = fields.field(i);
                SpeciesNorms {
                    l1: lp_norm(f, 1.0),
                    l2: lp_norm(f, 2.0),
                    lp: self.lp_exponents.iter().map(|&p| lp_norm(f, p)).collect(),
                    sup: lp_norm(f, f64::INFINITY),
                    spacetime_lp: self
                        .lp_exponents
                        .iter()
                        .zip(&self.spacetime[i])
                        .map(|(&p, &acc)| acc.powf(1.0 / p))
                        .collect(),
                    spacetime_sup: self.spacetime_sup[i],
                }
            })
            .collect();
        let pair_masses = (0..product)
            .map(|i| integrate(fields.field(i)) + integrate(fields.field(product)))
            .collect();
        let degenerate_pair_residuals = self
            .degenerate_pairs
            .iter()
            .map(|(i, j, reference)| PairResidual {
                first: *i,
                second: *j,
                residual: drift(fields.field(*i), fields.field(*j), -1.0, reference),
            })
            .collect();
        let pointwise_sum_residuals = self
            .pointwise_sums
            .iter()
            .map(|(i, reference)| (*i, drift(fields.field(*i), fields.field(product), 1.0, reference)))
            .collect();
        let l1_total: f64 = fields.fields().iter().map(integrate).sum();
        DiagnosticsRecord {
            time,
            step,
            entropy: entropy(fields, system.alpha()),
            dissipation: d.total,
            dissipation_gradient: d.gradient,
            dissipation_reaction: d.reaction,
            dissipation_integral,
            lp_exponents: self.lp_exponents.clone(),
            species,
            pair_masses,
            degenerate_pair_residuals,
            pointwise_sum_residuals,
            product_integrals: self.product_integrals.clone(),
            l1_total,
            m2_bound: self.m2,
            entropy_initial: self.entropy_initial,
            l1_warning: l1_total > self.m2,
        }
    }
}

fn difference(a: &Field, b: &Field, sign: f64) -> Vec<f64> {
    a.values().iter().zip(b.values()).map(|(x, y)| x + sign * y).collect()
}

fn drift(a: &Field, b: &Field, sign: f64, reference: &[f64]) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .zip(reference)
        .map(|((x, y), r)| (x + sign * y - r).abs())
        .fold(0.0, f64::max)
}

fn species_powers(fields: &FieldSet, exponents: &[f64]) -> Vec<Vec<f64>> {
    fields
        .fields()
        .iter()
        .map(|f| exponents.iter().map(|&p| lp_power(f, p)).collect())
        .collect()
}

/// `integral (a_i^2 + a_i a_m)` for each reactant.
fn product_densities(fields: &FieldSet) -> Vec<f64> {
    let m = fields.species();
    let am = fields.field(m - 1).values();
    let cm = fields.grid().cell_measure();
    (0..m - 1)
        .map(|i| {
            fields
                .field(i)
                .values()
                .iter()
                .zip(am)
                .map(|(a, b)| a * a + a * b)
                .sum::<f64>()
                * cm
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyBalanceReport {
    pub holds: bool,
    /// Largest `E(t_k) + integral_0^{t_k} D - E(0)(1 + tol)`; nonpositive when
    /// the balance holds.
    pub max_excess: f64,
    pub worst_time: f64,
    pub tolerance: f64,
}

/// Checks `E(t_k) + integral_0^{t_k} D <= E(0) (1 + tol)` along the series,
/// using the dissipation integral accumulated by the stepper.
pub fn entropy_balance_check(series: &[DiagnosticsRecord], tolerance: f64) -> EntropyBalanceReport {
    let mut report = EntropyBalanceReport {
        holds: true,
        max_excess: f64::NEG_INFINITY,
        worst_time: 0.0,
        tolerance,
    };
    for r in series {
        let excess = r.entropy + r.dissipation_integral - r.entropy_initial * (1.0 + tolerance);
        if excess > report.max_excess {
            report.max_excess = excess;
            report.worst_time = r.time;
        }
    }
    report.holds = report.max_excess <= 0.0 || series.is_empty();
    report
}

/// Largest entropy increase between consecutive records.
pub fn max_entropy_increase(series: &[DiagnosticsRecord]) -> f64 {
    series
        .windows(2)
        .map(|w| w[1].entropy - w[0].entropy)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityRow {
    pub time: f64,
    pub product_norm: f64,
    pub reactant_norm: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityReport {
    pub reactant: usize,
    pub exponent: f64,
    pub rows: Vec<DualityRow>,
    /// Smallest `C` with `||a_m|| <= C (1 + ||a_i||)` in `L^p(Omega_t)` at
    /// every recorded `t`.
    pub fitted_constant: f64,
}

/// Fits the constant of the duality estimate between reactant `reactant`
/// and the product in a tracked space-time norm.
pub fn duality_report(series: &[DiagnosticsRecord], reactant: usize, p: f64) -> Result<DualityReport, DiagnosticsError> {
    let first = series.first().ok_or(DiagnosticsError::TooShort { needed: 1, got: 0 })?;
    let m = first.species.len();
    if reactant + 1 >= m {
        return Err(DiagnosticsError::Species(reactant));
    }
    let k = first
        .lp_exponents
        .iter()
        .position(|&q| q == p)
        .ok_or(DiagnosticsError::ExponentNotTracked(p))?;
    let rows: Vec<DualityRow> = series
        .iter()
        .map(|r| {
            let product_norm = r.species[m - 1].spacetime_lp[k];
            let reactant_norm = r.species[reactant].spacetime_lp[k];
            DualityRow {
                time: r.time,
                product_norm,
                reactant_norm,
                ratio: product_norm / (1.0 + reactant_norm),
            }
        })
        .collect();
    let fitted_constant = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(DualityReport {
        reactant,
        exponent: p,
        rows,
        fitted_constant,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductEstimateReport {
    pub reactant: usize,
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
    /// `max_residual / (slope * T)`; 0 when both vanish.
    pub relative_residual: f64,
    /// Late-half growth rate exceeds the early-half rate by more than 5%.
    pub super_linear: bool,
    pub holds: bool,
}

/// Fits `integral_{Omega_T} (a_i^2 + a_i a_m)` by an affine function of `T`
/// over the recorded checkpoints.
pub fn l1_product_estimate_check(
    series: &[DiagnosticsRecord],
    reactant: usize,
    threshold: f64,
) -> Result<ProductEstimateReport, DiagnosticsError> {
    if series.len() < 3 {
        return Err(DiagnosticsError::TooShort {
            needed: 3,
            got: series.len(),
        });
    }
    if reactant >= series[0].product_integrals.len() {
        return Err(DiagnosticsError::Species(reactant));
    }
    let t: Vec<f64> = series.iter().map(|r| r.time).collect();
    let v: Vec<f64> = series.iter().map(|r| r.product_integrals[reactant]).collect();
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let vm = v.iter().sum::<f64>() / n;
    let sxx: f64 = t.iter().map(|x| (x - tm) * (x - tm)).sum();
    let sxy: f64 = t.iter().zip(&v).map(|(x, y)| (x - tm) * (y - vm)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = vm - slope * tm;
    let max_residual = t
        .iter()
        .zip(&v)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    let horizon = t[t.len() - 1] - t[0];
    let linear_term = (slope * horizon).abs();
    let relative_residual = if max_residual == 0.0 {
        0.0
    } else {
        max_residual / linear_term
    };
    let mid = t.len() / 2;
    let rate = |a: usize, b: usize| (v[b] - v[a]) / (t[b] - t[a]);
    let early = rate(0, mid);
    let late = rate(mid, t.len() - 1);
    let super_linear = late > 1.05 * early && late - early > 1e-12 * early.abs().max(1.0);
    Ok(ProductEstimateReport {
        reactant,
        slope,
        intercept,
        max_residual,
        relative_residual,
        super_linear,
        holds: relative_residual <= threshold && !super_linear,
    })
}
