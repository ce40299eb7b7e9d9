//! Triangular reaction systems: parameters, degeneracy classes and the
//! structural checks (domination, quasi-positivity, the stoichiometric
//! condition) that the rest of the crate relies on.
//!
//! Species are indexed from 0. The product species is always the last one,
//! index `m - 1`; the reactants are `0..m-1`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinetics::{self, RegIndex, RegularizedRates};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("a triangular system needs at least 2 species, got {0}")]
    TooFewSpecies(usize),
    #[error("expected {expected} {what}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("alpha[{index}] = {value} must be finite and nonnegative")]
    InvalidAlpha { index: usize, value: f64 },
    #[error("the product species must carry alpha = 1, got {0}")]
    ProductAlpha(f64),
    #[error("diffusion coefficient d[{index}] = {value} must be finite and nonnegative")]
    InvalidDiffusion { index: usize, value: f64 },
    #[error("sample {sample} has a negative or non-finite entry at species {species}")]
    InvalidSample { sample: usize, species: usize },
}

/// Parameters of an m-species triangular system.
///
/// The reaction is `A_1 + ... + A_{m-1} <-> A_m` with stoichiometric
/// exponents `alpha[i]` on the reactants; `alpha[m-1]` is fixed to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangularSystem {
    alpha: Vec<f64>,
    diffusion: Vec<f64>,
    q: f64,
}

impl TriangularSystem {
    /// Builds a system from the full exponent list (length m, last entry 1)
    /// and the diffusion coefficients (length m).
    pub fn new(alpha: Vec<f64>, diffusion: Vec<f64>) -> Result<Self, ModelError> {
        let m = alpha.len();
        if m < 2 {
            return Err(ModelError::TooFewSpecies(m));
        }
        if diffusion.len() != m {
            return Err(ModelError::LengthMismatch {
                what: "diffusion coefficients",
                expected: m,
                got: diffusion.len(),
            });
        }
        for (index, &value) in alpha.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(ModelError::InvalidAlpha { index, value });
            }
        }
        if alpha[m - 1] != 1.0 {
            return Err(ModelError::ProductAlpha(alpha[m - 1]));
        }
        for (index, &value) in diffusion.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(ModelError::InvalidDiffusion { index, value });
            }
        }
        let q = 1.0 + alpha[..m - 1].iter().sum::<f64>();
        Ok(Self {
            alpha,
            diffusion,
            q,
        })
    }

    /// Builds a system from the m-1 reactant exponents; the product exponent
    /// is appended.
    pub fn from_reactants(reactant_alpha: &[f64], diffusion: Vec<f64>) -> Result<Self, ModelError> {
        let mut alpha = reactant_alpha.to_vec();
        alpha.push(1.0);
        Self::new(alpha, diffusion)
    }

    pub fn species(&self) -> usize {
        self.alpha.len()
    }

    pub fn product_index(&self) -> usize {
        self.alpha.len() - 1
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn reactant_alpha(&self) -> &[f64] {
        &self.alpha[..self.alpha.len() - 1]
    }

    pub fn diffusion(&self) -> &[f64] {
        &self.diffusion
    }

    /// `Q = 1 + sum of reactant exponents`.
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Total reactant degree, `Q - 1`.
    pub fn growth(&self) -> f64 {
        self.q - 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DegeneracyClass {
    /// Product diffuses, at least one reactant does not.
    A1,
    /// Product does not diffuse and neither does some reactant.
    A2,
    /// Only the product is non-diffusing.
    A3,
    NonDegenerate,
}

impl fmt::Display for DegeneracyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self {
            Self::A1 => "A1",
            Self::A2 => "A2",
            Self::A3 => "A3",
            Self::NonDegenerate => "non-degenerate",
        };
        f.write_str(label)
    }
}

/// Split of the species into non-diffusing (`lambda1`) and diffusing
/// (`lambda2`) sets, both sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegeneracyClassification {
    pub lambda1: Vec<usize>,
    pub lambda2: Vec<usize>,
    pub class: DegeneracyClass,
    pub product: usize,
}

impl DegeneracyClassification {
    pub fn is_degenerate(&self, species: usize) -> bool {
        self.lambda1.binary_search(&species).is_ok()
    }

    /// Non-diffusing reactants.
    pub fn degenerate_reactants(&self) -> Vec<usize> {
        self.lambda1
            .iter()
            .copied()
            .filter(|&i| i != self.product)
            .collect()
    }

    /// Diffusing reactants.
    pub fn diffusing_reactants(&self) -> Vec<usize> {
        self.lambda2
            .iter()
            .copied()
            .filter(|&i| i != self.product)
            .collect()
    }

    pub fn product_degenerate(&self) -> bool {
        self.is_degenerate(self.product)
    }
}

/// Classifies by exact comparison of each diffusion coefficient with zero.
pub fn classify(system: &TriangularSystem) -> DegeneracyClassification {
    let product = system.product_index();
    let (lambda1, lambda2): (Vec<usize>, Vec<usize>) =
        (0..system.species()).partition(|&i| system.diffusion()[i] == 0.0);
    let product_still = lambda1.contains(&product);
    let class = if lambda1.is_empty() {
        DegeneracyClass::NonDegenerate
    } else if !product_still {
        DegeneracyClass::A1
    } else if lambda1.len() > 1 {
        DegeneracyClass::A2
    } else {
        DegeneracyClass::A3
    };
    DegeneracyClassification {
        lambda1,
        lambda2,
        class,
        product,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScVerdict {
    pub holds: bool,
    pub reason: String,
}

fn admissible_pivot(alpha: f64) -> bool {
    alpha == 1.0 || alpha >= 2.0
}

/// Stoichiometric condition on the non-diffusing species: every exponent in
/// `lambda1` is at least 1 and at least one of them is 1 or at least 2.
///
/// With no non-diffusing species the condition is not needed and is
/// reported as holding.
pub fn sc_check(system: &TriangularSystem, classification: &DegeneracyClassification) -> ScVerdict {
    let alpha = system.alpha();
    if classification.lambda1.is_empty() {
        return ScVerdict {
            holds: true,
            reason: "every species diffuses; no condition to check".into(),
        };
    }
    if let Some(&bad) = classification.lambda1.iter().find(|&&i| alpha[i] < 1.0) {
        return ScVerdict {
            holds: false,
            reason: format!("alpha[{bad}] = {} is below 1 on a non-diffusing species", alpha[bad]),
        };
    }
    match classification.lambda1.iter().find(|&&i| admissible_pivot(alpha[i])) {
        Some(&j) => ScVerdict {
            holds: true,
            reason: format!("pivot species {j} has alpha = {}", alpha[j]),
        },
        None => ScVerdict {
            holds: false,
            reason: "no non-diffusing species has alpha equal to 1 or at least 2".into(),
        },
    }
}

/// Outcome of a sample-based structural check.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleCheck {
    Holds,
    Violated {
        sample: Vec<f64>,
        row: usize,
        value: f64,
        bound: f64,
    },
}

impl SampleCheck {
    pub fn holds(&self) -> bool {
        matches!(self, Self::Holds)
    }
}

fn validate_samples(system: &TriangularSystem, samples: &[Vec<f64>]) -> Result<(), ModelError> {
    let m = system.species();
    for (sample, state) in samples.iter().enumerate() {
        if state.len() != m {
            return Err(ModelError::LengthMismatch {
                what: "state entries",
                expected: m,
                got: state.len(),
            });
        }
        if let Some(species) = state.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(ModelError::InvalidSample { sample, species });
        }
    }
    Ok(())
}

/// Right-hand side of the domination inequality, `(1, 2, ..., 2, 0)`.
pub fn domination_weights(m: usize) -> Vec<f64> {
    let mut weights = vec![2.0; m];
    weights[0] = 1.0;
    weights[m - 1] = 0.0;
    weights
}

/// Checks `P f(a) <= (1 + sum a) (1, 2, ..., 2, 0)` componentwise, where `P`
/// has ones on the diagonal and the first subdiagonal.
pub fn triangular_domination_check(
    system: &TriangularSystem,
    samples: &[Vec<f64>],
) -> Result<SampleCheck, ModelError> {
    validate_samples(system, samples)?;
    let m = system.species();
    let weights = domination_weights(m);
    for state in samples {
        let f = kinetics::raw_rate(system, state);
        let scale = 1.0 + state.iter().sum::<f64>();
        for row in 0..m {
            let value = if row == 0 { f[0] } else { f[row - 1] + f[row] };
            let bound = scale * weights[row];
            if value > bound {
                return Ok(SampleCheck::Violated {
                    sample: state.clone(),
                    row,
                    value,
                    bound,
                });
            }
        }
    }
    Ok(SampleCheck::Holds)
}

/// Checks that every rate is nonnegative where its own species vanishes,
/// for the raw rates and for a spread of regularization indices.
///
/// Every zero coordinate of a sample is tested, so samples with several
/// zeros are accepted.
pub fn quasi_positivity_check(
    system: &TriangularSystem,
    samples: &[Vec<f64>],
) -> Result<SampleCheck, ModelError> {
    validate_samples(system, samples)?;
    let regularized: Vec<RegularizedRates> = [1.0, 1e3, 1e9]
        .into_iter()
        .map(RegIndex::Finite)
        .chain(std::iter::once(RegIndex::Infinite))
        .map(|n| RegularizedRates::new(system.clone(), n))
        .collect();
    for state in samples {
        let mut rate_sets = vec![kinetics::raw_rate(system, state)];
        rate_sets.extend(regularized.iter().map(|r| r.regularized_rate(state)));
        for rates in &rate_sets {
            for (row, (&a, &f)) in state.iter().zip(rates).enumerate() {
                if a == 0.0 && f < 0.0 {
                    return Ok(SampleCheck::Violated {
                        sample: state.clone(),
                        row,
                        value: f,
                        bound: 0.0,
                    });
                }
            }
        }
    }
    Ok(SampleCheck::Holds)
}
