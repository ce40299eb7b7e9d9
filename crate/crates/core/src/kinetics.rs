//! Reaction rates, the regularization factor and the entropy-related scalar
//! functions shared by the stepper and the diagnostics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::model::TriangularSystem;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KineticsError {
    #[error("regularization index must be positive, got {0}")]
    NonPositiveIndex(f64),
    #[error("cannot parse regularization index {0:?}; expected a positive number or \"inf\"")]
    Unparseable(String),
}

/// Regularization index `n`; `Infinite` switches the regularization off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegIndex {
    Finite(f64),
    Infinite,
}

impl RegIndex {
    pub fn new(n: f64) -> Result<Self, KineticsError> {
        if n.is_nan() || n <= 0.0 {
            Err(KineticsError::NonPositiveIndex(n))
        } else if n == f64::INFINITY {
            Ok(Self::Infinite)
        } else {
            Ok(Self::Finite(n))
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Self::Infinite)
    }

    /// Sort key; `Infinite` compares above every finite index.
    pub fn as_f64(&self) -> f64 {
        match self {
            Self::Finite(n) => *n,
            Self::Infinite => f64::INFINITY,
        }
    }

    /// Short label used in file names: `1`, `1000`, `0.5`, `inf`.
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for RegIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(n) => write!(f, "{n}"),
            Self::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for RegIndex {
    type Err = KineticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "+inf" => Ok(Self::Infinite),
            other => other
                .parse::<f64>()
                .map_err(|_| KineticsError::Unparseable(s.to_string()))
                .and_then(Self::new),
        }
    }
}

impl Serialize for RegIndex {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Finite(n) => serializer.serialize_f64(*n),
            Self::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for RegIndex {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(n) => RegIndex::new(n),
            Raw::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// `prod_{j<m} a_j^{alpha_j}` with `0^0 = 1`.
pub fn reactant_product(system: &TriangularSystem, state: &[f64]) -> f64 {
    system
        .reactant_alpha()
        .iter()
        .zip(state)
        .map(|(&alpha, &a)| a.powf(alpha))
        .product()
}

/// Unregularized rates: `f_i = a_m - prod a_j^{alpha_j}` for reactants and
/// `f_m = -f_1`.
pub fn raw_rate(system: &TriangularSystem, state: &[f64]) -> Vec<f64> {
    let m = system.species();
    let forward = state[m - 1] - reactant_product(system, state);
    let mut rates = vec![forward; m];
    rates[m - 1] = -forward;
    rates
}

/// Rates of a triangular system divided by `phi_n(a) = 1 + (sum a)^{Q+2} / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedRates {
    system: TriangularSystem,
    n: RegIndex,
}

impl RegularizedRates {
    pub fn new(system: TriangularSystem, n: RegIndex) -> Self {
        Self { system, n }
    }

    pub fn system(&self) -> &TriangularSystem {
        &self.system
    }

    pub fn n(&self) -> RegIndex {
        self.n
    }

    /// Regularization factor from the total concentration `sum a`.
    pub fn phi_from_total(&self, total: f64) -> f64 {
        match self.n {
            RegIndex::Infinite => 1.0,
            RegIndex::Finite(n) => 1.0 + total.powf(self.system.q() + 2.0) / n,
        }
    }

    pub fn phi_n(&self, state: &[f64]) -> f64 {
        self.phi_from_total(state.iter().sum())
    }

    /// Scalar reaction rate `(a_m - prod a_j^{alpha_j}) / phi_n`.
    pub fn g_scalar(&self, state: &[f64]) -> f64 {
        let m = self.system.species();
        (state[m - 1] - reactant_product(&self.system, state)) / self.phi_n(state)
    }

    pub fn regularized_rate(&self, state: &[f64]) -> Vec<f64> {
        let phi = self.phi_n(state);
        raw_rate(&self.system, state).into_iter().map(|f| f / phi).collect()
    }
}

/// Entropy density `a (ln a - 1) + 1`, extended by 1 at `a = 0`.
pub fn entropy_kernel(a: f64) -> f64 {
    if a == 0.0 {
        1.0
    } else {
        a * (a.ln() - 1.0) + 1.0
    }
}

/// `(y - x) ln(y / x)` with `0 ln(0/0) = 0`; it is `+inf` when exactly one
/// argument vanishes.
pub fn log_mean_product(x: f64, y: f64) -> f64 {
    if x == y {
        0.0
    } else {
        (y - x) * (y.ln() - x.ln())
    }
}

/// Slack of the elementary inequality
/// `kappa y + (y - x) ln(y/x) / ln(kappa) - x >= 0` for `x, y > 0`, `kappa > 1`.
pub fn log_inequality_slack(x: f64, y: f64, kappa: f64) -> f64 {
    debug_assert!(x > 0.0 && y > 0.0 && kappa > 1.0);
    kappa * y + log_mean_product(x, y) / kappa.ln() - x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn df15() -> TriangularSystem {
        TriangularSystem::from_reactants(&[1.0, 1.0], vec![1.0, 1.0, 0.0]).unwrap()
    }

    #[test]
    fn phi_examples() {
        let r = RegularizedRates::new(df15(), RegIndex::Finite(1.0));
        assert_eq!(r.phi_n(&[1.0, 1.0, 1.0]), 244.0);
        assert_eq!(r.phi_n(&[2.0, 3.0, 5.0]), 100_001.0);
        let limit = RegularizedRates::new(df15(), RegIndex::Infinite);
        assert_eq!(limit.phi_n(&[7.0, 8.0, 9.0]), 1.0);
    }

    #[test]
    fn raw_rate_examples() {
        let s = df15();
        assert_eq!(raw_rate(&s, &[2.0, 3.0, 5.0]), vec![-1.0, -1.0, 1.0]);
        assert_eq!(raw_rate(&s, &[0.0, 3.0, 5.0]), vec![5.0, 5.0, -5.0]);
        assert_eq!(raw_rate(&s, &[2.0, 3.0, 6.0]), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_power_of_zero_is_one() {
        let s = TriangularSystem::from_reactants(&[0.0, 1.0], vec![1.0; 3]).unwrap();
        assert_eq!(reactant_product(&s, &[0.0, 2.0, 0.0]), 2.0);
    }

    #[test]
    fn regularized_example() {
        let r = RegularizedRates::new(df15(), RegIndex::Finite(1.0));
        let f = r.regularized_rate(&[2.0, 3.0, 5.0]);
        assert_eq!(f[0], -1.0 / 100_001.0);
        assert_eq!(f[2], 1.0 / 100_001.0);
        assert_eq!(r.g_scalar(&[2.0, 3.0, 5.0]), -1.0 / 100_001.0);
    }

    #[test]
    fn entropy_kernel_values() {
        assert_eq!(entropy_kernel(0.0), 1.0);
        assert_eq!(entropy_kernel(1.0), 0.0);
        assert!((entropy_kernel(std::f64::consts::E) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn log_slack_example() {
        assert!((log_inequality_slack(4.0, 1.0, 2.0) - 4.0).abs() < 1e-12);
        assert_eq!(log_mean_product(0.0, 0.0), 0.0);
        assert_eq!(log_mean_product(0.0, 1.0), f64::INFINITY);
        assert_eq!(log_mean_product(1.0, 0.0), f64::INFINITY);
    }

    #[test]
    fn reg_index_parsing() {
        assert_eq!("inf".parse::<RegIndex>().unwrap(), RegIndex::Infinite);
        assert_eq!("1000".parse::<RegIndex>().unwrap(), RegIndex::Finite(1000.0));
        assert!("0".parse::<RegIndex>().is_err());
        assert!("abc".parse::<RegIndex>().is_err());
        let parsed: Vec<RegIndex> = serde_json::from_str(r#"[1, 10.5, "inf"]"#).unwrap();
        assert_eq!(parsed[2], RegIndex::Infinite);
        assert_eq!(serde_json::to_string(&parsed).unwrap(), r#"[1.0,10.5,"inf"]"#);
        assert_eq!(RegIndex::Finite(1000.0).label(), "1000");
    }
}
