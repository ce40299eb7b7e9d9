//! Exact bookkeeping of Lebesgue exponents through a regularity bootstrap.
//!
//! Everything here is rational arithmetic on `BigRational`; no step ever
//! touches a float. A chain alternates between exponents carried by the
//! reactants and by the product species, and each step records the rule it
//! applied, its inputs, and a human-readable witness of the identity or
//! inequality it verified.

use std::cmp::Ordering;
use std::fmt;

use num::{BigInt, BigRational, One, Signed, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BootstrapError {
    #[error("Lebesgue exponents must be at least 1, got {0}")]
    BelowOne(String),
    #[error("the conjugate of p = 1 is infinite and cannot be used as a Hoelder partner here")]
    ConjugateOfOne,
    #[error("Young's inequality needs 1/q + 1/r >= 1; the pair ({q}, {r}) falls short by {deficit}")]
    YoungInadmissible {
        q: String,
        r: String,
        deficit: String,
    },
    #[error("smoothing needs the target exponent {p} to be at least the source exponent {q}")]
    SmoothingBackwards { q: String, p: String },
    #[error("interpolation parameter must lie in [0, 1], got {0}")]
    ThetaOutOfRange(String),
    #[error("growth degree must be positive and at most the exponent: p = {p}, degree = {degree}")]
    PowerMapDomain { p: String, degree: String },
    #[error("space dimension must be at least 1")]
    Dimension,
}

/// A Lebesgue exponent in `[1, inf]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Exponent {
    Finite(BigRational),
    Infinite,
}

pub fn rational(numer: i64, denom: i64) -> BigRational {
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}

impl Exponent {
    pub fn ratio(numer: i64, denom: i64) -> Self {
        Self::Finite(rational(numer, denom))
    }

    pub fn integer(value: i64) -> Self {
        Self::ratio(value, 1)
    }

    /// `1/p`, which is 0 for `p = inf`.
    pub fn reciprocal(&self) -> BigRational {
        match self {
            Self::Finite(p) => p.recip(),
            Self::Infinite => BigRational::zero(),
        }
    }

    /// Exponent with the given reciprocal; a zero reciprocal means `inf`.
    pub fn from_reciprocal(recip: BigRational) -> Result<Self, BootstrapError> {
        if recip.is_zero() {
            return Ok(Self::Infinite);
        }
        let p = recip.recip();
        Self::Finite(p).validated()
    }

    fn validated(self) -> Result<Self, BootstrapError> {
        match &self {
            Self::Finite(p) if *p < BigRational::one() => Err(BootstrapError::BelowOne(self.to_string())),
            _ => Ok(self),
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Self::Infinite)
    }
}

impl Ord for Exponent {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Self::Infinite, Self::Infinite) => Ordering::Equal,
            (Self::Infinite, _) => Ordering::Greater,
            (_, Self::Infinite) => Ordering::Less,
            (Self::Finite(a), Self::Finite(b)) => a.cmp(b),
        }
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(p) => write!(f, "{p}"),
            Self::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

fn check_exponent(p: &Exponent) -> Result<(), BootstrapError> {
    p.clone().validated().map(|_| ())
}

/// Hoelder conjugate `p'` with `1/p + 1/p' = 1`.
pub fn holder_conjugate(p: &Exponent) -> Result<Exponent, BootstrapError> {
    check_exponent(p)?;
    let recip = BigRational::one() - p.reciprocal();
    if recip.is_zero() {
        return Err(BootstrapError::ConjugateOfOne);
    }
    Exponent::from_reciprocal(recip)
}

/// Output exponent of Young's convolution inequality,
/// `1 + 1/p = 1/q + 1/r`.
pub fn young_convolution(q: &Exponent, r: &Exponent) -> Result<Exponent, BootstrapError> {
    check_exponent(q)?;
    check_exponent(r)?;
    let recip = q.reciprocal() + r.reciprocal() - BigRational::one();
    if recip.is_negative() {
        return Err(BootstrapError::YoungInadmissible {
            q: q.to_string(),
            r: r.to_string(),
            deficit: (-recip).to_string(),
        });
    }
    Exponent::from_reciprocal(recip)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KernelVerdict {
    /// Time-singularity exponent `(N/2)(1/q - 1/p)`.
    #[serde(serialize_with = "as_string")]
    pub exponent: BigRational,
    pub pass: bool,
}

/// Whether `(t - s)^{-(N/2)(1/q - 1/p)}` is integrable near `s = t`.
pub fn kernel_time_integrable(dimension: u32, q: &Exponent, p: &Exponent) -> Result<KernelVerdict, BootstrapError> {
    if dimension == 0 {
        return Err(BootstrapError::Dimension);
    }
    check_exponent(q)?;
    check_exponent(p)?;
    if p < q {
        return Err(BootstrapError::SmoothingBackwards {
            q: q.to_string(),
            p: p.to_string(),
        });
    }
    let exponent = rational(dimension as i64, 2) * (q.reciprocal() - p.reciprocal());
    let pass = exponent < BigRational::one();
    Ok(KernelVerdict { exponent, pass })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GnVerdict {
    #[serde(serialize_with = "as_string")]
    pub lhs: BigRational,
    #[serde(serialize_with = "as_string")]
    pub rhs: BigRational,
    pub pass: bool,
}

/// Gagliardo-Nirenberg exponent identity
/// `1/p = theta (1/2 - 1/N) + (1 - theta)/q`.
pub fn gn_identity_check(
    dimension: u32,
    p: &Exponent,
    q: &Exponent,
    theta: &BigRational,
) -> Result<GnVerdict, BootstrapError> {
    if dimension == 0 {
        return Err(BootstrapError::Dimension);
    }
    check_exponent(p)?;
    check_exponent(q)?;
    if theta.is_negative() || *theta > BigRational::one() {
        return Err(BootstrapError::ThetaOutOfRange(theta.to_string()));
    }
    let lhs = p.reciprocal();
    let sobolev = rational(1, 2) - rational(1, dimension as i64);
    let rhs = theta * sobolev + (BigRational::one() - theta) * q.reciprocal();
    let pass = lhs == rhs;
    Ok(GnVerdict { lhs, rhs, pass })
}

/// Exponent of a degree-`degree` power of an `L^p` function: `p / degree`.
pub fn ode_power_map(p: &Exponent, degree: &BigRational) -> Result<Exponent, BootstrapError> {
    check_exponent(p)?;
    let domain_error = || BootstrapError::PowerMapDomain {
        p: p.to_string(),
        degree: degree.to_string(),
    };
    if !degree.is_positive() {
        return Err(domain_error());
    }
    match p {
        Exponent::Infinite => Ok(Exponent::Infinite),
        Exponent::Finite(value) if value < degree => Err(domain_error()),
        Exponent::Finite(value) => Ok(Exponent::Finite(value / degree)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdKind {
    /// `L^p(Omega)` data uniformly in time: `p > N/2`.
    Space,
    /// `L^p(Omega_T)` data: `p > (N+2)/2`.
    Spacetime,
}

/// Exponent above which a source term yields bounded solutions.
pub fn linf_threshold(dimension: u32, kind: ThresholdKind) -> BigRational {
    let n = dimension as i64;
    match kind {
        ThresholdKind::Space => rational(n, 2),
        ThresholdKind::Spacetime => rational(n + 2, 2),
    }
}

fn as_string<S: Serializer>(value: &BigRational, serializer: S) -> Result<S::Ok, S::Error> {
    serializer.collect_str(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Holder,
    YoungConvolution,
    KernelSmoothing,
    GnInterpolation,
    OdePowerMap,
    LinfThresholdSpace,
    LinfThresholdSpacetime,
}

impl Rule {
    /// Check-only rules pass their input through unchanged.
    pub fn is_check(&self) -> bool {
        matches!(self, Self::KernelSmoothing | Self::LinfThresholdSpace | Self::LinfThresholdSpacetime)
    }
}

/// Which species an exponent is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Carrier {
    Reactant,
    Product,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainStep {
    pub rule: Rule,
    pub carrier: Carrier,
    pub input: Exponent,
    pub output: Exponent,
    /// Named auxiliary parameters of the rule (kernel exponent, theta, ...).
    pub parameters: Vec<(String, String)>,
    pub pass: bool,
    pub witness: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "status", content = "exponent")]
pub enum Conclusion {
    ReachedLinf,
    StuckAt(Exponent),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExponentChain {
    pub scenario: String,
    pub dimension: u32,
    #[serde(serialize_with = "as_string")]
    pub growth: BigRational,
    pub seed: Exponent,
    pub seed_carrier: Carrier,
    pub steps: Vec<ChainStep>,
    pub conclusion: Conclusion,
    pub notes: Vec<String>,
}

impl ExponentChain {
    pub fn reached_linf(&self) -> bool {
        self.conclusion == Conclusion::ReachedLinf
    }

    /// Structural consistency: inputs chain to outputs, checks pass through,
    /// and each carrier's exponent strictly grows between non-check steps.
    pub fn is_well_formed(&self) -> bool {
        let mut current = self.seed.clone();
        let mut last_by_carrier: [Option<Exponent>; 2] = [None, None];
        let slot = |c: Carrier| match c {
            Carrier::Reactant => 0,
            Carrier::Product => 1,
        };
        last_by_carrier[slot(self.seed_carrier)] = Some(self.seed.clone());
        for step in &self.steps {
            if step.input != current {
                return false;
            }
            if step.rule.is_check() {
                if step.output != step.input {
                    return false;
                }
            } else if step.pass {
                let prev = &last_by_carrier[slot(step.carrier)];
                if let Some(prev) = prev {
                    if step.output <= *prev {
                        return false;
                    }
                }
                last_by_carrier[slot(step.carrier)] = Some(step.output.clone());
            }
            current = step.output.clone();
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scenario {
    /// Product-only degeneracy in one or two space dimensions.
    A3LowDim,
    QuadN3,
    QuadN4,
    QuadN5,
    /// Reactant degree 10/3 in three dimensions.
    G103N3,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [Self::A3LowDim, Self::QuadN3, Self::QuadN4, Self::QuadN5, Self::G103N3];

    pub fn name(&self) -> &'static str {
        match self {
            Self::A3LowDim => "A3-lowdim",
            Self::QuadN3 => "quad-N3",
            Self::QuadN4 => "quad-N4",
            Self::QuadN5 => "quad-N5",
            Self::G103N3 => "G103-N3",
        }
    }
}

/// One planned move of a chain.
#[derive(Debug, Clone)]
enum Move {
    /// Interpolate the current reactant exponent to `target` with `theta`.
    Interpolate { theta: BigRational, target: Exponent },
    /// Raise the reactant bound to the product through the ODE.
    Power { degree: BigRational },
    /// Convolve a product bound with the heat kernel to reach `target`.
    Smooth { target: Exponent },
    Threshold(ThresholdKind),
}

struct ChainBuilder {
    chain: ExponentChain,
    current: Exponent,
    carrier: Carrier,
    failed: bool,
}

impl ChainBuilder {
    fn new(scenario: &str, dimension: u32, growth: BigRational, seed: Exponent, carrier: Carrier) -> Self {
        Self {
            chain: ExponentChain {
                scenario: scenario.to_string(),
                dimension,
                growth,
                seed: seed.clone(),
                seed_carrier: carrier,
                steps: Vec::new(),
                conclusion: Conclusion::StuckAt(seed.clone()),
                notes: Vec::new(),
            },
            current: seed,
            carrier,
            failed: false,
        }
    }

    fn push(&mut self, rule: Rule, carrier: Carrier, output: Exponent, parameters: Vec<(String, String)>, pass: bool, witness: String) {
        self.chain.steps.push(ChainStep {
            rule,
            carrier,
            input: self.current.clone(),
            output: output.clone(),
            parameters,
            pass,
            witness,
        });
        if pass {
            self.current = output;
            self.carrier = carrier;
        } else {
            self.failed = true;
        }
    }

    fn fail(&mut self, rule: Rule, error: BootstrapError) {
        let carrier = self.carrier;
        let output = self.current.clone();
        self.push(rule, carrier, output, Vec::new(), false, error.to_string());
    }

    fn apply(&mut self, mv: &Move) {
        if self.failed {
            return;
        }
        let n = self.chain.dimension;
        match mv {
            Move::Interpolate { theta, target } => match gn_identity_check(n, target, &self.current, theta) {
                Ok(v) => {
                    let witness = format!(
                        "1/{target} = {} and theta(1/2 - 1/{n}) + (1 - theta)/{} = {}",
                        v.lhs, self.current, v.rhs
                    );
                    self.push(
                        Rule::GnInterpolation,
                        Carrier::Reactant,
                        target.clone(),
                        vec![("theta".into(), theta.to_string())],
                        v.pass,
                        witness,
                    );
                }
                Err(e) => self.fail(Rule::GnInterpolation, e),
            },
            Move::Power { degree } => match ode_power_map(&self.current, degree) {
                Ok(out) => {
                    let witness = format!("{} / {degree} = {out}", self.current);
                    self.push(
                        Rule::OdePowerMap,
                        Carrier::Product,
                        out,
                        vec![("degree".into(), degree.to_string())],
                        true,
                        witness,
                    );
                }
                Err(e) => self.fail(Rule::OdePowerMap, e),
            },
            Move::Smooth { target } => self.smooth(target),
            Move::Threshold(kind) => {
                let bound = linf_threshold(n, *kind);
                let pass = self.current > Exponent::Finite(bound.clone());
                let rule = match kind {
                    ThresholdKind::Space => Rule::LinfThresholdSpace,
                    ThresholdKind::Spacetime => Rule::LinfThresholdSpacetime,
                };
                let relation = if pass { ">" } else { "<=" };
                let witness = format!("{} {relation} {bound}", self.current);
                let carrier = self.carrier;
                let output = self.current.clone();
                self.push(rule, carrier, output, vec![("threshold".into(), bound.to_string())], pass, witness);
            }
        }
    }

    fn smooth(&mut self, target: &Exponent) {
        let q = self.current.clone();
        let n = self.chain.dimension;
        let kernel_recip = BigRational::one() + target.reciprocal() - q.reciprocal();
        let kernel = match Exponent::from_reciprocal(kernel_recip) {
            Ok(r) => r,
            Err(e) => return self.fail(Rule::YoungConvolution, e),
        };
        match young_convolution(&q, &kernel) {
            Ok(out) => {
                let pass = out == *target;
                let witness = format!("1 + 1/{out} = 1/{q} + 1/{kernel}");
                self.push(
                    Rule::YoungConvolution,
                    Carrier::Reactant,
                    out,
                    vec![("kernel-exponent".into(), kernel.to_string())],
                    pass,
                    witness,
                );
            }
            Err(e) => return self.fail(Rule::YoungConvolution, e),
        }
        if self.failed {
            return;
        }
        match kernel_time_integrable(n, &q, target) {
            Ok(v) => {
                let relation = if v.pass { "<" } else { ">=" };
                let witness = format!("({n}/2)(1/{q} - 1/{target}) = {} {relation} 1", v.exponent);
                let output = self.current.clone();
                self.push(
                    Rule::KernelSmoothing,
                    Carrier::Reactant,
                    output,
                    vec![
                        ("source".into(), q.to_string()),
                        ("time-exponent".into(), v.exponent.to_string()),
                    ],
                    v.pass,
                    witness,
                );
            }
            Err(e) => self.fail(Rule::KernelSmoothing, e),
        }
    }

    fn finish(mut self) -> ExponentChain {
        let closed_by_threshold = self
            .chain
            .steps
            .last()
            .is_some_and(|s| s.rule == Rule::LinfThresholdSpacetime);
        let bounded = !self.failed && (self.current.is_infinite() || closed_by_threshold);
        self.chain.conclusion = if bounded {
            Conclusion::ReachedLinf
        } else {
            Conclusion::StuckAt(self.current.clone())
        };
        self.chain
    }
}

fn run_plan(
    scenario: &str,
    dimension: u32,
    growth: BigRational,
    seed: Exponent,
    carrier: Carrier,
    plan: &[Move],
) -> ExponentChain {
    let mut builder = ChainBuilder::new(scenario, dimension, growth, seed, carrier);
    for mv in plan {
        builder.apply(mv);
    }
    builder.finish()
}

/// Product-only degeneracy: the product's `L^1` bound is smoothed to
/// `L^{4Q}` for the reactants, fed back through the degree-`Q` power map and
/// compared with the space-time threshold.
pub fn a3_lowdim_chain(dimension: u32, q: BigRational) -> ExponentChain {
    let growth = &q - BigRational::one();
    let target = Exponent::Finite(rational(4, 1) * &q);
    let plan = [
        Move::Smooth { target },
        Move::Power { degree: q.clone() },
        Move::Threshold(ThresholdKind::Spacetime),
    ];
    let mut chain = run_plan("A3-lowdim", dimension, growth, Exponent::integer(1), Carrier::Product, &plan);
    chain
        .notes
        .push(format!("power map uses Q = {q}, which dominates the reactant degree"));
    chain
}

/// Duality route: an `L^{2NQ}` reactant bound maps to an `L^{2N}` product
/// bound, above the space-time threshold in every dimension.
pub fn duality_chain(dimension: u32, q: BigRational) -> ExponentChain {
    let growth = &q - BigRational::one();
    let seed = Exponent::Finite(rational(2 * dimension as i64, 1) * &q);
    let plan = [Move::Power { degree: q }, Move::Threshold(ThresholdKind::Spacetime)];
    run_plan("A1-duality", dimension, growth, seed, Carrier::Reactant, &plan)
}

fn sobolev_seed_plan(dimension: u32) -> Vec<Move> {
    let n = dimension as i64;
    vec![
        Move::Interpolate {
            theta: BigRational::one(),
            target: Exponent::ratio(2 * n, n - 2),
        },
        Move::Power { degree: rational(2, 1) },
    ]
}

fn quad_chain(scenario: Scenario) -> ExponentChain {
    let (dimension, targets): (u32, Vec<Exponent>) = match scenario {
        Scenario::QuadN3 => (3, vec![]),
        Scenario::QuadN4 => (4, vec![Exponent::integer(6)]),
        Scenario::QuadN5 => (5, vec![Exponent::ratio(50, 11), Exponent::ratio(50, 3)]),
        _ => unreachable!("not a quadratic scenario"),
    };
    let two = rational(2, 1);
    let mut plan = sobolev_seed_plan(dimension);
    for target in targets {
        plan.push(Move::Smooth { target });
        plan.push(Move::Power { degree: two.clone() });
    }
    plan.push(Move::Threshold(ThresholdKind::Space));
    plan.push(Move::Smooth {
        target: Exponent::Infinite,
    });
    run_plan(scenario.name(), dimension, two, Exponent::integer(2), Carrier::Reactant, &plan)
}

fn g103_chain(first_target: Exponent, interpolated: Exponent, scenario: &str) -> ExponentChain {
    let degree = rational(10, 3);
    let plan = [
        Move::Smooth { target: first_target },
        Move::Interpolate {
            theta: rational(1, 2),
            target: interpolated,
        },
        Move::Power { degree: degree.clone() },
        Move::Smooth {
            target: Exponent::ratio(58, 11),
        },
        Move::Power { degree: degree.clone() },
        Move::Threshold(ThresholdKind::Space),
        Move::Smooth {
            target: Exponent::Infinite,
        },
    ];
    run_plan(scenario, 3, degree, Exponent::integer(1), Carrier::Product, &plan)
}

/// The reactant-degree-10/3 chain through `L^{80/27}`, the exponent obtained
/// from `3 - 9/243`, instead of `L^{234/81}`.
pub fn g103_variant_chain() -> ExponentChain {
    g103_chain(Exponent::ratio(80, 27), Exponent::ratio(480, 121), "G103-N3-variant")
}

pub fn replay_chain(scenario: Scenario) -> ExponentChain {
    match scenario {
        Scenario::A3LowDim => a3_lowdim_chain(2, rational(3, 1)),
        Scenario::QuadN3 | Scenario::QuadN4 | Scenario::QuadN5 => quad_chain(scenario),
        Scenario::G103N3 => {
            let mut chain = g103_chain(Exponent::ratio(234, 81), Exponent::ratio(39, 10), scenario.name());
            let variant = g103_variant_chain();
            let stated = Exponent::ratio(234, 81);
            let shifted = Exponent::from_reciprocal(rational(27, 80)).expect("80/27 is a valid exponent");
            chain.notes.push(format!(
                "3 - 9/243 = {shifted} differs from {stated}; both lie below the admissibility limit 3"
            ));
            chain.notes.push(format!(
                "variant through {shifted}: {}",
                if variant.reached_linf() {
                    "every step passes"
                } else {
                    "a step fails"
                }
            ));
            chain
        }
    }
}

/// Every scenario plus the exponent variant and the duality route.
pub fn replay_all() -> Vec<ExponentChain> {
    let mut chains: Vec<ExponentChain> = Scenario::ALL.iter().map(|&s| replay_chain(s)).collect();
    chains.push(g103_variant_chain());
    chains.push(duality_chain(3, rational(3, 1)));
    chains
}
