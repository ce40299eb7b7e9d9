//! Neumann heat kernel on intervals and rectangles: truncated cosine series,
//! a method-of-images form for short times, Gaussian upper-bound fitting and
//! a numerical probe of the space-time smoothing estimate for the sourced
//! heat equation.

use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Field, Grid};
use crate::stepper::{DiffusionOperator, DiffusionScheme};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("kernel time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("invalid kernel specification: {0}")]
    InvalidSpec(String),
    #[error("point {0:?} lies outside the domain")]
    OutOfDomain(Vec<f64>),
    #[error("invalid probe: {0}")]
    InvalidProbe(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub diffusion: f64,
    /// One length per axis (1 or 2 axes).
    pub lengths: Vec<f64>,
    /// Number of cosine modes per axis.
    pub modes: usize,
}

impl KernelSpec {
    pub fn interval(diffusion: f64, length: f64, modes: usize) -> Result<Self, KernelError> {
        let spec = Self {
            diffusion,
            lengths: vec![length],
            modes,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn rectangle(diffusion: f64, lengths: [f64; 2], modes: usize) -> Result<Self, KernelError> {
        let spec = Self {
            diffusion,
            lengths: lengths.to_vec(),
            modes,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        if !(self.diffusion.is_finite() && self.diffusion > 0.0) {
            return Err(KernelError::InvalidSpec(format!("diffusion must be positive, got {}", self.diffusion)));
        }
        if !(1..=2).contains(&self.lengths.len()) {
            return Err(KernelError::InvalidSpec("one or two axes are supported".into()));
        }
        if self.lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(KernelError::InvalidSpec("lengths must be positive".into()));
        }
        if self.modes == 0 {
            return Err(KernelError::InvalidSpec("at least one mode is required".into()));
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.lengths.len()
    }

    /// Default Gaussian exponent `1 / (8 d)`.
    pub fn default_kappa(&self) -> f64 {
        1.0 / (8.0 * self.diffusion)
    }

    fn check_point(&self, p: &[f64]) -> Result<(), KernelError> {
        if p.len() != self.dimension() || p.iter().zip(&self.lengths).any(|(x, l)| !(*x >= 0.0 && *x <= *l)) {
            return Err(KernelError::OutOfDomain(p.to_vec()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelValue {
    pub value: f64,
    /// Bound on the omitted modes.
    pub tail_bound: f64,
}

fn series_1d(d: f64, length: f64, modes: usize, t: f64, x: f64, y: f64) -> KernelValue {
    let mut value = 1.0 / length;
    for k in 1..=modes {
        let w = k as f64 * PI / length;
        value += 2.0 / length * (-d * w * w * t).exp() * ((w * x).cos() * (w * y).cos());
    }
    let c = d * (PI / length).powi(2) * t;
    let next = (modes + 1) as f64;
    let ratio = (-c * (2.0 * next + 1.0)).exp();
    let tail_bound = 2.0 / length * (-c * next * next).exp() / (1.0 - ratio).max(f64::MIN_POSITIVE);
    KernelValue { value, tail_bound }
}

/// Truncated cosine series of the Neumann heat kernel; rectangles use the
/// product of the axis kernels.
pub fn heat_kernel_eval(spec: &KernelSpec, t: f64, x: &[f64], y: &[f64]) -> Result<KernelValue, KernelError> {
    if !(t > 0.0) {
        return Err(KernelError::NonPositiveTime(t));
    }
    spec.check_point(x)?;
    spec.check_point(y)?;
    let mut value = 1.0;
    let mut upper = 1.0;
    for axis in 0..spec.dimension() {
        let k = series_1d(spec.diffusion, spec.lengths[axis], spec.modes, t, x[axis], y[axis]);
        value *= k.value;
        upper *= k.value.abs() + k.tail_bound;
    }
    Ok(KernelValue {
        value,
        tail_bound: upper - value.abs(),
    })
}

/// `ln` of the 1D kernel written as a sum of free-space Gaussians over the
/// reflected images, evaluated with a log-sum-exp so it stays finite far
/// from the diagonal.
fn log_images_1d(d: f64, length: f64, t: f64, x: f64, y: f64) -> f64 {
    let spread = 4.0 * d * t;
    let reach = 2 + ((40.0 * spread).sqrt() / (2.0 * length)).ceil() as i64;
    let mut exponents = Vec::with_capacity((4 * reach + 2) as usize);
    for n in -reach..=reach {
        let shift = 2.0 * n as f64 * length;
        for z in [x - y + shift, x + y + shift] {
            exponents.push(-z * z / spread);
        }
    }
    let top = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = exponents.iter().map(|e| (e - top).exp()).sum();
    top + sum.ln() - 0.5 * (PI * spread).ln()
}

/// Method-of-images kernel value, accurate for short times where the cosine
/// series would need very many modes.
pub fn image_kernel_eval(spec: &KernelSpec, t: f64, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
    log_image_kernel(spec, t, x, y).map(f64::exp)
}

pub fn log_image_kernel(spec: &KernelSpec, t: f64, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
    if !(t > 0.0) {
        return Err(KernelError::NonPositiveTime(t));
    }
    spec.check_point(x)?;
    spec.check_point(y)?;
    Ok((0..spec.dimension())
        .map(|a| log_images_1d(spec.diffusion, spec.lengths[a], t, x[a], y[a]))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassReport {
    pub max_mass_error: f64,
    /// Most negative sampled value; 0 when all samples are nonnegative.
    pub min_value: f64,
    pub max_tail_bound: f64,
}

/// Integrates the 1D series in `y` by the midpoint rule with more nodes than
/// modes (exact for the truncated series) at every sampled `(t, x)`.
pub fn mass_check(spec: &KernelSpec, times: &[f64], points: usize) -> Result<MassReport, KernelError> {
    if spec.dimension() != 1 {
        return Err(KernelError::InvalidSpec("mass check is one-dimensional".into()));
    }
    let length = spec.lengths[0];
    let nodes = 2 * spec.modes + 2;
    let h = length / nodes as f64;
    let mut report = MassReport {
        max_mass_error: 0.0,
        min_value: 0.0,
        max_tail_bound: 0.0,
    };
    for &t in times {
        for i in 0..points {
            let x = length * i as f64 / (points.max(2) - 1) as f64;
            let mut mass = 0.0;
            for q in 0..nodes {
                let y = (q as f64 + 0.5) * h;
                let k = heat_kernel_eval(spec, t, &[x], &[y])?;
                mass += k.value * h;
                report.min_value = report.min_value.min(k.value);
                report.max_tail_bound = report.max_tail_bound.max(k.tail_bound);
            }
            report.max_mass_error = report.max_mass_error.max((mass - 1.0).abs());
        }
    }
    Ok(report)
}

/// Largest `|G(t+s, x, z) - integral G(t, x, y) G(s, y, z) dy|` over a
/// coarse grid of `(x, z)`, with the composition done by the midpoint rule.
pub fn semigroup_check(spec: &KernelSpec, t: f64, s: f64, points: usize) -> Result<f64, KernelError> {
    if spec.dimension() != 1 {
        return Err(KernelError::InvalidSpec("semigroup check is one-dimensional".into()));
    }
    let length = spec.lengths[0];
    let nodes = 2 * spec.modes + 2;
    let h = length / nodes as f64;
    let coarse: Vec<f64> = (0..points).map(|i| length * i as f64 / (points.max(2) - 1) as f64).collect();
    let nodes_at = |q: usize| (q as f64 + 0.5) * h;
    let table = |time: f64, p: f64| -> Result<Vec<f64>, KernelError> {
        (0..nodes)
            .map(|q| heat_kernel_eval(spec, time, &[p], &[nodes_at(q)]).map(|k| k.value))
            .collect()
    };
    let right: Vec<Vec<f64>> = coarse.iter().map(|&z| table(s, z)).collect::<Result<_, _>>()?;
    let mut worst: f64 = 0.0;
    for &x in &coarse {
        let left = table(t, x)?;
        for (&z, r) in coarse.iter().zip(&right) {
            let composed: f64 = left.iter().zip(r).map(|(a, b)| a * b).sum::<f64>() * h;
            let direct = heat_kernel_eval(spec, t + s, &[x], &[z])?.value;
            worst = worst.max((direct - composed).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianFit {
    pub kappa: f64,
    /// Smallest constant making the bound hold on the samples.
    pub c_h: f64,
    /// Sample attaining it.
    pub argmax: (f64, Vec<f64>, Vec<f64>),
    pub min_kernel: f64,
    pub samples: usize,
}

/// Log-spaced times over `[lo, hi] * L^2 / d`, with `L` the largest length.
pub fn small_time_window(spec: &KernelSpec, lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let scale = spec.lengths.iter().copied().fold(0.0, f64::max).powi(2) / spec.diffusion;
    let count = count.max(2);
    (0..count)
        .map(|k| scale * lo * (hi / lo).powf(k as f64 / (count - 1) as f64))
        .collect()
}

fn lattice(spec: &KernelSpec, per_axis: usize) -> Vec<Vec<f64>> {
    let axis = |l: f64| -> Vec<f64> { (0..per_axis).map(|i| l * i as f64 / (per_axis.max(2) - 1) as f64).collect() };
    match spec.dimension() {
        1 => axis(spec.lengths[0]).into_iter().map(|x| vec![x]).collect(),
        _ => {
            let (xs, ys) = (axis(spec.lengths[0]), axis(spec.lengths[1]));
            ys.iter().flat_map(|&y| xs.iter().map(move |&x| vec![x, y])).collect()
        }
    }
}

/// Smallest `C_H` with `G(t, x, y) <= C_H t^{-N/2} exp(-kappa |x - y|^2 / t)`
/// over the sampled times and all pairs of a uniform point lattice.
pub fn gaussian_bound_fit(spec: &KernelSpec, kappa: f64, times: &[f64], per_axis: usize) -> Result<GaussianFit, KernelError> {
    spec.validate()?;
    let points = lattice(spec, per_axis);
    let half_dim = spec.dimension() as f64 / 2.0;
    let mut best = f64::NEG_INFINITY;
    let mut argmax = (0.0, Vec::new(), Vec::new());
    let mut min_log = f64::INFINITY;
    let mut samples = 0;
    for &t in times {
        for x in &points {
            for y in &points {
                let log_g = log_image_kernel(spec, t, x, y)?;
                let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                let log_c = log_g + half_dim * t.ln() + kappa * r2 / t;
                min_log = min_log.min(log_g);
                samples += 1;
                if log_c > best {
                    best = log_c;
                    argmax = (t, x.clone(), y.clone());
                }
            }
        }
    }
    Ok(GaussianFit {
        kappa,
        c_h: best.exp(),
        argmax,
        min_kernel: min_log.exp(),
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitStability {
    pub coarse: GaussianFit,
    pub fine: GaussianFit,
    pub relative_change: f64,
    pub pass: bool,
}

/// Fits on a sample set and on one twice as dense in time and space; passes
/// when both constants are finite and within `tolerance` of each other.
pub fn gaussian_fit_stability(
    spec: &KernelSpec,
    kappa: f64,
    window: (f64, f64),
    times: usize,
    per_axis: usize,
    tolerance: f64,
) -> Result<FitStability, KernelError> {
    let coarse = gaussian_bound_fit(spec, kappa, &small_time_window(spec, window.0, window.1, times), per_axis)?;
    let fine = gaussian_bound_fit(
        spec,
        kappa,
        &small_time_window(spec, window.0, window.1, 2 * times - 1),
        2 * per_axis - 1,
    )?;
    let relative_change = (fine.c_h - coarse.c_h).abs() / coarse.c_h;
    let pass = coarse.c_h.is_finite() && fine.c_h.is_finite() && relative_change <= tolerance;
    Ok(FitStability {
        coarse,
        fine,
        relative_change,
        pass,
    })
}

/// Largest deviation between the discrete heat flow of a unit mass placed in
/// one cell and the kernel evaluated at the cell centers, relative to the
/// kernel maximum. The discrete flow uses the exact exponential of the grid
/// Laplacian, so the deviation is a pure space discretization error.
pub fn point_source_discrepancy(spec: &KernelSpec, cells: usize, t: f64, source_cell: usize) -> Result<f64, KernelError> {
    if spec.dimension() != 1 {
        return Err(KernelError::InvalidSpec("point-source comparison is one-dimensional".into()));
    }
    let grid = Grid::interval(spec.lengths[0], cells).map_err(|e| KernelError::InvalidSpec(e.to_string()))?;
    if source_cell >= cells {
        return Err(KernelError::OutOfDomain(vec![source_cell as f64]));
    }
    let h = grid.spacing(0);
    let mut values = vec![0.0; cells];
    values[source_cell] = 1.0 / h;
    let u = Field::new(grid, values).map_err(|e| KernelError::InvalidSpec(e.to_string()))?;
    let evolved = DiffusionOperator::new(grid, spec.diffusion * t, DiffusionScheme::Exponential)
        .apply(&u, 0.0)
        .map_err(|e| KernelError::InvalidSpec(e.to_string()))?;
    let centers = grid.centers(0);
    let y = centers[source_cell];
    let mut worst: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for (x, v) in centers.iter().zip(evolved.values()) {
        let k = heat_kernel_eval(spec, t, &[*x], &[y])?.value;
        worst = worst.max((k - v).abs());
        peak = peak.max(k.abs());
    }
    Ok(worst / peak)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SourceKind {
    Zero,
    Constant { value: f64 },
    /// Sum of a few separable cosine modes in space with random amplitudes,
    /// frequencies and phases in time.
    RandomCosine { modes: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingProbe {
    pub p: f64,
    /// Target exponent; `inf` probes the sup norm.
    pub s: f64,
    pub horizon: f64,
    /// Cells per axis on the coarse mesh.
    pub cells: usize,
    pub dt: f64,
    pub trials: usize,
    pub seed: u64,
    pub source: SourceKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothingTrial {
    pub trial: usize,
    pub coarse_ratio: f64,
    pub fine_ratio: f64,
    pub relative_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothingReport {
    pub dimension: usize,
    pub p: f64,
    pub s: f64,
    /// `(N+2)p/(N+2-2p)`, infinite when `p >= (N+2)/2`.
    pub threshold: f64,
    pub below_threshold: bool,
    pub trials: Vec<SmoothingTrial>,
    pub max_relative_change: f64,
    pub stable: bool,
}

/// Critical target exponent of the smoothing estimate in dimension `dim`.
pub fn smoothing_threshold(dim: usize, p: f64) -> f64 {
    let n2 = dim as f64 + 2.0;
    if 2.0 * p >= n2 {
        f64::INFINITY
    } else {
        n2 * p / (n2 - 2.0 * p)
    }
}

#[derive(Debug, Clone)]
struct Mode {
    wave: [usize; 2],
    amplitude: f64,
    frequency: f64,
    phase: f64,
}

fn draw_modes(source: SourceKind, rng: &mut ChaCha8Rng) -> Vec<Mode> {
    match source {
        SourceKind::Zero => Vec::new(),
        SourceKind::Constant { value } => vec![Mode {
            wave: [0, 0],
            amplitude: value,
            frequency: 0.0,
            phase: 0.0,
        }],
        SourceKind::RandomCosine { modes } => (0..modes)
            .map(|_| Mode {
                wave: [rng.random_range(0..5), rng.random_range(0..5)],
                amplitude: rng.random_range(-1.0..1.0),
                frequency: rng.random_range(0.0..2.0 * PI),
                phase: rng.random_range(0.0..2.0 * PI),
            })
            .collect(),
    }
}

fn source_field(grid: Grid, modes: &[Mode], t: f64) -> Field {
    Field::from_fn(grid, |p| {
        modes
            .iter()
            .map(|m| {
                let mut v = m.amplitude * (m.frequency * t + m.phase).cos();
                for axis in 0..grid.dimension() {
                    v *= (m.wave[axis] as f64 * PI * p[axis] / grid.lengths()[axis]).cos();
                }
                v
            })
            .sum()
    })
}

/// Space-time norm accumulator with the rectangle rule at step ends.
struct SpaceTimeNorm {
    exponent: f64,
    acc: f64,
}

impl SpaceTimeNorm {
    fn new(exponent: f64) -> Self {
        Self { exponent, acc: 0.0 }
    }

    fn add(&mut self, field: &Field, dt: f64) {
        if self.exponent.is_infinite() {
            self.acc = field.values().iter().fold(self.acc, |m, v| m.max(v.abs()));
        } else {
            let cm = field.grid().cell_measure();
            self.acc += dt * cm * field.values().iter().map(|v| v.abs().powf(self.exponent)).sum::<f64>();
        }
    }

    fn value(&self) -> f64 {
        if self.exponent.is_infinite() {
            self.acc
        } else {
            self.acc.powf(1.0 / self.exponent)
        }
    }
}

/// `||psi||_{L^s} / ||theta||_{L^p}` for the backward Euler solution of
/// `psi_t - d Lap psi = theta`, `psi(0) = 0`; `None` when the source vanishes.
fn smoothing_ratio(spec: &KernelSpec, modes: &[Mode], cells: usize, dt: f64, p: f64, s: f64, horizon: f64) -> Result<Option<f64>, KernelError> {
    let grid = match spec.dimension() {
        1 => Grid::interval(spec.lengths[0], cells),
        _ => Grid::rectangle([spec.lengths[0], spec.lengths[1]], [cells, cells]),
    }
    .map_err(|e| KernelError::InvalidSpec(e.to_string()))?;
    let steps = (horizon / dt).round().max(1.0) as usize;
    let dt = horizon / steps as f64;
    let scheme = DiffusionScheme::BackwardEuler;
    let op = DiffusionOperator::new(grid, spec.diffusion * dt, scheme);
    let mut psi = Field::constant(grid, 0.0);
    let mut psi_norm = SpaceTimeNorm::new(s);
    let mut theta_norm = SpaceTimeNorm::new(p);
    for k in 1..=steps {
        let theta = source_field(grid, modes, k as f64 * dt);
        theta_norm.add(&theta, dt);
        let rhs = Field::new(grid, psi.values().iter().zip(theta.values()).map(|(a, b)| a + dt * b).collect())
            .map_err(|e| KernelError::InvalidSpec(e.to_string()))?;
        psi = op.apply(&rhs, 1e-12).map_err(|e| KernelError::InvalidSpec(e.to_string()))?;
        psi_norm.add(&psi, dt);
    }
    let denominator = theta_norm.value();
    Ok((denominator > 0.0).then(|| psi_norm.value() / denominator))
}

/// Measures the smoothing ratio for several sources on a coarse mesh and on
/// a mesh refined once in space and time.
pub fn smoothing_probe(spec: &KernelSpec, probe: &SmoothingProbe, tolerance: f64) -> Result<SmoothingReport, KernelError> {
    spec.validate()?;
    if !(probe.p >= 1.0 && probe.p.is_finite()) || !(probe.s >= 1.0) {
        return Err(KernelError::InvalidProbe("exponents must be at least 1 and p finite".into()));
    }
    if !(probe.horizon > 0.0 && probe.dt > 0.0) || probe.cells < 2 || probe.trials == 0 {
        return Err(KernelError::InvalidProbe("horizon, dt, cells and trials must be positive".into()));
    }
    let threshold = smoothing_threshold(spec.dimension(), probe.p);
    let mut rng = ChaCha8Rng::seed_from_u64(probe.seed);
    let mut trials = Vec::new();
    for trial in 0..probe.trials {
        let modes = draw_modes(probe.source, &mut rng);
        let coarse = smoothing_ratio(spec, &modes, probe.cells, probe.dt, probe.p, probe.s, probe.horizon)?;
        let fine = smoothing_ratio(spec, &modes, 2 * probe.cells, 0.5 * probe.dt, probe.p, probe.s, probe.horizon)?;
        if let (Some(c), Some(f)) = (coarse, fine) {
            trials.push(SmoothingTrial {
                trial,
                coarse_ratio: c,
                fine_ratio: f,
                relative_change: (f - c).abs() / c,
            });
        }
    }
    let max_relative_change = trials.iter().map(|t| t.relative_change).fold(0.0, f64::max);
    let finite = trials.iter().all(|t| t.coarse_ratio.is_finite() && t.fine_ratio.is_finite());
    Ok(SmoothingReport {
        dimension: spec.dimension(),
        p: probe.p,
        s: probe.s,
        threshold,
        below_threshold: probe.s < threshold,
        stable: finite && max_relative_change <= tolerance,
        max_relative_change,
        trials,
    })
}
