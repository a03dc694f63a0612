//! Monte Carlo ensembles: many noise realizations through the propagator,
//! averaged density matrices, and the observable phase and coherence with
//! their uncertainties.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{
    self, linear_response::linear_response_chi_weights, rates::closed_form_prediction,
    transverse::transverse_coefficients, AnalyticsError, DephasingPrediction, DrivenParams,
};
use crate::noise::{NoiseError, NoiseModel, NoiseRealization};
use crate::propagator::{
    self, final_direction, initial_direction, initial_superposition, pulse_phase_offset,
    readout_state, wrap_phase, EvolveOptions, Integrator, NoiseAxis, Operator, PropagatorError,
    StepGrid,
};
use crate::rng::{self, Domain};
use crate::schedule::{Schedule, ScheduleError, Scheme};

pub const DEFAULT_KAPPA: f64 = 12.0;
pub const DEFAULT_BETA: f64 = 1e-3;
pub const DEFAULT_ETA: f64 = 0.4;
pub const DEFAULT_REALIZATIONS: usize = 400;
pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 1000;
/// η/β held fixed across β sweeps.
pub const ETA_PER_BETA: f64 = 400.0;
/// Below this adiabaticity the non-adiabatic corrections are no longer small.
pub const ADIABATIC_WARNING_KAPPA: f64 = 5.0;

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}
fn default_beta() -> f64 {
    DEFAULT_BETA
}
fn default_eta() -> f64 {
    DEFAULT_ETA
}
fn default_realizations() -> usize {
    DEFAULT_REALIZATIONS
}
fn default_divisor() -> u32 {
    StepGrid::DEFAULT_DIVISOR
}
fn default_resamples() -> usize {
    DEFAULT_BOOTSTRAP_RESAMPLES
}

/// Stop early once the bootstrap error of W drops below `target_w_stderr`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveStop {
    pub target_w_stderr: f64,
    pub max_realizations: usize,
    pub batch: usize,
}

impl Default for AdaptiveStop {
    fn default() -> Self {
        Self {
            target_w_stderr: 0.01,
            max_realizations: 4000,
            batch: 100,
        }
    }
}

/// One ensemble run. Dimensionless throughout: κ = B₀/ω_B, β = Γ₃T,
/// η = α₃Γ₃T³ with T the schedule duration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    /// θ, or θ_a for the two modified schemes.
    pub theta: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_divisor")]
    pub dt_divisor: u32,
    #[serde(default)]
    pub noise_axis: NoiseAxis,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adaptive: Option<AdaptiveStop>,
    /// Worker threads; `None` uses the global pool. Never affects results.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Physical field strength in Hz, used only to convert times on output.
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "b0_hz")]
    pub b0_hz: Option<f64>,
}

impl ExperimentConfig {
    /// Figure defaults (κ = 12, β = 1e-3, η = 0.4, 400 runs) at `theta`.
    pub fn new(scheme: Scheme, theta: f64) -> Self {
        Self {
            scheme,
            theta,
            kappa: DEFAULT_KAPPA,
            beta: DEFAULT_BETA,
            eta: DEFAULT_ETA,
            realizations: DEFAULT_REALIZATIONS,
            seed: 0,
            dt_divisor: StepGrid::DEFAULT_DIVISOR,
            noise_axis: NoiseAxis::Longitudinal,
            integrator: Integrator::CoRotating,
            bootstrap_resamples: DEFAULT_BOOTSTRAP_RESAMPLES,
            adaptive: None,
            workers: None,
            b0_hz: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Checks ranges and returns advisory warnings without logging them.
    pub fn validate(&self) -> Result<Vec<ConfigWarning>, ConfigError> {
        let field = |name: &'static str, value: f64, reason: &'static str| ConfigError::Field {
            field: name,
            value: value.to_string(),
            reason,
        };
        if !(self.kappa > 1.0) || !self.kappa.is_finite() {
            return Err(field(
                "kappa",
                self.kappa,
                "must be a finite number above 1",
            ));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(field("beta", self.beta, "must be finite and positive"));
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(field("eta", self.eta, "must be finite and non-negative"));
        }
        if !(0.0..=PI).contains(&self.theta) {
            return Err(field("theta", self.theta, "must lie in [0, π]"));
        }
        if self.realizations == 0 {
            return Err(field("realizations", 0.0, "must be at least 1"));
        }
        if self.dt_divisor == 0 {
            return Err(field("dt_divisor", 0.0, "must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(field("workers", 0.0, "must be at least 1"));
        }
        if let Some(hz) = self.b0_hz {
            if !(hz > 0.0) || !hz.is_finite() {
                return Err(field("b0_hz", hz, "must be finite and positive"));
            }
        }
        if let Some(a) = self.adaptive {
            if !(a.target_w_stderr > 0.0) || a.batch == 0 || a.max_realizations < a.batch {
                return Err(ConfigError::Field {
                    field: "adaptive",
                    value: format!("{a:?}"),
                    reason:
                        "needs a positive target, a positive batch and max_realizations ≥ batch",
                });
            }
        }
        let mut warnings = Vec::new();
        if self.kappa < ADIABATIC_WARNING_KAPPA {
            warnings.push(ConfigWarning::WeakAdiabaticity(self.kappa));
        }
        if self.noise_axis == NoiseAxis::Transverse && self.scheme == Scheme::Scheme2 {
            warnings.push(ConfigWarning::Scheme2Transverse);
        }
        if self.dt_divisor < StepGrid::DEFAULT_DIVISOR {
            warnings.push(ConfigWarning::CoarseGrid(self.dt_divisor));
        }
        Ok(warnings)
    }

    pub fn schedule(&self) -> Result<Schedule, ScheduleError> {
        self.scheme.build(self.theta, self.kappa)
    }

    pub fn driven_params(&self) -> Result<DrivenParams, AnalyticsError> {
        DrivenParams::new(self.kappa, self.theta, self.beta, self.eta)
    }

    /// Seconds per unit of dimensionless time, when B₀ is given in Hz.
    pub fn seconds_per_unit_time(&self) -> Option<f64> {
        self.b0_hz.map(|hz| 1.0 / (2.0 * PI * hz))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid value {value} for `{field}`: {reason}")]
    Field {
        field: &'static str,
        value: String,
        reason: &'static str,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConfigWarning {
    WeakAdiabaticity(f64),
    Scheme2Transverse,
    CoarseGrid(u32),
}

impl std::fmt::Display for ConfigWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigWarning::WeakAdiabaticity(k) => write!(
                f,
                "kappa = {k} is below {ADIABATIC_WARNING_KAPPA}: the adiabatic approximation behind \
                 the theory columns is poor"
            ),
            ConfigWarning::Scheme2Transverse => write!(
                f,
                "scheme2 does not suppress geometric dephasing from transverse noise: both \
                 radial coupling terms keep their sign under the cone mirror"
            ),
            ConfigWarning::CoarseGrid(d) => {
                write!(f, "dt_divisor = {d} is coarser than the default of {}", StepGrid::DEFAULT_DIVISOR)
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error("bootstrap needs at least 2 realizations, got {0}")]
    TooFewRealizations(usize),
    #[error("could not start worker pool: {0}")]
    ThreadPool(String),
}

/// Bootstrap standard errors of the phase and coherence estimators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapErrors {
    pub gamma_stderr: f64,
    pub w_stderr: f64,
}

/// Resamples realization-level ρ₋₁,₁ values with replacement and reports
/// the spread of arg⟨ρ⟩ and |⟨ρ⟩|/`initial_modulus` over the resamples.
pub fn bootstrap_errors(
    coherences: &[Complex64],
    resamples: usize,
    seed: u64,
    initial_modulus: f64,
) -> Result<BootstrapErrors, EnsembleError> {
    let n = coherences.len();
    if n < 2 {
        return Err(EnsembleError::TooFewRealizations(n));
    }
    let full = mean(coherences);
    let mut rng = rng::substream(seed, Domain::Bootstrap, 0);
    let mut gammas = Vec::with_capacity(resamples);
    let mut ws = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut acc = Complex64::new(0.0, 0.0);
        for _ in 0..n {
            acc += coherences[rng.random_range(0..n)];
        }
        let m = acc / n as f64;
        gammas.push(wrap_phase(m.arg() - full.arg()));
        ws.push(m.norm() / initial_modulus);
    }
    Ok(BootstrapErrors {
        gamma_stderr: std_dev(&gammas),
        w_stderr: std_dev(&ws),
    })
}

fn mean(values: &[Complex64]) -> Complex64 {
    values.iter().sum::<Complex64>() / values.len() as f64
}

fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let m = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Outcome of one ensemble. Phases in radians, times in 1/B₀.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub config: ExperimentConfig,
    pub theta_c: Option<f64>,
    pub total_time: f64,
    /// ⟨ρ(T)⟩ in the σ_z basis, row-major as (re, im) pairs.
    pub mean_rho: [[(f64, f64); 2]; 2],
    pub mean_coherence: (f64, f64),
    pub realizations: usize,
    /// arg⟨ρ₋₁,₁⟩ ∈ (−π, π]
    pub gamma_mean: f64,
    /// |⟨ρ₋₁,₁⟩| / |ρ₋₁,₁(0)|
    pub w: f64,
    /// Bootstrap standard errors of the two estimators above.
    pub gamma_stderr: f64,
    pub w_stderr: f64,
    /// Per-realization spread: of arg ρ₋₁,₁ around `gamma_mean`, and of
    /// Re(ρ₋₁,₁ e^{−i·gamma_mean})/|ρ₋₁,₁(0)|.
    pub gamma_sd: f64,
    pub w_sd: f64,
    /// Noiseless run on the same grid.
    pub gamma_reference: f64,
    pub w_reference: f64,
    /// Phase the pulses alone contribute.
    pub pulse_offset: f64,
    /// Adiabatic phase difference, unreduced and reduced to (−π, π].
    pub gamma_theory_raw: f64,
    pub gamma_theory: f64,
    /// Exact linear-response χ for this schedule and noise axis.
    pub chi_oracle: f64,
    /// Closed form, when one exists for this scheme and axis.
    pub prediction: Option<DephasingPrediction>,
    pub lambda: f64,
    pub degenerate_steps: usize,
}

impl EnsembleResult {
    /// Closed-form χ when available, otherwise the oracle.
    pub fn chi_theory(&self) -> f64 {
        self.prediction.map_or(self.chi_oracle, |p| p.chi)
    }

    pub fn w_theory(&self) -> f64 {
        (-self.chi_theory()).exp()
    }

    pub fn mean_rho_operator(&self) -> Operator {
        let c = |(re, im): (f64, f64)| Complex64::new(re, im);
        Operator::new(
            c(self.mean_rho[0][0]),
            c(self.mean_rho[0][1]),
            c(self.mean_rho[1][0]),
            c(self.mean_rho[1][1]),
        )
    }
}

struct Sample {
    coherence: Complex64,
    rho: Operator,
    degenerate: usize,
}

struct Prepared {
    schedule: Schedule,
    grid: StepGrid,
    model: NoiseModel,
    options: EvolveOptions,
}

impl Prepared {
    fn new(config: &ExperimentConfig) -> Result<Self, EnsembleError> {
        let schedule = config.schedule()?;
        let grid = StepGrid::new(&schedule, config.dt_divisor)?;
        let model =
            NoiseModel::from_dimensionless(config.beta, config.eta, schedule.total_duration())?;
        let options = EvolveOptions {
            axis: config.noise_axis,
            integrator: config.integrator,
        };
        Ok(Self {
            schedule,
            grid,
            model,
            options,
        })
    }

    fn sample(&self, seed: u64, index: u64) -> Result<Sample, EnsembleError> {
        let noise = NoiseRealization::for_realization(
            &self.model,
            self.grid.dt(),
            self.grid.total_steps(),
            seed,
            index,
        )?;
        let init = initial_superposition(initial_direction(&self.schedule));
        let out = propagator::evolve(&self.schedule, &noise, &self.grid, init, self.options)?;
        Ok(Sample {
            coherence: readout_state(&out.state, final_direction(&self.schedule)),
            rho: out.state.density_matrix(),
            degenerate: out.degenerate_steps,
        })
    }

    fn samples(
        &self,
        seed: u64,
        range: std::ops::Range<u64>,
    ) -> Result<Vec<Sample>, EnsembleError> {
        range
            .into_par_iter()
            .map(|i| self.sample(seed, i))
            .collect()
    }
}

fn with_workers<T: Send>(
    workers: Option<usize>,
    job: impl FnOnce() -> Result<T, EnsembleError> + Send,
) -> Result<T, EnsembleError> {
    match workers {
        None => job(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| EnsembleError::ThreadPool(e.to_string()))?
            .install(job),
    }
}

/// Runs the configured ensemble. Realization `i` always uses noise
/// substream `i` and the reduction runs in index order, so the result does
/// not depend on the number of workers.
pub fn run_ensemble(config: &ExperimentConfig) -> Result<EnsembleResult, EnsembleError> {
    config.validate()?;
    let prepared = Prepared::new(config)?;
    let samples = with_workers(config.workers, || match config.adaptive {
        None => prepared.samples(config.seed, 0..config.realizations as u64),
        Some(stop) => run_adaptive(&prepared, config, stop),
    })?;
    summarize(config, &prepared, &samples)
}

fn run_adaptive(
    prepared: &Prepared,
    config: &ExperimentConfig,
    stop: AdaptiveStop,
) -> Result<Vec<Sample>, EnsembleError> {
    let mut samples = prepared.samples(config.seed, 0..config.realizations.max(2) as u64)?;
    loop {
        let coherences: Vec<Complex64> = samples.iter().map(|s| s.coherence).collect();
        let errors = bootstrap_errors(&coherences, config.bootstrap_resamples, config.seed, 0.5)?;
        if errors.w_stderr < stop.target_w_stderr || samples.len() >= stop.max_realizations {
            return Ok(samples);
        }
        let start = samples.len() as u64;
        let end = (samples.len() + stop.batch).min(stop.max_realizations) as u64;
        samples.extend(prepared.samples(config.seed, start..end)?);
    }
}

fn summarize(
    config: &ExperimentConfig,
    prepared: &Prepared,
    samples: &[Sample],
) -> Result<EnsembleResult, EnsembleError> {
    let schedule = &prepared.schedule;
    let n = samples.len();
    let coherences: Vec<Complex64> = samples.iter().map(|s| s.coherence).collect();
    let mean_c = mean(&coherences);
    let mut rho = Operator::zeros();
    for s in samples {
        rho += s.rho;
    }
    rho /= Complex64::new(n as f64, 0.0);
    let initial_modulus = 0.5;
    let gamma_mean = mean_c.arg();

    let (gamma_stderr, w_stderr) = if n >= 2 {
        let e = bootstrap_errors(
            &coherences,
            config.bootstrap_resamples,
            config.seed,
            initial_modulus,
        )?;
        (e.gamma_stderr, e.w_stderr)
    } else {
        (f64::NAN, f64::NAN)
    };
    let phases: Vec<f64> = coherences
        .iter()
        .map(|c| wrap_phase(c.arg() - gamma_mean))
        .collect();
    let gamma_sd = (phases.iter().map(|p| p * p).sum::<f64>() / (n.max(2) - 1) as f64).sqrt();
    let projected: Vec<f64> = coherences
        .iter()
        .map(|c| (c * Complex64::from_polar(1.0, -gamma_mean)).re / initial_modulus)
        .collect();
    let w_sd = std_dev(&projected);

    let reference = propagator::noiseless_coherence(schedule, &prepared.grid, prepared.options)?;
    let pulse_offset = pulse_phase_offset(schedule);
    let gamma_theory_raw = schedule.expected_phase_difference() + pulse_offset;

    let coefficients = match config.noise_axis {
        NoiseAxis::Longitudinal => schedule.linear_coefficients(),
        NoiseAxis::Transverse => transverse_coefficients(schedule),
    };
    let chi_oracle = linear_response_chi_weights(&coefficients, &prepared.model);
    let params = config.driven_params()?;
    let prediction = match config.noise_axis {
        NoiseAxis::Longitudinal => closed_form_prediction(config.scheme, &params)?,
        NoiseAxis::Transverse => None,
    };
    let lambda = analytics::depolarization_lambda(&params);
    let theta_c = match config.scheme {
        Scheme::Scheme1(_) => Some(schedule.segments()[1].theta),
        _ => None,
    };
    let pair = |z: Complex64| (z.re, z.im);

    Ok(EnsembleResult {
        config: ExperimentConfig {
            realizations: n,
            ..config.clone()
        },
        theta_c,
        total_time: schedule.total_duration(),
        mean_rho: [
            [pair(rho[(0, 0)]), pair(rho[(0, 1)])],
            [pair(rho[(1, 0)]), pair(rho[(1, 1)])],
        ],
        mean_coherence: pair(mean_c),
        realizations: n,
        gamma_mean,
        w: mean_c.norm() / initial_modulus,
        gamma_stderr,
        w_stderr,
        gamma_sd,
        w_sd,
        gamma_reference: reference.arg(),
        w_reference: reference.norm() / initial_modulus,
        pulse_offset,
        gamma_theory_raw,
        gamma_theory: wrap_phase(gamma_theory_raw),
        chi_oracle,
        prediction,
        lambda,
        degenerate_steps: samples.iter().map(|s| s.degenerate).sum(),
    })
}

/// Runs every scheme at every θ; rows are ordered scheme-major.
pub fn sweep_theta(
    base: &ExperimentConfig,
    schemes: &[Scheme],
    thetas: &[f64],
) -> Result<Vec<EnsembleResult>, EnsembleError> {
    let mut out = Vec::with_capacity(schemes.len() * thetas.len());
    for &scheme in schemes {
        for &theta in thetas {
            let config = ExperimentConfig {
                scheme,
                theta,
                ..base.clone()
            };
            out.push(run_ensemble(&config)?);
        }
    }
    Ok(out)
}

/// Runs every scheme at every β with η = 400β.
pub fn sweep_beta(
    base: &ExperimentConfig,
    schemes: &[Scheme],
    betas: &[f64],
) -> Result<Vec<EnsembleResult>, EnsembleError> {
    let mut out = Vec::with_capacity(schemes.len() * betas.len());
    for &scheme in schemes {
        for &beta in betas {
            let config = ExperimentConfig {
                scheme,
                beta,
                eta: ETA_PER_BETA * beta,
                ..base.clone()
            };
            out.push(run_ensemble(&config)?);
        }
    }
    Ok(out)
}

/// `n` points from `lo` to `hi` inclusive, evenly spaced.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// `n` points from `lo` to `hi` inclusive, evenly spaced in log β.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linear_grid(lo.ln(), hi.ln(), n)
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                x.exp()
            }
        })
        .collect()
}

/// 13 points over [π/12, 11π/12].
pub fn default_theta_grid() -> Vec<f64> {
    linear_grid(PI / 12.0, 11.0 * PI / 12.0, 13)
}

/// 13 log-spaced points over [0.005, 5].
pub fn default_beta_grid() -> Vec<f64> {
    log_grid(0.005, 5.0, 13)
}

/// Which subset of columns a table carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Table {
    Full,
    Phase,
    Coherence,
}

const FULL_COLUMNS: [&str; 27] = [
    "scheme",
    "theta_a",
    "theta_c",
    "beta",
    "eta",
    "kappa",
    "realizations",
    "seed",
    "gamma_mean",
    "gamma_theory",
    "gamma_stderr",
    "W",
    "W_theory",
    "W_stderr",
    "chi_theory",
    "lambda_theory",
    "noise_axis",
    "lg_beta",
    "gamma_theory_raw",
    "gamma_sd",
    "gamma_reference",
    "pulse_offset",
    "W_sd",
    "W_reference",
    "chi_oracle",
    "W_oracle",
    "degenerate_steps",
];

const PHASE_COLUMNS: [&str; 10] = [
    "scheme",
    "theta_a",
    "theta_c",
    "beta",
    "lg_beta",
    "gamma_mean",
    "gamma_stderr",
    "gamma_sd",
    "gamma_theory",
    "gamma_theory_raw",
];

const COHERENCE_COLUMNS: [&str; 11] = [
    "scheme",
    "theta_a",
    "theta_c",
    "beta",
    "lg_beta",
    "W",
    "W_stderr",
    "W_sd",
    "W_theory",
    "W_oracle",
    "chi_theory",
];

fn describe(column: &str) -> &'static str {
    match column {
        "scheme" => "sequence name",
        "theta_a" => "rad; cone polar angle (first cone for the modified schemes)",
        "theta_c" => "rad; companion cone angle from the exact balance condition (scheme1 only)",
        "beta" => "dimensionless; noise bandwidth times total time",
        "lg_beta" => "dimensionless; log10 of beta",
        "eta" => "dimensionless; noise power times bandwidth times total time cubed",
        "kappa" => "dimensionless; field strength over sweep rate",
        "realizations" => "count of noise paths averaged",
        "seed" => "master seed of the counter-based noise streams",
        "gamma_mean" => "rad in (-pi, pi]; argument of the averaged coherence",
        "gamma_theory" => "rad in (-pi, pi]; adiabatic Berry phase difference summed over segments plus pulse offset",
        "gamma_theory_raw" => "rad; same theory value before reduction",
        "gamma_stderr" => "rad; bootstrap standard error of gamma_mean",
        "gamma_sd" => "rad; per-realization spread of the coherence phase",
        "gamma_reference" => "rad; noiseless run on the same grid",
        "pulse_offset" => "rad; phase contributed by the swap pulses alone",
        "W" => "dimensionless; modulus of averaged coherence over its initial value 1/2",
        "W_theory" => "dimensionless; exp(-chi_theory)",
        "W_stderr" => "dimensionless; bootstrap standard error of W",
        "W_sd" => "dimensionless; per-realization spread of the projected coherence",
        "W_reference" => "dimensionless; noiseless run on the same grid",
        "chi_theory" => "dimensionless; low-frequency closed form for the scheme (full two-bracket form for the plain echo), else chi_oracle",
        "chi_oracle" => "dimensionless; exact Gaussian linear-response integral over the piecewise-constant couplings",
        "W_oracle" => "dimensionless; exp(-chi_oracle)",
        "lambda_theory" => "dimensionless; depolarization exponent from noise-induced transitions",
        "noise_axis" => "longitudinal (along z) or transverse (radial, co-rotating)",
        "degenerate_steps" => "count of steps with vanishing field",
        _ => "",
    }
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or very large magnitudes.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e6).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn value(r: &EnsembleResult, column: &str) -> String {
    let f = format_float;
    match column {
        "scheme" => r.config.scheme.to_string(),
        "theta_a" => f(r.config.theta),
        "theta_c" => r.theta_c.map(f).unwrap_or_default(),
        "beta" => f(r.config.beta),
        "lg_beta" => f(r.config.beta.log10()),
        "eta" => f(r.config.eta),
        "kappa" => f(r.config.kappa),
        "realizations" => r.realizations.to_string(),
        "seed" => r.config.seed.to_string(),
        "gamma_mean" => f(r.gamma_mean),
        "gamma_theory" => f(r.gamma_theory),
        "gamma_theory_raw" => f(r.gamma_theory_raw),
        "gamma_stderr" => f(r.gamma_stderr),
        "gamma_sd" => f(r.gamma_sd),
        "gamma_reference" => f(r.gamma_reference),
        "pulse_offset" => f(r.pulse_offset),
        "W" => f(r.w),
        "W_theory" => f(r.w_theory()),
        "W_stderr" => f(r.w_stderr),
        "W_sd" => f(r.w_sd),
        "W_reference" => f(r.w_reference),
        "chi_theory" => f(r.chi_theory()),
        "chi_oracle" => f(r.chi_oracle),
        "W_oracle" => f((-r.chi_oracle).exp()),
        "lambda_theory" => f(r.lambda),
        "noise_axis" => r.config.noise_axis.to_string(),
        "degenerate_steps" => r.degenerate_steps.to_string(),
        other => unreachable!("unknown column {other}"),
    }
}

/// Writes `#`-prefixed unit lines, a header row and one row per result.
pub fn write_results_csv<W: Write>(
    results: &[EnsembleResult],
    table: Table,
    mut out: W,
) -> Result<(), csv::Error> {
    let columns: &[&str] = match table {
        Table::Full => &FULL_COLUMNS,
        Table::Phase => &PHASE_COLUMNS,
        Table::Coherence => &COHERENCE_COLUMNS,
    };
    for c in columns {
        writeln!(out, "# {c}: {}", describe(c))?;
    }
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(columns)?;
    for r in results {
        writer.write_record(columns.iter().map(|c| value(r, c)))?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::Scheme1Base;
    use rand_distr::{Distribution, Normal};

    fn quick(scheme: Scheme, theta: f64, n: usize) -> ExperimentConfig {
        ExperimentConfig {
            realizations: n,
            bootstrap_resamples: 200,
            ..ExperimentConfig::new(scheme, theta)
        }
    }

    #[test]
    fn zero_noise_gives_unit_coherence_and_reference_phase() {
        let config = ExperimentConfig {
            eta: 0.0,
            ..quick(Scheme::Cpmg, 1.0, 8)
        };
        let r = run_ensemble(&config).unwrap();
        assert!((r.w - r.w_reference).abs() < 1e-12);
        assert!((r.w_reference - 1.0).abs() < 0.02);
        assert!((r.gamma_mean - r.gamma_reference).abs() < 1e-13);
        assert!(r.gamma_stderr < 1e-13);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let base = quick(Scheme::Scheme1(Scheme1Base::Cpmg), 1.2, 40);
        let one = run_ensemble(&ExperimentConfig {
            workers: Some(1),
            ..base.clone()
        })
        .unwrap();
        let four = run_ensemble(&ExperimentConfig {
            workers: Some(4),
            ..base.clone()
        })
        .unwrap();
        assert_eq!(one.gamma_mean.to_bits(), four.gamma_mean.to_bits());
        assert_eq!(one.w.to_bits(), four.w.to_bits());
        assert_eq!(one.w_stderr.to_bits(), four.w_stderr.to_bits());
    }

    #[test]
    fn averaged_density_matrix_is_a_state() {
        let r = run_ensemble(&quick(Scheme::Fid { m: 2 }, 1.0, 30)).unwrap();
        let rho = r.mean_rho_operator();
        let trace = rho[(0, 0)] + rho[(1, 1)];
        assert!((trace - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        assert!((rho[(0, 1)] - rho[(1, 0)].conj()).norm() < 1e-12);
        let det = (rho[(0, 0)] * rho[(1, 1)] - rho[(0, 1)] * rho[(1, 0)]).re;
        assert!(det >= -1e-10);
        assert!(r.w <= 1.0 + 3.0 * r.w_stderr);
    }

    #[test]
    fn bootstrap_examples() {
        let same = vec![Complex64::new(0.3, 0.1); 50];
        let e = bootstrap_errors(&same, 100, 1, 0.5).unwrap();
        assert!(e.gamma_stderr.abs() < 1e-15 && e.w_stderr.abs() < 1e-15);
        assert!(matches!(
            bootstrap_errors(&same[..1], 10, 1, 0.5),
            Err(EnsembleError::TooFewRealizations(1))
        ));

        let sigma = 0.2;
        let mut rng = rng::substream(7, Domain::Synthetic, 0);
        let normal = Normal::new(0.0, sigma).unwrap();
        let draw = |n: usize, rng: &mut rng::RandomStream| -> Vec<Complex64> {
            (0..n)
                .map(|_| Complex64::from_polar(0.5, normal.sample(rng)))
                .collect()
        };
        let small = draw(400, &mut rng);
        let e400 = bootstrap_errors(&small, 1000, 3, 0.5).unwrap();
        assert!(
            (e400.gamma_stderr / (sigma / 20.0) - 1.0).abs() < 0.15,
            "{}",
            e400.gamma_stderr
        );
        let large = draw(800, &mut rng);
        let e800 = bootstrap_errors(&large, 1000, 3, 0.5).unwrap();
        let ratio = e400.gamma_stderr / e800.gamma_stderr;
        assert!((ratio - 2f64.sqrt()).abs() < 0.25, "{ratio}");
    }

    #[test]
    fn config_validation() {
        let bad = ExperimentConfig {
            realizations: 0,
            ..ExperimentConfig::new(Scheme::Cpmg, 1.0)
        };
        assert!(matches!(
            bad.validate(),
            Err(ConfigError::Field {
                field: "realizations",
                ..
            })
        ));
        let weak = ExperimentConfig {
            kappa: 4.0,
            ..ExperimentConfig::new(Scheme::Cpmg, 1.0)
        };
        assert_eq!(
            weak.validate().unwrap(),
            vec![ConfigWarning::WeakAdiabaticity(4.0)]
        );
        let transverse = ExperimentConfig {
            noise_axis: NoiseAxis::Transverse,
            ..ExperimentConfig::new(Scheme::Scheme2, 1.0)
        };
        assert_eq!(
            transverse.validate().unwrap(),
            vec![ConfigWarning::Scheme2Transverse]
        );
    }

    #[test]
    fn config_json() {
        let c = ExperimentConfig::from_json(r#"{"scheme": "scheme2", "theta": 1.3}"#).unwrap();
        assert_eq!(c.kappa, 12.0);
        assert_eq!(c.realizations, 400);
        assert_eq!(c.dt_divisor, 10);
        let err = ExperimentConfig::from_json(r#"{"scheme": "cpmg"}"#).unwrap_err();
        assert!(err.to_string().contains("theta"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"scheme": "cpmg", "theta": 1, "kapa": 3}"#)
            .unwrap_err();
        assert!(err.to_string().contains("kapa"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"scheme": "cpmg", "theta": 1, "beta": -1}"#)
            .unwrap_err();
        assert!(err.to_string().contains("beta"), "{err}");
        let round = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&round).unwrap(), c);
    }

    #[test]
    fn float_format_round_trips() {
        for x in [
            0.0,
            1.0,
            -2.5e-60,
            1.3e-5,
            0.25,
            3.0e7,
            f64::MIN_POSITIVE,
            std::f64::consts::PI,
        ] {
            let text = format_float(x);
            assert_eq!(
                text.parse::<f64>().unwrap().to_bits(),
                x.to_bits(),
                "{text}"
            );
            assert!(text.len() < 26, "{text}");
        }
    }

    #[test]
    fn grids() {
        let b = default_beta_grid();
        assert_eq!(b.len(), 13);
        assert_eq!((b[0], b[12]), (0.005, 5.0));
        assert!(b.windows(2).all(|w| w[1] > w[0]));
        let ratio = b[1] / b[0];
        assert!((b[7] / b[6] - ratio).abs() < 1e-12);
        let t = default_theta_grid();
        assert_eq!(t.len(), 13);
        assert!((t[0] - PI / 12.0).abs() < 1e-15 && (t[12] - 11.0 * PI / 12.0).abs() < 1e-15);
        assert!((t[6] - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn csv_layout() {
        let r = run_ensemble(&quick(Scheme::Scheme2, 1.0, 4)).unwrap();
        let mut buf = Vec::new();
        write_results_csv(&[r], Table::Full, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
        assert!(header.starts_with(
            "scheme,theta_a,theta_c,beta,eta,kappa,realizations,seed,gamma_mean,gamma_theory,\
             gamma_stderr,W,W_theory,W_stderr,chi_theory,lambda_theory"
        ));
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 2);
        assert!(text
            .lines()
            .filter(|l| l.starts_with('#'))
            .all(|l| l.split(": ").nth(1).is_some_and(|d| !d.is_empty())));
    }
}
