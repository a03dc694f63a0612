//! Longitudinal classical noise K₃(t) modeled as a stationary
//! Ornstein–Uhlenbeck process.
//!
//! Paths are sampled with the exact OU update on the propagator grid and
//! held constant over each step.

use std::io::Write;

use rand::Rng;
use thiserror::Error;

use crate::rng::{self, Domain};

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("noise power must be finite and non-negative, got {0}")]
    InvalidPower(f64),
    #[error("noise bandwidth must be finite and positive, got {0}")]
    InvalidBandwidth(f64),
    #[error("time step must be finite and positive, got {0}")]
    InvalidStep(f64),
}

/// OU parameters: power `alpha` (variance of K₃) and bandwidth `gamma`.
///
/// Both are in B₀ units: `alpha` in B₀², `gamma` in B₀.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    alpha: f64,
    gamma: f64,
}

impl NoiseModel {
    pub fn new(alpha: f64, gamma: f64) -> Result<Self, NoiseError> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(NoiseError::InvalidPower(alpha));
        }
        if !gamma.is_finite() || gamma <= 0.0 {
            return Err(NoiseError::InvalidBandwidth(gamma));
        }
        Ok(Self { alpha, gamma })
    }

    /// Builds the model from the dimensionless pair used in the sweeps:
    /// `beta = Γ₃T` and `eta = α₃Γ₃T³`, so `α₃T² = eta / beta`.
    pub fn from_dimensionless(beta: f64, eta: f64, total_time: f64) -> Result<Self, NoiseError> {
        let gamma = beta / total_time;
        let alpha = eta / (beta * total_time * total_time);
        Self::new(alpha, gamma)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// ⟨K₃(t+τ)K₃(t)⟩ = α₃ e^{−Γ₃|τ|}
    pub fn correlation(&self, tau: f64) -> f64 {
        self.alpha * (-self.gamma * tau.abs()).exp()
    }

    /// Lorentzian power spectrum 2α₃Γ₃ / (Γ₃² + ω²).
    pub fn spectrum(&self, omega: f64) -> f64 {
        2.0 * self.alpha * self.gamma / (self.gamma * self.gamma + omega * omega)
    }
}

/// Stationary initial sample K₃(0) ~ N(0, α₃).
pub fn ou_init<R: Rng + ?Sized>(model: &NoiseModel, rng: &mut R) -> f64 {
    rng::gaussian(rng, model.alpha)
}

/// Exact OU transition over `dt`:
/// `k_next = k_prev·e^{−Γ₃dt} + ξ·sqrt(1 − e^{−2Γ₃dt})`, ξ ~ N(0, α₃).
pub fn ou_step<R: Rng + ?Sized>(k_prev: f64, dt: f64, model: &NoiseModel, rng: &mut R) -> f64 {
    let x = model.gamma * dt;
    let decay = (-x).exp();
    let kick = (-(-2.0 * x).exp_m1()).sqrt();
    k_prev * decay + rng::gaussian(rng, model.alpha) * kick
}

/// One sampled path, piecewise constant on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseRealization {
    dt: f64,
    values: Vec<f64>,
}

impl NoiseRealization {
    pub fn generate<R: Rng + ?Sized>(
        model: &NoiseModel,
        dt: f64,
        steps: usize,
        rng: &mut R,
    ) -> Result<Self, NoiseError> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(NoiseError::InvalidStep(dt));
        }
        let mut values = Vec::with_capacity(steps);
        if steps > 0 {
            let mut k = ou_init(model, rng);
            values.push(k);
            for _ in 1..steps {
                k = ou_step(k, dt, model, rng);
                values.push(k);
            }
        }
        Ok(Self { dt, values })
    }

    /// Path for realization `index` of an ensemble seeded with `master_seed`.
    pub fn for_realization(
        model: &NoiseModel,
        dt: f64,
        steps: usize,
        master_seed: u64,
        index: u64,
    ) -> Result<Self, NoiseError> {
        let mut rng = rng::substream(master_seed, Domain::Noise, index);
        Self::generate(model, dt, steps, &mut rng)
    }

    pub fn constant(dt: f64, steps: usize, value: f64) -> Self {
        Self {
            dt,
            values: vec![value; steps],
        }
    }

    pub fn zeros(dt: f64, steps: usize) -> Self {
        Self::constant(dt, steps, 0.0)
    }

    pub fn from_values(dt: f64, values: Vec<f64>) -> Result<Self, NoiseError> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(NoiseError::InvalidStep(dt));
        }
        Ok(Self { dt, values })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Writes `step,t,K3` rows; `t` is the start of each step.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["step", "t", "K3"])?;
        for (step, value) in self.values.iter().enumerate() {
            writer.write_record(&[
                step.to_string(),
                (step as f64 * self.dt).to_string(),
                value.to_string(),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }
}
