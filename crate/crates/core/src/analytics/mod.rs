//! Closed-form predictions: phases, dephasing exponents for the built-in
//! sequences, the exact linear-response oracle, filter functions and the
//! transverse-noise variants.

pub mod filter;
pub mod linear_response;
pub mod phases;
pub mod quadrature;
pub mod rates;
pub mod transverse;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::noise::{NoiseError, NoiseModel};
use crate::schedule::ScheduleError;

pub use filter::{
    chi_closed, chi_spectral, filter_function, filter_over_z2, Sequence, SwitchingFunction,
};
pub use linear_response::{linear_response_chi, linear_response_chi_weights};
pub use rates::{
    chi_cpmg, chi_fid, chi_fid_adiabatic, chi_scheme1, chi_scheme2, chi_se, closed_form_prediction,
    depolarization_lambda, se_crossover_angle, SeMode,
};

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("adiabaticity must exceed 1, got {0}")]
    InvalidKappa(f64),
    #[error("beta must be finite and positive, got {0}")]
    InvalidBeta(f64),
    #[error("eta must be finite and non-negative, got {0}")]
    InvalidEta(f64),
    #[error("polar angle {0} outside [0, π]")]
    InvalidTheta(f64),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("no transverse companion angle: target {target} exceeds the attainable maximum {max}")]
    NoTransverseCompanion { target: f64, max: f64 },
}

/// Driving and noise parameters in dimensionless form.
///
/// `beta = Γ₃T` and `eta = α₃Γ₃T³`, with T = 4πκ (two full turns at
/// ω_B = B₀/κ) unless overridden.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrivenParams {
    pub kappa: f64,
    pub theta: f64,
    pub beta: f64,
    pub eta: f64,
}

impl DrivenParams {
    pub fn new(kappa: f64, theta: f64, beta: f64, eta: f64) -> Result<Self, AnalyticsError> {
        if !(kappa > 1.0) || !kappa.is_finite() {
            return Err(AnalyticsError::InvalidKappa(kappa));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(AnalyticsError::InvalidBeta(beta));
        }
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(AnalyticsError::InvalidEta(eta));
        }
        if !(0.0..=PI).contains(&theta) {
            return Err(AnalyticsError::InvalidTheta(theta));
        }
        Ok(Self {
            kappa,
            theta,
            beta,
            eta,
        })
    }

    /// κ = 12, β = 0.001, η = 400β.
    pub fn figure_defaults(theta: f64) -> Self {
        Self {
            kappa: 12.0,
            theta,
            beta: 1e-3,
            eta: 0.4,
        }
    }

    pub fn with_theta(self, theta: f64) -> Self {
        Self { theta, ..self }
    }

    pub fn total_time(&self) -> f64 {
        4.0 * PI * self.kappa
    }

    /// α₃T² = η/β
    pub fn alpha_t2(&self) -> f64 {
        self.eta / self.beta
    }

    /// ω_B sin²θ/B₀
    pub fn geometric_weight(&self) -> f64 {
        self.theta.sin().powi(2) / self.kappa
    }

    pub fn noise_model(&self) -> Result<NoiseModel, AnalyticsError> {
        Ok(NoiseModel::from_dimensionless(
            self.beta,
            self.eta,
            self.total_time(),
        )?)
    }
}

/// χ with its coherence W = e^{−χ}, the expected phase and, optionally, the
/// depolarization exponent λ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DephasingPrediction {
    pub chi: f64,
    pub w: f64,
    pub gamma_expected: f64,
    pub lambda: Option<f64>,
}

impl DephasingPrediction {
    pub fn new(chi: f64, gamma_expected: f64) -> Self {
        Self {
            chi,
            w: (-chi).exp(),
            gamma_expected,
            lambda: None,
        }
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self {
            lambda: Some(lambda),
            ..self
        }
    }

    /// e^{−λ/2−χ}; equals `w` when λ is absent.
    pub fn w_with_depolarization(&self) -> f64 {
        (-self.lambda.unwrap_or(0.0) / 2.0 - self.chi).exp()
    }
}
