//! Exact second moment of the linearized random phase for piecewise-constant
//! couplings under OU noise.
//!
//! With φ = −Σ_k c_k ∫_k K dt and ⟨K(t)K(t′)⟩ = αe^{−Γ|t−t′|},
//! χ = ½⟨φ²⟩ = ½ Σ_i Σ_j c_i c_j I_ij, where every rectangle integral I_ij
//! has a closed form.

use crate::noise::NoiseModel;
use crate::schedule::{Coefficient, Schedule};

use super::filter::{bracket, Sequence};

/// ∬ over one interval of length τ: 2α(Γτ − 1 + e^{−Γτ})/Γ².
fn self_overlap(noise: &NoiseModel, tau: f64) -> f64 {
    let g = noise.gamma();
    2.0 * noise.alpha() / (g * g) * bracket(Sequence::Fid, g * tau)
}

/// ∫_i∫_j for disjoint intervals separated by `gap`:
/// α(1 − e^{−Γτᵢ})(1 − e^{−Γτⱼ})e^{−Γ·gap}/Γ².
fn cross_overlap(noise: &NoiseModel, tau_i: f64, tau_j: f64, gap: f64) -> f64 {
    let g = noise.gamma();
    noise.alpha() / (g * g) * (-(-g * tau_i).exp_m1()) * (-(-g * tau_j).exp_m1()) * (-g * gap).exp()
}

/// χ for an arbitrary sequence of consecutive constant weights.
pub fn linear_response_chi_weights(coefficients: &[Coefficient], noise: &NoiseModel) -> f64 {
    let starts: Vec<f64> = coefficients
        .iter()
        .scan(0.0, |t, c| {
            let start = *t;
            *t += c.duration;
            Some(start)
        })
        .collect();
    let mut chi = 0.0;
    for (i, ci) in coefficients.iter().enumerate() {
        chi += 0.5 * ci.weight * ci.weight * self_overlap(noise, ci.duration);
        for (j, cj) in coefficients.iter().enumerate().skip(i + 1) {
            let gap = starts[j] - (starts[i] + ci.duration);
            // the (i, j) and (j, i) terms are equal
            chi += ci.weight * cj.weight * cross_overlap(noise, ci.duration, cj.duration, gap);
        }
    }
    chi.max(0.0)
}

/// χ from the schedule's longitudinal couplings.
pub fn linear_response_chi(schedule: &Schedule, noise: &NoiseModel) -> f64 {
    linear_response_chi_weights(&schedule.linear_coefficients(), noise)
}
