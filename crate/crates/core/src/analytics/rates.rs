//! Closed-form dephasing exponents for the built-in sequences at T = 4π/ω_B.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::filter::{bracket, Sequence};
use super::{AnalyticsError, DephasingPrediction, DrivenParams};
use crate::schedule::{solve_theta_c_exact, Scheme, Scheme1Base};

/// Above this β the low-frequency forms are unreliable.
const LOW_FREQUENCY_LIMIT: f64 = 0.1;

fn warn_if_fast(p: &DrivenParams, what: &str) {
    if p.beta > LOW_FREQUENCY_LIMIT {
        log::debug!(
            "{what}: beta = {} is outside the low-frequency regime",
            p.beta
        );
    }
}

fn echo_phase(p: &DrivenParams) -> f64 {
    -4.0 * PI * p.theta.cos()
}

/// FID, low-frequency form: (cosθ − sin²θ/κ)²·αT²/2.
pub fn chi_fid(p: &DrivenParams) -> DephasingPrediction {
    warn_if_fast(p, "chi_fid");
    let c = p.theta.cos();
    let g = p.geometric_weight();
    let bracket = c * c - 2.0 * c * g + g * g;
    DephasingPrediction::new(bracket * p.alpha_t2() / 2.0, echo_phase(p))
}

/// FID with the adiabatic reduction: cos²θ·αT²/2.
pub fn chi_fid_adiabatic(p: &DrivenParams) -> DephasingPrediction {
    DephasingPrediction::new(p.theta.cos().powi(2) * p.alpha_t2() / 2.0, echo_phase(p))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeMode {
    /// Both exponential brackets, valid at any β.
    #[default]
    Full,
    /// Leading order in β.
    LowFrequency,
}

/// Spin echo. The full form is
/// (α/Γ²)[cos²θ(β − 3 + 4e^{−β/2} − e^{−β}) + (sin⁴θ/κ²)(β − 1 + e^{−β})].
pub fn chi_se(p: &DrivenParams, mode: SeMode) -> DephasingPrediction {
    let cos2 = p.theta.cos().powi(2);
    let g2 = p.geometric_weight().powi(2);
    let chi = match mode {
        SeMode::Full => {
            // α/Γ² = η/β³
            let scale = p.eta / p.beta.powi(3);
            scale
                * (cos2 * bracket(Sequence::SpinEcho, p.beta) + g2 * bracket(Sequence::Fid, p.beta))
        }
        SeMode::LowFrequency => {
            warn_if_fast(p, "chi_se");
            cos2 * p.eta / 12.0 + g2 * p.alpha_t2() / 2.0
        }
    };
    DephasingPrediction::new(chi, echo_phase(p))
}

/// CPMG, low-frequency form: cos²θ·η/48 + (sin⁴θ/κ²)·αT²/2.
pub fn chi_cpmg(p: &DrivenParams) -> DephasingPrediction {
    warn_if_fast(p, "chi_cpmg");
    let chi =
        p.theta.cos().powi(2) * p.eta / 48.0 + p.geometric_weight().powi(2) * p.alpha_t2() / 2.0;
    DephasingPrediction::new(chi, echo_phase(p))
}

/// Scheme 1 with `p.theta` as θ_a: (cosθ_a − sin²θ_a/κ)²·η/12, times 1/4
/// for the CPMG base. The phase uses the exact companion angle.
pub fn chi_scheme1(
    p: &DrivenParams,
    base: Scheme1Base,
) -> Result<DephasingPrediction, AnalyticsError> {
    warn_if_fast(p, "chi_scheme1");
    let theta_c = solve_theta_c_exact(p.theta, p.kappa)?;
    let factor = match base {
        Scheme1Base::SpinEcho => 1.0,
        Scheme1Base::Cpmg => 0.25,
    };
    let chi = (p.theta.cos() - p.geometric_weight()).powi(2) * p.eta / 12.0 * factor;
    let gamma = -2.0 * PI * (p.theta.cos() + theta_c.cos());
    Ok(DephasingPrediction::new(chi, gamma))
}

/// Scheme 2: cos²θ_a·η/48 + (sin⁴θ_a/κ²)·η/12.
pub fn chi_scheme2(p: &DrivenParams) -> DephasingPrediction {
    warn_if_fast(p, "chi_scheme2");
    let chi = p.theta.cos().powi(2) * p.eta / 48.0 + p.geometric_weight().powi(2) * p.eta / 12.0;
    DephasingPrediction::new(chi, echo_phase(p))
}

/// λ = α₃T sin²θ·Γ₃/(Γ₃² + B₀²).
pub fn depolarization_lambda(p: &DrivenParams) -> f64 {
    let t = p.total_time();
    let alpha = p.eta / (p.beta * t * t);
    let gamma = p.beta / t;
    alpha * t * p.theta.sin().powi(2) * gamma / (gamma * gamma + 1.0)
}

/// Polar angle in (0, π/2] where the two spin-echo terms are equal, i.e.
/// cos²θ/sin⁴θ = 6/(βκ²).
pub fn se_crossover_angle(beta: f64, kappa: f64) -> f64 {
    let r = 6.0 / (beta * kappa * kappa);
    // y = cos²θ solves r·y² − (2r + 1)·y + r = 0; take the root below 1,
    // written without cancellation.
    let b = 2.0 * r + 1.0;
    let y = 2.0 * r / (b + (4.0 * r + 1.0).sqrt());
    y.sqrt().acos()
}

/// Closed-form prediction for a named scheme at T = 4π/ω_B, with λ attached.
/// The spin echo uses its full form; FID with m ≠ 2 has none.
pub fn closed_form_prediction(
    scheme: Scheme,
    p: &DrivenParams,
) -> Result<Option<DephasingPrediction>, AnalyticsError> {
    let prediction = match scheme {
        Scheme::Fid { m: 2 } => chi_fid(p),
        Scheme::Fid { .. } => return Ok(None),
        Scheme::SpinEcho => chi_se(p, SeMode::Full),
        Scheme::Cpmg => chi_cpmg(p),
        Scheme::Scheme1(base) => chi_scheme1(p, base)?,
        Scheme::Scheme2 => chi_scheme2(p),
    };
    Ok(Some(prediction.with_lambda(depolarization_lambda(p))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults(theta: f64) -> DrivenParams {
        DrivenParams::figure_defaults(theta)
    }

    const THETA: f64 = 5.0 * PI / 12.0;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn fid_examples() {
        let p = defaults(0.0);
        assert!(rel(chi_fid(&p).chi, p.eta / (2.0 * p.beta)) < 1e-15);
        let pred = chi_fid(&defaults(THETA));
        assert!((pred.chi - 6.557).abs() < 1e-3);
        assert!((pred.w - 1.4e-3).abs() < 0.05e-3);
    }

    #[test]
    fn fid_bracket_is_a_square() {
        let mut x: f64 = 0.123;
        for _ in 0..100 {
            x = (x * 9301.0 + 0.49297).fract();
            let theta = x * PI;
            let kappa = 2.0 + 50.0 * (x * 7.0).fract();
            let p = DrivenParams::new(kappa, theta, 1e-3, 0.4).unwrap();
            let square = (theta.cos() - p.geometric_weight()).powi(2) * p.alpha_t2() / 2.0;
            assert!((chi_fid(&p).chi - square).abs() < 1e-12 * (1.0 + square));
        }
    }

    #[test]
    fn se_examples() {
        let pred = chi_se(&defaults(THETA), SeMode::LowFrequency);
        assert!((pred.chi - 1.2113).abs() < 1e-4);
        assert!((pred.w - 0.2978).abs() < 1e-4);
        let dynamic = THETA.cos().powi(2) * 0.4 / 12.0;
        assert!((dynamic - 2.233e-3).abs() < 1e-6);
        let p = DrivenParams::new(12.0, 0.0, 0.01, 4.0).unwrap();
        assert!(rel(chi_se(&p, SeMode::LowFrequency).chi, 4.0 / 12.0) < 1e-15);
    }

    #[test]
    fn se_full_and_low_frequency_agree_only_for_slow_noise() {
        for &beta in &[1e-4, 1e-3, 1e-2] {
            let p = DrivenParams::new(12.0, 1.0, beta, 400.0 * beta).unwrap();
            let full = chi_se(&p, SeMode::Full).chi;
            let low = chi_se(&p, SeMode::LowFrequency).chi;
            assert!(rel(full, low) < 0.01, "beta={beta}");
        }
        for &beta in &[1.0, 5.0] {
            let p = DrivenParams::new(12.0, 1.0, beta, 400.0 * beta).unwrap();
            assert!(
                rel(
                    chi_se(&p, SeMode::Full).chi,
                    chi_se(&p, SeMode::LowFrequency).chi
                ) > 0.1
            );
        }
    }

    #[test]
    fn cpmg_examples() {
        let pred = chi_cpmg(&defaults(THETA));
        assert!((pred.chi - 1.2096).abs() < 1e-4);
        let p = defaults(1.0);
        let se_dyn = p.theta.cos().powi(2) * p.eta / 12.0;
        let cpmg_dyn = chi_cpmg(&p).chi - p.geometric_weight().powi(2) * p.alpha_t2() / 2.0;
        assert!(rel(cpmg_dyn, se_dyn / 4.0) < 1e-12);
        let p = defaults(PI / 2.0);
        let expected = p.alpha_t2() / (2.0 * p.kappa * p.kappa);
        assert!(rel(chi_cpmg(&p).chi, expected) < 1e-12);
        assert!(rel(chi_se(&p, SeMode::LowFrequency).chi, expected) < 1e-12);
    }

    #[test]
    fn scheme1_examples() {
        let p = defaults(THETA);
        let cpmg = chi_scheme1(&p, Scheme1Base::Cpmg).unwrap();
        assert!((cpmg.chi - 2.73e-4).abs() < 0.01e-4);
        assert!((cpmg.w - 0.99973).abs() < 1e-5);
        let se = chi_scheme1(&p, Scheme1Base::SpinEcho).unwrap();
        assert!(rel(se.chi, 4.0 * cpmg.chi) < 1e-15);
        assert!((cpmg.gamma_expected + 2.0 * PI * (0.258819 + 0.098545)).abs() < 1e-4);
    }

    #[test]
    fn scheme1_vanishes_at_the_magic_angle() {
        // cosθ = sin²θ/κ  ⇔  κc = 1 − c²
        let kappa = 12.0;
        let c = (-kappa + (kappa * kappa + 4.0f64).sqrt()) / 2.0;
        let p = DrivenParams::new(kappa, c.acos(), 1e-3, 0.4).unwrap();
        assert!(chi_scheme1(&p, Scheme1Base::SpinEcho).unwrap().chi < 1e-30);
    }

    #[test]
    fn scheme2_examples() {
        let pred = chi_scheme2(&defaults(THETA));
        assert!((pred.chi - 7.60e-4).abs() < 0.01e-4);
        assert!((pred.w - 0.99924).abs() < 1e-5);
        let p = defaults(1.1);
        let geo_s2 = p.geometric_weight().powi(2) * p.eta / 12.0;
        let geo_se = p.geometric_weight().powi(2) * p.alpha_t2() / 2.0;
        assert!(rel(geo_s2 / geo_se, p.beta / 6.0) < 1e-12);
        let p = defaults(PI / 2.0);
        assert!(
            rel(
                chi_scheme2(&p).chi,
                p.geometric_weight().powi(2) * p.eta / 12.0
            ) < 1e-12
        );
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(depolarization_lambda(&defaults(0.0)), 0.0);
        let lam = depolarization_lambda(&defaults(THETA));
        // α₃T sin²θ Γ₃/B₀² with α₃T² = 400, Γ₃T = 1e-3, T = 48π
        let t = 48.0 * PI;
        let expected = 400.0 / t * THETA.sin().powi(2) * (1e-3 / t) / (1.0 + (1e-3 / t).powi(2));
        assert!(rel(lam, expected) < 1e-12);
        assert!(lam < 1e-4 * chi_scheme2(&defaults(THETA)).chi.recip());
        // maximum over Γ₃ at Γ₃ = B₀, i.e. β = T
        let t = defaults(1.0).total_time();
        let at = |beta: f64| {
            depolarization_lambda(&DrivenParams {
                beta,
                eta: 0.4,
                ..defaults(1.0)
            }) * beta
        };
        assert!(at(t) > at(0.9 * t) && at(t) > at(1.1 * t));
    }

    #[test]
    fn crossover_balances_the_echo_terms() {
        for &(beta, kappa) in &[(1e-3, 12.0), (1e-2, 12.0), (1e-3, 30.0), (0.5, 4.0)] {
            let theta = se_crossover_angle(beta, kappa);
            let p = DrivenParams::new(kappa, theta, beta, 400.0 * beta).unwrap();
            let dynamic = theta.cos().powi(2) * p.eta / 12.0;
            let geometric = p.geometric_weight().powi(2) * p.alpha_t2() / 2.0;
            assert!(rel(dynamic, geometric) < 1e-8);
        }
    }

    #[test]
    fn fid_beats_cpmg_near_the_magic_angle() {
        let kappa = 12.0;
        let c = (-kappa + (kappa * kappa + 4.0f64).sqrt()) / 2.0;
        let p = defaults(c.acos());
        assert!(chi_fid(&p).chi < chi_cpmg(&p).chi);
        assert!(chi_fid(&defaults(0.3)).chi > chi_cpmg(&defaults(0.3)).chi);
    }

    #[test]
    fn geometric_se_term_depends_only_on_sweep_count() {
        // sin⁴θ/κ² · αT²/2 with ω_B T = 4π fixed: rescaling κ and T together
        // while holding α₃ fixed changes nothing in the combination αT²/κ².
        let theta: f64 = 1.0;
        let alpha = 3e-4;
        let term = |kappa: f64| {
            let t = 4.0 * PI * kappa;
            (theta.sin().powi(2) / kappa).powi(2) * alpha * t * t / 2.0
        };
        assert!(rel(term(12.0), term(40.0)) < 1e-12);
    }

    #[test]
    fn closed_form_prediction_covers_sweep_set() {
        let p = defaults(THETA);
        for s in Scheme::SWEEP_SET {
            let pred = closed_form_prediction(s, &p).unwrap().unwrap();
            assert!(pred.lambda.is_some());
            assert!(pred.w > 0.0 && pred.w <= 1.0);
        }
        assert!(closed_form_prediction(Scheme::Fid { m: 3 }, &p)
            .unwrap()
            .is_none());
    }
}
