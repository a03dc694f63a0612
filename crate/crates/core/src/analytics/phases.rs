//! Rotating-frame splitting and the eigenstate phases of a uniform cone
//! sweep.

use std::f64::consts::PI;

/// Exact and three-term-expanded |B̄ − ω̄|/B₀ for ω_rf = B₀/κ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Splitting {
    pub exact: f64,
    pub expanded: f64,
}

/// `kappa` may be negative for clockwise sweeps and infinite for a static
/// field.
pub fn omega_splitting(kappa: f64, theta: f64) -> Splitting {
    let w = 1.0 / kappa;
    let (s, c) = theta.sin_cos();
    let exact = ((1.0 - w * c).powi(2) + (w * s).powi(2)).sqrt();
    let expanded = 1.0 - w * c + 0.5 * w * w * s * s;
    Splitting { exact, expanded }
}

/// Labeled parts of γ±⁰ for one branch after m turns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseTerms {
    pub dynamic: f64,
    pub berry: f64,
    pub nonadiabatic: f64,
}

impl PhaseTerms {
    pub fn total(&self) -> f64 {
        self.dynamic + self.berry + self.nonadiabatic
    }
}

/// Phases of the ±1 eigenstates after `m` turns at |ω_rf| = B₀/κ, with the
/// sweep direction given by the sign of `m`. Returns (plus, minus).
pub fn phase_terms(kappa: f64, theta: f64, m: f64) -> (PhaseTerms, PhaseTerms) {
    let duration = 2.0 * PI * m.abs() * kappa;
    let omega_rf = m.signum() / kappa;
    let (s, c) = theta.sin_cos();
    let branch = |sign: f64| PhaseTerms {
        dynamic: -sign * 0.5 * duration,
        berry: m * PI * (1.0 + sign * c),
        nonadiabatic: -sign * m * PI * omega_rf / 2.0 * s * s,
    };
    (branch(1.0), branch(-1.0))
}

/// Angle between B̄ and B̄ − ω̄ in the rotating frame.
pub fn tilt_angle(kappa: f64, theta: f64) -> f64 {
    let w = 1.0 / kappa;
    (w * theta.sin()).atan2(1.0 - w * theta.cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitting_examples() {
        let s = omega_splitting(12.0, 0.0);
        assert!((s.exact - (1.0 - 1.0 / 12.0)).abs() < 1e-15);
        let s = omega_splitting(f64::INFINITY, 1.2);
        assert_eq!((s.exact, s.expanded), (1.0, 1.0));
        let s = omega_splitting(12.0, 5.0 * PI / 12.0);
        assert!((s.exact - s.expanded).abs() < (1.0f64 / 12.0).powi(3));
    }

    #[test]
    fn phase_term_examples() {
        let (p, m) = phase_terms(12.0, PI / 2.0, 1.0);
        assert!((p.berry - PI).abs() < 1e-15 && (m.berry - PI).abs() < 1e-15);
        let (p, m) = phase_terms(12.0, PI / 3.0, 1.0);
        let expected = PI / 24.0 * 0.75;
        assert!((p.nonadiabatic + expected).abs() < 1e-15);
        assert!((m.nonadiabatic - expected).abs() < 1e-15);
        assert!((expected - 0.0982).abs() < 5e-5);
        let theta = 0.8;
        let (p, m) = phase_terms(12.0, theta, 2.0);
        assert!((p.berry - 2.0 * PI * (1.0 + theta.cos())).abs() < 1e-14);
        assert!((m.berry - 2.0 * PI * (1.0 - theta.cos())).abs() < 1e-14);
        assert!((p.dynamic + m.dynamic).abs() < 1e-12);
    }

    #[test]
    fn phase_terms_follow_integrated_splitting() {
        // γ±⁰ = ∓½∫Ω dt + ½∫ω_rf dt; the expansion must agree to O(κ⁻²).
        for &kappa in &[12.0, 24.0, 48.0] {
            let theta: f64 = 1.0;
            let (p, _) = phase_terms(kappa, theta, 1.0);
            let duration = 2.0 * PI * kappa;
            let exact = -0.5 * omega_splitting(kappa, theta).exact * duration + PI;
            assert!(
                (p.total() - exact).abs() < 2.0 * PI / (kappa * kappa),
                "{kappa}"
            );
        }
    }

    #[test]
    fn tilt_examples() {
        assert_eq!(tilt_angle(12.0, 0.0), 0.0);
        assert_eq!(tilt_angle(f64::INFINITY, 1.0), 0.0);
        assert!((tilt_angle(12.0, PI / 2.0) - (1.0f64 / 12.0).atan()).abs() < 1e-15);
        assert!((tilt_angle(12.0, PI / 2.0) - 0.0831).abs() < 5e-5);
    }
}
