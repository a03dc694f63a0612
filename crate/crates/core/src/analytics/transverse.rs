//! Radial (transverse) noise K_r along (cosφ, sinφ, 0), co-rotating with
//! the drive. Its linear coupling is s_k(sinθ − sign(l_k)·cosθ sinθ/κ).

use crate::schedule::{Coefficient, Schedule};

use super::AnalyticsError;

pub fn transverse_coefficients(schedule: &Schedule) -> Vec<Coefficient> {
    let kappa = schedule.kappa();
    schedule
        .segments()
        .iter()
        .map(|s| {
            let (sin, cos) = s.theta.sin_cos();
            Coefficient {
                weight: s.sign.value() * (sin - s.direction() * cos * sin / kappa),
                duration: s.duration(schedule.omega_b()),
            }
        })
        .collect()
}

/// sinθ(1 + cosθ/κ)
fn balance(theta: f64, kappa: f64) -> f64 {
    theta.sin() * (1.0 + theta.cos() / kappa)
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    let (a, b) = (f(lo).abs(), f(hi).abs());
    if a <= b {
        lo
    } else {
        hi
    }
}

/// Companion angle θ_c ∈ (0, π) with
/// sinθ_c(1 + cosθ_c/κ) = sinθ_a(1 − cosθ_a/κ).
///
/// The left side rises to a single peak at 2c² + κc − 1 = 0 (c = cosθ) and
/// falls again, so there are up to two roots; the one nearer θ_a is
/// returned. Passing −κ inverts the relation.
pub fn solve_theta_c_transverse(theta_a: f64, kappa: f64) -> Result<f64, AnalyticsError> {
    if !(kappa.abs() > 1.0) || !kappa.is_finite() {
        return Err(AnalyticsError::InvalidKappa(kappa));
    }
    if !(theta_a > 0.0 && theta_a < std::f64::consts::PI) {
        return Err(AnalyticsError::InvalidTheta(theta_a));
    }
    let target = theta_a.sin() * (1.0 - theta_a.cos() / kappa);
    let peak_cos = 2.0 / (kappa + kappa.signum() * (kappa * kappa + 8.0).sqrt());
    let peak = peak_cos.acos();
    let max = balance(peak, kappa);
    if target > max {
        return Err(AnalyticsError::NoTransverseCompanion { target, max });
    }
    let f = |t: f64| balance(t, kappa) - target;
    let rising = bisect(f, 0.0, peak);
    let falling = bisect(f, peak, std::f64::consts::PI);
    Ok(if (rising - theta_a).abs() <= (falling - theta_a).abs() {
        rising
    } else {
        falling
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::dc_sum;
    use std::f64::consts::PI;

    fn residual(theta_a: f64, theta_c: f64, kappa: f64) -> f64 {
        theta_c.sin() * (1.0 + theta_c.cos() / kappa)
            - theta_a.sin() * (1.0 - theta_a.cos() / kappa)
    }

    #[test]
    fn equatorial_coupling_is_pure_radial() {
        let s = Schedule::cpmg(PI / 2.0, 12.0).unwrap();
        for (c, seg) in transverse_coefficients(&s).iter().zip(s.segments()) {
            assert!((c.weight - seg.sign.value()).abs() < 1e-15);
        }
    }

    #[test]
    fn scheme2_transverse_dc_sum_does_not_cancel() {
        let kappa = 12.0;
        let theta: f64 = PI / 4.0;
        let s = Schedule::scheme2(theta, kappa).unwrap();
        let dc = dc_sum(&transverse_coefficients(&s));
        // each quarter contributes cosθ sinθ/κ with the same sign
        let expected = theta.cos() * theta.sin() / kappa * s.total_duration();
        assert!((dc - expected).abs() < 1e-12 * expected);
        assert!(dc.abs() > 1.0);
    }

    #[test]
    fn solver_examples() {
        let kappa = 12.0;
        for &theta_a in &[0.3, PI / 4.0, 1.2, 5.0 * PI / 12.0, PI / 2.0, 2.0, 2.8] {
            let theta_c = solve_theta_c_transverse(theta_a, kappa).unwrap();
            assert!(residual(theta_a, theta_c, kappa).abs() < 1e-12);
            let back = solve_theta_c_transverse(theta_c, -kappa).unwrap();
            assert!(
                (back - theta_a).abs() < 1e-10,
                "{theta_a} -> {theta_c} -> {back}"
            );
        }
        let big = solve_theta_c_transverse(1.0, 1e12).unwrap();
        assert!((big - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equatorial_target_found_by_independent_scan() {
        let kappa = 12.0;
        let theta_c = solve_theta_c_transverse(PI / 2.0, kappa).unwrap();
        assert!(residual(PI / 2.0, theta_c, kappa).abs() < 1e-12);
        // crude scan for a sign change near the returned root
        let n = 100_000;
        let roots: Vec<f64> = (0..n)
            .map(|i| PI * i as f64 / n as f64)
            .collect::<Vec<_>>()
            .windows(2)
            .filter(|w| residual(PI / 2.0, w[0], kappa) * residual(PI / 2.0, w[1], kappa) <= 0.0)
            .map(|w| w[0])
            .collect();
        assert!(roots.iter().any(|r| (r - theta_c).abs() < 1e-4));
    }

    #[test]
    fn scheme1_transverse_balance_cancels_dc() {
        let kappa = 12.0;
        let theta_a = 1.1;
        let theta_c = solve_theta_c_transverse(theta_a, kappa).unwrap();
        let lhs = theta_a.sin() * (1.0 - theta_a.cos() / kappa);
        let rhs = theta_c.sin() * (1.0 + theta_c.cos() / kappa);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_input() {
        assert!(solve_theta_c_transverse(0.0, 12.0).is_err());
        assert!(solve_theta_c_transverse(1.0, 0.5).is_err());
    }
}
