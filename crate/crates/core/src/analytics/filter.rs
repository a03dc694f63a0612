//! Filter-function description of pulse sequences under OU noise.
//!
//! With the random phase written as φ = ∫₀ᵀ h(t)K₃(t)dt for a ±1
//! switching function h, the dephasing exponent is
//! χ = ∫₀^∞ (dω/π) S₃(ω) F(ωT)/ω².

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::quadrature::{self, QuadratureError, Tolerance};
use crate::noise::NoiseModel;

/// Sequences with tabulated filter functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sequence {
    Fid,
    #[serde(rename = "se")]
    SpinEcho,
    #[serde(rename = "cpmg2")]
    Cpmg2,
}

impl Sequence {
    pub const ALL: [Sequence; 3] = [Sequence::Fid, Sequence::SpinEcho, Sequence::Cpmg2];

    /// Mean of F(z) over a period, which sets the high-frequency weight.
    pub fn mean_filter(self) -> f64 {
        match self {
            Sequence::Fid => 1.0,
            Sequence::SpinEcho => 3.0,
            Sequence::Cpmg2 => 5.0,
        }
    }

    /// Period of F in z.
    pub fn period(self) -> f64 {
        match self {
            Sequence::Fid => TAU,
            Sequence::SpinEcho => 2.0 * TAU,
            Sequence::Cpmg2 => 4.0 * TAU,
        }
    }

    pub fn max_filter(self) -> f64 {
        match self {
            Sequence::Fid => 2.0,
            Sequence::SpinEcho => 8.0,
            Sequence::Cpmg2 => 32.0,
        }
    }

    /// Low-frequency limit χ/(αT²/2) → {1, β/6, β/24}.
    pub fn low_frequency_factor(self, beta: f64) -> f64 {
        match self {
            Sequence::Fid => 1.0,
            Sequence::SpinEcho => beta / 6.0,
            Sequence::Cpmg2 => beta / 24.0,
        }
    }

    /// Exponential terms (a_j, b_j) and constant c₀ of the time-domain
    /// bracket β + c₀ + Σ_j a_j e^{−b_jβ}.
    fn bracket_terms(self) -> (f64, &'static [(f64, f64)]) {
        match self {
            Sequence::Fid => (-1.0, &[(1.0, 1.0)]),
            Sequence::SpinEcho => (-3.0, &[(4.0, 0.5), (-1.0, 1.0)]),
            Sequence::Cpmg2 => (-5.0, &[(4.0, 0.25), (4.0, 0.5), (-4.0, 0.75), (1.0, 1.0)]),
        }
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sequence::Fid => "fid",
            Sequence::SpinEcho => "se",
            Sequence::Cpmg2 => "cpmg2",
        })
    }
}

impl FromStr for Sequence {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fid" => Ok(Sequence::Fid),
            "se" | "spin-echo" => Ok(Sequence::SpinEcho),
            "cpmg" | "cpmg2" => Ok(Sequence::Cpmg2),
            other => Err(format!("unknown sequence '{other}'")),
        }
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// x − atan(x) without cancellation for small x.
fn x_minus_atan(x: f64) -> f64 {
    if x > 0.1 {
        return x - x.atan();
    }
    let x2 = x * x;
    let mut power = x * x2;
    let mut sum = 0.0;
    for k in 1..30 {
        let term = power / (2 * k + 1) as f64;
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 * sum {
            break;
        }
        power *= x2;
    }
    sum
}

/// F(z) as tabulated. The CPMG form is evaluated as printed except near the
/// removable zeros of cos(z/4), where the equivalent 32 sin⁴(z/8) sin²(z/4)
/// is used.
pub fn filter_function(sequence: Sequence, z: f64) -> f64 {
    match sequence {
        Sequence::Fid => 2.0 * (0.5 * z).sin().powi(2),
        Sequence::SpinEcho => 8.0 * (0.25 * z).sin().powi(4),
        Sequence::Cpmg2 => {
            let c = (0.25 * z).cos();
            if c.abs() < 1e-6 {
                32.0 * (0.125 * z).sin().powi(4) * (0.25 * z).sin().powi(2)
            } else {
                8.0 * (0.125 * z).sin().powi(4) * (0.5 * z).sin().powi(2) / (c * c)
            }
        }
    }
}

/// F(z)/z², finite at z = 0.
pub fn filter_over_z2(sequence: Sequence, z: f64) -> f64 {
    match sequence {
        Sequence::Fid => 0.5 * sinc(0.5 * z).powi(2),
        Sequence::SpinEcho => z * z / 32.0 * sinc(0.25 * z).powi(4),
        Sequence::Cpmg2 => z.powi(4) / 2048.0 * sinc(0.125 * z).powi(4) * sinc(0.25 * z).powi(2),
    }
}

/// Switch times t₀ = 0 < t₁ < … < t_{m+1} = T of a ±1 function h that
/// starts at +1 and flips sign at every interior time.
#[derive(Clone, Debug, PartialEq)]
pub struct SwitchingFunction {
    times: Vec<f64>,
}

impl SwitchingFunction {
    pub fn new(times: Vec<f64>) -> Option<Self> {
        let ok = times.len() >= 2 && times[0] == 0.0 && times.windows(2).all(|w| w[1] > w[0]);
        ok.then_some(Self { times })
    }

    pub fn for_sequence(sequence: Sequence, total_time: f64) -> Self {
        let interior: &[f64] = match sequence {
            Sequence::Fid => &[],
            Sequence::SpinEcho => &[0.5],
            Sequence::Cpmg2 => &[0.25, 0.75],
        };
        let mut times = vec![0.0];
        times.extend(interior.iter().map(|x| x * total_time));
        times.push(total_time);
        Self { times }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn switches(&self) -> usize {
        self.times.len() - 2
    }

    pub fn total_time(&self) -> f64 {
        *self.times.last().expect("at least two times")
    }

    /// h(t) = (−1)^k on [t_k, t_{k+1}).
    pub fn value(&self, t: f64) -> f64 {
        let k = self.times[1..].iter().take_while(|&&tk| tk <= t).count();
        let k = k.min(self.times.len() - 2);
        if k % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn integral(&self) -> f64 {
        self.times
            .windows(2)
            .enumerate()
            .map(|(k, w)| if k % 2 == 0 { w[1] - w[0] } else { w[0] - w[1] })
            .sum()
    }

    /// |∫₀ᵀ h e^{iωt} dt|²·ω²/2 evaluated at ωT = z.
    pub fn filter(&self, z: f64) -> f64 {
        let total = self.total_time();
        let omega = z / total;
        let (mut re, mut im) = (0.0, 0.0);
        for (k, w) in self.times.windows(2).enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            // ∫ e^{iωt} = (e^{iωb} − e^{iωa})/(iω); scaled by ω below
            re += sign * ((omega * w[1]).sin() - (omega * w[0]).sin());
            im += sign * ((omega * w[0]).cos() - (omega * w[1]).cos());
        }
        0.5 * (re * re + im * im)
    }
}

/// Time-domain bracket B(β) with χ = (α/Γ²)·B(β). Uses the Taylor series
/// below β = 1 to avoid cancellation.
pub fn bracket(sequence: Sequence, beta: f64) -> f64 {
    let (c0, terms) = sequence.bracket_terms();
    if beta >= 1.0 {
        return beta
            + c0
            + terms
                .iter()
                .map(|(a, b)| a * (-b * beta).exp())
                .sum::<f64>();
    }
    let mut sum = 0.0;
    let mut factor = 1.0;
    for n in 1..=40 {
        factor *= beta / n as f64;
        if n < 2 {
            continue;
        }
        let coeff: f64 = terms.iter().map(|(a, b)| a * (-b).powi(n)).sum();
        sum += coeff * factor;
        // |coeff| ≤ Σ|a_j| ≤ 13 bounds every remaining term
        if n > 3 && 13.0 * factor < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Closed-form χ for OU noise: (α/Γ²)·B(ΓT).
pub fn chi_closed(sequence: Sequence, noise: &NoiseModel, total_time: f64) -> f64 {
    let g = noise.gamma();
    noise.alpha() / (g * g) * bracket(sequence, g * total_time)
}

/// Frequency-domain χ by quadrature.
///
/// The substitution ω = Γ tan u maps the half line onto [0, π/2) and turns
/// the Lorentzian into a constant, leaving (2α/π)·F(ωT)/ω² in u; it is
/// evaluated through the complement v = π/2 − u. Panels
/// follow the 2π periods of F in z = ωT up to a cutoff chosen from the
/// oscillation bound; beyond it F is replaced by its mean and integrated
/// analytically.
pub fn chi_spectral(
    sequence: Sequence,
    noise: &NoiseModel,
    total_time: f64,
) -> Result<f64, QuadratureError> {
    let (alpha, gamma) = (noise.alpha(), noise.gamma());
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let t = total_time;
    let beta = gamma * t;
    // v = π/2 − u keeps full precision where ω ≫ Γ: ω = Γ/tan v.
    let integrand = |v: f64| 2.0 * alpha / PI * t * t * filter_over_z2(sequence, beta / v.tan());
    let to_v = |z: f64| beta.atan2(z);

    // ∫_w^∞ 2αΓF̄/(πω²(Γ² + ω²)) dω = (2αF̄/(πΓ²))·(x − atan x), x = Γ/w.
    let tail = |z_max: f64| {
        let x = gamma * t / z_max;
        2.0 * alpha * sequence.mean_filter() / (PI * gamma * gamma) * x_minus_atan(x)
    };
    // Bound on the neglected oscillating part past the cutoff.
    let oscillation = |z_max: f64| {
        let w = z_max / t;
        2.0 * alpha * gamma * sequence.max_filter() / PI / (w * w * (gamma * gamma + w * w))
            * (sequence.period() / t)
    };

    // Grow the cutoff until the oscillation bound is negligible against a
    // coarse one-rule-per-panel estimate.
    let mut z_max = 32.0 * PI;
    let mut edges = vec![0.0];
    let mut coarse = 0.0;
    loop {
        while *edges.last().unwrap() < z_max {
            let z_lo = *edges.last().unwrap();
            let z_hi = z_lo + TAU;
            coarse += quadrature::gk15(&integrand, to_v(z_hi), to_v(z_lo))?.0;
            edges.push(z_hi);
        }
        let z_end = *edges.last().unwrap();
        if oscillation(z_end) <= 1e-11 * (coarse + tail(z_end)).abs() || z_end > 1e9 {
            break;
        }
        z_max *= 2.0;
    }

    let z_end = *edges.last().unwrap();
    let scale = (coarse + tail(z_end)).abs();
    let tol = Tolerance {
        absolute: 1e-11 * scale / (edges.len() - 1) as f64,
        relative: 1e-12,
        max_depth: 30,
    };
    let mut sum = 0.0;
    let mut compensation = 0.0;
    for w in edges.windows(2) {
        let piece = quadrature::integrate(&integrand, to_v(w[1]), to_v(w[0]), tol)?;
        let y = piece - compensation;
        let t = sum + y;
        compensation = (t - sum) - y;
        sum = t;
    }
    Ok(sum + tail(z_end))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(beta: f64, total_time: f64) -> NoiseModel {
        NoiseModel::from_dimensionless(beta, 0.4 * beta.max(1e-3), total_time).unwrap()
    }

    #[test]
    fn table_values() {
        for s in Sequence::ALL {
            assert_eq!(filter_function(s, 0.0), 0.0);
        }
        assert!((filter_function(Sequence::Fid, PI) - 2.0).abs() < 1e-15);
        assert!((filter_function(Sequence::SpinEcho, TAU) - 8.0).abs() < 1e-14);
    }

    #[test]
    fn tabulated_filters_match_switching_patterns() {
        for s in Sequence::ALL {
            let h = SwitchingFunction::for_sequence(s, 3.0);
            for &z in &[0.3, 1.7, TAU, 2.0 * TAU, 9.9, 31.4, 77.0] {
                let a = filter_function(s, z);
                let b = h.filter(z);
                assert!((a - b).abs() < 1e-12 * (1.0 + b), "{s} z={z}: {a} vs {b}");
                assert!(a >= 0.0);
                let r = filter_over_z2(s, z);
                assert!((r - a / (z * z)).abs() < 1e-12 * (1.0 + r));
            }
        }
    }

    #[test]
    fn cpmg_removable_points() {
        let z = TAU;
        let near = filter_function(Sequence::Cpmg2, z + 1e-9);
        let at = filter_function(Sequence::Cpmg2, z);
        assert!((near - at).abs() < 1e-7);
        assert!((at - 32.0 * (PI / 4.0).sin().powi(4)).abs() < 1e-12);
    }

    #[test]
    fn small_z_limits() {
        let z = 1e-3;
        assert!((filter_over_z2(Sequence::Fid, z) - 0.5).abs() < 1e-6);
        assert!((filter_over_z2(Sequence::SpinEcho, z) / z.powi(2) - 1.0 / 32.0).abs() < 1e-8);
        assert!((filter_over_z2(Sequence::Cpmg2, z) / z.powi(4) - 1.0 / 2048.0).abs() < 1e-9);
        assert_eq!(filter_over_z2(Sequence::Fid, 0.0), 0.5);
    }

    #[test]
    fn switching_integrals() {
        let t = 2.5;
        let fid = SwitchingFunction::for_sequence(Sequence::Fid, t);
        assert_eq!(fid.switches(), 0);
        assert!((fid.integral() - t).abs() < 1e-15);
        let se = SwitchingFunction::for_sequence(Sequence::SpinEcho, t);
        assert_eq!(se.integral(), 0.0);
        assert_eq!((se.value(0.1), se.value(2.0)), (1.0, -1.0));
        let cpmg = SwitchingFunction::for_sequence(Sequence::Cpmg2, t);
        assert!(cpmg.integral().abs() < 1e-15);
        let pattern: Vec<f64> = [0.3, 0.9, 1.6, 2.2]
            .iter()
            .map(|&x| cpmg.value(x))
            .collect();
        assert_eq!(pattern, vec![1.0, -1.0, -1.0, 1.0]);
        assert!(SwitchingFunction::new(vec![0.0, 1.0, 1.0]).is_none());
    }

    fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if f(c) > f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn fid_sidelobe_peaks_satisfy_tan_half_z_equals_half_z() {
        let f = |z: f64| filter_over_z2(Sequence::Fid, z);
        for k in 1..4 {
            let z = golden_max(f, k as f64 * TAU, (k + 1) as f64 * TAU);
            assert!(((0.5 * z).tan() - 0.5 * z).abs() < 1e-5, "z = {z}");
        }
    }

    #[test]
    fn peak_frequency_grows_with_switch_count() {
        let argmax = |s: Sequence| {
            (0..20_000)
                .map(|i| i as f64 * 0.005)
                .max_by(|a, b| filter_over_z2(s, *a).total_cmp(&filter_over_z2(s, *b)))
                .unwrap()
        };
        let (f, s, c) = (
            argmax(Sequence::Fid),
            argmax(Sequence::SpinEcho),
            argmax(Sequence::Cpmg2),
        );
        assert!(f < s && s < c, "{f} {s} {c}");
    }

    #[test]
    fn bracket_series_matches_direct_form() {
        for s in Sequence::ALL {
            let (c0, terms) = s.bracket_terms();
            for &beta in &[0.3, 0.7, 0.99] {
                let direct = beta
                    + c0
                    + terms
                        .iter()
                        .map(|(a, b)| a * (-b * beta).exp())
                        .sum::<f64>();
                let series = bracket(s, beta);
                assert!(((direct - series) / series).abs() < 1e-9, "{s} {beta}");
            }
        }
        assert!((bracket(Sequence::Fid, 1.0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn low_frequency_factors() {
        let t = 50.0;
        let beta = 1e-4;
        for s in Sequence::ALL {
            let m = model(beta, t);
            let ratio = chi_closed(s, &m, t) / (m.alpha() * t * t / 2.0);
            assert!((ratio / s.low_frequency_factor(beta) - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn high_frequency_limit_is_sequence_independent() {
        let t = 1.0;
        let m = NoiseModel::new(2.0, 1e4).unwrap();
        for s in Sequence::ALL {
            let limit = m.alpha() * t / m.gamma();
            assert!((chi_closed(s, &m, t) / limit - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn spectral_matches_closed_form() {
        let t = 37.0;
        for &beta in &[1e-3, 1e-1, 1.0, 10.0] {
            for s in Sequence::ALL {
                let m = model(beta, t);
                let a = chi_spectral(s, &m, t).unwrap();
                let b = chi_closed(s, &m, t);
                assert!(((a - b) / b).abs() < 1e-6, "{s} beta={beta}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_power_gives_zero() {
        let m = NoiseModel::new(0.0, 1.0).unwrap();
        assert_eq!(chi_spectral(Sequence::Cpmg2, &m, 1.0).unwrap(), 0.0);
    }
}
