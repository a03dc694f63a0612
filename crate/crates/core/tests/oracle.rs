//! Independent oracles for derived values: a brute-force time-domain
//! integral for χ and a direct sample estimate of the phase variance.

use std::f64::consts::PI;

use berrydd::analytics::linear_response::linear_response_chi;
use berrydd::analytics::rates::closed_form_prediction;
use berrydd::analytics::DrivenParams;
use berrydd::noise::{NoiseModel, NoiseRealization};
use berrydd::schedule::{Schedule, Scheme, Scheme1Base};

/// χ = ½∫∫ c(t)c(s)·α e^{−Γ|t−s|} dt ds by composite Simpson on each
/// segment pair (the kernel is smooth inside a pair when the pair differs,
/// and the diagonal uses the exact inner integral).
fn brute_force_chi(schedule: &Schedule, alpha: f64, gamma: f64) -> f64 {
    let coefficients = schedule.linear_coefficients();
    let mut edges = vec![0.0];
    for c in &coefficients {
        edges.push(edges.last().unwrap() + c.duration);
    }
    let n = 2000;
    let simpson = |a: f64, b: f64, f: &dyn Fn(f64) -> f64| {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let mut total = 0.0;
    for (i, ci) in coefficients.iter().enumerate() {
        for (j, cj) in coefficients.iter().enumerate() {
            let (a, b) = (edges[i], edges[i + 1]);
            let (c, d) = (edges[j], edges[j + 1]);
            // Inner integral over s ∈ [c, d] of e^{−Γ|t−s|}, in closed form.
            let inner = |t: f64| {
                let part = |lo: f64, hi: f64| {
                    if hi <= lo {
                        0.0
                    } else if hi <= t {
                        ((-gamma * (t - hi)).exp() - (-gamma * (t - lo)).exp()) / gamma
                    } else {
                        ((-gamma * (lo - t)).exp() - (-gamma * (hi - t)).exp()) / gamma
                    }
                };
                part(c, d.min(t)) + part(c.max(t), d)
            };
            total += ci.weight * cj.weight * alpha * simpson(a, b, &inner);
        }
    }
    0.5 * total
}

#[test]
fn reference_coherences_at_the_figure_point() {
    let theta = 5.0 * PI / 12.0;
    let p = DrivenParams::new(12.0, theta, 1e-3, 0.4).unwrap();
    let model = p.noise_model().unwrap();
    let cases = [
        (Scheme::Cpmg, 0.298, 5e-4),
        (Scheme::Scheme1(Scheme1Base::Cpmg), 0.9997, 5e-5),
        (Scheme::Scheme2, 0.9992, 5e-5),
        (Scheme::Fid { m: 2 }, 1.4e-3, 5e-5),
    ];
    for (scheme, reference, digits) in cases {
        let schedule = scheme.build(theta, 12.0).unwrap();
        let brute = brute_force_chi(&schedule, model.alpha(), model.gamma());
        let w = (-brute).exp();
        assert!(
            (w - reference).abs() <= digits,
            "{scheme}: brute-force W {w} vs {reference}"
        );
        let closed = closed_form_prediction(scheme, &p).unwrap().unwrap().chi;
        assert!(
            (brute - closed).abs() < 2e-3 * closed,
            "{scheme}: {brute} vs closed {closed}"
        );
    }
}

#[test]
fn brute_force_agrees_with_exact_rectangles() {
    for (theta, beta) in [(0.4, 0.01), (1.1, 0.5), (2.0, 3.0)] {
        for scheme in [
            Scheme::SpinEcho,
            Scheme::Cpmg,
            Scheme::Scheme2,
            Scheme::Scheme1(Scheme1Base::SpinEcho),
        ] {
            let s = scheme.build(theta, 10.0).unwrap();
            let model = NoiseModel::from_dimensionless(beta, 0.3, s.total_duration()).unwrap();
            let exact = linear_response_chi(&s, &model);
            let brute = brute_force_chi(&s, model.alpha(), model.gamma());
            assert!(
                (exact - brute).abs() < 1e-6 * exact.abs().max(1e-12),
                "{scheme} θ={theta} β={beta}: {exact} vs {brute}"
            );
        }
    }
}

#[test]
fn sampled_phase_variance_matches_chi() {
    // φ = −Σ c_k ∫ K over generated paths; ⟨φ²⟩/2 estimates χ directly.
    let theta = 1.0;
    let s = Schedule::cpmg(theta, 12.0).unwrap();
    let model = NoiseModel::from_dimensionless(0.5, 0.2, s.total_duration()).unwrap();
    let dt = s.total_duration() / 4000.0;
    let coefficients = s.linear_coefficients();
    let weight_at = |t: f64| {
        let mut end = 0.0;
        for c in &coefficients {
            end += c.duration;
            if t < end {
                return c.weight;
            }
        }
        coefficients.last().unwrap().weight
    };
    let weights: Vec<f64> = (0..4000)
        .map(|i| weight_at((i as f64 + 0.5) * dt))
        .collect();
    let n = 4000u64;
    let squares: Vec<f64> = (0..n)
        .map(|i| {
            let path = NoiseRealization::for_realization(&model, dt, 4000, 5, i).unwrap();
            let phi: f64 = path
                .values()
                .iter()
                .zip(&weights)
                .map(|(k, w)| -k * w * dt)
                .sum();
            phi * phi / 2.0
        })
        .collect();
    let mean = squares.iter().sum::<f64>() / n as f64;
    let sd = (squares.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let se = sd / (n as f64).sqrt();
    let chi = linear_response_chi(&s, &model);
    // Piecewise-constant sampling biases the estimate by O(Γ dt).
    assert!(
        (mean - chi).abs() < 4.0 * se + 1e-3 * chi,
        "{mean} ± {se} vs {chi}"
    );
}
