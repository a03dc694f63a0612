//! Coherence and phase against cone angle for FID, CPMG and the two
//! modified schemes, with their closed-form predictions.

use berrydd::cli::FIGURE_SCHEMES;
use berrydd::ensemble::{default_theta_grid, sweep_theta, ExperimentConfig};
use berrydd::schedule::Scheme;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let realizations = std::env::args().nth(1).map_or(Ok(200), |a| a.parse())?;
    let base = ExperimentConfig {
        realizations,
        ..ExperimentConfig::new(Scheme::Cpmg, 0.0)
    };
    let rows = sweep_theta(&base, &FIGURE_SCHEMES, &default_theta_grid())?;
    println!(
        "{:>13} {:>7} {:>8} {:>8} {:>7} {:>8} {:>8}",
        "scheme", "theta", "W", "W_thy", "W_se", "gamma", "g_thy"
    );
    for r in rows {
        println!(
            "{:>13} {:7.4} {:8.4} {:8.4} {:7.4} {:8.4} {:8.4}",
            r.config.scheme.to_string(),
            r.config.theta,
            r.w,
            r.w_theory(),
            r.w_stderr,
            r.gamma_mean,
            r.gamma_theory
        );
    }
    Ok(())
}
