//! Coherence against noise bandwidth at θ = 5π/12 with η = 400β. The
//! oracle column is the exact linear response, valid at every β.

use berrydd::cli::{FIG5_THETA, FIGURE_SCHEMES};
use berrydd::ensemble::{default_beta_grid, sweep_beta, ExperimentConfig};
use berrydd::schedule::Scheme;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = ExperimentConfig {
        realizations: 200,
        ..ExperimentConfig::new(Scheme::Cpmg, FIG5_THETA)
    };
    let rows = sweep_beta(&base, &FIGURE_SCHEMES, &default_beta_grid())?;
    println!(
        "{:>13} {:>8} {:>8} {:>8} {:>8}",
        "scheme", "lg beta", "W", "W_low_f", "W_oracle"
    );
    for r in rows {
        println!(
            "{:>13} {:8.3} {:8.4} {:8.4} {:8.4}",
            r.config.scheme.to_string(),
            r.config.beta.log10(),
            r.w,
            r.w_theory(),
            (-r.chi_oracle).exp()
        );
    }
    Ok(())
}
