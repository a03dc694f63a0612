//! Run one experiment from a JSON config, the way `berrydd single` does.

use berrydd::ensemble::{run_ensemble, write_results_csv, ExperimentConfig, Table};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ExperimentConfig::from_json(
        r#"{
            "scheme": "scheme1-cpmg",
            "theta": 1.3089969389957472,
            "realizations": 300,
            "seed": 7,
            "b0_hz": 1.0e8
        }"#,
    )?;
    for w in config.validate()? {
        println!("warning: {w}");
    }
    let r = run_ensemble(&config)?;
    let seconds = config.seconds_per_unit_time().unwrap_or(1.0);
    println!(
        "T = {:.3} (= {:.3e} s at B0 = 100 MHz)",
        r.total_time,
        r.total_time * seconds
    );
    println!(
        "W = {:.4} ± {:.4} (sd {:.4}), theory {:.5}",
        r.w,
        r.w_stderr,
        r.w_sd,
        r.w_theory()
    );
    println!(
        "gamma = {:.4} ± {:.4}, theory {:.4}, noiseless {:.4}",
        r.gamma_mean, r.gamma_stderr, r.gamma_theory, r.gamma_reference
    );
    write_results_csv(&[r], Table::Full, std::io::stdout().lock())?;
    Ok(())
}
