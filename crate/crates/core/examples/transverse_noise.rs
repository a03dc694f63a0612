//! Radial (transverse) noise: the mirrored-cone scheme keeps a static
//! offset response, so its protection is lost. Also lists the companion
//! angles that balance a transverse offset.

use std::f64::consts::PI;

use berrydd::analytics::linear_response::linear_response_chi_weights;
use berrydd::analytics::transverse::{solve_theta_c_transverse, transverse_coefficients};
use berrydd::ensemble::{run_ensemble, ExperimentConfig};
use berrydd::noise::NoiseModel;
use berrydd::propagator::NoiseAxis;
use berrydd::schedule::{dc_sum, Scheme};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (theta, kappa) = (PI / 4.0, 12.0);
    let s2 = Scheme::Scheme2.build(theta, kappa)?;
    let coefficients = transverse_coefficients(&s2);
    println!("scheme2 transverse weights:");
    for c in &coefficients {
        println!("  {:+.5} for {:.3}", c.weight, c.duration);
    }
    println!(
        "static-offset response {:.5} (cos sin T / kappa = {:.5})",
        dc_sum(&coefficients),
        theta.cos() * theta.sin() * s2.total_duration() / kappa
    );

    let noise = NoiseModel::from_dimensionless(1e-3, 0.4, s2.total_duration())?;
    println!(
        "chi transverse {:.4e}, longitudinal {:.4e}",
        linear_response_chi_weights(&coefficients, &noise),
        linear_response_chi_weights(&s2.linear_coefficients(), &noise)
    );

    for config in [
        ExperimentConfig {
            realizations: 200,
            ..ExperimentConfig::new(Scheme::Scheme2, theta)
        },
        ExperimentConfig {
            realizations: 200,
            noise_axis: NoiseAxis::Transverse,
            ..ExperimentConfig::new(Scheme::Scheme2, theta)
        },
    ] {
        let r = run_ensemble(&config)?;
        println!(
            "{} noise: W = {:.4} ± {:.4}, oracle {:.4}",
            config.noise_axis,
            r.w,
            r.w_stderr,
            (-r.chi_oracle).exp()
        );
    }

    for k in 1..6 {
        let theta_a = k as f64 * PI / 12.0;
        match solve_theta_c_transverse(theta_a, kappa) {
            Ok(tc) => println!("theta_a {theta_a:.4}: transverse companion {tc:.6}"),
            Err(e) => println!("theta_a {theta_a:.4}: {e}"),
        }
    }
    Ok(())
}
