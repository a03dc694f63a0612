//! Companion cone angle that balances the static-offset response, exact
//! and in the adiabatic expansion, and how the gap closes with κ.

use std::f64::consts::PI;

use berrydd::schedule::{solve_theta_c_approx, solve_theta_c_exact};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for kappa in [6.0, 12.0, 24.0, 48.0] {
        println!("kappa = {kappa}");
        for k in 1..=6 {
            let theta_a = k as f64 * PI / 12.0;
            let exact = solve_theta_c_exact(theta_a, kappa)?;
            let approx = solve_theta_c_approx(theta_a, kappa)?;
            let residual = exact.cos() + exact.sin().powi(2) / kappa
                - (theta_a.cos() - theta_a.sin().powi(2) / kappa);
            println!("  theta_a {theta_a:.4}: exact {exact:.8}  approx {approx:.8}  gap {:.2e}  residual {residual:.1e}", (exact - approx).abs());
        }
    }
    Ok(())
}
