//! The built-in trajectories: segments, durations, Berry phase difference
//! and the weights with which a slow field offset enters the phase.

use std::f64::consts::PI;

use berrydd::schedule::{dc_sum, Scheme, Scheme1Base};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (theta, kappa) = (5.0 * PI / 12.0, 12.0);
    let schemes = [
        Scheme::Fid { m: 2 },
        Scheme::SpinEcho,
        Scheme::Cpmg,
        Scheme::Scheme1(Scheme1Base::SpinEcho),
        Scheme::Scheme1(Scheme1Base::Cpmg),
        Scheme::Scheme2,
    ];
    for scheme in schemes {
        let s = scheme.build(theta, kappa)?;
        println!(
            "{scheme}: T = {:.3}, Berry phase difference {:.6}",
            s.total_duration(),
            s.expected_phase_difference()
        );
        for (seg, c) in s.segments().iter().zip(s.linear_coefficients()) {
            println!(
                "    theta {:.4}  winding {:>5}  sign {:+}  duration {:8.3}  weight {:+.5}",
                seg.theta,
                seg.winding.to_string(),
                seg.sign.value(),
                c.duration,
                c.weight
            );
        }
        println!(
            "    static-offset response {:+.3e}",
            dc_sum(&s.linear_coefficients())
        );
    }

    let s2 = Scheme::Scheme2.build(theta, kappa)?;
    let json = s2.to_json()?;
    println!("\nscheme2 as JSON:\n{json}");
    Ok(())
}
