//! Filter functions of FID, spin echo and two-pulse CPMG, and χ computed
//! in the frequency and time domains.

use berrydd::analytics::filter::{chi_closed, chi_spectral, filter_over_z2, Sequence};
use berrydd::noise::NoiseModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>6} {:>10} {:>10} {:>10}", "z", "fid", "se", "cpmg2");
    for i in 0..=12 {
        let z = 0.01 + 5.0 * i as f64;
        print!("{z:6.2}");
        for seq in Sequence::ALL {
            print!(" {:10.5}", filter_over_z2(seq, z));
        }
        println!();
    }

    // Where each F(z)/z² peaks beyond its low-frequency plateau.
    for seq in Sequence::ALL {
        let (mut best, mut at) = (0.0, 0.0);
        for i in 1..200_000 {
            let z = i as f64 * 1e-4;
            let v = filter_over_z2(seq, z) * z * z;
            if v > best {
                best = v;
                at = z;
            }
        }
        println!("{seq}: first F(z) maximum {best:.3} at z = {at:.4}");
    }

    println!("\n{:>8} {:>14} {:>14} {:>14}", "beta", "fid", "se", "cpmg2");
    for beta in [1e-3, 1e-2, 0.1, 1.0, 10.0] {
        let noise = NoiseModel::new(1.0, beta)?;
        print!("{beta:8.0e}");
        for seq in Sequence::ALL {
            let closed = chi_closed(seq, &noise, 1.0);
            let spectral = chi_spectral(seq, &noise, 1.0)?;
            assert!((closed - spectral).abs() < 1e-6 * closed);
            print!(" {:14.6e}", closed);
        }
        println!();
    }
    Ok(())
}
