//! Generate one OU noise path at the figure parameters and check its
//! statistics against the model.

use std::f64::consts::PI;

use berrydd::noise::{NoiseModel, NoiseRealization};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let total_time = 4.0 * PI * 12.0;
    let model = NoiseModel::from_dimensionless(0.5, 200.0, total_time)?;
    let dt = 2.0 * PI / 10.0;
    let steps = 200_000;
    let path = NoiseRealization::for_realization(&model, dt, steps, 42, 0)?;
    let k = path.values();

    let var = k.iter().map(|x| x * x).sum::<f64>() / steps as f64;
    println!(
        "alpha = {:.4e}, gamma = {:.4e}, correlation time = {:.1} steps",
        model.alpha(),
        model.gamma(),
        1.0 / (model.gamma() * dt)
    );
    println!("sample variance {var:.4e} (model {:.4e})", model.alpha());
    for lag in [10usize, 100, 1000] {
        let r: f64 =
            k.iter().zip(&k[lag..]).map(|(a, b)| a * b).sum::<f64>() / (var * (steps - lag) as f64);
        println!(
            "lag {lag:5}: autocorrelation {r:.4}  model {:.4}",
            model.correlation(lag as f64 * dt) / model.alpha()
        );
    }

    let out = std::env::temp_dir().join("berrydd_noise_trace.csv");
    path.write_csv(std::fs::File::create(&out)?)?;
    println!("wrote {}", out.display());
    Ok(())
}
