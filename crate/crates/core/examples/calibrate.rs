//! Brute calibration run for the training-sanity thresholds.
//!
//! `cargo run --release --example calibrate -- <qnn|mlp> <adam|gd> <lr> [seed]`
//!
//! Trains on 2000 synthetic rows (70/10/20 split, 40 epochs of 20 batches of
//! 100) and prints the smoothed train MSE of the first ten epochs and the
//! final test metrics.

use cloudqnn::baselines::{Activation, MlpConfig};
use cloudqnn::data::{split, synthesize_dataset, FeatureScaling};
use cloudqnn::qnn::CircuitConfig;
use cloudqnn::training::{evaluate, trailing_mean, train, Optimizer, TrainConfig};
use cloudqnn::ModelSpec;

fn main() -> cloudqnn::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    if args.len() < 4 {
        eprintln!("usage: calibrate <qnn|mlp> <adam|gd> <lr> [seed]");
        std::process::exit(1);
    }
    let optimizer: Optimizer = args[2].parse()?;
    let learning_rate: f64 = args[3].parse().expect("learning rate");
    let seed: u64 = args.get(4).map_or(1, |s| s.parse().expect("seed"));

    let data = synthesize_dataset(2000, seed, 0.05)?;
    let (train_raw, val_raw, test_raw) = split(&data, [0.7, 0.1, 0.2], seed)?;
    let scaling = FeatureScaling::fit(&train_raw, 0.0, std::f64::consts::PI)?;
    let train_set = scaling.transform(&train_raw)?;
    let val_set = scaling.transform(&val_raw)?;
    let test_set = scaling.transform(&test_raw)?;

    let spec = match args[1].as_str() {
        "qnn" => ModelSpec::Qnn(CircuitConfig::new(8, 5, 3)?),
        _ => ModelSpec::Mlp(MlpConfig {
            n_inputs: 8,
            activation: Activation::LeakyRelu,
        }),
    };
    let config = TrainConfig {
        epochs: 40,
        batches_per_epoch: 20,
        batch_size: 100,
        learning_rate,
        optimizer,
        seed,
        ..Default::default()
    };
    let started = std::time::Instant::now();
    let (model, history) = train(&spec, &config, &train_set, Some(&val_set))?;
    let mse = history.train_mse();
    let smoothed = trailing_mean(&mse, 3);
    let head: Vec<String> = smoothed[..10].iter().map(|v| format!("{v:.5}")).collect();
    println!("smoothed train mse, epochs 1-10: {}", head.join(" "));
    println!(
        "strictly decreasing: {}",
        smoothed[..10].windows(2).all(|w| w[1] < w[0])
    );
    let test = evaluate(&model, &test_set, None, 0)?;
    println!(
        "final train mse {:.5}, test mse {:.5}, test r2 {:.4}, {:.1}s",
        mse[mse.len() - 1],
        test.mse,
        test.r2.unwrap_or(f64::NAN),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}
