//! Data efficiency: estimate parameters from noisy observations of the
//! first 5, 10 and 25 frames, then compare test errors against the clean
//! trajectory over a 50-frame horizon. More frames average the observation
//! noise down, so the learned parameters and the test MSE improve.
//!
//! Run: cargo run --release --example data_efficiency

use yarnsim::estimation::{estimate, evaluate_mse, generate_ground_truth, Scenario, TrainConfig};
use yarnsim::fabric::{FabricSpec, WovenPattern, YarnMaterial};
use yarnsim::params::{ModelConsts, Params};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let yarn1 = YarnMaterial { density: 0.002, stretch: 500_000.0, bend: 0.00014, radius: 0.001 };
    let yarn2 = YarnMaterial { density: 0.0025, stretch: 170_000.0, bend: 0.00011, radius: 0.001 };
    let spec = FabricSpec::hybrid(5, 5, WovenPattern::Plain, 0.01, yarn1, yarn2);
    let scenario = Scenario::hanging_wind(spec.clone(), 5.0, 50);
    let truth = Params::from_spec(&spec, 1000.0, 0.5);
    let consts = ModelConsts::default();
    let seed = 42;

    let clean = generate_ground_truth(&scenario, &truth, &consts)?;
    // observation noise: 1e-5 m, about 0.1% of the yarn spacing
    let noisy = clean.with_observation_noise(1e-5, seed);

    println!("{:>6} {:>14} {:>16}", "frames", "train loss", "test MSE (50f)");
    for frames in [5usize, 10, 25] {
        let cfg = TrainConfig { frames_used: frames, epochs: 70, seed, ..Default::default() };
        let result = estimate(&scenario, &noisy, &cfg, &truth, &consts)?;
        let test_mse = evaluate_mse(&scenario, &result.params, &clean, 50, &consts)?;
        println!(
            "{frames:>6} {:>14.4e} {:>16.4e}",
            result.loss_history.last().unwrap(),
            test_mse
        );
    }
    Ok(())
}
