//! Inverse parameter estimation: recover two yarns' density, stretch and
//! bending moduli plus the shared shear modulus and friction coefficient
//! from 25 observed frames of a hanging cloth, starting from ±10% jitter.
//!
//! Run: cargo run --release --example parameter_recovery

use yarnsim::estimation::{estimate, generate_ground_truth, Scenario, TrainConfig};
use yarnsim::fabric::{FabricSpec, WovenPattern, YarnMaterial};
use yarnsim::params::{ModelConsts, Params};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let yarn1 = YarnMaterial { density: 0.002, stretch: 500_000.0, bend: 0.00014, radius: 0.001 };
    let yarn2 = YarnMaterial { density: 0.0025, stretch: 170_000.0, bend: 0.00011, radius: 0.001 };
    let spec = FabricSpec::hybrid(5, 5, WovenPattern::Plain, 0.01, yarn1, yarn2);
    let scenario = Scenario::hanging_wind(spec.clone(), 5.0, 30);
    let truth = Params::from_spec(&spec, 1000.0, 0.5);
    let consts = ModelConsts::default();

    println!("generating ground truth (hanging cloth, wind 5 m/s)...");
    let gt = generate_ground_truth(&scenario, &truth, &consts)?;

    let cfg = TrainConfig { frames_used: 25, epochs: 70, seed: 42, ..Default::default() };
    println!("training on the first {} frames, {} epochs...", cfg.frames_used, cfg.epochs);
    let t0 = std::time::Instant::now();
    let result = estimate(&scenario, &gt, &cfg, &truth, &consts)?;
    println!(
        "done in {:.1?}; loss {:.3e} -> {:.3e}\n",
        t0.elapsed(),
        result.loss_history.first().unwrap(),
        result.loss_history.last().unwrap()
    );

    println!("{:<14} {:>14} {:>14} {:>10}", "parameter", "learned", "truth", "rel err");
    for &key in &result.keys {
        let learned = result.params.get(key);
        let true_v = truth.get(key);
        println!(
            "{:<14} {:>14.6e} {:>14.6e} {:>9.3}%",
            key.label(),
            learned,
            true_v,
            100.0 * (learned - true_v).abs() / true_v
        );
    }
    println!("\n(the friction coefficient is structurally unidentifiable in this");
    println!("scenario: its influence on the trajectory sits ~18 orders of");
    println!("magnitude below the density's)");
    Ok(())
}
