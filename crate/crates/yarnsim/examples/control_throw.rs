//! Control learning: gradient descent over corner forces (applied during
//! the first five frames) that slide a cloth across a frictionless table
//! toward a target point. The loss is the final distance between the
//! cloth's center of mass and the target.
//!
//! Run: cargo run --release --example control_throw

use yarnsim::estimation::{learn_control, Scenario};
use yarnsim::fabric::{build_fabric, FabricSpec, WovenPattern, YarnMaterial};
use yarnsim::math::V3;
use yarnsim::params::{ModelConsts, Params};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let yarn1 = YarnMaterial { density: 0.002, stretch: 500_000.0, bend: 0.00014, radius: 0.001 };
    let yarn2 = YarnMaterial { density: 0.0025, stretch: 170_000.0, bend: 0.00011, radius: 0.001 };
    let spec = FabricSpec::hybrid(5, 5, WovenPattern::Plain, 0.01, yarn1, yarn2);
    let (fab, st) = build_fabric(&spec)?;
    let com0 = fab.center_of_mass(&st.q);
    let target = V3([com0.0[0] + 0.06, com0.0[1] + 0.02, com0.0[2]]);
    let scenario = Scenario::throw_to_box(spec.clone(), target, 60);
    let params = Params::from_spec(&spec, 1000.0, 0.5);

    let t0 = std::time::Instant::now();
    let result = learn_control(&scenario, 30, 0.5, &ModelConsts::default(), &params)?;
    println!("learned in {:.1?}", t0.elapsed());
    for (epoch, loss) in result.loss_history.iter().enumerate() {
        if epoch % 5 == 0 || epoch + 1 == result.loss_history.len() {
            println!("epoch {epoch:>3}: distance to target {loss:.4e} m");
        }
    }
    let first = result.loss_history.first().unwrap();
    let last = result.loss_history.last().unwrap();
    println!("\nreduction: {:.2}%", 100.0 * (1.0 - last / first));
    println!("learned corner forces (frame 0):");
    for (c, f) in result.forces.forces[0].iter().enumerate() {
        println!("  corner {c}: ({:+.3e}, {:+.3e}, {:+.3e}) N", f.0[0], f.0[1], f.0[2]);
    }
    Ok(())
}
