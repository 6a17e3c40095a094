//! Derivative verification: every force model's analytic Jacobian against
//! central finite differences, then the end-to-end parameter and
//! control-force gradients through a 10-step rollout.
//!
//! Run: cargo run --release --example gradient_check

use yarnsim::verify;

fn main() {
    let mut results = verify::force_model_battery(100, 20240809);
    results.extend(verify::check_end_to_end(10, 77));
    print!("{}", verify::render(&results));
    if verify::all_passed(&results) {
        println!("\nall checks passed");
    } else {
        println!("\nSOME CHECKS FAILED");
        std::process::exit(1);
    }
}
