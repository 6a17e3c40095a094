//! The slide-friction force over steady sliding velocity: smooth
//! static-to-kinetic transition instead of Coulomb's jump.
//!
//! For each velocity the anchor offset is iterated to its steady state
//! under the drag rule, and the driving force to its force balance; the
//! resulting curve passes through zero at rest, rises through the spring
//! regime, and settles on the kinetic plateau −μF_n − d_f·v.
//!
//! Run: cargo run --release --example friction_curve

use std::path::Path;
use yarnsim::forces::friction::{friction_kernel, updated_anchor, FrictionConsts};

fn steady_slide(v: f64, f_n: f64, mu: f64, fc: &FrictionConsts, h: f64) -> f64 {
    // fixed points of the per-step anchor drag and the force balance
    let mut delta = 0.0;
    let mut f_u = 0.0;
    for _ in 0..4000 {
        let coord = delta + v * h;
        delta = coord - updated_anchor(0.0, coord, mu, f_n, fc.k_f);
        let slide = friction_kernel(delta, v, f_n, f_u, mu, fc).force;
        f_u = -slide;
    }
    friction_kernel(delta, v, f_n, f_u, mu, fc).force
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fc = FrictionConsts { k_f: 1000.0, d_f: 1000.0, p: 1000.0 };
    let (f_n, mu, h) = (10.0, 0.5, 1e-3);
    let out_dir = Path::new("target/example-output");
    std::fs::create_dir_all(out_dir)?;
    let mut csv = String::from("v,f_slide\n");
    println!("{:>10} {:>14} {:>14}", "v (m/s)", "F_slide (N)", "kinetic ref");
    let mut vs = Vec::new();
    let mut v = -2.0;
    while v <= 2.0 {
        vs.push(v);
        v += 0.02;
    }
    for &v in &vs {
        let f = steady_slide(v, f_n, mu, &fc, h);
        csv.push_str(&format!("{v:.4},{f:.8e}\n"));
        if (v * 10.0).round() == v * 10.0 {
            let kinetic = -mu * f_n * v.signum() - fc.d_f * v;
            println!("{v:>10.2} {f:>14.5e} {kinetic:>14.5e}");
        }
    }
    std::fs::write(out_dir.join("friction_curve.csv"), csv)?;
    println!("\nfull curve: {}", out_dir.join("friction_curve.csv").display());
    Ok(())
}
