//! Human-readable training reports and loss-history CSV.

use crate::params::{ParamKey, Params};
use std::fmt::Write as _;

/// Learned-parameter table: name, bounds, learned value, and (when the
/// truth is known) the relative error.
pub fn estimate_report(
    keys: &[ParamKey],
    learned: &Params,
    bounds: &crate::params::ParamBounds,
    truth: Option<&Params>,
) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:>12} {:>12} {:>14} {:>12}",
        "parameter", "lower", "upper", "learned", "rel-error"
    );
    for &key in keys {
        let (lo, hi) = bounds.range(key);
        let v = learned.get(key);
        let err = match truth {
            Some(t) => {
                let tv = t.get(key);
                if tv.abs() > 0.0 {
                    format!("{:.3}%", 100.0 * (v - tv).abs() / tv.abs())
                } else {
                    String::new()
                }
            }
            None => String::new(),
        };
        let _ = writeln!(
            out,
            "{:<14} {:>12.6e} {:>12.6e} {:>14.8e} {:>12}",
            key.label(),
            lo,
            hi,
            v,
            err
        );
    }
    out
}

pub fn loss_history_csv(history: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (i, l) in history.iter().enumerate() {
        let _ = writeln!(out, "{i},{l:.16e}");
    }
    out
}

/// Learned control forces: frame, corner, components.
pub fn control_forces_csv(forces: &crate::forces::control::ControlForces) -> String {
    let mut out = String::from("frame,corner,fx,fy,fz\n");
    for (f, frame) in forces.forces.iter().enumerate() {
        for (c, v) in frame.iter().enumerate() {
            let _ = writeln!(out, "{f},{c},{:.16e},{:.16e},{:.16e}", v.0[0], v.0[1], v.0[2]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamBounds;

    #[test]
    fn report_columns() {
        let keys = ParamKey::standard_set(2);
        let p = Params {
            densities: vec![0.002, 0.0025],
            stretches: vec![5e5, 1.7e5],
            bends: vec![1.4e-4, 1.1e-4],
            radii: vec![1e-3, 1e-3],
            shear_modulus: 1000.0,
            friction_mu: 0.5,
        };
        let with_truth = estimate_report(&keys, &p, &ParamBounds::default(), Some(&p));
        assert!(with_truth.contains("0.000%"));
        let without = estimate_report(&keys, &p, &ParamBounds::default(), None);
        for line in without.lines().skip(1) {
            assert!(!line.contains('%'));
        }
        assert_eq!(without.lines().count(), 9); // header + 8 parameters
    }

    #[test]
    fn loss_history_rows() {
        let csv = loss_history_csv(&[1.0, 0.5, 0.25]);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("epoch,loss"));
    }

    #[test]
    fn control_csv_has_sixty_values() {
        let csv = control_forces_csv(&crate::forces::control::ControlForces::zeros());
        assert_eq!(csv.lines().count(), 1 + 20); // header + 5 frames × 4 corners
    }
}
