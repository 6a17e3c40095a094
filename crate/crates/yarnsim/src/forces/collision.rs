//! Yarn-to-yarn collision penalty between parallel yarns: keeps the Eulerian
//! gap of a segment above the contact distance d (2R or 4R depending on the
//! local weave sense). V = ½·k_c·L·ReLU(d − Δu)².

use crate::math::Real;

pub struct CollisionOut<S> {
    pub energy: S,
    /// forces on (u0, u1)
    pub force: [S; 2],
    /// Jacobian over (u0, u1)
    pub jq: [[S; 2]; 2],
}

pub fn collision_kernel<S: Real>(u0: S, u1: S, kc_l: S, d: S) -> CollisionOut<S> {
    let du = u1 - u0;
    let gap = d - du;
    if gap.value() <= 0.0 {
        return CollisionOut {
            energy: S::zero(),
            force: [S::zero(); 2],
            jq: [[S::zero(); 2]; 2],
        };
    }
    let energy = kc_l * gap * gap * S::from_f64(0.5);
    // F_{u0} = k_c·L·(Δu − d) < 0 here: pushes the pair apart
    let f0 = kc_l * (du - d);
    let k = kc_l;
    CollisionOut {
        energy,
        force: [f0, -f0],
        jq: [[-k, k], [k, -k]],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inactive_outside_contact_distance() {
        // Δu = L = 0.01 > d = 0.004
        let out = collision_kernel(0.0, 0.01, 1.0 * 0.01, 0.004);
        assert_eq!(out.energy, 0.0);
        assert_eq!(out.force, [0.0, 0.0]);
    }

    #[test]
    fn half_distance_penalty() {
        // Δu = d/2: V = ½·k_c·L·(d/2)², forces push u0, u1 apart
        let kc_l = 1.0 * 0.01;
        let d = 0.004;
        let out = collision_kernel(0.0, d / 2.0, kc_l, d);
        assert!((out.energy - 0.5 * kc_l * (d / 2.0) * (d / 2.0)).abs() < 1e-18);
        assert!(out.force[0] < 0.0); // u0 pushed down
        assert!(out.force[1] > 0.0); // u1 pushed up
    }

    #[test]
    fn jacobian_is_piecewise_constant() {
        let kc_l = 0.01;
        let d = 0.004;
        // inside the active region the Jacobian equals −k_c·L exactly
        let out = collision_kernel(0.0, 0.002, kc_l, d);
        assert_eq!(out.jq[0][0], -kc_l);
        assert_eq!(out.jq[1][1], -kc_l);
        assert_eq!(out.jq[0][1], kc_l);
        // finite difference away from the kink is exact (linear force)
        let h = 1e-7;
        let fp = collision_kernel(0.0, 0.002 + h, kc_l, d).force[0];
        let fm = collision_kernel(0.0, 0.002 - h, kc_l, d).force[0];
        let fd = (fp - fm) / (2.0 * h);
        assert!((fd - out.jq[0][1]).abs() < 1e-9);
    }

    #[test]
    fn force_is_negative_energy_gradient() {
        let kc_l = 0.01;
        let d = 0.004;
        let h = 1e-8;
        for &u1 in &[0.001, 0.0025, 0.0035] {
            let fd = -(collision_kernel(0.0, u1 + h, kc_l, d).energy
                - collision_kernel(0.0, u1 - h, kc_l, d).energy)
                / (2.0 * h);
            let f = collision_kernel(0.0, u1, kc_l, d).force[1];
            assert!((fd - f).abs() < 1e-8 * f.abs().max(1e-9));
        }
    }
}
