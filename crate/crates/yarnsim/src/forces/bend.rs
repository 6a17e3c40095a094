//! Bending of two adjacent segments on one yarn.
//!
//! θ is the deviation from straight: θ = arccos(−d01ᵀd02) where d01 points
//! from the shared node to the next node and d02 from the shared node to the
//! previous one. A straight yarn has d01 = −d02, θ = 0 and zero energy
//! V = B·π·R²·θ²/(u_next − u_prev). All quotients with sinθ are evaluated
//! through series-guarded helpers so an exactly straight yarn is regular.
//!
//! Local DoF order: [x_prev (0..3), x_mid (3..6), x_next (6..9), u_prev (9),
//! u_next (10)].

use super::angle::angle_geometry;
use crate::math::{acos_ratio, one_minus_theta_cot_over_sin2, Real, V3};

pub const BEND_N: usize = 11;

pub struct BendOut<S> {
    pub energy: S,
    pub force: [S; BEND_N],
    pub jq: [[S; BEND_N]; BEND_N],
}

/// `bend_c` = B·π·R².
pub fn bend_kernel<S: Real>(
    x_prev: V3<S>,
    x_mid: V3<S>,
    x_next: V3<S>,
    u_prev: S,
    u_next: S,
    bend_c: S,
) -> BendOut<S> {
    let span = u_next - u_prev;
    let inv_span = S::one() / span;
    // arm a = next (paper's q1), arm b = prev (paper's q2)
    let geom = angle_geometry(x_mid, x_next, x_prev);
    let t = -geom.c; // cosθ
    let theta = {
        // clamped acos; the series-guarded ratios below avoid 1/sinθ
        let tc = if t.value() > 1.0 { S::one() } else { t };
        tc.acos()
    };
    let theta2 = theta * theta;
    let ratio = acos_ratio(t); // θ/sinθ
    let k1 = one_minus_theta_cot_over_sin2(t); // (1−θcotθ)/sin²θ

    let energy = bend_c * theta2 * inv_span;

    // local point slots: geometry order [arm_a = next, arm_b = prev, apex = mid]
    // maps to local offsets [6, 0, 3]
    let offs = [6usize, 0, 3];

    // ∇θ·θ = ratio·∇c since ∇θ = ∇c/sinθ for θ = arccos(−c)
    let coeff_f = bend_c.scale(2.0) * inv_span * ratio;
    let mut force = [S::zero(); BEND_N];
    for (slot, &off) in offs.iter().enumerate() {
        let f = geom.grad[slot].scale(-coeff_f);
        for k in 0..3 {
            force[off + k] = f.0[k];
        }
    }
    // Eulerian forces: F_{u_next} = +C·θ²/span², F_{u_prev} = −.
    let fu = bend_c * theta2 * inv_span * inv_span;
    force[10] = fu;
    force[9] = -fu;

    let mut jq = [[S::zero(); BEND_N]; BEND_N];
    // Lagrangian block: −(2C/span)·(k1·∇c∇cᵀ + ratio·∇²c)
    let coeff_j = bend_c.scale(2.0) * inv_span;
    for (sp, &op) in offs.iter().enumerate() {
        for (sq, &oq) in offs.iter().enumerate() {
            for i in 0..3 {
                for j in 0..3 {
                    let v = k1 * geom.grad[sp].0[i] * geom.grad[sq].0[j]
                        + ratio * geom.hess[sp][sq][i][j];
                    jq[op + i][oq + j] = -(coeff_j * v);
                }
            }
        }
    }
    // cross terms: ∂F_x/∂u_next = +(2C/span²)·ratio·∇c ; ∂F_x/∂u_prev = −
    let coeff_c = bend_c.scale(2.0) * inv_span * inv_span * ratio;
    for (slot, &off) in offs.iter().enumerate() {
        for k in 0..3 {
            let v = coeff_c * geom.grad[slot].0[k];
            jq[off + k][10] = v;
            jq[off + k][9] = -v;
            jq[10][off + k] = v;
            jq[9][off + k] = -v;
        }
    }
    // Eulerian block: ∂F_{u_next}/∂u_next = −2Cθ²/span³
    let juu = bend_c.scale(2.0) * theta2 * inv_span * inv_span * inv_span;
    jq[10][10] = -juu;
    jq[10][9] = juu;
    jq[9][10] = juu;
    jq[9][9] = -juu;

    BendOut { energy, force, jq }
}

/// Bend force exerted on the shared (apex) node only; used when composing
/// the contact normal force at a crossing.
pub fn bend_force_at_mid<S: Real>(
    x_prev: V3<S>,
    x_mid: V3<S>,
    x_next: V3<S>,
    u_prev: S,
    u_next: S,
    bend_c: S,
) -> V3<S> {
    let span = u_next - u_prev;
    let geom = angle_geometry(x_mid, x_next, x_prev);
    let ratio = acos_ratio(-geom.c);
    let coeff = bend_c.scale(2.0) / span * ratio;
    geom.grad[2].scale(-coeff)
}
