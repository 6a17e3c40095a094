//! Stretch force: resists length changes of a segment.
//!
//! V = ½·Y·π·R²·Δu·(‖w‖−1)² with w = (x1−x0)/Δu. Local DoF order matches
//! the mass element: [x0, x1, u0, u1].

use crate::math::{Real, V3};

pub struct StretchOut<S> {
    pub energy: S,
    pub force: [S; 8],
    pub jq: [[S; 8]; 8],
}

/// `stiff` = Y·π·R², the effective axial stiffness.
pub fn stretch_kernel<S: Real>(x0: V3<S>, x1: V3<S>, u0: S, u1: S, stiff: S) -> StretchOut<S> {
    let du = u1 - u0;
    let seg = x1 - x0;
    let len = seg.norm();
    let inv_len = S::one() / len;
    let d01 = seg.scale(inv_len);
    let wn = len / du; // ‖w‖
    let strain = wn - S::one();

    let energy = stiff * du * strain * strain * S::from_f64(0.5);

    let mut force = [S::zero(); 8];
    let f1 = d01.scale(-(stiff * strain));
    for k in 0..3 {
        force[k] = -f1.0[k];
        force[k + 3] = f1.0[k];
    }
    // F_{u1} = ½·stiff·(‖w‖² − 1) = −F_{u0}
    let fu1 = stiff * (wn * wn - S::one()).scale(0.5);
    force[6] = -fu1;
    force[7] = fu1;

    let mut jq = [[S::zero(); 8]; 8];
    // ∂F_{x1}/∂x1 = stiff(P/len − I/Δu), P = I − d dᵀ
    let inv_du = S::one() / du;
    for i in 0..3 {
        for j in 0..3 {
            let p = if i == j { S::one() } else { S::zero() } - d01.0[i] * d01.0[j];
            let blk = stiff * (p * inv_len - if i == j { inv_du } else { S::zero() });
            jq[i + 3][j + 3] = blk;
            jq[i][j] = blk;
            jq[i][j + 3] = -blk;
            jq[i + 3][j] = -blk;
        }
    }
    // ∂F_{u1}/∂u1 = −stiff‖w‖²/Δu; opposite signs across the pair
    let juu = -(stiff * wn * wn * inv_du);
    jq[7][7] = juu;
    jq[6][6] = juu;
    jq[6][7] = -juu;
    jq[7][6] = -juu;
    // cross terms: ∂F_{x1}/∂u1 = ∂F_{u1}/∂x1ᵀ = stiff·(‖w‖/Δu)·d01
    let cross = stiff * wn * inv_du;
    for k in 0..3 {
        let c = cross * d01.0[k];
        jq[k + 3][7] = c;
        jq[k][6] = c;
        jq[k + 3][6] = -c;
        jq[k][7] = -c;
        jq[7][k + 3] = c;
        jq[6][k] = c;
        jq[6][k + 3] = -c;
        jq[7][k] = -c;
    }

    StretchOut { energy, force, jq }
}
