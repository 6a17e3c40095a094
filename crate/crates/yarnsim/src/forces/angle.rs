//! Gradient and Hessian of the direction cosine between two segments that
//! share an apex point. Bend and shear both reduce to scalar functions of
//! this angle; everything here is smooth in the node positions, so the same
//! code serves f64 forward evaluation and dual-number adjoint sweeps.

use crate::math::{Real, V3};

/// c = d_a·d_b with d_a = (arm_a − apex)/‖·‖, plus first and second
/// derivatives with respect to (arm_a, arm_b, apex).
pub struct AngleGeom<S> {
    pub c: S,
    pub len_a: S,
    pub len_b: S,
    pub d_a: V3<S>,
    pub d_b: V3<S>,
    /// ∇c in the order [arm_a, arm_b, apex]
    pub grad: [V3<S>; 3],
    /// Hessian blocks hess[p][q][i][j] = ∂²c/∂(point_q)_j ∂(point_p)_i
    pub hess: [[[[S; 3]; 3]; 3]; 3],
}

pub fn angle_geometry<S: Real>(apex: V3<S>, arm_a: V3<S>, arm_b: V3<S>) -> AngleGeom<S> {
    let ua = arm_a - apex;
    let ub = arm_b - apex;
    let la = ua.norm();
    let lb = ub.norm();
    let da = ua.scale(S::one() / la);
    let db = ub.scale(S::one() / lb);
    let c = da.dot(db);

    // projected arms: P_a d_b = d_b − c·d_a
    let pa_db = db - da.scale(c);
    let pb_da = da - db.scale(c);
    let ga = pa_db.scale(S::one() / la);
    let gb = pb_da.scale(S::one() / lb);
    let g0 = -(ga + gb);

    let inv_la2 = S::one() / (la * la);
    let inv_lb2 = S::one() / (lb * lb);
    let inv_lalb = S::one() / (la * lb);

    let mut hess = [[[[S::zero(); 3]; 3]; 3]; 3];
    let mut h_aa = [[S::zero(); 3]; 3];
    let mut h_bb = [[S::zero(); 3]; 3];
    let mut h_ab = [[S::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { S::one() } else { S::zero() };
            let pa_ij = delta - da.0[i] * da.0[j];
            let pb_ij = delta - db.0[i] * db.0[j];
            h_aa[i][j] = -(da.0[i] * pa_db.0[j] + pa_db.0[i] * da.0[j] + c * pa_ij) * inv_la2;
            h_bb[i][j] = -(db.0[i] * pb_da.0[j] + pb_da.0[i] * db.0[j] + c * pb_ij) * inv_lb2;
            // (P_a P_b)_ij
            let mut acc = S::zero();
            for k in 0..3 {
                let pa_ik = if i == k { S::one() } else { S::zero() } - da.0[i] * da.0[k];
                let pb_kj = if k == j { S::one() } else { S::zero() } - db.0[k] * db.0[j];
                acc += pa_ik * pb_kj;
            }
            h_ab[i][j] = acc * inv_lalb;
        }
    }
    // indices: 0 = arm_a, 1 = arm_b, 2 = apex
    for i in 0..3 {
        for j in 0..3 {
            hess[0][0][i][j] = h_aa[i][j];
            hess[1][1][i][j] = h_bb[i][j];
            hess[0][1][i][j] = h_ab[i][j];
            hess[1][0][i][j] = h_ab[j][i];
            hess[0][2][i][j] = -(h_aa[i][j] + h_ab[i][j]);
            hess[1][2][i][j] = -(h_ab[j][i] + h_bb[i][j]);
            hess[2][0][i][j] = -(h_aa[i][j] + h_ab[j][i]);
            hess[2][1][i][j] = -(h_ab[i][j] + h_bb[i][j]);
            hess[2][2][i][j] =
                h_aa[i][j] + h_ab[i][j] + h_ab[j][i] + h_bb[i][j];
        }
    }

    AngleGeom { c, len_a: la, len_b: lb, d_a: da, d_b: db, grad: [ga, gb, g0], hess }
}
