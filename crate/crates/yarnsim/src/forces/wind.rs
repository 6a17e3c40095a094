//! Area-based wind drag on cloth triangles.
//!
//! F_w = a·(ρ_w·|v_n|·v_n·n_f + d_w·v_t) with v_n = n_f·(v_w − v̄) and
//! v_t = (v_w − v̄) − v_n·n_f the tangential part of the relative velocity;
//! v̄ is the mean velocity of the triangle's nodes and the force is shared
//! equally among them. Both terms scale with the face area so the total
//! wind load is independent of the triangulation resolution. Face geometry
//! (normal, area) is frozen within a step, so only a velocity Jacobian is
//! assembled.
//!
//! Local DoF order: velocities of the three nodes, [v0, v1, v2].

use crate::math::{Real, V3};

pub struct WindOut<S> {
    pub force: [S; 9],
    pub jv: [[S; 9]; 9],
}

#[derive(Clone, Copy, Debug)]
pub struct WindParams {
    pub velocity: crate::math::Vec3,
    pub density: f64,
    pub drag: f64,
}

pub fn wind_kernel<S: Real>(
    x0: V3<S>,
    x1: V3<S>,
    x2: V3<S>,
    v0: V3<S>,
    v1: V3<S>,
    v2: V3<S>,
    wp: &WindParams,
) -> WindOut<S> {
    let cross = (x1 - x0).cross(x2 - x0);
    let cn = cross.norm();
    let area = cn.scale(0.5);
    let n = cross.scale(S::one() / cn);
    let third = S::from_f64(1.0 / 3.0);
    let vbar = (v0 + v1 + v2).scale(third);
    let vrel = V3::from_f64(wp.velocity.0) - vbar;
    let vn = n.dot(vrel);
    let vt = vrel - n.scale(vn);
    let fw = n.scale(vn.abs() * vn * area.scale(wp.density)) + vt.scale(area.scale(wp.drag));

    let mut force = [S::zero(); 9];
    for node in 0..3 {
        for k in 0..3 {
            force[3 * node + k] = fw.0[k] * third;
        }
    }

    // ∂F_w/∂v̄ = −a·(2·ρ_w·|v_n|·n nᵀ + d_w·(I − n nᵀ)); each node pair
    // picks up 1/9 of it.
    let mut jv = [[S::zero(); 9]; 9];
    let c_n = area.scale(-2.0 * wp.density) * vn.abs();
    for i in 0..3 {
        for j in 0..3 {
            let nn = n.0[i] * n.0[j];
            let delta = if i == j { S::one() } else { S::zero() };
            let blk = (c_n * nn - ((delta - nn) * area).scale(wp.drag)).scale(1.0 / 9.0);
            for a in 0..3 {
                for b in 0..3 {
                    jv[3 * a + i][3 * b + j] = blk;
                }
            }
        }
    }
    WindOut { force, jv }
}
