//! Segment-wise gravity with g = (0, 0, −9.8) and V = −ρ·Δu·gᵀ(x0+x1)/2,
//! so potential energy grows with height and the cloth sags. The Eulerian
//! components move mass between segments as material slides.

use crate::math::{Real, V3};

pub struct GravityOut<S> {
    pub energy: S,
    pub force: [S; 8],
    pub jq: [[S; 8]; 8],
}

pub fn gravity_kernel<S: Real>(x0: V3<S>, x1: V3<S>, u0: S, u1: S, rho: S, g: V3<S>) -> GravityOut<S> {
    let du = u1 - u0;
    let gx = g.dot(x0 + x1);
    let half = S::from_f64(0.5);
    let energy = -(rho * du * gx * half);

    let mut force = [S::zero(); 8];
    let fl = g.scale(rho * du * half);
    for k in 0..3 {
        force[k] = fl.0[k];
        force[k + 3] = fl.0[k];
    }
    let fu = rho * gx * half;
    force[6] = -fu;
    force[7] = fu;

    // bilinear energy: constant cross Jacobians, exact
    let mut jq = [[S::zero(); 8]; 8];
    for k in 0..3 {
        let c = rho * g.0[k] * half;
        jq[k][6] = -c;
        jq[k][7] = c;
        jq[k + 3][6] = -c;
        jq[k + 3][7] = c;
        jq[6][k] = -c;
        jq[6][k + 3] = -c;
        jq[7][k] = c;
        jq[7][k + 3] = c;
    }
    GravityOut { energy, force, jq }
}
