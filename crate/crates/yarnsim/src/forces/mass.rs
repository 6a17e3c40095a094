//! Segment-wise general mass matrix, its derivatives, inertia forces and the
//! −Ṁq̇ term.
//!
//! Local DoF order for a segment: [x0 (0..3), x1 (3..6), u0 (6), u1 (7)].
//! The mass matrix factors as M = (ρ·Δu/6)·(S_C + D0(w) + E(wᵀw)) with
//! w = (x1−x0)/Δu, where S_C is the constant Lagrangian block, D0 collects
//! the blocks linear in w and E(s) the Eulerian scalar block. All analytic
//! derivatives below are combinations of the same three builders, which is
//! what keeps this file honest: each formula is verified against central
//! finite differences in the tests.

use crate::math::{Real, V3};

pub type M8<S> = [[S; 8]; 8];

#[inline]
pub fn m8_zero<S: Real>() -> M8<S> {
    [[S::zero(); 8]; 8]
}

#[inline]
pub fn m8_add_scaled<S: Real>(acc: &mut M8<S>, m: &M8<S>, k: S) {
    for i in 0..8 {
        for j in 0..8 {
            acc[i][j] += m[i][j] * k;
        }
    }
}

#[inline]
pub fn m8_matvec<S: Real>(m: &M8<S>, v: &[S; 8]) -> [S; 8] {
    let mut out = [S::zero(); 8];
    for i in 0..8 {
        let mut acc = S::zero();
        for j in 0..8 {
            acc += m[i][j] * v[j];
        }
        out[i] = acc;
    }
    out
}

/// Constant Lagrangian block: [[2I, I], [I, 2I]] in the x rows/cols.
fn sc_mat<S: Real>() -> M8<S> {
    let mut m = m8_zero();
    let one = S::one();
    let two = S::from_f64(2.0);
    for k in 0..3 {
        m[k][k] = two;
        m[k + 3][k + 3] = two;
        m[k][k + 3] = one;
        m[k + 3][k] = one;
    }
    m
}

/// Blocks linear in a direction vector: x–u coupling pattern.
fn d0_mat<S: Real>(dw: V3<S>) -> M8<S> {
    let mut m = m8_zero();
    for k in 0..3 {
        let d = dw.0[k];
        let d2 = d.scale(2.0);
        m[k][6] = -d2;
        m[k][7] = -d;
        m[k + 3][6] = -d;
        m[k + 3][7] = -d2;
        m[6][k] = -d2;
        m[7][k] = -d;
        m[6][k + 3] = -d;
        m[7][k + 3] = -d2;
    }
    m
}

/// Eulerian scalar block: [[2s, s], [s, 2s]].
fn e_mat<S: Real>(s: S) -> M8<S> {
    let mut m = m8_zero();
    m[6][6] = s.scale(2.0);
    m[6][7] = s;
    m[7][6] = s;
    m[7][7] = s.scale(2.0);
    m
}

/// S(w) = S_C + D0(w) + E(wᵀw); M = (ρΔu/6)·S(w).
fn shape<S: Real>(w: V3<S>) -> M8<S> {
    let mut m = sc_mat();
    m8_add_scaled(&mut m, &d0_mat(w), S::one());
    m8_add_scaled(&mut m, &e_mat(w.norm2()), S::one());
    m
}

/// Directional derivative S'(w)[dw] = D0(dw) + E(2·wᵀdw).
fn shape_dir<S: Real>(w: V3<S>, dw: V3<S>) -> M8<S> {
    let mut m = d0_mat(dw);
    m8_add_scaled(&mut m, &e_mat(w.dot(dw).scale(2.0)), S::one());
    m
}

/// Mass matrix of one segment.
pub fn segment_mass<S: Real>(x0: V3<S>, x1: V3<S>, du: S, rho: S) -> M8<S> {
    let w = (x1 - x0).scale(S::one() / du);
    let mut m = m8_zero();
    m8_add_scaled(&mut m, &shape(w), rho * du.scale(1.0 / 6.0));
    m
}

/// ∂M/∂(local q): three matrices per Lagrangian point plus the two Eulerian
/// derivatives. Satisfies ∂M/∂x0 = −∂M/∂x1 and ∂M/∂u0 = −∂M/∂u1 exactly.
pub struct MassDerivs<S> {
    pub d_x0: [M8<S>; 3],
    pub d_x1: [M8<S>; 3],
    pub d_u0: M8<S>,
    pub d_u1: M8<S>,
}

pub fn mass_spatial_derivatives<S: Real>(x0: V3<S>, x1: V3<S>, du: S, rho: S) -> MassDerivs<S> {
    let w = (x1 - x0).scale(S::one() / du);
    let sixth = rho.scale(1.0 / 6.0);
    let mut d_x0: [M8<S>; 3] = [m8_zero(), m8_zero(), m8_zero()];
    let mut d_x1: [M8<S>; 3] = [m8_zero(), m8_zero(), m8_zero()];
    for k in 0..3 {
        let mut e = V3::zero();
        e.0[k] = S::one();
        // ∂w/∂x1^k = e_k/Δu, times Δu from the prefactor leaves ρ/6
        let sd = shape_dir(w, e);
        m8_add_scaled(&mut d_x1[k], &sd, sixth);
        m8_add_scaled(&mut d_x0[k], &sd, -sixth);
    }
    // ∂M/∂u0 = (ρ/6)(−S(w) + S'(w)[w]); ∂M/∂u1 = −∂M/∂u0
    let mut d_u0 = m8_zero();
    m8_add_scaled(&mut d_u0, &shape(w), -sixth);
    m8_add_scaled(&mut d_u0, &shape_dir(w, w), sixth);
    let mut d_u1 = m8_zero();
    m8_add_scaled(&mut d_u1, &d_u0, -S::one());
    MassDerivs { d_x0, d_x1, d_u0, d_u1 }
}

/// Ṁ from the current velocities.
pub fn mass_time_derivative<S: Real>(
    x0: V3<S>,
    x1: V3<S>,
    du: S,
    v0: V3<S>,
    v1: V3<S>,
    ud0: S,
    ud1: S,
    rho: S,
) -> M8<S> {
    let inv = S::one() / du;
    let w = (x1 - x0).scale(inv);
    let dud = ud1 - ud0;
    let wdot = (v1 - v0).scale(inv) - w.scale(dud * inv);
    let mut m = m8_zero();
    m8_add_scaled(&mut m, &shape(w), rho * dud.scale(1.0 / 6.0));
    m8_add_scaled(&mut m, &shape_dir(w, wdot), rho * du.scale(1.0 / 6.0));
    m
}

/// Full per-segment output of the inertial element: mass matrix, the
/// generalized force ∂T/∂q − Ṁq̇, both Jacobians, and the kinetic energy.
pub struct SegInertiaOut<S> {
    pub mass: M8<S>,
    pub force: [S; 8],
    pub jq: M8<S>,
    pub jv: M8<S>,
    pub kinetic: S,
}

pub fn seg_inertia_kernel<S: Real>(
    x0: V3<S>,
    x1: V3<S>,
    u0: S,
    u1: S,
    v0: V3<S>,
    v1: V3<S>,
    ud0: S,
    ud1: S,
    rho: S,
) -> SegInertiaOut<S> {
    let du = u1 - u0;
    let inv = S::one() / du;
    let w = (x1 - x0).scale(inv);
    let wn2 = w.norm2();
    let qdot = [v0.0[0], v0.0[1], v0.0[2], v1.0[0], v1.0[1], v1.0[2], ud0, ud1];

    // kinetic-energy coefficients: T = (ρΔu/12)(c0 + c1·w + c2·wᵀw)
    let c0 = (v0.norm2() + v0.dot(v1) + v1.norm2()).scale(2.0);
    let c1 = (v0.scale(ud0.scale(2.0) + ud1) + v1.scale(ud0 + ud1.scale(2.0))).scalef(-2.0);
    let c2 = (ud0 * ud0 + ud0 * ud1 + ud1 * ud1).scale(2.0);
    let t_scalar = c0 + c1.dot(w) + c2 * wn2;
    let kinetic = rho * du * t_scalar.scale(1.0 / 12.0);
    let g = c1 + w.scale(c2.scale(2.0));

    let r12 = rho.scale(1.0 / 12.0);
    let r6 = rho.scale(1.0 / 6.0);

    // inertia force ∂T/∂q
    let mut force = [S::zero(); 8];
    for k in 0..3 {
        force[k] = -r12 * g.0[k];
        force[k + 3] = r12 * g.0[k];
    }
    let fu0 = r12 * (c2 * wn2 - c0);
    force[6] = fu0;
    force[7] = -fu0;

    // ∂(∂T/∂q)/∂q
    let mut jq = m8_zero();
    {
        let c2_over = r6 * c2 * inv; // ρ c2 / (6Δu)
        for k in 0..3 {
            jq[k][k] += c2_over;
            jq[k][k + 3] -= c2_over;
            jq[k + 3][k] -= c2_over;
            jq[k + 3][k + 3] += c2_over;
        }
        for k in 0..3 {
            let cw = c2_over * w.0[k];
            jq[k][6] -= cw;
            jq[k][7] += cw;
            jq[k + 3][6] += cw;
            jq[k + 3][7] -= cw;
            jq[6][k] -= cw;
            jq[6][k + 3] += cw;
            jq[7][k] += cw;
            jq[7][k + 3] -= cw;
        }
        let cww = c2_over * wn2;
        jq[6][6] += cww;
        jq[6][7] -= cww;
        jq[7][6] -= cww;
        jq[7][7] += cww;
    }

    // ∂(∂T/∂q)/∂q̇
    let mut jv = m8_zero();
    {
        let two = S::from_f64(2.0);
        // dc1/db0 = −2(2a0 + a1), dc1/db1 = −2(a0 + 2a1)
        let dc1_db0 = (v0.scale(two) + v1).scalef(-2.0);
        let dc1_db1 = (v0 + v1.scale(two)).scalef(-2.0);
        let dc2_db0 = (ud0.scale(2.0) + ud1).scale(2.0);
        let dc2_db1 = (ud0 + ud1.scale(2.0)).scale(2.0);
        // F_x0 = −(ρ/12)(c1 + 2 c2 w)
        for k in 0..3 {
            // wrt v0, v1 (diagonal blocks from dc1/da)
            let da0 = (ud0.scale(2.0) + ud1).scale(2.0); // −dc1/da0 coefficient on I
            let da1 = (ud0 + ud1.scale(2.0)).scale(2.0);
            jv[k][k] += r12 * da0;
            jv[k][k + 3] += r12 * da1;
            jv[k + 3][k] -= r12 * da0;
            jv[k + 3][k + 3] -= r12 * da1;
            // wrt u̇0, u̇1
            let d_b0 = -r12 * (dc1_db0.0[k] + two * dc2_db0 * w.0[k]);
            let d_b1 = -r12 * (dc1_db1.0[k] + two * dc2_db1 * w.0[k]);
            jv[k][6] += d_b0;
            jv[k][7] += d_b1;
            jv[k + 3][6] -= d_b0;
            jv[k + 3][7] -= d_b1;
        }
        // F_u0 = (ρ/12)(c2 wᵀw − c0)
        let dc0_da0 = v0.scalef(4.0) + v1.scalef(2.0);
        let dc0_da1 = v0.scalef(2.0) + v1.scalef(4.0);
        for k in 0..3 {
            jv[6][k] -= r12 * dc0_da0.0[k];
            jv[6][k + 3] -= r12 * dc0_da1.0[k];
            jv[7][k] += r12 * dc0_da0.0[k];
            jv[7][k + 3] += r12 * dc0_da1.0[k];
        }
        jv[6][6] += r12 * wn2 * dc2_db0;
        jv[6][7] += r12 * wn2 * dc2_db1;
        jv[7][6] -= r12 * wn2 * dc2_db0;
        jv[7][7] -= r12 * wn2 * dc2_db1;
    }

    // −Ṁq̇ and its derivatives
    let dud = ud1 - ud0;
    let wdot = (v1 - v0).scale(inv) - w.scale(dud * inv);
    let mdot = mass_time_derivative(x0, x1, du, v0, v1, ud0, ud1, rho);
    let mdot_qdot = m8_matvec(&mdot, &qdot);
    for i in 0..8 {
        force[i] -= mdot_qdot[i];
    }

    // spatial derivatives of Ṁ, contracted with q̇
    {
        // generic direction: s_a = ∂Δu/∂a, w_a = ∂w/∂a, wdot_a = ∂ẇ/∂a
        let mut add_dir = |col: usize, s_a: S, w_a: V3<S>, wdot_a: V3<S>| {
            let mut dm = m8_zero();
            m8_add_scaled(&mut dm, &shape_dir(w, w_a), r6 * dud);
            if s_a.value() != 0.0 {
                let mut tmp = m8_zero();
                m8_add_scaled(&mut tmp, &shape_dir(w, wdot), r6 * s_a);
                m8_add_scaled(&mut dm, &tmp, S::one());
            }
            // ∂[S'(w)[ẇ]]/∂a = D0(ẇ_a) + E(2 w_a·ẇ + 2 w·ẇ_a)
            let mut inner = d0_mat(wdot_a);
            m8_add_scaled(
                &mut inner,
                &e_mat((w_a.dot(wdot) + w.dot(wdot_a)).scale(2.0)),
                S::one(),
            );
            m8_add_scaled(&mut dm, &inner, r6 * du);
            let col_vec = m8_matvec(&dm, &qdot);
            for i in 0..8 {
                jq[i][col] -= col_vec[i];
            }
        };
        let inv2 = inv * inv;
        for k in 0..3 {
            let mut e = V3::zero();
            e.0[k] = S::one();
            add_dir(k, S::zero(), e.scale(-inv), e.scale(dud * inv2));
            add_dir(k + 3, S::zero(), e.scale(inv), e.scale(-dud * inv2));
        }
        let wdot_u0 = (v1 - v0).scale(inv2) - w.scale(dud.scale(2.0) * inv2);
        add_dir(6, -S::one(), w.scale(inv), wdot_u0);
        add_dir(7, S::one(), w.scale(-inv), -wdot_u0);
    }

    // velocity derivatives of Ṁq̇: (∂Ṁ/∂q̇_b)q̇ + Ṁ e_b
    {
        for b in 0..8 {
            let dmdot: M8<S> = match b {
                0..=5 => {
                    let k = b % 3;
                    let mut e = V3::zero();
                    e.0[k] = S::one();
                    let sign = if b < 3 { -S::one() } else { S::one() };
                    let mut m = m8_zero();
                    m8_add_scaled(&mut m, &shape_dir(w, e), r6 * sign);
                    m
                }
                6 => {
                    let mut m = m8_zero();
                    m8_add_scaled(&mut m, &shape(w), -r6);
                    m8_add_scaled(&mut m, &shape_dir(w, w), r6);
                    m
                }
                _ => {
                    let mut m = m8_zero();
                    m8_add_scaled(&mut m, &shape(w), r6);
                    m8_add_scaled(&mut m, &shape_dir(w, w), -r6);
                    m
                }
            };
            let col_vec = m8_matvec(&dmdot, &qdot);
            for i in 0..8 {
                jv[i][b] -= col_vec[i] + mdot[i][b];
            }
        }
    }

    let mass = segment_mass(x0, x1, du, rho);
    SegInertiaOut { mass, force, jq, jv, kinetic }
}
