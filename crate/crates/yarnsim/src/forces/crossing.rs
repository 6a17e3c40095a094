//! Per-crossing interaction element: contact normal force, shear with lock
//! on all four segment-pair quadrants, and slide friction on both Eulerian
//! axes.
//!
//! The contact force F_n = ReLU(½·nᵀ(F_s^u + F_b^u − F_s^v − F_b^v)) is an
//! internal quantity: the stretch/bend forces it is built from are local
//! recomputations used only as inputs here (the global assembly adds those
//! forces through their own elements). The assembled Jacobian freezes F_n
//! and the friction drive force F_u; the adjoint re-evaluates this kernel
//! with dual numbers, which restores their full state dependence exactly.
//!
//! Local DoF order (21): [x0, x_wp, x_wn, x_vp, x_vn (3 each),
//! u0, v0, u_wp, u_wn, v_vp, v_vn].

use super::bend::bend_force_at_mid;
use super::collision::collision_kernel;
use super::friction::{friction_kernel, FrictionConsts};
use super::normal::{plane_normal, NormalPrep};
use super::shear::{shear_kernel, ShearAngleError, ShearConsts};
use super::stretch::stretch_kernel;
use crate::math::{Real, V3};

pub const CROSS_N: usize = 21;

/// Generic inputs; the scalar type carries dual seeds in the adjoint.
pub struct CrossingInputs<S> {
    /// [node, warp_prev, warp_next, weft_prev, weft_next]
    pub x: [V3<S>; 5],
    pub u0: S,
    pub v0: S,
    pub u_wp: S,
    pub u_wn: S,
    pub v_vp: S,
    pub v_vn: S,
    pub udot0: S,
    pub vdot0: S,
    /// friction anchor positions (differentiated: the anchor-drag update
    /// feeds back into later steps)
    pub anchor_u: S,
    pub anchor_v: S,
    pub y_warp: S,
    pub b_warp: S,
    pub rho_warp: S,
    pub y_weft: S,
    pub b_weft: S,
    pub rho_weft: S,
    pub shear_s: S,
    pub mu: S,
}

/// Frozen per-crossing constants (not differentiated).
pub struct CrossingConsts {
    pub r_warp: f64,
    pub r_weft: f64,
    pub gravity: crate::math::Vec3,
    pub spacing: f64,
    pub k_c: f64,
    /// penalty distances for the [down, up] warp segments at this node
    pub d_warp: [f64; 2],
    pub d_weft: [f64; 2],
    pub friction: FrictionConsts,
    pub shear: ShearConsts,
    pub prep: NormalPrep,
    pub enable_shear: bool,
    pub enable_friction: bool,
    pub enable_collision_in_fu: bool,
    pub enable_gravity_in_fu: bool,
}

pub struct CrossingOut<S> {
    pub force: [S; CROSS_N],
    pub jq: [[S; CROSS_N]; CROSS_N],
    /// ∂force[u0]/∂u̇0 and ∂force[v0]/∂v̇0 (friction damping)
    pub jv_u: S,
    pub jv_v: S,
    pub shear_energy: S,
    pub f_n: S,
    /// net non-friction Eulerian drive forces (diagnostics / tests)
    pub f_u_drive: S,
    pub f_v_drive: S,
}

pub fn crossing_kernel<S: Real>(
    inp: &CrossingInputs<S>,
    cc: &CrossingConsts,
) -> Result<CrossingOut<S>, ShearAngleError> {
    let pi = std::f64::consts::PI;
    let stiff_w = inp.y_warp.scale(pi * cc.r_warp * cc.r_warp);
    let stiff_v = inp.y_weft.scale(pi * cc.r_weft * cc.r_weft);
    let bc_w = inp.b_warp.scale(pi * cc.r_warp * cc.r_warp);
    let bc_v = inp.b_weft.scale(pi * cc.r_weft * cc.r_weft);
    let g: V3<S> = V3::from_f64(cc.gravity.0);
    let half = S::from_f64(0.5);

    let x0 = inp.x[0];
    let xwp = inp.x[1];
    let xwn = inp.x[2];
    let xvp = inp.x[3];
    let xvn = inp.x[4];

    let n = plane_normal(&inp.x, &cc.prep);

    // --- constituent forces along the warp axis ---
    let up_w = stretch_kernel(x0, xwn, inp.u0, inp.u_wn, stiff_w);
    let dn_w = stretch_kernel(xwp, x0, inp.u_wp, inp.u0, stiff_w);
    let fs_u = V3([
        up_w.force[0] + dn_w.force[3],
        up_w.force[1] + dn_w.force[4],
        up_w.force[2] + dn_w.force[5],
    ]);
    let fb_u = bend_force_at_mid(xwp, x0, xwn, inp.u_wp, inp.u_wn, bc_w);
    let mut f_u_drive = up_w.force[6] + dn_w.force[7];
    if cc.enable_gravity_in_fu {
        f_u_drive += -(inp.rho_warp * g.dot(x0 + xwn) * half)
            + inp.rho_warp * g.dot(xwp + x0) * half;
    }
    if cc.enable_collision_in_fu {
        let kc_l = S::from_f64(cc.k_c * cc.spacing);
        f_u_drive += collision_kernel(inp.u0, inp.u_wn, kc_l, S::from_f64(cc.d_warp[1])).force[0];
        f_u_drive += collision_kernel(inp.u_wp, inp.u0, kc_l, S::from_f64(cc.d_warp[0])).force[1];
    }

    // --- constituent forces along the weft axis ---
    let up_v = stretch_kernel(x0, xvn, inp.v0, inp.v_vn, stiff_v);
    let dn_v = stretch_kernel(xvp, x0, inp.v_vp, inp.v0, stiff_v);
    let fs_v = V3([
        up_v.force[0] + dn_v.force[3],
        up_v.force[1] + dn_v.force[4],
        up_v.force[2] + dn_v.force[5],
    ]);
    let fb_v = bend_force_at_mid(xvp, x0, xvn, inp.v_vp, inp.v_vn, bc_v);
    let mut f_v_drive = up_v.force[6] + dn_v.force[7];
    if cc.enable_gravity_in_fu {
        f_v_drive += -(inp.rho_weft * g.dot(x0 + xvn) * half)
            + inp.rho_weft * g.dot(xvp + x0) * half;
    }
    if cc.enable_collision_in_fu {
        let kc_l = S::from_f64(cc.k_c * cc.spacing);
        f_v_drive += collision_kernel(inp.v0, inp.v_vn, kc_l, S::from_f64(cc.d_weft[1])).force[0];
        f_v_drive += collision_kernel(inp.v_vp, inp.v0, kc_l, S::from_f64(cc.d_weft[0])).force[1];
    }

    let f_n = (n.dot(fs_u + fb_u - fs_v - fb_v) * half).max0();

    let mut force = [S::zero(); CROSS_N];
    let mut jq = [[S::zero(); CROSS_N]; CROSS_N];
    let mut shear_energy = S::zero();

    if cc.enable_shear {
        // quadrants: (warp arm, weft arm) with local offsets
        let quads = [(xwn, 6usize, xvn, 12usize), (xwn, 6, xvp, 9), (xwp, 3, xvn, 12), (xwp, 3, xvp, 9)];
        for (arm_u, off_u, arm_v, off_v) in quads {
            let out = shear_kernel(x0, arm_u, arm_v, f_n, inp.shear_s, &cc.shear)?;
            shear_energy += out.energy;
            // shear locals: [apex(0..3), arm_u(3..6), arm_v(6..9)]
            let offs = [0usize, off_u, off_v];
            let loc = [0usize, 3, 6];
            for s in 0..3 {
                for k in 0..3 {
                    force[offs[s] + k] += out.force[loc[s] + k];
                }
            }
            for sp in 0..3 {
                for sq in 0..3 {
                    for i in 0..3 {
                        for j in 0..3 {
                            jq[offs[sp] + i][offs[sq] + j] += out.jq[loc[sp] + i][loc[sq] + j];
                        }
                    }
                }
            }
        }
    }

    let (jv_u, jv_v) = if cc.enable_friction {
        let du = inp.u0 - inp.anchor_u;
        let fr_u = friction_kernel(du, inp.udot0, f_n, f_u_drive, inp.mu, &cc.friction);
        force[15] += fr_u.force;
        jq[15][15] += fr_u.d_du;
        let dv = inp.v0 - inp.anchor_v;
        let fr_v = friction_kernel(dv, inp.vdot0, f_n, f_v_drive, inp.mu, &cc.friction);
        force[16] += fr_v.force;
        jq[16][16] += fr_v.d_du;
        (fr_u.d_dudot, fr_v.d_dudot)
    } else {
        (S::zero(), S::zero())
    };

    Ok(CrossingOut { force, jq, jv_u, jv_v, shear_energy, f_n, f_u_drive, f_v_drive })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forces::normal::prepare_normal;
    use crate::math::{rel_err, Vec3};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn base_points() -> [Vec3; 5] {
        [
            V3([0.0, 0.0, 0.0]),
            V3([0.0, -0.01, 0.0]),
            V3([0.0, 0.01, 0.0]),
            V3([-0.01, 0.0, 0.0]),
            V3([0.01, 0.0, 0.0]),
        ]
    }

    fn consts_for(pts: &[Vec3; 5]) -> CrossingConsts {
        let e_warp = pts[2] - pts[1];
        let e_weft = pts[4] - pts[3];
        let reference = e_warp.cross(e_weft);
        CrossingConsts {
            r_warp: 0.001,
            r_weft: 0.001,
            gravity: V3([0.0, 0.0, -9.8]),
            spacing: 0.01,
            k_c: 1.0,
            d_warp: [0.002, 0.002],
            d_weft: [0.002, 0.002],
            friction: FrictionConsts { k_f: 1000.0, d_f: 1000.0, p: 1000.0 },
            shear: ShearConsts::new(0.01, 0.001, 3, 0.6),
            prep: prepare_normal(pts, reference).unwrap(),
            enable_shear: true,
            enable_friction: true,
            enable_collision_in_fu: true,
            enable_gravity_in_fu: true,
        }
    }

    fn inputs_at(q: &[f64; 21], vels: (f64, f64)) -> CrossingInputs<f64> {
        CrossingInputs {
            x: [
                V3([q[0], q[1], q[2]]),
                V3([q[3], q[4], q[5]]),
                V3([q[6], q[7], q[8]]),
                V3([q[9], q[10], q[11]]),
                V3([q[12], q[13], q[14]]),
            ],
            u0: q[15],
            v0: q[16],
            u_wp: q[17],
            u_wn: q[18],
            v_vp: q[19],
            v_vn: q[20],
            udot0: vels.0,
            vdot0: vels.1,
            anchor_u: 0.01,
            anchor_v: 0.01,
            y_warp: 500_000.0,
            b_warp: 0.00014,
            rho_warp: 0.002,
            y_weft: 170_000.0,
            b_weft: 0.00011,
            rho_weft: 0.0025,
            shear_s: 1000.0,
            mu: 0.5,
        }
    }

    fn rest_q() -> [f64; 21] {
        let pts = base_points();
        let mut q = [0.0; 21];
        for (i, p) in pts.iter().enumerate() {
            q[3 * i] = p.0[0];
            q[3 * i + 1] = p.0[1];
            q[3 * i + 2] = p.0[2];
        }
        q[15] = 0.01; // u0 (rest arc length at the middle of a 3-node yarn)
        q[16] = 0.01;
        q[17] = 0.0;
        q[18] = 0.02;
        q[19] = 0.0;
        q[20] = 0.02;
        q
    }

    #[test]
    fn rest_crossing_is_quiet() {
        // flat rest: constituent forces vanish → F_n = 0, shear at φ̄ → 0,
        // friction with δu = 0, u̇ = 0 → 0
        let q = rest_q();
        let cc = consts_for(&base_points());
        let out = crossing_kernel(&inputs_at(&q, (0.0, 0.0)), &cc).unwrap();
        assert_eq!(out.f_n, 0.0);
        assert!(out.force.iter().all(|&f| f.abs() < 1e-12), "{:?}", out.force);
    }

    #[test]
    fn contact_force_definition_and_relu() {
        // push the warp neighbors below the plane so warp elastic forces
        // press the node toward the weft side
        let mut q = rest_q();
        q[5] -= 0.004; // warp_prev z
        q[8] -= 0.004; // warp_next z
        let pts = [
            V3([q[0], q[1], q[2]]),
            V3([q[3], q[4], q[5]]),
            V3([q[6], q[7], q[8]]),
            V3([q[9], q[10], q[11]]),
            V3([q[12], q[13], q[14]]),
        ];
        let cc = consts_for(&pts);
        let out = crossing_kernel(&inputs_at(&q, (0.0, 0.0)), &cc).unwrap();
        // bent warp pulls the node toward −z; weft is straight; the normal
        // is oriented by the pattern reference. One of the two signs must
        // activate the ReLU; flipping the stencil flips it off.
        let active = out.f_n > 0.0;
        let mut q2 = rest_q();
        q2[5] += 0.004;
        q2[8] += 0.004;
        let pts2 = [
            V3([q2[0], q2[1], q2[2]]),
            V3([q2[3], q2[4], q2[5]]),
            V3([q2[6], q2[7], q2[8]]),
            V3([q2[9], q2[10], q2[11]]),
            V3([q2[12], q2[13], q2[14]]),
        ];
        let cc2 = consts_for(&pts2);
        let out2 = crossing_kernel(&inputs_at(&q2, (0.0, 0.0)), &cc2).unwrap();
        assert!(active != (out2.f_n > 0.0), "exactly one side presses");
        // inactive side clamps to exactly zero
        assert!(out.f_n.min(out2.f_n) == 0.0);
        assert!(out.f_n.max(out2.f_n) > 0.0);
    }

    #[test]
    fn jacobian_matches_fd_with_frozen_fn() {
        // the assembled Jacobian freezes F_n/F_u/normal; compare against FD
        // of a kernel variant evaluated with those quantities pinned by
        // construction: we freeze them by perturbing only the shear/friction
        // inputs through a wrapper that reuses the base normal and F_n.
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        for _ in 0..5 {
            let mut q = rest_q();
            for x in q.iter_mut().take(15) {
                *x += rng.gen_range(-0.0012..0.0012);
            }
            for x in q[15..].iter_mut() {
                *x += rng.gen_range(-0.0004..0.0004);
            }
            let pts = [
                V3([q[0], q[1], q[2]]),
                V3([q[3], q[4], q[5]]),
                V3([q[6], q[7], q[8]]),
                V3([q[9], q[10], q[11]]),
                V3([q[12], q[13], q[14]]),
            ];
            let cc = consts_for(&pts);
            let base = crossing_kernel(&inputs_at(&q, (0.0, 0.0)), &cc).unwrap();
            let f_n = base.f_n;
            let (f_u_base, f_v_base) = (base.f_u_drive, base.f_v_drive);
            // frozen-F_n evaluation: shear + friction forces recomputed with
            // fixed f_n, fixed anchors, fixed normal prep
            let frozen_eval = |qq: &[f64; 21]| -> [f64; 21] {
                let inp = inputs_at(qq, (0.0, 0.0));
                let mut force = [0.0; 21];
                let quads: [(usize, usize); 4] = [(6, 12), (6, 9), (3, 12), (3, 9)];
                for (off_u, off_v) in quads {
                    let arm_u = V3([qq[off_u], qq[off_u + 1], qq[off_u + 2]]);
                    let arm_v = V3([qq[off_v], qq[off_v + 1], qq[off_v + 2]]);
                    let out =
                        shear_kernel(inp.x[0], arm_u, arm_v, f_n, inp.shear_s, &cc.shear).unwrap();
                    for k in 0..3 {
                        force[k] += out.force[k];
                        force[off_u + k] += out.force[3 + k];
                        force[off_v + k] += out.force[6 + k];
                    }
                }
                // friction with frozen F_n and F_u (values at base state)
                let fr = friction_kernel(
                    qq[15] - inp.anchor_u,
                    0.0,
                    f_n,
                    f_u_base,
                    inp.mu,
                    &cc.friction,
                );
                force[15] += fr.force;
                let frv = friction_kernel(
                    qq[16] - inp.anchor_v,
                    0.0,
                    f_n,
                    f_v_base,
                    inp.mu,
                    &cc.friction,
                );
                force[16] += frv.force;
                force
            };
            // jq's shear blocks and friction diagonal match FD of the frozen map
            for b in 0..21 {
                for i in 0..21 {
                    let h = 1e-7;
                    let mut qp = q;
                    qp[b] += h;
                    let mut qm = q;
                    qm[b] -= h;
                    let fd = (frozen_eval(&qp)[i] - frozen_eval(&qm)[i]) / (2.0 * h);
                    // friction rows also carry k_f·δu spring terms handled
                    // identically in both paths
                    assert!(
                        rel_err(base.jq[i][b], fd, 1e-4) < 2e-4,
                        "jq[{i}][{b}] = {} vs {fd}",
                        base.jq[i][b]
                    );
                }
            }
        }
    }

    #[test]
    fn friction_damping_entries() {
        let q = rest_q();
        let cc = consts_for(&base_points());
        let out = crossing_kernel(&inputs_at(&q, (0.2, -0.1)), &cc).unwrap();
        assert_eq!(out.jv_u, -1000.0);
        assert_eq!(out.jv_v, -1000.0);
        // damping force present
        assert!((out.force[15] + 1000.0 * 0.2).abs() < 1e-9);
        assert!((out.force[16] - 1000.0 * 0.1).abs() < 1e-9);
    }
}
