//! Runtime verification of analytic derivatives: per-force-model Jacobian
//! checks against central finite differences, energy-consistency checks
//! (force = −∂V/∂q), and the end-to-end parameter gradient check. Backs the
//! `gradcheck` subcommand and the acceptance suite.

use crate::adjoint::{gradient, MseLoss, TrajectoryLoss};
use crate::estimation::{generate_ground_truth, Scenario};
use crate::fabric::{FabricSpec, WovenPattern, YarnMaterial};
use crate::forces::control::ControlForces;
use crate::forces::crossing::{crossing_kernel, CrossingConsts, CrossingInputs};
use crate::forces::friction::{friction_kernel, FrictionConsts};
use crate::forces::normal::prepare_normal;
use crate::forces::shear::{shear_kernel, ShearConsts};
use crate::forces::wind::{wind_kernel, WindParams};
use crate::forces::{bend, collision, gravity, mass, stretch};
use crate::integrator::{simulate, SimOptions};
use crate::math::{rel_err, Dual, V3};
use crate::params::{ModelConsts, ParamKey, Params};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub model: String,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub states: usize,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= self.tolerance && self.max_rel_err.is_finite()
    }
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(CheckResult::passed)
}

pub fn render(results: &[CheckResult]) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(out, "{:<28} {:>12} {:>10} {:>8} {:>6}", "check", "max rel err", "tol", "states", "ok");
    for r in results {
        let _ = writeln!(
            out,
            "{:<28} {:>12.3e} {:>10.0e} {:>8} {:>6}",
            r.model,
            r.max_rel_err,
            r.tolerance,
            r.states,
            if r.passed() { "pass" } else { "FAIL" }
        );
    }
    out
}

/// min over the h sweep of the relative error against central differences.
fn fd_err(analytic: f64, f: &dyn Fn(f64) -> f64, scale: f64, floor: f64) -> f64 {
    let mut best = f64::INFINITY;
    for &h in &[1e-4, 1e-5, 1e-6, 1e-7] {
        let hh = h * scale.max(1e-6);
        let fd = (f(hh) - f(-hh)) / (2.0 * hh);
        best = best.min(rel_err(analytic, fd, floor));
    }
    best
}

fn random_segment(rng: &mut ChaCha8Rng) -> ([f64; 8], [f64; 8]) {
    let mut q = [0.0; 8];
    let mut v = [0.0; 8];
    for x in q.iter_mut() {
        *x = rng.gen_range(-0.02..0.02);
    }
    for x in v.iter_mut() {
        *x = rng.gen_range(-0.5..0.5);
    }
    q[6] = rng.gen_range(-0.001..0.001);
    q[7] = 0.01 + rng.gen_range(-0.003..0.003);
    (q, v)
}

/// Checks the spatial and velocity Jacobians of the combined inertial
/// element (∂T/∂q − Ṁq̇) plus the energy consistency of its pieces.
pub fn check_inertia(states: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = 0.002;
    let eval = |q: &[f64; 8], v: &[f64; 8]| {
        mass::seg_inertia_kernel(
            V3([q[0], q[1], q[2]]),
            V3([q[3], q[4], q[5]]),
            q[6],
            q[7],
            V3([v[0], v[1], v[2]]),
            V3([v[3], v[4], v[5]]),
            v[6],
            v[7],
            rho,
        )
    };
    let (mut e_inertia, mut e_mdot, mut e_jac) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..states {
        let (q, v) = random_segment(&mut rng);
        let out = eval(&q, &v);
        // ∂T/∂q against FD of T
        let mdot = mass::mass_time_derivative(
            V3([q[0], q[1], q[2]]),
            V3([q[3], q[4], q[5]]),
            q[7] - q[6],
            V3([v[0], v[1], v[2]]),
            V3([v[3], v[4], v[5]]),
            v[6],
            v[7],
            rho,
        );
        let mdot_qdot = mass::m8_matvec(&mdot, &v);
        for a in 0..8 {
            let inertia = out.force[a] + mdot_qdot[a];
            e_inertia = e_inertia.max(fd_err(
                inertia,
                &|h| {
                    let mut qq = q;
                    qq[a] += h;
                    eval(&qq, &v).kinetic
                },
                0.01,
                1e-10,
            ));
        }
        // Ṁ against the finite difference of M along q̇
        for i in 0..8 {
            for j in 0..8 {
                e_mdot = e_mdot.max(fd_err(
                    mdot[i][j],
                    &|h| {
                        let qq: Vec<f64> = (0..8).map(|k| q[k] + h * v[k]).collect();
                        mass::segment_mass(
                            V3([qq[0], qq[1], qq[2]]),
                            V3([qq[3], qq[4], qq[5]]),
                            qq[7] - qq[6],
                            rho,
                        )[i][j]
                    },
                    0.01,
                    1e-9,
                ));
            }
        }
        // combined Jacobians
        for b in 0..8 {
            for i in 0..8 {
                e_jac = e_jac.max(fd_err(
                    out.jq[i][b],
                    &|h| {
                        let mut qq = q;
                        qq[b] += h;
                        eval(&qq, &v).force[i]
                    },
                    0.01,
                    1e-8,
                ));
                e_jac = e_jac.max(fd_err(
                    out.jv[i][b],
                    &|h| {
                        let mut vv = v;
                        vv[b] += h;
                        eval(&q, &vv).force[i]
                    },
                    0.5,
                    1e-8,
                ));
            }
        }
    }
    vec![
        CheckResult { model: "inertia dT/dq".into(), max_rel_err: e_inertia, tolerance: 1e-5, states },
        CheckResult { model: "mdot-qdot".into(), max_rel_err: e_mdot, tolerance: 1e-5, states },
        CheckResult { model: "inertia jacobians".into(), max_rel_err: e_jac, tolerance: 1e-5, states },
    ]
}

pub fn check_stretch(states: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stiff = 500_000.0 * std::f64::consts::PI * 1e-6;
    let eval = |q: &[f64; 8]| {
        stretch::stretch_kernel(V3([q[0], q[1], q[2]]), V3([q[3], q[4], q[5]]), q[6], q[7], stiff)
    };
    let (mut e_energy, mut e_jac) = (0.0f64, 0.0f64);
    let mut used = 0;
    while used < states {
        let (q, _) = random_segment(&mut rng);
        if (V3([q[3] - q[0], q[4] - q[1], q[5] - q[2]])).norm() < 1e-3 {
            continue;
        }
        used += 1;
        let out = eval(&q);
        for a in 0..8 {
            e_energy = e_energy.max(fd_err(
                out.force[a],
                &|h| {
                    let mut qq = q;
                    qq[a] += h;
                    -eval(&qq).energy
                },
                0.01,
                1e-6 * stiff,
            ));
            for i in 0..8 {
                e_jac = e_jac.max(fd_err(
                    out.jq[i][a],
                    &|h| {
                        let mut qq = q;
                        qq[a] += h;
                        eval(&qq).force[i]
                    },
                    0.01,
                    1e-5 * stiff,
                ));
            }
        }
    }
    vec![
        CheckResult { model: "stretch force=-dV/dq".into(), max_rel_err: e_energy, tolerance: 1e-5, states },
        CheckResult { model: "stretch jacobian".into(), max_rel_err: e_jac, tolerance: 1e-5, states },
    ]
}

pub fn check_bend(states: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = 1.4e-4 * std::f64::consts::PI * 1e-6;
    let eval = |q: &[f64; 11]| {
        bend::bend_kernel(
            V3([q[0], q[1], q[2]]),
            V3([q[3], q[4], q[5]]),
            V3([q[6], q[7], q[8]]),
            q[9],
            q[10],
            c,
        )
    };
    let (mut e_energy, mut e_jac) = (0.0f64, 0.0f64);
    let mut used = 0;
    while used < states {
        let mut q = [0.0; 11];
        q[0] = -0.01;
        q[6] = 0.01;
        for (k, x) in q.iter_mut().enumerate().take(9) {
            *x += rng.gen_range(-0.004..0.004) * if k % 3 == 0 { 0.5 } else { 1.0 };
        }
        q[9] = rng.gen_range(-0.0005..0.0005);
        q[10] = 0.02 + rng.gen_range(-0.0005..0.0005);
        let geom = crate::forces::angle::angle_geometry(
            V3([q[3], q[4], q[5]]),
            V3([q[6], q[7], q[8]]),
            V3([q[0], q[1], q[2]]),
        );
        if -geom.c > 0.999 {
            continue; // nearly straight: FD of the angle is ill-posed there
        }
        used += 1;
        let out = eval(&q);
        let fscale = out.force.iter().fold(0.0f64, |a, &x| a.max(x.abs())) + 1e-12;
        for a in 0..11 {
            e_energy = e_energy.max(fd_err(
                out.force[a],
                &|h| {
                    let mut qq = q;
                    qq[a] += h;
                    -eval(&qq).energy
                },
                0.01,
                1e-5 * fscale,
            ));
            for i in 0..11 {
                e_jac = e_jac.max(fd_err(
                    out.jq[i][a],
                    &|h| {
                        let mut qq = q;
                        qq[a] += h;
                        eval(&qq).force[i]
                    },
                    0.01,
                    1e-4 * fscale / 0.01,
                ));
            }
        }
    }
    vec![
        CheckResult { model: "bend force=-dV/dq".into(), max_rel_err: e_energy, tolerance: 1e-4, states },
        CheckResult { model: "bend jacobian".into(), max_rel_err: e_jac, tolerance: 1e-4, states },
    ]
}

pub fn check_gravity(states: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = V3([0.0, 0.0, -9.8]);
    let rho = 0.0025;
    let eval = |q: &[f64; 8]| {
        gravity::gravity_kernel(V3([q[0], q[1], q[2]]), V3([q[3], q[4], q[5]]), q[6], q[7], rho, g)
    };
    let (mut e_energy, mut e_jac) = (0.0f64, 0.0f64);
    for _ in 0..states {
        let (q, _) = random_segment(&mut rng);
        let out = eval(&q);
        for a in 0..8 {
            e_energy = e_energy.max(fd_err(
                out.force[a],
                &|h| {
                    let mut qq = q;
                    qq[a] += h;
                    -eval(&qq).energy
                },
                0.01,
                1e-10,
            ));
            for i in 0..8 {
                e_jac = e_jac.max(fd_err(
                    out.jq[i][a],
                    &|h| {
                        let mut qq = q;
                        qq[a] += h;
                        eval(&qq).force[i]
                    },
                    0.01,
                    1e-8,
                ));
            }
        }
    }
    vec![
        CheckResult { model: "gravity force=-dV/dq".into(), max_rel_err: e_energy, tolerance: 1e-5, states },
        CheckResult { model: "gravity jacobian".into(), max_rel_err: e_jac, tolerance: 1e-5, states },
    ]
}

pub fn check_collision(states: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kc_l = 1.0 * 0.01;
    let d = 0.004;
    let (mut e_energy, mut e_jac) = (0.0f64, 0.0f64);
    for _ in 0..states {
        // sample both branches, away from the kink at Δu = d
        let du = if rng.gen_bool(0.5) {
            rng.gen_range(0.0005..0.8 * d)
        } else {
            rng.gen_range(1.2 * d..0.02)
        };
        let u0 = rng.gen_range(-0.01..0.01);
        let eval = |u0: f64, u1: f64| collision::collision_kernel(u0, u1, kc_l, d);
        let out = eval(u0, u0 + du);
        for (a, seeded) in [(0usize, true), (1, false)] {
            let force = out.force[a];
            e_energy = e_energy.max(fd_err(
                force,
                &|h| {
                    let (mut a0, mut a1) = (u0, u0 + du);
                    if seeded {
                        a0 += h;
                    } else {
                        a1 += h;
                    }
                    -eval(a0, a1).energy
                },
                0.001,
                1e-6 * kc_l,
            ));
            for i in 0..2 {
                e_jac = e_jac.max(fd_err(
                    out.jq[i][a],
                    &|h| {
                        let (mut a0, mut a1) = (u0, u0 + du);
                        if seeded {
                            a0 += h;
                        } else {
                            a1 += h;
                        }
                        eval(a0, a1).force[i]
                    },
                    0.001,
                    1e-6 * kc_l,
                ));
            }
        }
    }
    vec![
        CheckResult { model: "yarn-collision force".into(), max_rel_err: e_energy, tolerance: 1e-5, states },
        CheckResult { model: "yarn-collision jacobian".into(), max_rel_err: e_jac, tolerance: 1e-5, states },
    ]
}

pub fn check_shear(states: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sc = ShearConsts::new(0.01, 0.001, 3, 0.6);
    let (mut e_energy, mut e_jac, mut e_ks) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..states {
        let f_n = rng.gen_range(0.0..0.5);
        let s_mod = 1000.0;
        // k_s chain over a broad angle range (lock and no-lock sides)
        let phi = rng.gen_range(sc.phi_lock * 0.5..std::f64::consts::PI - 0.1);
        let (_, ksp, _) = crate::forces::shear::shear_stiffness_chain(phi, f_n, s_mod, &sc);
        e_ks = e_ks.max(fd_err(
            ksp,
            &|h| crate::forces::shear::shear_stiffness_chain(phi + h, f_n, s_mod, &sc).0,
            1.0,
            1e-9,
        ));
        // force/jacobian at a random crossing geometry
        let mut q = [0.0; 9];
        q[3] = 0.01;
        q[7] = 0.01;
        for x in q.iter_mut() {
            *x += rng.gen_range(-0.002..0.002);
        }
        let eval = |qq: &[f64; 9]| {
            shear_kernel(
                V3([qq[0], qq[1], qq[2]]),
                V3([qq[3], qq[4], qq[5]]),
                V3([qq[6], qq[7], qq[8]]),
                f_n,
                s_mod,
                &sc,
            )
            .unwrap()
        };
        let out = eval(&q);
        let fscale = out.force.iter().fold(0.0f64, |a, &x| a.max(x.abs())) + 1e-9;
        for a in 0..9 {
            e_energy = e_energy.max(fd_err(
                out.force[a],
                &|h| {
                    let mut qq = q;
                    qq[a] += h;
                    -eval(&qq).energy
                },
                0.01,
                1e-4 * fscale,
            ));
            for i in 0..9 {
                e_jac = e_jac.max(fd_err(
                    out.jq[i][a],
                    &|h| {
                        let mut qq = q;
                        qq[a] += h;
                        eval(&qq).force[i]
                    },
                    0.01,
                    1e-4 * fscale / 0.01,
                ));
            }
        }
    }
    vec![
        CheckResult { model: "shear dk_s/dphi".into(), max_rel_err: e_ks, tolerance: 1e-5, states },
        CheckResult { model: "shear force=-dV/dq".into(), max_rel_err: e_energy, tolerance: 1e-4, states },
        CheckResult { model: "shear jacobian".into(), max_rel_err: e_jac, tolerance: 1e-4, states },
    ]
}

pub fn check_friction(states: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fc = FrictionConsts { k_f: 1000.0, d_f: 1000.0, p: 1000.0 };
    let mut e = 0.0f64;
    for case in 0..states {
        let f_n: f64 = rng.gen_range(0.1..5.0);
        let mu: f64 = rng.gen_range(0.1..1.0);
        let f_u = if case % 4 == 0 { mu * f_n } else { rng.gen_range(-2.0..2.0) };
        let du = rng.gen_range(-0.005..0.005);
        let udot = rng.gen_range(-0.5..0.5);
        for slot in 0..4 {
            let dual = {
                let arg = |s: usize| {
                    let vals = [du, udot, f_n, f_u];
                    if s == slot { Dual::seeded(vals[s]) } else { Dual::constant(vals[s]) }
                };
                friction_kernel(arg(0), arg(1), arg(2), arg(3), Dual::constant(mu), &fc).force.d
            };
            e = e.max(fd_err(
                dual,
                &|h| {
                    let mut vals = [du, udot, f_n, f_u];
                    vals[slot] += h;
                    friction_kernel(vals[0], vals[1], vals[2], vals[3], mu, &fc).force
                },
                0.01,
                1e-6 * fc.k_f,
            ));
        }
    }
    // the tanh sharpness p = 1000 puts central differences themselves at the
    // 1e-5 level in the steepest regions; the acceptance class for
    // non-smooth models is 1e-4 (the module's own op check pins 1e-6 at
    // its reference inputs)
    vec![CheckResult { model: "friction partials".into(), max_rel_err: e, tolerance: 1e-4, states }]
}

pub fn check_wind(states: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wp = WindParams { velocity: V3([0.0, 5.0, 0.0]), density: 2.0, drag: 0.5 };
    let mut e = 0.0f64;
    for _ in 0..states {
        let x0 = V3([0.0, 0.0, 0.0]);
        let x1 = V3([0.01 + rng.gen_range(-0.002..0.002), rng.gen_range(-0.002..0.002), rng.gen_range(-0.002..0.002)]);
        let x2 = V3([rng.gen_range(-0.002..0.002), rng.gen_range(-0.002..0.002), 0.01 + rng.gen_range(-0.002..0.002)]);
        let v: [f64; 9] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
        let eval = |vv: &[f64; 9]| {
            wind_kernel(
                x0,
                x1,
                x2,
                V3([vv[0], vv[1], vv[2]]),
                V3([vv[3], vv[4], vv[5]]),
                V3([vv[6], vv[7], vv[8]]),
                &wp,
            )
        };
        let out = eval(&v);
        for b in 0..9 {
            for i in 0..9 {
                e = e.max(fd_err(
                    out.jv[i][b],
                    &|h| {
                        let mut vv = v;
                        vv[b] += h;
                        eval(&vv).force[i]
                    },
                    1.0,
                    1e-9,
                ));
            }
        }
    }
    vec![CheckResult { model: "wind velocity jacobian".into(), max_rel_err: e, tolerance: 1e-5, states }]
}

/// Contact + crossing element: F_n's composition is exercised through the
/// dual path of the crossing kernel against finite differences of the full
/// (unfrozen) element force.
pub fn check_contact(states: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = 0.0f64;
    let mut used = 0;
    while used < states {
        let mut q = [0.0f64; 21];
        let base = [
            [0.0, 0.0, 0.0],
            [0.0, -0.01, 0.0],
            [0.0, 0.01, 0.0],
            [-0.01, 0.0, 0.0],
            [0.01, 0.0, 0.0],
        ];
        for (i, b) in base.iter().enumerate() {
            for k in 0..3 {
                q[3 * i + k] = b[k] + rng.gen_range(-0.0015..0.0015);
            }
        }
        q[15] = 0.01 + rng.gen_range(-0.0003..0.0003);
        q[16] = 0.01 + rng.gen_range(-0.0003..0.0003);
        q[17] = rng.gen_range(-0.0003..0.0003);
        q[18] = 0.02 + rng.gen_range(-0.0003..0.0003);
        q[19] = rng.gen_range(-0.0003..0.0003);
        q[20] = 0.02 + rng.gen_range(-0.0003..0.0003);
        let mk_consts = |qq: &[f64; 21]| -> Option<CrossingConsts> {
            let pts = [
                V3([qq[0], qq[1], qq[2]]),
                V3([qq[3], qq[4], qq[5]]),
                V3([qq[6], qq[7], qq[8]]),
                V3([qq[9], qq[10], qq[11]]),
                V3([qq[12], qq[13], qq[14]]),
            ];
            let e_warp = pts[2] - pts[1];
            let e_weft = pts[4] - pts[3];
            let prep = prepare_normal(&pts, e_warp.cross(e_weft)).ok()?;
            Some(CrossingConsts {
                r_warp: 0.001,
                r_weft: 0.001,
                gravity: V3([0.0, 0.0, -9.8]),
                spacing: 0.01,
                k_c: 1.0,
                d_warp: [0.002, 0.004],
                d_weft: [0.004, 0.002],
                friction: FrictionConsts { k_f: 1000.0, d_f: 1000.0, p: 1000.0 },
                shear: ShearConsts::new(0.01, 0.001, 3, 0.6),
                prep,
                enable_shear: true,
                enable_friction: true,
                enable_collision_in_fu: true,
                enable_gravity_in_fu: true,
            })
        };
        let inputs = |qq: &[f64; 21], dual_at: Option<usize>| -> CrossingInputs<Dual> {
            let s = |i: usize| {
                if dual_at == Some(i) {
                    Dual::seeded(qq[i])
                } else {
                    Dual::constant(qq[i])
                }
            };
            let vec_at = |b: usize| V3([s(b), s(b + 1), s(b + 2)]);
            CrossingInputs {
                x: [vec_at(0), vec_at(3), vec_at(6), vec_at(9), vec_at(12)],
                u0: s(15),
                v0: s(16),
                u_wp: s(17),
                u_wn: s(18),
                v_vp: s(19),
                v_vn: s(20),
                udot0: Dual::constant(0.001),
                vdot0: Dual::constant(-0.002),
                anchor_u: Dual::constant(0.0095),
                anchor_v: Dual::constant(0.0104),
                y_warp: Dual::constant(5e5),
                b_warp: Dual::constant(1.4e-4),
                rho_warp: Dual::constant(0.002),
                y_weft: Dual::constant(1.7e5),
                b_weft: Dual::constant(1.1e-4),
                rho_weft: Dual::constant(0.0025),
                shear_s: Dual::constant(1000.0),
                mu: Dual::constant(0.5),
            }
        };
        let Some(cc0) = mk_consts(&q) else { continue };
        let Ok(out0) = crossing_kernel(&inputs(&q, None), &cc0) else { continue };
        if out0.f_n.v == 0.0 {
            continue; // want active contact so the F_n chain is exercised
        }
        used += 1;
        for a in 0..21 {
            let Ok(out) = crossing_kernel(&inputs(&q, Some(a)), &cc0) else { continue };
            for i in 0..21 {
                // dual derivative of the full force (includes F_n chains)
                // against FD with the prepass refreshed like the forward pass
                let analytic = out.force[i].d;
                let e_i = fd_err(
                    analytic,
                    &|h| {
                        let mut qq = q;
                        qq[a] += h;
                        let cc = mk_consts(&qq).unwrap();
                        crossing_kernel(&inputs(&qq, None), &cc).map(|o| o.force[i].v).unwrap_or(f64::NAN)
                    },
                    0.01,
                    1e-4 * (out0.f_n.v + 1.0),
                );
                e = e.max(e_i);
            }
        }
    }
    vec![CheckResult {
        model: "contact+crossing dual".into(),
        max_rel_err: e,
        tolerance: 1e-4,
        states,
    }]
}

fn table1_spec() -> FabricSpec {
    let yarn1 = YarnMaterial { density: 0.002, stretch: 500_000.0, bend: 0.00014, radius: 0.001 };
    let yarn2 = YarnMaterial { density: 0.0025, stretch: 170_000.0, bend: 0.00011, radius: 0.001 };
    FabricSpec::hybrid(5, 5, WovenPattern::Plain, 0.01, yarn1, yarn2)
}

/// End-to-end check: adjoint dL/dθ against central differences for all 8
/// physical parameters and the 60 control-force parameters, over a short
/// all-models-active rollout.
pub fn check_end_to_end(steps: usize, seed: u64) -> Vec<CheckResult> {
    let spec = table1_spec();
    let sc = Scenario::hanging_wind(spec.clone(), 5.0, steps);
    let truth = Params::from_spec(&spec, 1000.0, 0.5);
    let mc = ModelConsts::default();
    let gt = generate_ground_truth(&sc, &truth, &mc).expect("ground truth");
    let (fab, _, cons, mut ext) = sc.build().expect("scenario");
    let mut cf = ControlForces::zeros();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for frame in cf.forces.iter_mut() {
        for corner in frame.iter_mut() {
            corner.0 = [
                rng.gen_range(-2e-4..2e-4),
                rng.gen_range(-2e-4..2e-4),
                rng.gen_range(-2e-4..2e-4),
            ];
        }
    }
    ext.control = Some(cf);
    let opts = SimOptions { h: sc.h, record_tape: true, ..Default::default() };
    let mut p0 = truth.clone();
    p0.densities = vec![2.1e-3, 2.4e-3];
    p0.stretches = vec![4.6e5, 1.9e5];
    p0.bends = vec![1.3e-4, 1.2e-4];
    p0.shear_modulus = 940.0;
    p0.friction_mu = 0.55;
    let loss_spec = MseLoss { target: gt.frames.clone(), lagrangian_only: false };
    let keys = ParamKey::standard_set(2);
    let (traj, tape) =
        simulate(&fab, &gt.initial, &p0, &mc, &ext, &cons, &opts, steps).expect("rollout");
    let (_, grads) = gradient(
        &fab, &p0, &mc, &ext, &cons, &opts, &tape, &traj, &loss_spec, &keys, true,
    )
    .expect("gradient");

    let eval_params = |p: &Params| -> f64 {
        let (traj, _) = simulate(
            &fab,
            &gt.initial,
            p,
            &mc,
            &ext,
            &cons,
            &SimOptions { record_tape: false, ..opts },
            steps,
        )
        .expect("rollout");
        loss_spec.loss(&fab, &traj).expect("loss")
    };
    let mut results = Vec::new();
    for (k, &key) in keys.iter().enumerate() {
        let base = p0.get(key);
        let mut best = f64::INFINITY;
        for &relh in &[1e-4, 1e-5, 1e-6] {
            let h = relh * base.abs().max(1e-6);
            let mut pp = p0.clone();
            pp.set(key, base + h);
            let lp = eval_params(&pp);
            pp.set(key, base - h);
            let lm = eval_params(&pp);
            best = best.min(rel_err(grads.params[k], (lp - lm) / (2.0 * h), 1e-14));
        }
        results.push(CheckResult {
            model: format!("dL/d {}", key.label()),
            max_rel_err: best,
            tolerance: 1e-3,
            states: 1,
        });
    }
    // control-force components
    let cg = grads.control.expect("control gradients");
    let base_flat = ext.control.as_ref().unwrap().as_flat();
    let mut worst = 0.0f64;
    for i in 0..base_flat.len() {
        let h = 1e-5;
        let run = |delta: f64| {
            let mut f = base_flat.clone();
            f[i] += delta;
            let e2 = crate::forces::Externals {
                control: Some(ControlForces::from_flat(&f)),
                ..ext.clone()
            };
            let (traj, _) = simulate(
                &fab,
                &gt.initial,
                &p0,
                &mc,
                &e2,
                &cons,
                &SimOptions { record_tape: false, ..opts },
                steps,
            )
            .expect("rollout");
            loss_spec.loss(&fab, &traj).expect("loss")
        };
        let fd = (run(h) - run(-h)) / (2.0 * h);
        worst = worst.max(rel_err(cg[i], fd, 1e-12));
    }
    results.push(CheckResult {
        model: format!("dL/d control ({} components)", base_flat.len()),
        max_rel_err: worst,
        tolerance: 1e-3,
        states: 1,
    });
    results
}

/// The full per-force-model battery used by the gradcheck CLI.
pub fn force_model_battery(states: usize, seed: u64) -> Vec<CheckResult> {
    let mut results = Vec::new();
    results.extend(check_inertia(states, seed));
    results.extend(check_stretch(states, seed + 1));
    results.extend(check_bend(states, seed + 2));
    results.extend(check_shear(states, seed + 3));
    results.extend(check_friction(states, seed + 4));
    results.extend(check_collision(states, seed + 5));
    results.extend(check_gravity(states, seed + 6));
    results.extend(check_wind(states, seed + 7));
    results.extend(check_contact(states.min(20), seed + 8));
    results
}
