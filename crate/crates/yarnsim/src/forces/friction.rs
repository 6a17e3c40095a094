//! Smooth yarn-to-yarn slide friction along one Eulerian axis.
//!
//! F_Slide = −( (k_f·δu − K(δu)·μF_n)/2 · K(μF_n − F_u)
//!            + (k_f·δu + K(δu)·μF_n)/2 ) − d_f·u̇,
//! with K(x) = tanh(p·x) and δu the sliding offset from the stored anchor.
//! The static regime behaves as an anchor spring; as the driving force
//! passes the breakaway value μF_n the K(μF_n − F_u) gate flips sign and
//! the spring terms cancel, leaving kinetic friction −K(δu)·μF_n − d_f·u̇.

use crate::math::Real;

#[derive(Clone, Copy, Debug)]
pub struct FrictionConsts {
    pub k_f: f64,
    pub d_f: f64,
    pub p: f64,
}

pub struct FrictionOut<S> {
    pub force: S,
    /// ∂F/∂u at frozen F_n and F_u (= ∂F/∂δu)
    pub d_du: S,
    /// ∂F/∂u̇
    pub d_dudot: S,
}

pub fn friction_kernel<S: Real>(
    du: S,
    udot: S,
    f_n: S,
    f_u: S,
    mu: S,
    fc: &FrictionConsts,
) -> FrictionOut<S> {
    let k = |x: S| x.scale(fc.p).tanh();
    let kprime = |x: S| {
        let t = x.scale(fc.p).tanh();
        (S::one() - t * t).scale(fc.p)
    };
    let half = S::from_f64(0.5);
    let mu_fn = mu * f_n;
    let spring = du.scale(fc.k_f);
    let gate = k(mu_fn - f_u);
    let force = -((spring - k(du) * mu_fn) * half * gate + (spring + k(du) * mu_fn) * half)
        - udot.scale(fc.d_f);
    let kf = S::from_f64(fc.k_f);
    let d_du = -((kf - kprime(du) * mu_fn) * half * gate + (kf + kprime(du) * mu_fn) * half);
    FrictionOut { force, d_du, d_dudot: S::from_f64(-fc.d_f) }
}

/// Post-step anchor drag: for offsets well past the breakaway elongation
/// s = μF_n/k_f the anchor follows the coordinate, trailing at distance s;
/// for small offsets it stays put. The smooth form
/// ā' = u − s·tanh((u − ā)/s) realizes both limits without a branch: a
/// hard threshold would park every sliding anchor exactly on its own
/// switching surface, making the rollout non-differentiable where the
/// estimation needs gradients most.
pub fn updated_anchor(anchor: f64, coord: f64, mu: f64, f_n: f64, k_f: f64) -> f64 {
    let slip = mu * f_n / k_f;
    if slip <= 0.0 {
        return coord;
    }
    coord - slip * ((coord - anchor) / slip).tanh()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{rel_err, Dual};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn consts() -> FrictionConsts {
        FrictionConsts { k_f: 1000.0, d_f: 1000.0, p: 1000.0 }
    }

    #[test]
    fn no_load_no_slide() {
        // F_u = 0, δu = 0, u̇ = 0 → F_Slide = 0
        let out = friction_kernel(0.0, 0.0, 1.0, 0.0, 0.5, &consts());
        assert_eq!(out.force, 0.0);
    }

    #[test]
    fn deep_kinetic_regime() {
        // K(μF_n − F_u) = −1, K(δu) = 1 → F = −μF_n − d_f·u̇
        let fc = consts();
        let f_n = 5.0;
        let mu = 0.5;
        let du = 0.05; // p·δu = 50 ⇒ K(δu) = 1
        let f_u = mu * f_n + 0.05; // far past breakaway: p·(μF_n − F_u) = −50
        let udot = 0.003;
        let out = friction_kernel(du, udot, f_n, f_u, mu, &fc);
        let expect = -mu * f_n - fc.d_f * udot;
        assert!(rel_err(out.force, expect, 1e-12) < 1e-8, "{} vs {expect}", out.force);
    }

    #[test]
    fn static_regime_is_anchor_spring() {
        // F_u ≪ μF_n: F ≈ −k_f·δu − d_f·u̇ within |μF_n(1 − K(μF_n − F_u))|
        let fc = consts();
        let f_n = 2.0;
        let mu = 0.5;
        let du = 1e-5;
        let udot = 1e-4;
        let out = friction_kernel(du, udot, f_n, 0.0, mu, &fc);
        let spring = -fc.k_f * du - fc.d_f * udot;
        let gate_gap = (mu * f_n * (1.0 - ((fc.p * (mu * f_n)).tanh()))).abs();
        assert!((out.force - spring).abs() <= gate_gap + 1e-9);
    }

    #[test]
    fn bounded_by_branch_envelopes() {
        let fc = consts();
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        for _ in 0..200 {
            let du = rng.gen_range(-0.01..0.01);
            let udot = rng.gen_range(-1.0..1.0);
            let f_n = rng.gen_range(0.0..10.0);
            let f_u = rng.gen_range(-5.0..5.0);
            let mu = rng.gen_range(0.0..1.0);
            let out = friction_kernel(du, udot, f_n, f_u, mu, &fc);
            let bound = mu * f_n + fc.k_f * du.abs();
            assert!(
                (out.force + fc.d_f * udot).abs() <= bound + 1e-9,
                "|F + d_f·u̇| = {} > {bound}",
                (out.force + fc.d_f * udot).abs()
            );
        }
    }

    #[test]
    fn partials_match_fd_on_all_inputs() {
        // C¹ in (δu, F_u, F_n, u̇) including the breakaway point F_u = μF_n
        let fc = consts();
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        for case in 0..100 {
            let f_n: f64 = rng.gen_range(0.1..5.0);
            let mu: f64 = rng.gen_range(0.1..1.0);
            // quarter of the cases sit exactly at breakaway
            let f_u = if case % 4 == 0 { mu * f_n } else { rng.gen_range(-2.0..2.0) };
            let du = rng.gen_range(-0.005..0.005);
            let udot = rng.gen_range(-0.5..0.5);
            // dual-number partials on each input
            let seeds: [(usize, f64); 4] = [(0, du), (1, udot), (2, f_n), (3, f_u)];
            for (slot, _) in seeds {
                let mk = |s: usize, h: f64| {
                    let mut v = [du, udot, f_n, f_u];
                    v[s] += h;
                    friction_kernel(v[0], v[1], v[2], v[3], mu, &fc).force
                };
                let dual = {
                    let arg = |s: usize| {
                        let v = [du, udot, f_n, f_u];
                        if s == slot {
                            Dual::seeded(v[s])
                        } else {
                            Dual::constant(v[s])
                        }
                    };
                    friction_kernel(arg(0), arg(1), arg(2), arg(3), Dual::constant(mu), &fc)
                        .force
                        .d
                };
                let mut best = f64::INFINITY;
                // floor at 1e-6 of the anchor-spring stiffness, the largest
                // derivative scale in the model
                for &h in &[1e-6, 1e-7, 1e-8] {
                    let fd = (mk(slot, h) - mk(slot, -h)) / (2.0 * h);
                    best = best.min(rel_err(dual, fd, 1e-6 * fc.k_f));
                }
                assert!(best < 1e-6, "slot {slot}: dual {dual} err {best}");
            }
            // spot-check the analytic Jacobian entries against duals
            let out = friction_kernel(du, udot, f_n, f_u, mu, &fc);
            let d_dual = friction_kernel(
                Dual::seeded(du),
                Dual::constant(udot),
                Dual::constant(f_n),
                Dual::constant(f_u),
                Dual::constant(mu),
                &fc,
            );
            assert!(rel_err(out.d_du, d_dual.force.d, 1e-9) < 1e-10);
            assert_eq!(out.d_dudot, -fc.d_f);
        }
    }

    #[test]
    fn anchor_update_rules() {
        let slip = 0.5 * 1.0 / 1000.0; // μF_n/k_f = 5e-4
        // no slip: |δu| ≪ breakaway elongation → anchor unchanged
        let a = updated_anchor(0.01, 0.01 + 1e-6, 0.5, 1.0, 1000.0);
        assert!((a - 0.01).abs() < 2e-12);
        // large jump of 10·μF_n/k_f: anchor trails at distance μF_n/k_f
        let a = updated_anchor(0.01, 0.01 + 10.0 * slip, 0.5, 1.0, 1000.0);
        assert!((a - (0.01 + 9.0 * slip)).abs() < slip * 1e-8);
        // F_n = 0: anchor follows exactly
        assert_eq!(updated_anchor(0.01, 0.02, 0.5, 0.0, 1000.0), 0.02);
    }
}
