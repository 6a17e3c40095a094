//! Shear at a crossing: relative rotation between a warp segment and a weft
//! segment sharing the crossing node, with a smooth shear-lock boost.
//!
//! V = ½·k_s·L·(φ−φ̄)², φ̄ = π/2, with
//! k_s(φ) = ½(F_n+1)·S·π·R²·((1+γᶜ) + (1−γᶜ)·tanh(g(φ))),
//! g(φ) = φ̄⁵(φ−φ_l) / ((φ(φ−φ_l)(φ−φ̄))² + φ̄⁴σ²),
//! γ = max(0, (√2·L − 2·L·sin(φ/2))/R).
//!
//! γ is clamped at zero: the lock boost only engages on the jamming (acute)
//! side; the opposite quadrant of the same crossing covers the obtuse side.
//! The tanh selector switches between the locked asymptote (F_n+1)SπR²γᶜ
//! and the plain asymptote (F_n+1)SπR² around φ_l.

use super::angle::angle_geometry;
use crate::math::{Real, V3};
use std::f64::consts::FRAC_PI_2;

pub const SHEAR_N: usize = 9;

#[derive(Clone, Copy, Debug)]
pub struct ShearConsts {
    /// rest inter-yarn spacing L
    pub spacing: f64,
    /// effective yarn radius at the crossing
    pub radius: f64,
    /// lock threshold φ_l = 2·arcsin(R/L)
    pub phi_lock: f64,
    /// lock growth exponent c
    pub lock_exp: i32,
    /// transition smoothness σ
    pub sigma: f64,
}

impl ShearConsts {
    pub fn new(spacing: f64, radius: f64, lock_exp: i32, sigma: f64) -> Self {
        ShearConsts {
            spacing,
            radius,
            phi_lock: 2.0 * (radius / spacing).asin(),
            lock_exp,
            sigma,
        }
    }
}

/// k_s and its first two derivatives in φ. `shear_s` is the shear modulus S
/// (learnable); `f_n` the contact force at the crossing.
pub fn shear_stiffness_chain<S: Real>(
    phi: S,
    f_n: S,
    shear_s: S,
    sc: &ShearConsts,
) -> (S, S, S) {
    let phi_bar = FRAC_PI_2;
    let half = S::from_f64(0.5);
    let c_f = half
        * (f_n + S::one())
        * shear_s
        * S::from_f64(std::f64::consts::PI * sc.radius * sc.radius);

    // γ(φ), clamped to the jamming side
    let l_over_r = sc.spacing / sc.radius;
    let gamma_raw = (S::from_f64(std::f64::consts::SQRT_2)
        - (phi * half).sin().scale(2.0))
    .scale(l_over_r);
    let locked = gamma_raw.value() > 0.0;
    let (gamma, dgamma, d2gamma) = if locked {
        (
            gamma_raw,
            -(phi * half).cos().scale(l_over_r),
            (phi * half).sin().scale(0.5 * l_over_r),
        )
    } else {
        (S::zero(), S::zero(), S::zero())
    };
    let ce = sc.lock_exp;
    let gc = gamma.powi(ce);
    let dgc = gamma.powi(ce - 1) * dgamma.scale(ce as f64);
    let d2gc = gamma.powi(ce - 2) * (dgamma * dgamma).scale((ce * (ce - 1)) as f64)
        + gamma.powi(ce - 1) * d2gamma.scale(ce as f64);

    // g(φ) = n/d
    let pb5 = phi_bar.powi(5);
    let pb4s2 = phi_bar.powi(4) * sc.sigma * sc.sigma;
    let n = (phi - S::from_f64(sc.phi_lock)).scale(pb5);
    let np = S::from_f64(pb5);
    let p = phi * (phi - S::from_f64(sc.phi_lock)) * (phi - S::from_f64(phi_bar));
    let pp = (phi * phi).scale(3.0)
        - phi.scale(2.0 * (phi_bar + sc.phi_lock))
        + S::from_f64(phi_bar * sc.phi_lock);
    let ppp = phi.scale(6.0) - S::from_f64(2.0 * (phi_bar + sc.phi_lock));
    let d = p * p + S::from_f64(pb4s2);
    let dp = (p * pp).scale(2.0);
    let dpp = (pp * pp + p * ppp).scale(2.0);
    let inv_d = S::one() / d;
    let g = n * inv_d;
    let gp = (np * d - n * dp) * inv_d * inv_d;
    let gpp = (-(n * dpp)) * inv_d * inv_d - (np * d - n * dp).scale(2.0) * dp * inv_d * inv_d * inv_d;

    let f = g.tanh();
    let sech2 = S::one() - f * f;
    let fp = sech2 * gp;
    let fpp = sech2 * gpp - (f * sech2 * gp * gp).scale(2.0);

    let one = S::one();
    let ks = c_f * ((one + gc) + (one - gc) * f);
    let ksp = c_f * (dgc * (one - f) + (one - gc) * fp);
    let kspp = c_f * (d2gc * (one - f) - (dgc * fp).scale(2.0) + (one - gc) * fpp);
    (ks, ksp, kspp)
}

pub struct ShearOut<S> {
    pub energy: S,
    pub force: [S; SHEAR_N],
    pub jq: [[S; SHEAR_N]; SHEAR_N],
    pub phi: S,
}

#[derive(Debug, thiserror::Error)]
#[error("shear angle {phi:.4} rad outside supported range at a crossing")]
pub struct ShearAngleError {
    pub phi: f64,
}

/// Shear element over (apex, warp arm, weft arm). F_n enters k_s; its
/// spatial dependence is the caller's concern (frozen in this Jacobian).
pub fn shear_kernel<S: Real>(
    apex: V3<S>,
    arm_u: V3<S>,
    arm_v: V3<S>,
    f_n: S,
    shear_s: S,
    sc: &ShearConsts,
) -> Result<ShearOut<S>, ShearAngleError> {
    let geom = angle_geometry(apex, arm_u, arm_v);
    let cphi = geom.c;
    let phi = {
        let c = if cphi.value() > 1.0 {
            S::one()
        } else if cphi.value() < -1.0 {
            -S::one()
        } else {
            cphi
        };
        c.acos()
    };
    if phi.value() < 0.02 || phi.value() > std::f64::consts::PI - 0.02 {
        return Err(ShearAngleError { phi: phi.value() });
    }
    let sin_phi = (S::one() - cphi * cphi).sqrt();
    let inv_sin = S::one() / sin_phi;
    let dev = phi - S::from_f64(FRAC_PI_2);

    let (ks, ksp, kspp) = shear_stiffness_chain(phi, f_n, shear_s, sc);
    let l = S::from_f64(sc.spacing);
    let half = S::from_f64(0.5);
    let energy = half * ks * l * dev * dev;
    // Ψ' = ∂V/∂φ, Ψ'' = ∂²V/∂φ²
    let psi_p = half * ksp * l * dev * dev + ks * l * dev;
    let psi_pp = half * kspp * l * dev * dev + (ksp * l * dev).scale(2.0) + ks * l;

    // ∇φ = −∇c/sinφ over [arm_u, arm_v, apex] → local offsets [3, 6, 0]
    let offs = [3usize, 6, 0];
    let mut force = [S::zero(); SHEAR_N];
    for (slot, &off) in offs.iter().enumerate() {
        // F = −Ψ'·∇φ = +Ψ'·∇c/sinφ
        let f = geom.grad[slot].scale(psi_p * inv_sin);
        for k in 0..3 {
            force[off + k] = f.0[k];
        }
    }

    // J = −Ψ''·∇φ∇φᵀ − Ψ'·∇²φ with ∇²φ = −∇²c/sinφ − cotφ·∇φ∇φᵀ
    // ⇒ J = (Ψ'cotφ − Ψ'')·∇φ∇φᵀ + (Ψ'/sinφ)·∇²c
    let cot = cphi * inv_sin;
    let coef_gg = (psi_p * cot - psi_pp) * inv_sin * inv_sin; // times ∇c∇cᵀ
    let coef_h = psi_p * inv_sin;
    let mut jq = [[S::zero(); SHEAR_N]; SHEAR_N];
    for (sp, &op) in offs.iter().enumerate() {
        for (sq, &oq) in offs.iter().enumerate() {
            for i in 0..3 {
                for j in 0..3 {
                    jq[op + i][oq + j] = coef_gg * geom.grad[sp].0[i] * geom.grad[sq].0[j]
                        + coef_h * geom.hess[sp][sq][i][j];
                }
            }
        }
    }

    Ok(ShearOut { energy, force, jq, phi })
}
