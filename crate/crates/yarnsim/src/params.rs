//! Learnable physical parameters and the sigmoid-range reparameterization.
//!
//! Physical values ω live in configured ranges (b, a+b); the optimizer works
//! on unconstrained y with ω = a·sigmoid(y) + b, which keeps every learned
//! parameter strictly inside its range.

use crate::fabric::FabricSpec;
use serde::{Deserialize, Serialize};

/// Non-learnable model constants shared across force models.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConsts {
    /// friction anchor-spring stiffness k_f
    pub k_f: f64,
    /// friction damping d_f
    pub d_f: f64,
    /// tanh sharpness p in K(x) = tanh(p·x)
    pub p: f64,
    /// yarn-collision penalty stiffness k_c
    pub k_c: f64,
    /// shear-lock growth exponent c
    pub lock_exp: i32,
    /// shear lock/no-lock transition smoothness σ
    pub sigma: f64,
}

impl Default for ModelConsts {
    fn default() -> Self {
        ModelConsts { k_f: 1000.0, d_f: 1000.0, p: 1000.0, k_c: 1.0, lock_exp: 3, sigma: 0.6 }
    }
}

/// Current physical parameter values entering the force models. Yarn
/// material entries mirror `FabricSpec::materials`; radius is geometry, not
/// learnable.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub densities: Vec<f64>,
    pub stretches: Vec<f64>,
    pub bends: Vec<f64>,
    pub radii: Vec<f64>,
    pub shear_modulus: f64,
    pub friction_mu: f64,
}

impl Params {
    pub fn from_spec(spec: &FabricSpec, shear_modulus: f64, friction_mu: f64) -> Self {
        Params {
            densities: spec.materials.iter().map(|m| m.density).collect(),
            stretches: spec.materials.iter().map(|m| m.stretch).collect(),
            bends: spec.materials.iter().map(|m| m.bend).collect(),
            radii: spec.materials.iter().map(|m| m.radius).collect(),
            shear_modulus,
            friction_mu,
        }
    }

    pub fn get(&self, key: ParamKey) -> f64 {
        match key {
            ParamKey::Density(m) => self.densities[m],
            ParamKey::Stretch(m) => self.stretches[m],
            ParamKey::Bend(m) => self.bends[m],
            ParamKey::Shear => self.shear_modulus,
            ParamKey::Mu => self.friction_mu,
        }
    }

    pub fn set(&mut self, key: ParamKey, value: f64) {
        match key {
            ParamKey::Density(m) => self.densities[m] = value,
            ParamKey::Stretch(m) => self.stretches[m] = value,
            ParamKey::Bend(m) => self.bends[m] = value,
            ParamKey::Shear => self.shear_modulus = value,
            ParamKey::Mu => self.friction_mu = value,
        }
    }
}

/// Identity of one learnable scalar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamKey {
    Density(usize),
    Stretch(usize),
    Bend(usize),
    Shear,
    Mu,
}

impl ParamKey {
    pub fn label(&self) -> String {
        match self {
            ParamKey::Density(m) => format!("density[{m}]"),
            ParamKey::Stretch(m) => format!("stretch[{m}]"),
            ParamKey::Bend(m) => format!("bend[{m}]"),
            ParamKey::Shear => "shear".to_string(),
            ParamKey::Mu => "mu".to_string(),
        }
    }

    /// The 8 learnables of a two-yarn cloth, in a stable order.
    pub fn standard_set(n_materials: usize) -> Vec<ParamKey> {
        let mut keys = Vec::new();
        for m in 0..n_materials {
            keys.push(ParamKey::Density(m));
            keys.push(ParamKey::Stretch(m));
            keys.push(ParamKey::Bend(m));
        }
        keys.push(ParamKey::Shear);
        keys.push(ParamKey::Mu);
        keys
    }
}

/// Range (lo, hi) per learnable parameter; ω = (hi−lo)·sigmoid(y) + lo.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamBounds {
    pub density: (f64, f64),
    /// per material slot; falls back to the last entry when fewer are given
    pub stretch: Vec<(f64, f64)>,
    pub bend: (f64, f64),
    pub shear: (f64, f64),
    pub mu: (f64, f64),
}

impl Default for ParamBounds {
    fn default() -> Self {
        ParamBounds {
            density: (0.001, 0.003),
            stretch: vec![(0.0, 800_000.0), (0.0, 300_000.0)],
            bend: (0.00005, 0.00018),
            shear: (0.0, 1200.0),
            mu: (0.0, 1.0),
        }
    }
}

impl ParamBounds {
    pub fn range(&self, key: ParamKey) -> (f64, f64) {
        match key {
            ParamKey::Density(_) => self.density,
            ParamKey::Stretch(m) => *self
                .stretch
                .get(m)
                .or_else(|| self.stretch.last())
                .expect("stretch bounds must be non-empty"),
            ParamKey::Bend(_) => self.bend,
            ParamKey::Shear => self.shear,
            ParamKey::Mu => self.mu,
        }
    }
}

#[inline]
pub fn sigmoid(y: f64) -> f64 {
    1.0 / (1.0 + (-y).exp())
}

/// ω = a·sigmoid(y) + b and dω/dy.
#[inline]
pub fn reparam(y: f64, a: f64, b: f64) -> (f64, f64) {
    let s = sigmoid(y);
    (a * s + b, a * s * (1.0 - s))
}

/// Inverse of the reparameterization, clamped to keep y finite.
pub fn unparam(omega: f64, a: f64, b: f64) -> f64 {
    let s = ((omega - b) / a).clamp(1e-9, 1.0 - 1e-9);
    (s / (1.0 - s)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reparam_midpoint_and_saturation() {
        let (w, _) = reparam(0.0, 2.0, 1.0);
        assert!((w - 2.0).abs() < 1e-12); // a/2 + b
        let (w, d) = reparam(40.0, 2.0, 1.0);
        assert!((w - 3.0).abs() < 1e-9); // -> a + b
        assert!(d.abs() < 1e-9);
    }

    #[test]
    fn density_bounds_example() {
        // range [0.001, 0.003]: a = 0.002, b = 0.001, ω(0) = 0.002
        let (w, _) = reparam(0.0, 0.002, 0.001);
        assert!((w - 0.002).abs() < 1e-15);
    }

    #[test]
    fn reparam_derivative_matches_fd() {
        for &y in &[-3.0, -0.5, 0.0, 1.2, 4.0] {
            let a = 5.0;
            let b = -1.0;
            let h = 1e-6;
            let fd = (reparam(y + h, a, b).0 - reparam(y - h, a, b).0) / (2.0 * h);
            let (_, d) = reparam(y, a, b);
            assert!((d - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn unparam_round_trip() {
        for &w in &[0.0011, 0.002, 0.00295] {
            let y = unparam(w, 0.002, 0.001);
            let (back, _) = reparam(y, 0.002, 0.001);
            assert!((back - w).abs() < 1e-12);
        }
    }
}
