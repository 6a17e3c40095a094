//! Learnable control forces applied to the four cloth corners during the
//! first few frames of a rollout.

use crate::math::Vec3;

pub const CONTROL_FRAMES: usize = 5;

/// Per-frame, per-corner force vectors; identically zero from frame 5 on.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlForces {
    /// [frame][corner] force
    pub forces: Vec<[Vec3; 4]>,
}

impl ControlForces {
    pub fn zeros() -> Self {
        ControlForces { forces: vec![[crate::math::V3([0.0; 3]); 4]; CONTROL_FRAMES] }
    }

    pub fn force(&self, frame: usize, corner: usize) -> Vec3 {
        if frame < self.forces.len() {
            self.forces[frame][corner]
        } else {
            crate::math::V3([0.0; 3])
        }
    }

    pub fn active(&self, frame: usize) -> bool {
        frame < self.forces.len()
    }

    /// Flat view in (frame, corner, component) order.
    pub fn as_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.forces.len() * 12);
        for frame in &self.forces {
            for corner in frame {
                v.extend_from_slice(&corner.0);
            }
        }
        v
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        assert_eq!(flat.len() % 12, 0);
        let forces = flat
            .chunks(12)
            .map(|c| {
                [
                    crate::math::V3([c[0], c[1], c[2]]),
                    crate::math::V3([c[3], c[4], c[5]]),
                    crate::math::V3([c[6], c[7], c[8]]),
                    crate::math::V3([c[9], c[10], c[11]]),
                ]
            })
            .collect();
        ControlForces { forces }
    }
}
