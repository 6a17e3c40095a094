//! Contact normal at a crossing: unit normal of the least-squares plane
//! through the node and its four yarn neighbors, oriented from the warp
//! toward the weft side.
//!
//! The smallest eigenvalue of the 3×3 scatter matrix is found in f64 by the
//! closed-form symmetric eigensolver, then refined by a single generic
//! Newton step on the characteristic polynomial. One step from a converged
//! start both preserves the value and gives the exact implicit-function
//! derivative under dual numbers (Newton's fixed point has vanishing
//! linearization), so the adjoint sees the true ∂n/∂q. The eigenvector is
//! the cross product of two rows of (C − λI), the pair being chosen in the
//! f64 prepass.

use crate::math::{Real, V3, Vec3};
use thiserror::Error;

#[derive(Debug, Error)]
#[error("degenerate crossing stencil: points are collinear (gap {gap:.3e})")]
pub struct DegenerateStencil {
    pub gap: f64,
}

/// f64 prepass output: everything the generic evaluation needs to stay on
/// one smooth branch.
#[derive(Clone, Copy, Debug)]
pub struct NormalPrep {
    pub lambda: f64,
    pub rows: (usize, usize),
    pub flip: f64,
}

fn scatter_matrix<S: Real>(pts: &[V3<S>; 5]) -> [[S; 3]; 3] {
    let fifth = S::from_f64(0.2);
    let mut mean = V3::zero();
    for p in pts {
        mean = mean + *p;
    }
    mean = mean.scale(fifth);
    let mut c = [[S::zero(); 3]; 3];
    for p in pts {
        let d = *p - mean;
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] += d.0[i] * d.0[j];
            }
        }
    }
    c
}

/// Eigenvalues of a symmetric 3×3 matrix, ascending (closed-form).
pub fn sym3_eigenvalues(c: &[[f64; 3]; 3]) -> [f64; 3] {
    let p1 = c[0][1] * c[0][1] + c[0][2] * c[0][2] + c[1][2] * c[1][2];
    if p1 < 1e-300 {
        let mut d = [c[0][0], c[1][1], c[2][2]];
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        return d;
    }
    let q = (c[0][0] + c[1][1] + c[2][2]) / 3.0;
    let p2 = (c[0][0] - q).powi(2) + (c[1][1] - q).powi(2) + (c[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            b[i][j] = (c[i][j] - if i == j { q } else { 0.0 }) / p;
        }
    }
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
        - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let r = (det / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3 * 2.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    let mut d = [e1, e2, e3];
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d
}

/// f64 prepass: smallest eigenvalue, row pair for the eigenvector cross
/// product, and the orientation sign against `reference`.
pub fn prepare_normal(pts: &[Vec3; 5], reference: Vec3) -> Result<NormalPrep, DegenerateStencil> {
    let c = scatter_matrix(pts);
    let eig = sym3_eigenvalues(&c);
    let scale = eig[2].abs().max(1e-30);
    let gap = (eig[1] - eig[0]) / scale;
    if gap < 1e-8 {
        return Err(DegenerateStencil { gap });
    }
    let lambda = eig[0];
    let mut b = c;
    for (k, bk) in b.iter_mut().enumerate() {
        bk[k] -= lambda;
    }
    let rows: [Vec3; 3] = [V3(b[0]), V3(b[1]), V3(b[2])];
    let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
    let (mut best, mut best_n2) = ((0, 1), -1.0);
    for &(i, j) in &pairs {
        let n2 = rows[i].cross(rows[j]).norm2();
        if n2 > best_n2 {
            best_n2 = n2;
            best = (i, j);
        }
    }
    if best_n2 <= 0.0 {
        return Err(DegenerateStencil { gap: 0.0 });
    }
    let v = rows[best.0].cross(rows[best.1]);
    let flip = if v.dot(reference) >= 0.0 { 1.0 } else { -1.0 };
    Ok(NormalPrep { lambda, rows: best, flip })
}

/// Generic evaluation of the oriented plane normal on the branch fixed by
/// the prepass.
pub fn plane_normal<S: Real>(pts: &[V3<S>; 5], prep: &NormalPrep) -> V3<S> {
    let c = scatter_matrix(pts);
    // characteristic polynomial p(λ) = −λ³ + tr·λ² − m2·λ + det
    let tr = c[0][0] + c[1][1] + c[2][2];
    let m2 = c[0][0] * c[1][1] - c[0][1] * c[1][0] + c[0][0] * c[2][2] - c[0][2] * c[2][0]
        + c[1][1] * c[2][2] - c[1][2] * c[2][1];
    let det = c[0][0] * (c[1][1] * c[2][2] - c[1][2] * c[2][1])
        - c[0][1] * (c[1][0] * c[2][2] - c[1][2] * c[2][0])
        + c[0][2] * (c[1][0] * c[2][1] - c[1][1] * c[2][0]);
    let l0 = S::from_f64(prep.lambda);
    let p = -(l0 * l0 * l0) + tr * l0 * l0 - m2 * l0 + det;
    let pp = -(l0 * l0).scale(3.0) + (tr * l0).scale(2.0) - m2;
    let lambda = l0 - p / pp;

    let row = |i: usize| -> V3<S> {
        let mut r = V3([c[i][0], c[i][1], c[i][2]]);
        r.0[i] = r.0[i] - lambda;
        r
    };
    let v = row(prep.rows.0).cross(row(prep.rows.1));
    let n = v.scale(S::one() / v.norm());
    n.scale(S::from_f64(prep.flip))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{rel_err, Dual};
    use nalgebra::DMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn svd_normal(pts: &[Vec3; 5]) -> Vec3 {
        let mean = pts.iter().fold([0.0; 3], |a, p| {
            [a[0] + p.0[0] / 5.0, a[1] + p.0[1] / 5.0, a[2] + p.0[2] / 5.0]
        });
        let m = DMatrix::from_fn(5, 3, |i, j| pts[i].0[j] - mean[j]);
        let svd = m.svd(false, true);
        let vt = svd.v_t.unwrap();
        // right singular vector of the smallest singular value
        let idx = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        V3([vt[(idx, 0)], vt[(idx, 1)], vt[(idx, 2)]])
    }

    fn flat_cross() -> [Vec3; 5] {
        [
            V3([0.0, 0.0, 0.0]),
            V3([0.01, 0.0, 0.0]),
            V3([-0.01, 0.0, 0.0]),
            V3([0.0, 0.01, 0.0]),
            V3([0.0, -0.01, 0.0]),
        ]
    }

    #[test]
    fn flat_grid_gives_z_normal() {
        let pts = flat_cross();
        let prep = prepare_normal(&pts, V3([0.0, 0.0, 1.0])).unwrap();
        let n = plane_normal(&pts, &prep);
        assert!((n.0[2] - 1.0).abs() < 1e-12);
        let prep = prepare_normal(&pts, V3([0.0, 0.0, -1.0])).unwrap();
        let n = plane_normal(&pts, &prep);
        assert!((n.0[2] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn coplanar_tilted_points_exact() {
        // five coplanar points: |nᵀ(pᵢ − p₀)| ≤ 1e−12
        let base = flat_cross();
        let tilt = |p: Vec3| V3([p.0[0], p.0[1], 0.3 * p.0[0] - 0.2 * p.0[1]]);
        let pts = [tilt(base[0]), tilt(base[1]), tilt(base[2]), tilt(base[3]), tilt(base[4])];
        let prep = prepare_normal(&pts, V3([0.0, 0.0, 1.0])).unwrap();
        let n = plane_normal(&pts, &prep);
        for p in &pts[1..] {
            let d = *p - pts[0];
            assert!(n.dot(d).abs() < 1e-12);
        }
        assert!((n.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn matches_svd_oracle_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        for _ in 0..100 {
            let mut pts = flat_cross();
            for p in pts.iter_mut() {
                for k in 0..3 {
                    p.0[k] += rng.gen_range(-0.003..0.003);
                }
            }
            let prep = match prepare_normal(&pts, V3([0.0, 0.0, 1.0])) {
                Ok(p) => p,
                Err(_) => continue,
            };
            let ours = plane_normal(&pts, &prep);
            let mut oracle = svd_normal(&pts);
            if oracle.dot(ours) < 0.0 {
                oracle = -oracle;
            }
            for k in 0..3 {
                assert!(
                    (ours.0[k] - oracle.0[k]).abs() < 1e-10,
                    "component {k}: {} vs {}",
                    ours.0[k],
                    oracle.0[k]
                );
            }
        }
    }

    #[test]
    fn collinear_points_rejected() {
        let pts = [
            V3([0.0, 0.0, 0.0]),
            V3([0.01, 0.0, 0.0]),
            V3([-0.01, 0.0, 0.0]),
            V3([0.02, 0.0, 0.0]),
            V3([-0.02, 0.0, 0.0]),
        ];
        assert!(prepare_normal(&pts, V3([0.0, 0.0, 1.0])).is_err());
    }

    #[test]
    fn dual_derivative_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(89);
        for _ in 0..20 {
            let mut pts = flat_cross();
            for p in pts.iter_mut() {
                for k in 0..3 {
                    p.0[k] += rng.gen_range(-0.002..0.002);
                }
            }
            let prep = prepare_normal(&pts, V3([0.0, 0.0, 1.0])).unwrap();
            // perturb coordinate (point 2, component z)
            let comp = |pts: &[Vec3; 5]| {
                // prepass is refreshed like the forward pass would
                let pr = prepare_normal(pts, V3([0.0, 0.0, 1.0])).unwrap();
                plane_normal(pts, &pr)
            };
            for &(pi, k) in &[(0usize, 2usize), (2, 1), (4, 0)] {
                let dual_pts: [V3<Dual>; 5] = std::array::from_fn(|i| {
                    V3(std::array::from_fn(|j| {
                        if i == pi && j == k {
                            Dual::seeded(pts[i].0[j])
                        } else {
                            Dual::constant(pts[i].0[j])
                        }
                    }))
                });
                let nd = plane_normal(&dual_pts, &prep);
                let h = 1e-7;
                let mut pp = pts;
                pp[pi].0[k] += h;
                let np = comp(&pp);
                pp[pi].0[k] -= 2.0 * h;
                let nm = comp(&pp);
                for c in 0..3 {
                    let fd = (np.0[c] - nm.0[c]) / (2.0 * h);
                    assert!(
                        rel_err(nd.0[c].d, fd, 1e-4) < 1e-5,
                        "dn[{c}]/dq: {} vs {fd}",
                        nd.0[c].d
                    );
                }
            }
        }
    }
}
