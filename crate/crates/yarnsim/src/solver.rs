//! Direct solvers for the implicit-Euler system A·q̇ = b.
//!
//! The system matrix couples only DoFs within the grid stencil, so it is
//! banded once nodes are numbered row-major with interleaved DoFs. The
//! banded LU keeps the factorization around so the reverse sweep can run
//! transpose solves against the same factor (the adjoint needs Aᵀλ = g).
//!
//! Layout follows the LAPACK band convention: column j of the band store
//! holds A[i][j] at row `ku + kl + i - j` of a (2·kl + ku + 1) × n array;
//! the extra `kl` rows absorb fill-in from row pivoting.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("matrix is singular at column {col} (|pivot| = {pivot:.3e}, condition estimate {cond:.3e})")]
    Singular { col: usize, pivot: f64, cond: f64 },
    #[error("iterative solver stalled after {iters} iterations (residual {residual:.3e})")]
    IterativeStall { iters: usize, residual: f64 },
    #[error("residual {residual:.3e} exceeds tolerance {tol:.3e} (relative to rhs)")]
    ResidualTooLarge { residual: f64, tol: f64 },
}

/// Band matrix with lower bandwidth `kl` and upper bandwidth `ku`.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    /// (2*kl + ku + 1) rows by n columns, column-major blocks per column.
    data: Vec<f64>,
    rows: usize,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let rows = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, data: vec![0.0; rows * n], rows }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        // row within column j's slab
        let r = self.ku + self.kl + i - j;
        j * self.rows + r
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(j <= i + self.ku && i <= j + self.kl, "entry ({i},{j}) outside band");
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i + self.ku || i > j + self.kl {
            return 0.0;
        }
        self.data[self.idx(i, j)]
    }

    /// Replace row `i` with the identity row (used for pinned DoFs).
    pub fn set_identity_row(&mut self, i: usize) {
        let lo = i.saturating_sub(self.kl);
        let hi = (i + self.ku).min(self.n - 1);
        for j in lo..=hi {
            self.set(i, j, if i == j { 1.0 } else { 0.0 });
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            let xj = x[j];
            for i in lo..=hi {
                y[i] += self.data[self.idx(i, j)] * xj;
            }
        }
        y
    }

    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            let mut acc = 0.0;
            for i in lo..=hi {
                acc += self.data[self.idx(i, j)] * x[i];
            }
            y[j] += acc;
        }
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for (i, mi) in m.iter_mut().enumerate() {
            for (j, v) in mi.iter_mut().enumerate() {
                *v = self.get(i, j);
            }
        }
        m
    }

    /// LU factorization with partial pivoting (row swaps within the band).
    pub fn factor(&self) -> Result<BandLu, SolveError> {
        let n = self.n;
        let kl = self.kl;
        let ku = self.ku;
        let rows = self.rows;
        let mut a = self.data.clone();
        let mut ipiv = vec![0usize; n];
        // effective upper bandwidth after pivoting is kl + ku
        let kv = kl + ku;
        let at = |i: usize, j: usize| -> usize { j * rows + (kv + i - j) };
        let mut min_piv: f64 = f64::INFINITY;
        let mut max_piv: f64 = 0.0;
        for k in 0..n {
            // find pivot in column k among rows k..=min(k+kl, n-1)
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut pmax = a[at(k, k)].abs();
            for i in (k + 1)..=last {
                let v = a[at(i, k)].abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            ipiv[k] = p;
            if pmax < 1e-300 {
                return Err(SolveError::Singular {
                    col: k,
                    pivot: pmax,
                    cond: if min_piv > 0.0 { max_piv / min_piv.max(1e-300) } else { f64::INFINITY },
                });
            }
            min_piv = min_piv.min(pmax);
            max_piv = max_piv.max(pmax);
            let jhi = (k + kv).min(n - 1);
            if p != k {
                for j in k..=jhi {
                    a.swap(at(k, j), at(p, j));
                }
            }
            let piv = a[at(k, k)];
            for i in (k + 1)..=last {
                let m = a[at(i, k)] / piv;
                a[at(i, k)] = m;
                if m != 0.0 {
                    for j in (k + 1)..=jhi {
                        let u = a[at(k, j)];
                        if u != 0.0 {
                            a[at(i, j)] -= m * u;
                        }
                    }
                }
            }
        }
        Ok(BandLu { n, kl, kv, rows, a, ipiv, cond_estimate: max_piv / min_piv.max(1e-300) })
    }
}

/// Factored band matrix (P·A = L·U) supporting forward and transpose solves.
#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    kv: usize,
    rows: usize,
    a: Vec<f64>,
    ipiv: Vec<usize>,
    pub cond_estimate: f64,
}

impl BandLu {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[j * self.rows + (self.kv + i - j)]
    }

    /// Solve A x = rhs.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = rhs.to_vec();
        // forward: apply P and L
        for k in 0..n {
            let p = self.ipiv[k];
            if p != k {
                x.swap(k, p);
            }
            let last = (k + self.kl).min(n - 1);
            let xk = x[k];
            if xk != 0.0 {
                for i in (k + 1)..=last {
                    x[i] -= self.at(i, k) * xk;
                }
            }
        }
        // back substitution with U
        for k in (0..n).rev() {
            let jhi = (k + self.kv).min(n - 1);
            let mut acc = x[k];
            for j in (k + 1)..=jhi {
                acc -= self.at(k, j) * x[j];
            }
            x[k] = acc / self.at(k, k);
        }
        x
    }

    /// Solve Aᵀ x = rhs, reusing the same factorization.
    ///
    /// The band factorization interleaves row swaps with eliminations
    /// (A = P₀L₀···Pₙ₋₁Lₙ₋₁U, the swaps never touch already-stored
    /// multipliers), so the transpose solve must interleave the Lᵀ column
    /// solves with the swaps in reverse order: after Uᵀz = rhs,
    /// x = P₀L₀⁻ᵀ···Pₙ₋₁Lₙ₋₁⁻ᵀ z.
    pub fn solve_transpose(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = rhs.to_vec();
        // Uᵀ is lower triangular: forward substitution
        for k in 0..n {
            let jlo = k.saturating_sub(self.kv);
            let mut acc = x[k];
            for j in jlo..k {
                acc -= self.at(j, k) * x[j];
            }
            x[k] = acc / self.at(k, k);
        }
        // interleaved unit-Lᵀ solves and swaps, reverse elimination order
        for k in (0..n).rev() {
            let ihi = (k + self.kl).min(n - 1);
            let mut acc = x[k];
            for i in (k + 1)..=ihi {
                acc -= self.at(i, k) * x[i];
            }
            x[k] = acc;
            let p = self.ipiv[k];
            if p != k {
                x.swap(k, p);
            }
        }
        x
    }
}

/// Dense LU with partial pivoting. Oracle for the banded path and solver for
/// small ad-hoc systems in tests.
#[derive(Clone, Debug)]
pub struct DenseLu {
    n: usize,
    a: Vec<f64>,
    ipiv: Vec<usize>,
}

impl DenseLu {
    pub fn factor(m: &[Vec<f64>]) -> Result<DenseLu, SolveError> {
        let n = m.len();
        let mut a: Vec<f64> = m.iter().flat_map(|r| r.iter().copied()).collect();
        let mut ipiv = vec![0usize; n];
        for k in 0..n {
            let mut p = k;
            let mut pmax = a[k * n + k].abs();
            for i in (k + 1)..n {
                let v = a[i * n + k].abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            ipiv[k] = p;
            if pmax < 1e-300 {
                return Err(SolveError::Singular { col: k, pivot: pmax, cond: f64::INFINITY });
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
            }
            let piv = a[k * n + k];
            for i in (k + 1)..n {
                let mlt = a[i * n + k] / piv;
                a[i * n + k] = mlt;
                for j in (k + 1)..n {
                    let u = a[k * n + j];
                    a[i * n + j] -= mlt * u;
                }
            }
        }
        Ok(DenseLu { n, a, ipiv })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = rhs.to_vec();
        // full-row-swap storage keeps PA = LU: permute the rhs completely
        // before the triangular solves
        for k in 0..n {
            let p = self.ipiv[k];
            if p != k {
                x.swap(k, p);
            }
        }
        for k in 0..n {
            for i in (k + 1)..n {
                x[i] -= self.a[i * n + k] * x[k];
            }
        }
        for k in (0..n).rev() {
            let mut acc = x[k];
            for j in (k + 1)..n {
                acc -= self.a[k * n + j] * x[j];
            }
            x[k] = acc / self.a[k * n + k];
        }
        x
    }

    pub fn solve_transpose(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = rhs.to_vec();
        // Uᵀ z = rhs
        for k in 0..n {
            let mut acc = x[k];
            for j in 0..k {
                acc -= self.a[j * n + k] * x[j];
            }
            x[k] = acc / self.a[k * n + k];
        }
        // Lᵀ w = z
        for k in (0..n).rev() {
            let mut acc = x[k];
            for i in (k + 1)..n {
                acc -= self.a[i * n + k] * x[i];
            }
            x[k] = acc;
        }
        for k in (0..n).rev() {
            let p = self.ipiv[k];
            if p != k {
                x.swap(k, p);
            }
        }
        x
    }
}

/// Unpreconditioned-but-Jacobi-scaled BiCGStab; fallback behind the same
/// interface when a direct factorization is not wanted.
pub fn bicgstab(
    matvec: &dyn Fn(&[f64]) -> Vec<f64>,
    diag: &[f64],
    b: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<Vec<f64>, SolveError> {
    let n = b.len();
    let scale: Vec<f64> = diag.iter().map(|&d| if d.abs() > 1e-300 { 1.0 / d } else { 1.0 }).collect();
    let bnorm = norm2(b).max(1e-300);
    let mut x = vec![0.0; n];
    let mut r: Vec<f64> = b.to_vec();
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0f64, 1.0f64, 1.0f64);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for it in 0..max_iters {
        let rho1 = dot(&r0, &r);
        if rho1.abs() < 1e-300 {
            return Err(SolveError::IterativeStall { iters: it, residual: norm2(&r) / bnorm });
        }
        let beta = (rho1 / rho) * (alpha / omega);
        rho = rho1;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let phat: Vec<f64> = p.iter().zip(&scale).map(|(a, s)| a * s).collect();
        v = matvec(&phat);
        alpha = rho / dot(&r0, &v);
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        if norm2(&s) / bnorm < tol {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            return Ok(x);
        }
        let shat: Vec<f64> = s.iter().zip(&scale).map(|(a, sc)| a * sc).collect();
        let t = matvec(&shat);
        omega = dot(&t, &s) / dot(&t, &t).max(1e-300);
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm2(&r) / bnorm < tol {
            return Ok(x);
        }
    }
    Err(SolveError::IterativeStall { iters: max_iters, residual: norm2(&r) / bnorm })
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, kl: usize, ku: usize, rng: &mut ChaCha8Rng) -> BandMatrix {
        let mut m = BandMatrix::zeros(n, kl, ku);
        for i in 0..n {
            let lo = i.saturating_sub(ku);
            let hi = (i + kl).min(n - 1);
            for j in lo..=hi {
                if j <= i + ku && i <= j + kl {
                    m.add(i, j, rng.gen_range(-1.0..1.0));
                }
            }
            // diagonally dominant-ish so it is never singular
            let d = m.get(i, i);
            m.set(i, i, d + 4.0 * d.signum().max(0.5) + 4.0);
        }
        m
    }

    #[test]
    fn band_lu_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, kl, ku) in &[(1usize, 0usize, 0usize), (5, 1, 2), (12, 3, 3), (30, 5, 7), (64, 9, 4)] {
            let m = random_band(n, kl, ku, &mut rng);
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lu = m.factor().unwrap();
            let x = lu.solve(&b);
            let dense = DenseLu::factor(&m.to_dense()).unwrap();
            let xd = dense.solve(&b);
            for i in 0..n {
                assert!((x[i] - xd[i]).abs() < 1e-9, "n={n} i={i}: {} vs {}", x[i], xd[i]);
            }
            // residual contract
            let r = m.matvec(&x);
            let res: f64 = r.iter().zip(&b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            assert!(res <= 1e-9 * norm2(&b).max(1e-300));
        }
    }

    #[test]
    fn band_transpose_solve_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(n, kl, ku) in &[(4usize, 1usize, 1usize), (20, 4, 6), (33, 7, 2)] {
            let m = random_band(n, kl, ku, &mut rng);
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lu = m.factor().unwrap();
            let x = lu.solve_transpose(&b);
            let dense = DenseLu::factor(&m.to_dense()).unwrap();
            let xd = dense.solve_transpose(&b);
            for i in 0..n {
                assert!((x[i] - xd[i]).abs() < 1e-9);
            }
            let r = m.matvec_transpose(&x);
            let res: f64 = r.iter().zip(&b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            assert!(res <= 1e-9 * norm2(&b).max(1e-300));
        }
    }

    /// Tiny diagonals force row swaps at nearly every elimination step;
    /// the transpose path must interleave swaps with the Lᵀ solves.
    fn random_pivoting_band(n: usize, kl: usize, ku: usize, rng: &mut ChaCha8Rng) -> BandMatrix {
        let mut m = BandMatrix::zeros(n, kl, ku);
        for i in 0..n {
            let lo = i.saturating_sub(ku);
            let hi = (i + kl).min(n - 1);
            for j in lo..=hi {
                if j <= i + ku && i <= j + kl {
                    m.add(i, j, rng.gen_range(-1.0..1.0));
                }
            }
            let d = m.get(i, i);
            m.set(i, i, d * 1e-3);
        }
        m
    }

    #[test]
    fn transpose_solve_with_heavy_pivoting_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(313);
        for &(n, kl, ku) in &[(6usize, 2usize, 2usize), (24, 5, 5), (40, 8, 3), (40, 3, 8)] {
            for _ in 0..5 {
                let m = random_pivoting_band(n, kl, ku, &mut rng);
                let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let lu = match m.factor() {
                    Ok(f) => f,
                    Err(_) => continue,
                };
                let dense = DenseLu::factor(&m.to_dense()).unwrap();
                let xn = norm2(&dense.solve(&b)).max(1.0);
                let x = lu.solve(&b);
                let xd = dense.solve(&b);
                for i in 0..n {
                    assert!((x[i] - xd[i]).abs() < 1e-6 * xn, "forward n={n} i={i}");
                }
                let y = lu.solve_transpose(&b);
                let yd = dense.solve_transpose(&b);
                let yn = norm2(&yd).max(1.0);
                for i in 0..n {
                    assert!(
                        (y[i] - yd[i]).abs() < 1e-6 * yn,
                        "transpose n={n} i={i}: {} vs {}",
                        y[i],
                        yd[i]
                    );
                }
                // residual of the transpose solve against the matrix itself
                let r = m.matvec_transpose(&y);
                let res: f64 =
                    r.iter().zip(&b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                assert!(res <= 1e-8 * norm2(&b).max(1e-300) * yn.max(1.0));
            }
        }
    }

    #[test]
    fn transpose_solve_adjoint_identity() {
        // uᵀ(A⁻¹ v) == (A⁻ᵀ u)ᵀ v
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_band(25, 4, 4, &mut rng);
        let lu = m.factor().unwrap();
        for _ in 0..10 {
            let u: Vec<f64> = (0..25).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..25).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lhs = dot(&u, &lu.solve(&v));
            let rhs = dot(&lu.solve_transpose(&u), &v);
            assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn identity_solve_is_rhs() {
        let mut m = BandMatrix::zeros(6, 1, 1);
        for i in 0..6 {
            m.set(i, i, 1.0);
        }
        let b = vec![3.0, -1.0, 0.5, 2.0, 0.0, 9.0];
        let lu = m.factor().unwrap();
        assert_eq!(lu.solve(&b), b);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut m = BandMatrix::zeros(3, 1, 1);
        m.set(0, 0, 1.0);
        m.set(2, 2, 1.0);
        // row 1 entirely zero
        match m.factor() {
            Err(SolveError::Singular { col, .. }) => assert_eq!(col, 1),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn bicgstab_agrees_with_direct_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = random_band(40, 5, 5, &mut rng);
        let b: Vec<f64> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let diag: Vec<f64> = (0..40).map(|i| m.get(i, i)).collect();
        let x = bicgstab(&|v| m.matvec(v), &diag, &b, 1e-12, 400).unwrap();
        let xd = m.factor().unwrap().solve(&b);
        for i in 0..40 {
            assert!((x[i] - xd[i]).abs() < 1e-8);
        }
    }
}
