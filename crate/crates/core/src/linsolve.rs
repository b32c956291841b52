//! Sparse linear algebra for the Newton steps: CSR storage, a pivoted band
//! LU used as preconditioner, and full-memory GMRES. The Jacobian is a
//! nine-point band plus scattered far entries where ghost elimination couples
//! opposite octagon sides; the band factors fast and GMRES mops up the rest.

use crate::error::CoreError;

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Assemble from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(u32, u32, f64)]) -> Result<CsrMatrix, CoreError> {
        for &(r, c, _) in triplets {
            if r as usize >= n || c as usize >= n {
                return Err(CoreError::LinearSolve {
                    reason: format!("triplet ({r},{c}) outside {n}x{n}"),
                });
            }
        }
        let mut order: Vec<u32> = (0..triplets.len() as u32).collect();
        order.sort_unstable_by_key(|&k| {
            let (r, c, _) = triplets[k as usize];
            ((r as u64) << 32) | c as u64
        });
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols: Vec<u32> = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut prev: Option<(u32, u32)> = None;
        for &k in &order {
            let (r, c, v) = triplets[k as usize];
            if prev == Some((r, c)) {
                *vals.last_mut().expect("merge follows a push") += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r as usize + 1] = cols.len();
                prev = Some((r, c));
            }
        }
        // rows with no entries inherit the previous offset
        for i in 0..n {
            if row_ptr[i + 1] < row_ptr[i] {
                row_ptr[i + 1] = row_ptr[i];
            }
        }
        Ok(CsrMatrix {
            n,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.cols[lo..hi], &self.vals[lo..hi])
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c as usize];
            }
            y[i] = acc;
        }
    }
}

/// Band LU with partial pivoting, LAPACK-style storage: entry (i, j) lives at
/// ab[j * ldab + kl + ku + i - j], the top kl slots per column are pivot fill.
#[derive(Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<u32>,
}

impl BandLu {
    /// Factor the within-band part of a CSR matrix. Entries with
    /// |i - j| > bandwidth are ignored (they stay with GMRES).
    pub fn factor_banded_part(a: &CsrMatrix, bandwidth: usize) -> Result<BandLu, CoreError> {
        let n = a.n();
        let kl = bandwidth.min(n.saturating_sub(1));
        let ku = kl;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ldab * n];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (c, v) in cols.iter().zip(vals) {
                let j = *c as usize;
                if i.abs_diff(j) <= kl {
                    ab[j * ldab + kl + ku + i - j] = *v;
                }
            }
        }
        let mut ipiv = vec![0u32; n];
        for j in 0..n {
            let pmax = (j + kl).min(n - 1);
            let mut piv_row = j;
            let mut piv_val = ab[j * ldab + kl + ku].abs();
            for i in (j + 1)..=pmax {
                let v = ab[j * ldab + kl + ku + i - j].abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = i;
                }
            }
            if piv_val == 0.0 {
                return Err(CoreError::LinearSolve {
                    reason: format!("band factor: zero pivot at column {j}"),
                });
            }
            ipiv[j] = piv_row as u32;
            let cmax = (j + kl + ku).min(n - 1);
            if piv_row != j {
                for c in j..=cmax {
                    ab.swap(c * ldab + kl + ku + j - c, c * ldab + kl + ku + piv_row - c);
                }
            }
            let diag = ab[j * ldab + kl + ku];
            for i in (j + 1)..=pmax {
                let m = ab[j * ldab + kl + ku + i - j] / diag;
                ab[j * ldab + kl + ku + i - j] = m;
                if m != 0.0 {
                    for c in (j + 1)..=cmax {
                        let u = ab[c * ldab + kl + ku + j - c];
                        if u != 0.0 {
                            ab[c * ldab + kl + ku + i - c] -= m * u;
                        }
                    }
                }
            }
        }
        Ok(BandLu {
            n,
            kl,
            ku,
            ldab,
            ab,
            ipiv,
        })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        let (kl, ku, ldab) = (self.kl, self.ku, self.ldab);
        for j in 0..self.n {
            let p = self.ipiv[j] as usize;
            if p != j {
                b.swap(j, p);
            }
            let imax = (j + kl).min(self.n - 1);
            let bj = b[j];
            if bj != 0.0 {
                for i in (j + 1)..=imax {
                    b[i] -= self.ab[j * ldab + kl + ku + i - j] * bj;
                }
            }
        }
        for j in (0..self.n).rev() {
            let x = b[j] / self.ab[j * ldab + kl + ku];
            b[j] = x;
            if x != 0.0 {
                let imin = j.saturating_sub(kl + ku);
                for i in imin..j {
                    b[i] -= self.ab[j * ldab + kl + ku + i - j] * x;
                }
            }
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Left-preconditioned GMRES without restarts. Deterministic; errors if the
/// relative residual does not reach `tol` within `max_iter` Krylov vectors.
pub fn gmres(
    a: &CsrMatrix,
    pre: &BandLu,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, CoreError> {
    let n = a.n();
    debug_assert_eq!(b.len(), n);
    let mut pb = b.to_vec();
    pre.solve_in_place(&mut pb);
    let beta = norm2(&pb);
    if !beta.is_finite() {
        return Err(CoreError::LinearSolve {
            reason: "preconditioned rhs is not finite".into(),
        });
    }
    if beta == 0.0 {
        return Ok(vec![0.0; n]);
    }

    let mut basis: Vec<Vec<f64>> = vec![pb.iter().map(|v| v / beta).collect()];
    let mut hess: Vec<Vec<f64>> = Vec::new(); // column k holds h[0..=k+1]
    let mut cs: Vec<f64> = Vec::new();
    let mut sn: Vec<f64> = Vec::new();
    let mut g = vec![beta];

    let mut scratch = vec![0.0; n];
    for k in 0..max_iter {
        a.matvec(&basis[k], &mut scratch);
        let mut w = scratch.clone();
        pre.solve_in_place(&mut w);
        let mut h = vec![0.0; k + 2];
        for (j, q) in basis.iter().enumerate() {
            let dot: f64 = q.iter().zip(&w).map(|(a, b)| a * b).sum();
            h[j] = dot;
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= dot * qi;
            }
        }
        h[k + 1] = norm2(&w);
        // apply accumulated rotations to the new column
        for j in 0..k {
            let t = cs[j] * h[j] + sn[j] * h[j + 1];
            h[j + 1] = -sn[j] * h[j] + cs[j] * h[j + 1];
            h[j] = t;
        }
        let r = (h[k] * h[k] + h[k + 1] * h[k + 1]).sqrt();
        let (c, s) = if r == 0.0 { (1.0, 0.0) } else { (h[k] / r, h[k + 1] / r) };
        cs.push(c);
        sn.push(s);
        h[k] = r;
        let lofre = h[k + 1];
        h[k + 1] = 0.0;
        g.push(-s * g[k]);
        g[k] *= c;
        let happy = lofre == 0.0;
        hess.push(h);

        let rel = g[k + 1].abs() / beta;
        if rel <= tol || happy || k + 1 == max_iter {
            if rel > tol && !happy {
                return Err(CoreError::LinearSolve {
                    reason: format!(
                        "gmres stalled at relative residual {rel:.3e} after {} iterations",
                        k + 1
                    ),
                });
            }
            // back-substitute y from the triangular system, x = V y
            let m = k + 1;
            let mut y = vec![0.0; m];
            for i in (0..m).rev() {
                let mut acc = g[i];
                for j in (i + 1)..m {
                    acc -= hess[j][i] * y[j];
                }
                if hess[i][i] == 0.0 {
                    return Err(CoreError::LinearSolve {
                        reason: format!("gmres breakdown: singular projected system at {i}"),
                    });
                }
                y[i] = acc / hess[i][i];
            }
            let mut x = vec![0.0; n];
            for (j, yj) in y.iter().enumerate() {
                for (xi, qi) in x.iter_mut().zip(&basis[j]) {
                    *xi += yj * qi;
                }
            }
            return Ok(x);
        }
        let hk1 = lofre;
        basis.push(w.iter().map(|v| v / hk1).collect());
    }
    unreachable!("loop exits through the residual branch");
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for j in 0..n {
            let p = (j..n).max_by(|&x, &y| a[x][j].abs().total_cmp(&a[y][j].abs())).unwrap();
            a.swap(j, p);
            b.swap(j, p);
            for i in (j + 1)..n {
                let m = a[i][j] / a[j][j];
                for c in j..n {
                    a[i][c] -= m * a[j][c];
                }
                b[i] -= m * b[j];
            }
        }
        for j in (0..n).rev() {
            b[j] /= a[j][j];
            for i in 0..j {
                b[i] -= a[i][j] * b[j];
            }
        }
        b
    }

    fn random_band_csr(
        rng: &mut ChaCha8Rng,
        n: usize,
        bw: usize,
        diag_boost: f64,
    ) -> (CsrMatrix, Vec<Vec<f64>>) {
        let mut trip = Vec::new();
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i.saturating_sub(bw)..=(i + bw).min(n - 1) {
                let v = if i == j {
                    diag_boost + rng.gen_range(0.5..1.5)
                } else {
                    rng.gen_range(-0.4..0.4)
                };
                trip.push((i as u32, j as u32, v));
                dense[i][j] = v;
            }
        }
        (CsrMatrix::from_triplets(n, &trip).unwrap(), dense)
    }

    #[test]
    fn csr_sums_duplicates_and_multiplies() {
        let a = CsrMatrix::from_triplets(
            3,
            &[(0, 0, 1.0), (0, 0, 2.0), (1, 2, 4.0), (2, 1, -1.0), (1, 0, 0.5)],
        )
        .unwrap();
        assert_eq!(a.nnz(), 4);
        let mut y = vec![0.0; 3];
        a.matvec(&[1.0, 2.0, 3.0], &mut y);
        assert_eq!(y, vec![3.0, 12.5, -2.0]);
    }

    #[test]
    fn band_lu_matches_dense_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(n, bw) in &[(12usize, 2usize), (40, 5), (77, 9)] {
            let (a, dense) = random_band_csr(&mut rng, n, bw, 1.0);
            let lu = BandLu::factor_banded_part(&a, bw).unwrap();
            let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let mut x = b.clone();
            lu.solve_in_place(&mut x);
            let want = dense_solve(dense, b);
            for (got, want) in x.iter().zip(&want) {
                assert!((got - want).abs() <= 1e-10 * (1.0 + want.abs()));
            }
        }
    }

    #[test]
    fn band_lu_pivots_through_zero_diagonal() {
        // leading diagonal entry is zero; partial pivoting must swap
        let trip = vec![
            (0u32, 0u32, 0.0),
            (0, 1, 2.0),
            (1, 0, 3.0),
            (1, 1, 1.0),
            (1, 2, 1.0),
            (2, 1, -1.0),
            (2, 2, 2.0),
        ];
        let a = CsrMatrix::from_triplets(3, &trip).unwrap();
        let lu = BandLu::factor_banded_part(&a, 1).unwrap();
        let mut x = vec![4.0, 7.0, 1.0];
        lu.solve_in_place(&mut x);
        // verify A x = b
        let mut y = vec![0.0; 3];
        a.matvec(&x, &mut y);
        for (yi, bi) in y.iter().zip(&[4.0, 7.0, 1.0]) {
            assert!((yi - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_band_is_reported() {
        let trip = vec![(0u32, 0u32, 1.0), (1, 1, 0.0)];
        let a = CsrMatrix::from_triplets(2, &trip).unwrap();
        assert!(matches!(
            BandLu::factor_banded_part(&a, 0),
            Err(CoreError::LinearSolve { .. })
        ));
    }

    #[test]
    fn gmres_solves_band_plus_far_coupling() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 120;
        let bw = 6;
        let (_, mut dense) = random_band_csr(&mut rng, n, bw, 2.0);
        // sprinkle far entries that the band preconditioner cannot see
        for _ in 0..30 {
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            dense[i][j] += rng.gen_range(-0.3..0.3);
        }
        let mut trip = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if dense[i][j] != 0.0 {
                    trip.push((i as u32, j as u32, dense[i][j]));
                }
            }
        }
        let a = CsrMatrix::from_triplets(n, &trip).unwrap();
        let pre = BandLu::factor_banded_part(&a, bw).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let x = gmres(&a, &pre, &b, 1e-12, 200).unwrap();
        let mut r = vec![0.0; n];
        a.matvec(&x, &mut r);
        let res = r
            .iter()
            .zip(&b)
            .map(|(ri, bi)| (ri - bi) * (ri - bi))
            .sum::<f64>()
            .sqrt();
        assert!(res <= 1e-9 * norm2(&b), "true residual {res}");

        let again = gmres(&a, &pre, &b, 1e-12, 200).unwrap();
        assert_eq!(x, again, "gmres must be deterministic");
    }

    #[test]
    fn gmres_reports_stall() {
        // identity preconditioner on a rotation-like system with tiny budget
        let trip = vec![(0u32, 1u32, 1.0), (1, 0, -1.0), (0, 0, 1e-3), (1, 1, 1e-3)];
        let a = CsrMatrix::from_triplets(2, &trip).unwrap();
        let pre = BandLu::factor_banded_part(&a, 0).unwrap();
        let r = gmres(&a, &pre, &[1.0, 1.0], 1e-14, 1);
        assert!(matches!(r, Err(CoreError::LinearSolve { .. })));
    }
}
