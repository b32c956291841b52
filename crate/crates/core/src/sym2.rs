//! Symmetric 2x2 tensors in chart components, plus a small dense
//! eigenvalue routine for Gram matrices.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

/// Symmetric 2x2 tensor with components (xx, xy, yy).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 {
        xx: 0.0,
        xy: 0.0,
        yy: 0.0,
    };

    pub fn new(xx: f64, xy: f64, yy: f64) -> Sym2 {
        Sym2 { xx, xy, yy }
    }

    pub fn diag(a: f64, b: f64) -> Sym2 {
        Sym2 {
            xx: a,
            xy: 0.0,
            yy: b,
        }
    }

    pub fn identity() -> Sym2 {
        Sym2::diag(1.0, 1.0)
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    /// Eigenvalues in ascending order, computed in the shifted stable form.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let m = 0.5 * self.trace();
        let d = 0.5 * (self.xx - self.yy);
        let r = (d * d + self.xy * self.xy).sqrt();
        (m - r, m + r)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.xx > 0.0 && self.det() > 0.0
    }

    pub fn inverse(&self) -> Option<Sym2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Sym2 {
            xx: self.yy / det,
            xy: -self.xy / det,
            yy: self.xx / det,
        })
    }

    /// v^T S v.
    pub fn quad(&self, vx: f64, vy: f64) -> f64 {
        self.xx * vx * vx + 2.0 * self.xy * vx * vy + self.yy * vy * vy
    }

    /// Matrix-vector product S v.
    pub fn apply(&self, vx: f64, vy: f64) -> (f64, f64) {
        (self.xx * vx + self.xy * vy, self.xy * vx + self.yy * vy)
    }

    /// J^T S J for a general real 2x2 matrix J = [[j11, j12], [j21, j22]]:
    /// the pullback of a covariant 2-tensor under a map with Jacobian J.
    pub fn congruent(&self, j11: f64, j12: f64, j21: f64, j22: f64) -> Sym2 {
        let s1x = self.xx * j11 + self.xy * j21;
        let s1y = self.xy * j11 + self.yy * j21;
        let s2x = self.xx * j12 + self.xy * j22;
        let s2y = self.xy * j12 + self.yy * j22;
        Sym2 {
            xx: j11 * s1x + j21 * s1y,
            xy: j11 * s2x + j21 * s2y,
            yy: j12 * s2x + j22 * s2y,
        }
    }

    /// Pullback under a holomorphic map with complex derivative d = p + iq,
    /// whose real Jacobian is [[p, -q], [q, p]].
    pub fn conformal_pullback(&self, d: Complex64) -> Sym2 {
        self.congruent(d.re, -d.im, d.im, d.re)
    }

    /// Frobenius inner product <S, T> = sum_ab S_ab T_ab.
    pub fn dot(&self, rhs: &Sym2) -> f64 {
        self.xx * rhs.xx + 2.0 * self.xy * rhs.xy + self.yy * rhs.yy
    }
}

impl Add for Sym2 {
    type Output = Sym2;
    fn add(self, rhs: Sym2) -> Sym2 {
        Sym2::new(self.xx + rhs.xx, self.xy + rhs.xy, self.yy + rhs.yy)
    }
}

impl Sub for Sym2 {
    type Output = Sym2;
    fn sub(self, rhs: Sym2) -> Sym2 {
        Sym2::new(self.xx - rhs.xx, self.xy - rhs.xy, self.yy - rhs.yy)
    }
}

impl Mul<f64> for Sym2 {
    type Output = Sym2;
    fn mul(self, s: f64) -> Sym2 {
        Sym2::new(self.xx * s, self.xy * s, self.yy * s)
    }
}

impl Neg for Sym2 {
    type Output = Sym2;
    fn neg(self) -> Sym2 {
        Sym2::new(-self.xx, -self.xy, -self.yy)
    }
}

/// Eigenvalues of a small dense symmetric matrix (row-major n x n) by cyclic
/// Jacobi rotations. The matrix is destroyed. Ascending order.
pub fn jacobi_eigenvalues(a: &mut [f64], n: usize) -> Vec<f64> {
    assert_eq!(a.len(), n * n);
    let idx = |i: usize, j: usize| i * n + j;
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[idx(i, j)] * a[idx(i, j)];
            }
        }
        let diag: f64 = (0..n).map(|i| a[idx(i, i)] * a[idx(i, i)]).sum();
        if off <= 1e-30 * diag.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[idx(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[idx(q, q)] - a[idx(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[idx(k, p)];
                    let akq = a[idx(k, q)];
                    a[idx(k, p)] = c * akp - s * akq;
                    a[idx(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[idx(p, k)];
                    let aqk = a[idx(q, k)];
                    a[idx(p, k)] = c * apk - s * aqk;
                    a[idx(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[idx(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    eig
}
