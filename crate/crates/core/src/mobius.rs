//! Points of the unit disk and its orientation-preserving isometries.
//!
//! An isometry is stored as the SU(1,1) matrix [[a, b], [conj(b), conj(a)]]
//! with |a|^2 - |b|^2 = 1, acting by z -> (a z + b)/(conj(b) z + conj(a)).
//! The matrices M and -M give the same map; `canonical` fixes the sign.

use crate::error::CoreError;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const UNIT_DET_TOL: f64 = 1e-12;

/// A point of the open unit disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskPoint {
    x: f64,
    y: f64,
}

impl DiskPoint {
    pub fn new(x: f64, y: f64) -> Result<Self, CoreError> {
        if !(x * x + y * y < 1.0) {
            return Err(CoreError::PointOutsideDisk { x, y });
        }
        Ok(Self { x, y })
    }

    pub fn from_complex(z: Complex64) -> Result<Self, CoreError> {
        Self::new(z.re, z.im)
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }
}

/// Disk isometry z -> (a z + b)/(conj(b) z + conj(a)), |a|^2 - |b|^2 = 1.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MobiusMap {
    a: Complex64,
    b: Complex64,
}

impl MobiusMap {
    pub const IDENTITY: MobiusMap = MobiusMap {
        a: Complex64::new(1.0, 0.0),
        b: Complex64::new(0.0, 0.0),
    };

    /// Builds from matrix entries, rejecting matrices away from SU(1,1).
    pub fn new(a: Complex64, b: Complex64) -> Result<Self, CoreError> {
        let det = a.norm_sqr() - b.norm_sqr();
        let defect = (det - 1.0).abs();
        if defect > UNIT_DET_TOL {
            return Err(CoreError::NotUnitDeterminant { defect });
        }
        Ok(Self { a, b })
    }

    /// Entries without the determinant check; used internally where the
    /// invariant is restored by `renormalize`.
    pub(crate) fn new_unchecked(a: Complex64, b: Complex64) -> Self {
        Self { a, b }
    }

    pub fn a(&self) -> Complex64 {
        self.a
    }

    pub fn b(&self) -> Complex64 {
        self.b
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.b.conj() * z + self.a.conj())
    }

    /// Complex derivative dm/dz = 1/(conj(b) z + conj(a))^2.
    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let den = self.b.conj() * z + self.a.conj();
        (den * den).finv()
    }

    pub fn inverse(&self) -> MobiusMap {
        MobiusMap {
            a: self.a.conj(),
            b: -self.b,
        }
    }

    /// Matrix product; `self.compose(&g)` applies g first. The product is
    /// rescaled onto |a|^2 - |b|^2 = 1 so long words do not drift.
    pub fn compose(&self, rhs: &MobiusMap) -> MobiusMap {
        let a = self.a * rhs.a + self.b * rhs.b.conj();
        let b = self.a * rhs.b + self.b * rhs.a.conj();
        MobiusMap { a, b }.renormalize()
    }

    fn renormalize(self) -> MobiusMap {
        let det = self.a.norm_sqr() - self.b.norm_sqr();
        let s = 1.0 / det.sqrt();
        MobiusMap {
            a: self.a * s,
            b: self.b * s,
        }
    }

    /// Sign-normalized representative of {M, -M}: Re a > 0, ties broken by Im a.
    pub fn canonical(&self) -> MobiusMap {
        if self.a.re < 0.0 || (self.a.re == 0.0 && self.a.im < 0.0) {
            MobiusMap {
                a: -self.a,
                b: -self.b,
            }
        } else {
            *self
        }
    }

    /// Entrywise distance between sign-normalized representatives.
    pub fn distance(&self, rhs: &MobiusMap) -> f64 {
        let p = self.canonical();
        let q = rhs.canonical();
        let direct = (p.a - q.a).norm() + (p.b - q.b).norm();
        let flipped = (p.a + q.a).norm() + (p.b + q.b).norm();
        direct.min(flipped)
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.distance(&MobiusMap::IDENTITY) <= tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rho::RhoMetric;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sample_map(t: f64, phi: f64, psi: f64) -> MobiusMap {
        // Translation by t along the axis at angle phi, then rotation by psi.
        let a = Complex64::new((t / 2.0).cosh(), 0.0);
        let b = Complex64::from_polar((t / 2.0).sinh(), phi);
        let rot = Complex64::from_polar(1.0, psi / 2.0);
        MobiusMap::new(a * rot, b * rot).unwrap()
    }

    #[test]
    fn identity_fixes_points() {
        let z = Complex64::new(0.3, -0.4);
        assert_abs_diff_eq!(MobiusMap::IDENTITY.apply(z).re, z.re, epsilon = 1e-15);
        assert_abs_diff_eq!(MobiusMap::IDENTITY.apply(z).im, z.im, epsilon = 1e-15);
    }

    #[test]
    fn determinant_guard_rejects() {
        let bad = MobiusMap::new(Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0));
        assert!(matches!(bad, Err(CoreError::NotUnitDeterminant { .. })));
    }

    #[test]
    fn disk_point_guard_rejects_boundary() {
        assert!(DiskPoint::new(1.0, 0.0).is_err());
        assert!(DiskPoint::new(0.8, 0.8).is_err());
        assert!(DiskPoint::new(0.8, 0.3).is_ok());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let m = sample_map(1.3, 0.7, 0.4);
        let z = Complex64::new(0.25, -0.35);
        let eps = 1e-6;
        // Complex-linear map: FD along both axes must agree with m'(z).
        let ddx = (m.apply(z + eps) - m.apply(z - eps)) / (2.0 * eps);
        let ddy = (m.apply(z + Complex64::new(0.0, eps)) - m.apply(z - Complex64::new(0.0, eps)))
            / Complex64::new(0.0, 2.0 * eps);
        let d = m.derivative(z);
        assert_abs_diff_eq!((ddx - d).norm(), 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!((ddy - d).norm(), 0.0, epsilon = 1e-8);
    }

    proptest! {
        #[test]
        fn inverse_round_trips(t in 0.0..2.5f64, phi in 0.0..std::f64::consts::TAU,
                               psi in 0.0..std::f64::consts::TAU,
                               zx in -0.6..0.6f64, zy in -0.6..0.6f64) {
            let m = sample_map(t, phi, psi);
            let z = Complex64::new(zx, zy);
            let back = m.inverse().apply(m.apply(z));
            prop_assert!((back - z).norm() < 1e-12);
        }

        #[test]
        fn composition_matches_pointwise(t1 in 0.0..2.0f64, p1 in 0.0..6.28f64,
                                         t2 in 0.0..2.0f64, p2 in 0.0..6.28f64,
                                         zx in -0.5..0.5f64, zy in -0.5..0.5f64) {
            let m1 = sample_map(t1, p1, 0.0);
            let m2 = sample_map(t2, p2, 0.0);
            let z = Complex64::new(zx, zy);
            let lhs = m1.compose(&m2).apply(z);
            let rhs = m1.apply(m2.apply(z));
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }

        #[test]
        fn chain_rule_holds(t1 in 0.0..2.0f64, p1 in 0.0..6.28f64,
                            t2 in 0.0..2.0f64, p2 in 0.0..6.28f64,
                            zx in -0.5..0.5f64, zy in -0.5..0.5f64) {
            let m1 = sample_map(t1, p1, 0.0);
            let m2 = sample_map(t2, p2, 0.0);
            let z = Complex64::new(zx, zy);
            let lhs = m1.compose(&m2).derivative(z);
            let rhs = m1.derivative(m2.apply(z)) * m2.derivative(z);
            prop_assert!((lhs - rhs).norm() < 1e-10 * rhs.norm().max(1.0));
        }

        #[test]
        fn preserves_hyperbolic_distance(t in 0.0..2.5f64, phi in 0.0..6.28f64,
                                         ax in -0.5..0.5f64, ay in -0.5..0.5f64,
                                         bx in -0.5..0.5f64, by in -0.5..0.5f64) {
            let m = sample_map(t, phi, 1.1);
            let rho = RhoMetric;
            let za = Complex64::new(ax, ay);
            let zb = Complex64::new(bx, by);
            let d0 = rho.distance(za, zb);
            let d1 = rho.distance(m.apply(za), m.apply(zb));
            prop_assert!((d0 - d1).abs() < 1e-11 * (1.0 + d0));
        }
    }
}
