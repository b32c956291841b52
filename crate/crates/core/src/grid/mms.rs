//! Manufactured solution on the Dirichlet patch: an analytic source is added
//! so a chosen profile solves the full nonlinear equation exactly, turning
//! discretization error into a measurable quantity.

use super::patch::PatchGrid;
use crate::error::CoreError;
use crate::rho::RhoMetric;
use num_complex::Complex64;

/// The manufactured profile u* = 1 + A (1 - |z|^2/r^2)^2: boundary value 1,
/// vanishing normal derivative at the rim, curved enough to exercise the
/// Hessian nonlinearity.
#[derive(Debug, Clone, Copy)]
pub struct MmsProblem {
    pub r_patch: f64,
    pub amplitude: f64,
}

/// Analytic derivatives of the profile at a point.
#[derive(Debug, Clone, Copy)]
pub struct MmsJet {
    pub u: f64,
    pub ux: f64,
    pub uy: f64,
    pub uxx: f64,
    pub uxy: f64,
    pub uyy: f64,
}

impl MmsProblem {
    pub fn standard(r_patch: f64) -> MmsProblem {
        MmsProblem {
            r_patch,
            amplitude: 0.1,
        }
    }

    pub fn exact(&self, z: Complex64) -> f64 {
        let s = z.norm_sqr() / (self.r_patch * self.r_patch);
        1.0 + self.amplitude * (1.0 - s) * (1.0 - s)
    }

    pub fn jet(&self, z: Complex64) -> MmsJet {
        let r2 = self.r_patch * self.r_patch;
        let s = z.norm_sqr() / r2;
        let sx = 2.0 * z.re / r2;
        let sy = 2.0 * z.im / r2;
        let a = self.amplitude;
        MmsJet {
            u: 1.0 + a * (1.0 - s) * (1.0 - s),
            ux: -2.0 * a * (1.0 - s) * sx,
            uy: -2.0 * a * (1.0 - s) * sy,
            uxx: 2.0 * a * sx * sx - 4.0 * a * (1.0 - s) / r2,
            uxy: 2.0 * a * sx * sy,
            uyy: 2.0 * a * sy * sy - 4.0 * a * (1.0 - s) / r2,
        }
    }

    /// Continuum residual of the zero-seed equation at the exact profile:
    /// F[u*] = (u*_{,11}+u*_{,22}) - e^{2f} u* + sqrt(e^{4f} + X^2 + Y^2).
    /// The manufactured source is its negative, so u* solves F + S = 0.
    pub fn source(&self, z: Complex64) -> f64 {
        let rho = RhoMetric;
        let e2f = rho.e2f(z);
        let (f1, f2) = rho.f_grad(z);
        let j = self.jet(z);
        let radial = f1 * j.ux - f2 * j.uy;
        let cross = f1 * j.uy + f2 * j.ux;
        let h11 = j.uxx - radial;
        let h22 = j.uyy + radial;
        let h12 = j.uxy - cross;
        let x = -(h11 - h22);
        let y = -2.0 * h12;
        let w = (e2f * e2f + x * x + y * y).sqrt();
        -((j.uxx + j.uyy) - e2f * j.u + w)
    }

    /// Patch whose Dirichlet data is the exact profile.
    pub fn patch(&self, h: f64) -> Result<PatchGrid, CoreError> {
        PatchGrid::build(self.r_patch, h, |z| self.exact(z))
    }
}

/// Least observed convergence order across consecutive halvings.
pub fn observed_order(errors: &[f64]) -> f64 {
    errors
        .windows(2)
        .map(|w| (w[0] / w[1]).log2())
        .fold(f64::INFINITY, f64::min)
}
