//! The reference metric rho = e^{2f}(dx^2 + dy^2) with Gauss curvature -1/2.

use num_complex::Complex64;

/// Conformal disk metric e^{2f} = 8/(1-|z|^2)^2.
#[derive(Debug, Clone, Copy, Default)]
pub struct RhoMetric;

impl RhoMetric {
    /// Conformal factor e^{2f}.
    pub fn e2f(&self, z: Complex64) -> f64 {
        let s = 1.0 - z.norm_sqr();
        8.0 / (s * s)
    }

    /// Gradient (f_1, f_2) of f = log(2 sqrt 2) - log(1-|z|^2).
    pub fn f_grad(&self, z: Complex64) -> (f64, f64) {
        let s = 1.0 - z.norm_sqr();
        (2.0 * z.re / s, 2.0 * z.im / s)
    }

    /// Geodesic distance: sqrt(2) times the curvature -1 disk distance.
    pub fn distance(&self, z1: Complex64, z2: Complex64) -> f64 {
        let w = (z1 - z2) / (Complex64::new(1.0, 0.0) - z2.conj() * z1);
        2.0 * std::f64::consts::SQRT_2 * w.norm().atanh()
    }

    /// Area of the closed quotient surface: Gauss-Bonnet with chi = -2, K = -1/2.
    pub fn total_area(&self) -> f64 {
        8.0 * std::f64::consts::PI
    }

    /// Injectivity radius of the Bolza quotient: half the systole,
    /// sqrt(2) * arccosh(1 + sqrt 2).
    pub fn injectivity_radius(&self) -> f64 {
        std::f64::consts::SQRT_2 * (1.0 + std::f64::consts::SQRT_2).acosh()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn curvature_is_minus_half() {
        // K = -e^{-2f} (f_xx + f_yy), checked by finite differences of f_grad.
        let rho = RhoMetric;
        let eps = 1e-5;
        for &(x, y) in &[(0.0, 0.0), (0.3, 0.1), (-0.5, 0.4), (0.7, 0.2)] {
            let fx_p = rho.f_grad(Complex64::new(x + eps, y)).0;
            let fx_m = rho.f_grad(Complex64::new(x - eps, y)).0;
            let fy_p = rho.f_grad(Complex64::new(x, y + eps)).1;
            let fy_m = rho.f_grad(Complex64::new(x, y - eps)).1;
            let lap_f = (fx_p - fx_m + fy_p - fy_m) / (2.0 * eps);
            let k = -lap_f / rho.e2f(Complex64::new(x, y));
            assert_relative_eq!(k, -0.5, max_relative = 1e-8);
        }
    }

    #[test]
    fn distance_from_origin() {
        // d(0, r) = 2 sqrt2 atanh r; spot value r = 0.5.
        let rho = RhoMetric;
        let d = rho.distance(Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.0));
        assert_relative_eq!(d, 2.0 * std::f64::consts::SQRT_2 * 0.5f64.atanh(), epsilon = 1e-15);
    }

    #[test]
    fn distance_small_separation_matches_metric() {
        // d(z, z+dz) ~ e^{f} |dz| for small |dz|.
        let rho = RhoMetric;
        let z = Complex64::new(0.4, -0.2);
        let dz = Complex64::new(3e-7, 4e-7);
        let d = rho.distance(z, z + dz);
        let ef = rho.e2f(z).sqrt();
        assert_relative_eq!(d, ef * dz.norm(), max_relative = 1e-5);
    }
}
