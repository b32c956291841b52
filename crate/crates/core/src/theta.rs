//! Transverse-traceless seed fields from truncated Poincaré theta series.
//!
//! Theta_j(z) = sum_w (gamma_w z)^{2j} gamma_w'(z)^2 over group elements of
//! word length <= L approximates a basis of holomorphic quadratic
//! differentials (j = 0, 1, 2). The even monomial weights matter: quadratic
//! differentials in genus two are invariant under the hyperelliptic
//! involution, which this chart realizes as z -> -z, so any odd-weight series
//! converges to zero and would degenerate the basis. The seed tensor is the
//! real part of phi dz^2:
//!   z11 = 2 Re phi, z12 = -2 Im phi, z22 = -z11,
//! which is trace-free by construction and divergence-free up to the
//! truncation tail because phi is holomorphic up to that tail.

use crate::error::CoreError;
use crate::grid::{ScalarField, SurfaceGrid, SymTensorField};
use crate::group::ElementTable;
use crate::sym2::{jacobi_eigenvalues, Sym2};
use num_complex::Complex64;
use rand::Rng;

/// Basis series j (monomial weight 2j) at one point, summed level by level
/// in enumeration order (deterministic).
pub fn theta_point(table: &ElementTable, j: usize, z: Complex64) -> Complex64 {
    assert!(j <= 2);
    let mut acc = Complex64::new(0.0, 0.0);
    for g in table.all() {
        let den = g.b().conj() * z + g.a().conj();
        let inv = den.finv();
        let image = (g.a() * z + g.b()) * inv;
        let i2 = image * image;
        let dsq = (inv * inv) * (inv * inv);
        let weight = match j {
            0 => Complex64::new(1.0, 0.0),
            1 => i2,
            _ => i2 * i2,
        };
        acc += weight * dsq;
    }
    acc
}

/// The three basis series evaluated at every interior node of a grid.
#[derive(Debug)]
pub struct ThetaCache {
    depth: usize,
    theta: [Vec<Complex64>; 3],
}

impl ThetaCache {
    pub fn build(grid: &SurfaceGrid, table: &ElementTable) -> ThetaCache {
        let n = grid.n_interior();
        let mut theta = [
            vec![Complex64::new(0.0, 0.0); n],
            vec![Complex64::new(0.0, 0.0); n],
            vec![Complex64::new(0.0, 0.0); n],
        ];
        for i in 0..n {
            let z = grid.node(i);
            for g in table.all() {
                let den = g.b().conj() * z + g.a().conj();
                let inv = den.finv();
                let image = (g.a() * z + g.b()) * inv;
                let im2 = image * image;
                let iv2 = inv * inv;
                let dsq = iv2 * iv2;
                theta[0][i] += dsq;
                theta[1][i] += im2 * dsq;
                theta[2][i] += im2 * im2 * dsq;
            }
        }
        ThetaCache {
            depth: table.depth(),
            theta,
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn theta(&self, m: usize) -> &[Complex64] {
        &self.theta[m]
    }

    pub fn len(&self) -> usize {
        self.theta[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta[0].is_empty()
    }
}

/// A seed tensor on a grid: the coefficients that built it, its components
/// at interior nodes, and its reported size `sup_norm`, the sup over octagon
/// nodes of sqrt2 |z|_rho. In these units the one-seed solution band is
/// 1 <= u <= 1 + sup_norm/sqrt2.
#[derive(Debug, Clone)]
pub struct TtField {
    pub coeffs: [f64; 6],
    pub tensor: SymTensorField,
    pub sup_norm: f64,
}

/// |z|_rho at one node: e^{-2f} sqrt(2 (z11^2 + z12^2)) for trace-free z.
pub(crate) fn rho_norm(e2f: f64, t: Sym2) -> f64 {
    (2.0 * (t.xx * t.xx + t.xy * t.xy)).sqrt() / e2f
}

impl TtField {
    /// The same seed at amplitude `a`; every derived quantity is
    /// 1-homogeneous in the coefficients.
    pub fn scaled(&self, a: f64) -> TtField {
        TtField {
            coeffs: self.coeffs.map(|c| a * c),
            tensor: self.tensor.scale(a),
            sup_norm: self.sup_norm * a.abs(),
        }
    }

    /// Wrap an already-assembled tensor (for example one recovered by the
    /// inverse map), computing its reported sup-norm on the grid. The
    /// coefficients are carried through as a label only.
    pub fn from_tensor(grid: &SurfaceGrid, coeffs: [f64; 6], tensor: SymTensorField) -> TtField {
        let mut sup = 0.0f64;
        for i in 0..grid.n_interior() {
            if grid.quad_weight(i) > 0.0 {
                sup = sup
                    .max(std::f64::consts::SQRT_2 * rho_norm(grid.rho_at(i).0, tensor.at(i)));
            }
        }
        TtField {
            coeffs,
            tensor,
            sup_norm: sup,
        }
    }
}

/// Combine the cached series with three complex coefficients
/// (coeffs[2j] + i coeffs[2j+1]) on Theta_j.
pub fn assemble_tt(grid: &SurfaceGrid, cache: &ThetaCache, coeffs: [f64; 6]) -> TtField {
    assert_eq!(cache.len(), grid.n_interior());
    let n = grid.n_interior();
    let mut tensor = SymTensorField::zeros(n);
    let mut sup = 0.0f64;
    for i in 0..n {
        let mut phi = Complex64::new(0.0, 0.0);
        for j in 0..3 {
            let c = Complex64::new(coeffs[2 * j], coeffs[2 * j + 1]);
            phi += c * cache.theta[j][i];
        }
        let t = Sym2::new(2.0 * phi.re, -2.0 * phi.im, -2.0 * phi.re);
        tensor.set(i, t);
        if grid.quad_weight(i) > 0.0 {
            sup = sup.max(std::f64::consts::SQRT_2 * rho_norm(grid.rho_at(i).0, t));
        }
    }
    TtField {
        coeffs,
        tensor,
        sup_norm: sup,
    }
}

/// Seed with uniformly random coefficients, rescaled exactly to the requested
/// sup-norm (the norm is 1-homogeneous in the coefficients).
pub fn random_tt(
    grid: &SurfaceGrid,
    cache: &ThetaCache,
    rng: &mut impl Rng,
    sup_norm: f64,
) -> TtField {
    loop {
        let mut c = [0.0; 6];
        for v in &mut c {
            *v = rng.gen_range(-1.0..1.0);
        }
        let probe = assemble_tt(grid, cache, c);
        if probe.sup_norm > 1e-8 {
            let s = sup_norm / probe.sup_norm;
            let mut scaled = probe.coeffs;
            for v in &mut scaled {
                *v *= s;
            }
            return assemble_tt(grid, cache, scaled);
        }
    }
}

/// Residuals of the transverse-traceless conditions.
#[derive(Debug, Clone, Copy)]
pub struct TtCheck {
    /// max |trace| over interior nodes, rho-weighted.
    pub trace_max: f64,
    /// max rho-norm of the covariant divergence (fourth-order stencils).
    pub div_max: f64,
    /// nodes where the wide stencil fit.
    pub n_checked: usize,
    pub sup_norm: f64,
}

impl TtCheck {
    /// Both defects small relative to the field scale.
    pub fn pass(&self, rel: f64) -> bool {
        let scale = self.sup_norm.max(1e-12);
        self.trace_max <= rel * scale && self.div_max <= rel * scale
    }
}

/// For the conformal metric the covariant divergence of a trace-free field
/// reduces to e^{-2f} times the flat divergence; difference it with
/// five-point fourth-order first derivatives. The divergence sup runs over
/// fundamental-domain nodes only: collar nodes are deck copies whose directly
/// evaluated series values carry the truncation's automorphy defect, which is
/// not a property of the field on the surface.
pub fn verify_tt(grid: &SurfaceGrid, field: &TtField) -> Result<TtCheck, CoreError> {
    let ext = grid.extend_tensor(&field.tensor)?;
    let h = grid.h();
    let mut trace_max = 0.0f64;
    let mut div_max = 0.0f64;
    let mut n_checked = 0;
    for i in 0..grid.n_interior() {
        let (e2f, _, _) = grid.rho_at(i);
        let t = field.tensor.at(i);
        trace_max = trace_max.max((t.xx + t.yy).abs() / e2f);
        if grid.quad_weight(i) == 0.0 {
            continue;
        }
        let (ci, cj) = grid.node_index(i);
        let mut taps = [[0usize; 4]; 2];
        let mut ok = true;
        'axes: for (axis, tap_row) in taps.iter_mut().enumerate() {
            for (slot, step) in [-2i32, -1, 1, 2].into_iter().enumerate() {
                let (ni, nj) = if axis == 0 {
                    (ci + step, cj)
                } else {
                    (ci, cj + step)
                };
                match grid.lattice_index(ni, nj) {
                    Some(idx) => tap_row[slot] = idx,
                    None => {
                        ok = false;
                        break 'axes;
                    }
                }
            }
        }
        if !ok {
            continue;
        }
        let d = |vals: [f64; 4]| (vals[0] - 8.0 * vals[1] + 8.0 * vals[2] - vals[3]) / (12.0 * h);
        let comp = |f: &dyn Fn(Sym2) -> f64, row: [usize; 4]| {
            d([f(ext[row[0]]), f(ext[row[1]]), f(ext[row[2]]), f(ext[row[3]])])
        };
        let d1_11 = comp(&|s| s.xx, taps[0]);
        let d1_12 = comp(&|s| s.xy, taps[0]);
        let d2_12 = comp(&|s| s.xy, taps[1]);
        let d2_22 = comp(&|s| s.yy, taps[1]);
        let r1 = (d1_11 + d2_12) / e2f;
        let r2 = (d1_12 + d2_22) / e2f;
        div_max = div_max.max(((r1 * r1 + r2 * r2) / e2f).sqrt());
        n_checked += 1;
    }
    Ok(TtCheck {
        trace_max,
        div_max,
        n_checked,
        sup_norm: field.sup_norm,
    })
}

/// L^2_rho Gram matrix of the six real basis seeds, row-major.
pub fn gram_matrix(grid: &SurfaceGrid, cache: &ThetaCache) -> [f64; 36] {
    let mut basis = Vec::with_capacity(6);
    for k in 0..6 {
        let mut c = [0.0; 6];
        c[k] = 1.0;
        basis.push(assemble_tt(grid, cache, c));
    }
    let mut gram = [0.0; 36];
    for a in 0..6 {
        for b in a..6 {
            let mut acc = 0.0;
            for i in 0..grid.n_interior() {
                let w = grid.quad_weight(i);
                if w == 0.0 {
                    continue;
                }
                let (e2f, _, _) = grid.rho_at(i);
                let ta = basis[a].tensor.at(i);
                let tb = basis[b].tensor.at(i);
                // rho^{ac} rho^{bd} za_ab zb_cd mu_rho, trace-free form
                acc += w * 2.0 * (ta.xx * tb.xx + ta.xy * tb.xy) / e2f;
            }
            gram[6 * a + b] = acc;
            gram[6 * b + a] = acc;
        }
    }
    gram
}

/// Eigenvalue condition number of the Gram matrix.
pub fn gram_condition(gram: &[f64; 36]) -> f64 {
    let mut work = *gram;
    let eigs = jacobi_eigenvalues(&mut work, 6);
    let min = eigs[0];
    let max = eigs[5];
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Automorphy defect of the truncated series at one point and generator:
/// phi_L(g z) g'(z)^2 - phi_L(z), combined over the three series with the
/// given coefficients. Exactly zero for the full series.
pub fn automorphy_defect(
    table: &ElementTable,
    gen: &crate::mobius::MobiusMap,
    coeffs: [f64; 6],
    z: Complex64,
) -> f64 {
    let phi = |w: Complex64| -> Complex64 {
        (0..3)
            .map(|j| Complex64::new(coeffs[2 * j], coeffs[2 * j + 1]) * theta_point(table, j, w))
            .sum()
    };
    let dz = gen.derivative(z);
    (phi(gen.apply(z)) * dz * dz - phi(z)).norm()
}

/// Scalar field of pointwise rho-norms |z|_rho, for diagnostics and scans.
pub fn pointwise_norm(grid: &SurfaceGrid, field: &TtField) -> ScalarField {
    ScalarField::new(
        (0..grid.n_interior())
            .map(|i| rho_norm(grid.rho_at(i).0, field.tensor.at(i)))
            .collect(),
    )
    .expect("norms are finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::{bolza, cache_002 as cache, grid_002 as grid};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table(depth: usize) -> ElementTable {
        ElementTable::enumerate(bolza(), depth)
    }

    #[test]
    fn identity_truncation_gives_monomials() {
        let t = table(0);
        let z = Complex64::new(0.3, -0.2);
        let z2 = z * z;
        assert_abs_diff_eq!(theta_point(&t, 0, z).re, 1.0, epsilon = 1e-15);
        assert!((theta_point(&t, 1, z) - z2).norm() < 1e-15);
        assert!((theta_point(&t, 2, z) - z2 * z2).norm() < 1e-15);
    }

    #[test]
    fn series_are_even_across_the_involution() {
        // quadratic differentials in genus two are hyperelliptic-invariant;
        // in this chart that is evenness under z -> -z, which the even
        // monomial weights give termwise after reindexing the group
        let t = table(3);
        for &z in &[Complex64::new(0.37, 0.11), Complex64::new(-0.2, 0.45)] {
            for j in 0..3 {
                let plus = theta_point(&t, j, z);
                let minus = theta_point(&t, j, -z);
                assert!(
                    (plus - minus).norm() <= 1e-11 * (1.0 + plus.norm()),
                    "j={j} z={z}: {plus} vs {minus}"
                );
            }
        }
    }

    #[test]
    fn automorphy_defect_shrinks_with_depth() {
        let z = Complex64::new(0.31, 0.12);
        let coeffs = [0.7, -0.3, 0.2, 0.5, -0.4, 0.1];
        let g0 = bolza().generator(0);
        let shallow = automorphy_defect(&table(2), &g0, coeffs, z);
        let deep = automorphy_defect(&table(4), &g0, coeffs, z);
        assert!(
            deep < 0.25 * shallow,
            "shallow {shallow}, deep {deep}"
        );
    }

    #[test]
    fn cache_matches_point_evaluation() {
        let c = cache();
        let t = table(4);
        for &i in &[0usize, 97, 1503] {
            let z = grid().node(i);
            for m in 0..3 {
                let direct = theta_point(&t, m, z);
                assert!((c.theta(m)[i] - direct).norm() <= 1e-13 * (1.0 + direct.norm()));
            }
        }
    }

    #[test]
    fn assembled_seed_is_trace_free_and_scales_linearly() {
        let f = assemble_tt(grid(), cache(), [0.3, 0.1, -0.2, 0.0, 0.4, -0.5]);
        for i in 0..grid().n_interior() {
            let t = f.tensor.at(i);
            assert_eq!(t.xx + t.yy, 0.0);
        }
        let doubled = assemble_tt(grid(), cache(), f.coeffs.map(|v| 2.0 * v));
        assert_abs_diff_eq!(doubled.sup_norm, 2.0 * f.sup_norm, epsilon = 1e-12);
    }

    #[test]
    fn random_seed_hits_requested_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for target in [0.1, 1.0, 3.7] {
            let f = random_tt(grid(), cache(), &mut rng, target);
            assert_abs_diff_eq!(f.sup_norm, target, epsilon = 1e-9 * target);
        }
    }

    #[test]
    fn basis_seeds_pass_divergence_check() {
        for k in 0..6 {
            let mut c = [0.0; 6];
            c[k] = 1.0;
            let f = assemble_tt(grid(), cache(), c);
            let check = verify_tt(grid(), &f).unwrap();
            assert!(check.n_checked >= grid().n_octagon() * 9 / 10);
            assert!(
                check.pass(1e-3),
                "basis {k}: trace {}, div {} vs sup {}",
                check.trace_max,
                check.div_max,
                check.sup_norm
            );
        }
    }

    #[test]
    fn broken_seed_fails_divergence_check() {
        let mut f = assemble_tt(grid(), cache(), [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        for i in 0..grid().n_interior() {
            let z = grid().node(i);
            let mut t = f.tensor.at(i);
            t.xy += 0.05 * f.sup_norm * (6.0 * z.re).sin();
            f.tensor.set(i, t);
        }
        let check = verify_tt(grid(), &f).unwrap();
        assert!(!check.pass(1e-3), "div {} should exceed gate", check.div_max);
    }

    #[test]
    fn ghost_extension_matches_direct_series() {
        // the pullback closure and the series' near-automorphy must agree at
        // ghost nodes to interpolation + truncation accuracy
        let t = table(4);
        let f = assemble_tt(grid(), cache(), [0.5, -0.2, 0.3, 0.4, -0.1, 0.2]);
        let ext = grid().extend_tensor(&f.tensor).unwrap();
        let rho = crate::rho::RhoMetric;
        let mut worst = 0.0f64;
        for (k, link) in grid().ghost_links().iter().enumerate() {
            let mut phi = Complex64::new(0.0, 0.0);
            for j in 0..3 {
                let c = Complex64::new(f.coeffs[2 * j], f.coeffs[2 * j + 1]);
                phi += c * theta_point(&t, j, link.source);
            }
            let direct = Sym2::new(2.0 * phi.re, -2.0 * phi.im, -2.0 * phi.re);
            let got = ext[grid().n_interior() + k];
            let diff = got - direct;
            worst = worst.max(rho_norm(rho.e2f(link.source), diff));
        }
        // the defect is the truncated series' own automorphy error at the
        // ghost radius; a wrong pullback convention would sit at O(sup_norm)
        assert!(worst <= 0.1 * f.sup_norm, "worst weighted defect {worst}");
    }

    #[test]
    fn gram_matrix_is_well_conditioned() {
        let gram = gram_matrix(grid(), cache());
        for a in 0..6 {
            assert!(gram[6 * a + a] > 0.0);
            for b in 0..6 {
                assert_abs_diff_eq!(gram[6 * a + b], gram[6 * b + a], epsilon = 1e-12);
            }
        }
        let cond = gram_condition(&gram);
        assert!(cond.is_finite() && cond < 1e6, "condition {cond}");
    }
}
