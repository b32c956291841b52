use super::*;
use crate::group::ElementTable;
use approx::{assert_abs_diff_eq, assert_relative_eq};
use std::sync::OnceLock;

fn bolza() -> &'static FuchsianGroup {
    static G: OnceLock<FuchsianGroup> = OnceLock::new();
    G.get_or_init(|| FuchsianGroup::bolza().unwrap())
}

fn grid_002() -> &'static SurfaceGrid {
    static G: OnceLock<SurfaceGrid> = OnceLock::new();
    G.get_or_init(|| SurfaceGrid::build(bolza(), 0.02).unwrap())
}

fn grid_001() -> &'static SurfaceGrid {
    static G: OnceLock<SurfaceGrid> = OnceLock::new();
    G.get_or_init(|| SurfaceGrid::build(bolza(), 0.01).unwrap())
}

/// Nodes whose full 3x3 stencil consists of interior nodes; only there can
/// non-invariant test polynomials be differenced meaningfully.
fn deep_nodes(g: &SurfaceGrid) -> Vec<usize> {
    (0..g.n_interior())
        .filter(|&i| {
            g.neighbor_rows()[i]
                .iter()
                .all(|&n| (n as usize) < g.n_interior())
        })
        .collect()
}

#[test]
fn node_count_scales_quadratically() {
    let ratio = grid_001().n_octagon() as f64 / grid_002().n_octagon() as f64;
    assert!((3.8..=4.2).contains(&ratio), "ratio {ratio}");
}

#[test]
fn ghost_links_satisfy_build_invariants() {
    let g = grid_002();
    assert!(!g.ghost_links().is_empty());
    for link in g.ghost_links() {
        let wsum: f64 = link.weights.iter().sum();
        assert_abs_diff_eq!(wsum, 1.0, epsilon = 1e-12);
        assert!(bolza().octagon_depth(link.reduced) >= -1e-9);
        assert!(link.deriv.norm() >= 1.0 - 1e-12);
        assert!(link.word_length >= 1 && link.word_length <= DEFAULT_REDUCE_BUDGET);
        for &t in &link.taps {
            assert!((t as usize) < g.n_interior());
        }
    }
}

#[test]
fn constant_field_round_trips_through_ghosts() {
    let g = grid_002();
    let u = ScalarField::constant(7.25, g.n_interior());
    let ext = g.extend_scalar(&u).unwrap();
    for v in &ext[g.n_interior()..] {
        assert_abs_diff_eq!(*v, 7.25, epsilon = 1e-12);
    }
}

/// Truncated orbit sum F(z) = sum_{|w|<=2} exp(-4 d(gamma_w z, 0)^2): the
/// truncation defect is ~e^{-48}, so the ghost-closure discrepancy is pure
/// interpolation error and must drop like h^4.
fn orbit_gaussian(table: &ElementTable, z: Complex64) -> f64 {
    let rho = RhoMetric;
    table
        .all()
        .iter()
        .map(|m| {
            let d = rho.distance(m.apply(z), Complex64::new(0.0, 0.0));
            (-4.0 * d * d).exp()
        })
        .sum()
}

#[test]
fn ghost_closure_is_fourth_order_on_invariant_fields() {
    let table = ElementTable::enumerate(bolza(), 2);
    let mut errs = Vec::new();
    for grid in [grid_002(), grid_001()] {
        let u = ScalarField::new(
            (0..grid.n_interior())
                .map(|i| orbit_gaussian(&table, grid.node(i)))
                .collect(),
        )
        .unwrap();
        let ext = grid.extend_scalar(&u).unwrap();
        let err = grid
            .ghost_links()
            .iter()
            .enumerate()
            .map(|(k, link)| {
                (ext[grid.n_interior() + k] - orbit_gaussian(&table, link.source)).abs()
            })
            .fold(0.0f64, f64::max);
        errs.push(err);
    }
    let order = observed_order(&errs);
    assert!(order >= 3.0, "orders {errs:?} -> {order}");
}

#[test]
fn laplacian_of_constant_vanishes() {
    let g = grid_002();
    let u = ScalarField::constant(3.0, g.n_interior());
    let lap = g.laplacian_rho(&u).unwrap();
    assert!(lap.max_abs() <= 1e-12);
}

#[test]
fn laplacian_of_flat_quadratic_is_exact() {
    // u = x^2 + y^2 has flat Laplacian exactly 4; the 5-point stencil
    // reproduces it to round-off away from ghost closure.
    let g = grid_002();
    let u = ScalarField::new((0..g.n_interior()).map(|i| g.node(i).norm_sqr()).collect()).unwrap();
    let lap = g.laplacian_rho(&u).unwrap();
    for i in deep_nodes(g) {
        let (e2f, _, _) = g.rho_at(i);
        assert_abs_diff_eq!(lap.values[i] * e2f, 4.0, epsilon = 1e-8);
    }
}

#[test]
fn hessian_of_constant_vanishes() {
    // ghost closure reproduces constants to rounding; dividing the leftover
    // by h^2 still leaves it ten orders below any discretization signal
    let g = grid_002();
    let u = ScalarField::constant(-1.5, g.n_interior());
    let hess = g.hessian_rho(&u).unwrap();
    assert!(hess.max_abs() <= 1e-9);
}

#[test]
fn hessian_of_linear_field_matches_connection_terms() {
    // u = x: u1 = 1, u2 = 0, flat second derivatives 0, so
    // u_{;11} = -f1, u_{;22} = +f1, u_{;12} = -f2.
    let g = grid_002();
    let u = ScalarField::new((0..g.n_interior()).map(|i| g.node(i).re).collect()).unwrap();
    let hess = g.hessian_rho(&u).unwrap();
    for i in deep_nodes(g) {
        let (_, f1, f2) = g.rho_at(i);
        assert_abs_diff_eq!(hess.t11[i], -f1, epsilon = 1e-10);
        assert_abs_diff_eq!(hess.t22[i], f1, epsilon = 1e-10);
        assert_abs_diff_eq!(hess.t12[i], -f2, epsilon = 1e-10);
    }
}

#[test]
fn hessian_trace_equals_laplacian_everywhere() {
    // Algebraic identity of the shared stencils; holds at every node
    // including those closed through ghosts.
    let g = grid_002();
    let u = ScalarField::new(
        (0..g.n_interior())
            .map(|i| {
                let z = g.node(i);
                (1.3 * z.re - 0.4 * z.im).sin() + 0.2 * z.norm_sqr()
            })
            .collect(),
    )
    .unwrap();
    let hess = g.hessian_rho(&u).unwrap();
    let lap = g.laplacian_rho(&u).unwrap();
    for i in 0..g.n_interior() {
        let (e2f, _, _) = g.rho_at(i);
        assert_abs_diff_eq!(hess.t11[i] + hess.t22[i], e2f * lap.values[i], epsilon = 1e-10);
    }
}

#[test]
fn operators_are_linear() {
    let g = grid_002();
    let n = g.n_interior();
    let u = ScalarField::new((0..n).map(|i| g.node(i).re.cos()).collect()).unwrap();
    let v = ScalarField::new((0..n).map(|i| (2.0 * g.node(i).im).sin()).collect()).unwrap();
    let combo = u.axpy(2.5, &v);
    let lhs = g.laplacian_rho(&combo).unwrap();
    let rhs = g
        .laplacian_rho(&u)
        .unwrap()
        .axpy(2.5, &g.laplacian_rho(&v).unwrap());
    for i in 0..n {
        assert_abs_diff_eq!(lhs.values[i], rhs.values[i], epsilon = 1e-12 * (1.0 + rhs.values[i].abs()));
    }
}

#[test]
fn quadrature_recovers_total_area() {
    // Gauss-Bonnet: chi = -2, K = -1/2 gives A(rho) = 8 pi.
    let g = grid_002();
    let one = ScalarField::constant(1.0, g.n_interior());
    let area = g.integrate_rho(&one).unwrap();
    assert_relative_eq!(area, RhoMetric.total_area(), max_relative = 5e-3);
    let zero = ScalarField::constant(0.0, g.n_interior());
    assert_eq!(g.integrate_rho(&zero).unwrap(), 0.0);
}

#[test]
fn quadrature_is_linear() {
    let g = grid_002();
    let n = g.n_interior();
    let u = ScalarField::new((0..n).map(|i| g.node(i).re).collect()).unwrap();
    let v = ScalarField::new((0..n).map(|i| g.node(i).im * g.node(i).im).collect()).unwrap();
    let lhs = g.integrate_rho(&u.axpy(-3.0, &v)).unwrap();
    let rhs = g.integrate_rho(&u).unwrap() - 3.0 * g.integrate_rho(&v).unwrap();
    assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12 * (1.0 + rhs.abs()));
}

#[test]
fn interpolation_hits_nodal_values() {
    let g = grid_002();
    let u = ScalarField::new((0..g.n_interior()).map(|i| g.node(i).re.sin()).collect()).unwrap();
    let ext = g.extend_scalar(&u).unwrap();
    for &i in deep_nodes(g).iter().step_by(97) {
        let v = g.interpolate_extended(&ext, g.node(i)).unwrap();
        assert_abs_diff_eq!(v, u.values[i], epsilon = 1e-12);
    }
}

#[test]
fn interpolation_reproduces_cubics() {
    let g = grid_002();
    let p = |z: Complex64| {
        1.0 + 0.3 * z.re - 0.2 * z.im + 0.5 * z.re * z.im + z.re.powi(3) - 2.0 * z.im.powi(2) * z.re
    };
    let u = ScalarField::new((0..g.n_interior()).map(|i| p(g.node(i))).collect()).unwrap();
    let ext = g.extend_scalar(&u).unwrap();
    // Points deep inside the octagon so all taps are genuine interior nodes.
    for k in 0..50 {
        let phi = k as f64 * 0.7;
        let r = 0.45 * (0.3 + 0.7 * ((k * 37 % 11) as f64 / 11.0));
        let z = Complex64::from_polar(r, phi);
        let v = g.interpolate_extended(&ext, z).unwrap();
        assert_abs_diff_eq!(v, p(z), epsilon = 1e-10);
    }
}

#[test]
fn interpolation_error_is_fourth_order() {
    let f = |z: Complex64| (z.re * 1.7).exp() * (2.3 * z.im).cos();
    let samples: Vec<Complex64> = (0..40)
        .map(|k| Complex64::from_polar(0.05 + 0.5 * (k as f64 / 40.0), k as f64 * 1.37))
        .collect();
    let mut errs = Vec::new();
    for grid in [grid_002(), grid_001()] {
        let u = ScalarField::new((0..grid.n_interior()).map(|i| f(grid.node(i))).collect()).unwrap();
        let ext = grid.extend_scalar(&u).unwrap();
        let err = samples
            .iter()
            .map(|&z| (grid.interpolate_extended(&ext, z).unwrap() - f(z)).abs())
            .fold(0.0f64, f64::max);
        errs.push(err);
    }
    let order = observed_order(&errs);
    assert!(order >= 3.0, "errors {errs:?} -> order {order}");
}

#[test]
fn interpolation_rejects_far_points() {
    let g = grid_002();
    let u = ScalarField::constant(1.0, g.n_interior());
    let ext = g.extend_scalar(&u).unwrap();
    // beyond the outermost ghost on the +x vertex ray
    assert!(matches!(
        g.interpolate_extended(&ext, Complex64::new(0.985, 0.0)),
        Err(CoreError::OutsideGrid { .. })
    ));
    // inside the disk but far from the octagon, between two vertex rays
    assert!(matches!(
        g.interpolate_extended(&ext, Complex64::new(0.8, 0.55)),
        Err(CoreError::OutsideGrid { .. })
    ));
}

#[test]
fn tensor_extension_pulls_back_invariant_tensors() {
    // rho itself is deck-invariant: components e^{2f} delta_ab. Its ghost
    // values must match the direct evaluation to interpolation accuracy.
    let g = grid_001();
    let rho = RhoMetric;
    let mut t = SymTensorField::zeros(g.n_interior());
    for i in 0..g.n_interior() {
        let e = rho.e2f(g.node(i));
        t.set(i, crate::sym2::Sym2::diag(e, e));
    }
    let ext = g.extend_tensor(&t).unwrap();
    for (k, link) in g.ghost_links().iter().enumerate() {
        let direct = rho.e2f(link.source);
        let got = ext[g.n_interior() + k];
        // vertex-wedge ghosts reduce to points where e^{2f} ~ 10^2 and its
        // quartic derivative is huge; 1e-4 relative still rules out any
        // pullback convention error, which would show up at O(1)
        assert_relative_eq!(got.xx, direct, max_relative = 1e-4);
        assert_relative_eq!(got.yy, direct, max_relative = 1e-4);
        assert_abs_diff_eq!(got.xy / direct, 0.0, epsilon = 1e-4);
    }
}

#[test]
fn patch_counts_and_classification() {
    let p = PatchGrid::build(0.3, 0.01, |_| 0.0).unwrap();
    let expect = std::f64::consts::PI * 0.09 / 1e-4;
    assert_relative_eq!(p.n_nodes() as f64, expect, max_relative = 0.1);
    // Interior nodes keep their full stencil inside the disk.
    for i in 0..p.n_interior() {
        assert!(p.node(i).norm() <= 0.3);
    }
    for i in p.n_interior()..p.n_nodes() {
        let z = p.node(i);
        let missing = NEIGHBOR_OFFSETS.iter().any(|&(di, dj)| {
            (z + Complex64::new(di as f64 * 0.01, dj as f64 * 0.01)).norm() > 0.3
        });
        assert!(missing, "boundary node {z} has a complete stencil");
    }
}

#[test]
fn patch_and_surface_operators_agree_bitwise() {
    // Same lattice, same kernels: results must be identical, not just close.
    let s = grid_002();
    let p = PatchGrid::build(0.3, 0.02, |z| (z.re - 0.7 * z.im).cos()).unwrap();
    let f = |z: Complex64| (z.re - 0.7 * z.im).cos();
    let us = ScalarField::new((0..s.n_interior()).map(|i| f(s.node(i))).collect()).unwrap();
    let up = ScalarField::new((0..p.n_interior()).map(|i| f(p.node(i))).collect()).unwrap();
    let lap_s = s.laplacian_rho(&us).unwrap();
    let lap_p = p.laplacian_rho(&up).unwrap();
    let hess_s = s.hessian_rho(&us).unwrap();
    let hess_p = p.hessian_rho(&up).unwrap();
    let mut matched = 0;
    for ip in 0..p.n_interior() {
        let z = p.node(ip);
        let is = (0..s.n_interior()).find(|&i| s.node(i) == z);
        if let Some(is) = is {
            assert_eq!(lap_s.values[is], lap_p.values[ip]);
            assert_eq!(hess_s.t11[is], hess_p.t11[ip]);
            assert_eq!(hess_s.t12[is], hess_p.t12[ip]);
            assert_eq!(hess_s.t22[is], hess_p.t22[ip]);
            matched += 1;
        }
    }
    assert!(matched > 100, "only {matched} shared nodes");
}

#[test]
fn mms_jet_matches_finite_differences() {
    let m = MmsProblem::standard(0.4);
    let z = Complex64::new(0.13, -0.21);
    let e = 1e-5;
    let j = m.jet(z);
    let dx = (m.exact(z + Complex64::new(e, 0.0)) - m.exact(z - Complex64::new(e, 0.0))) / (2.0 * e);
    let dy = (m.exact(z + Complex64::new(0.0, e)) - m.exact(z - Complex64::new(0.0, e))) / (2.0 * e);
    assert_abs_diff_eq!(j.ux, dx, epsilon = 1e-9);
    assert_abs_diff_eq!(j.uy, dy, epsilon = 1e-9);
    let dxin = (m.exact(z + Complex64::new(e, 0.0)) - 2.0 * m.exact(z)
        + m.exact(z - Complex64::new(e, 0.0)))
        / (e * e);
    assert_abs_diff_eq!(j.uxx, dxin, epsilon = 1e-5);
}

#[test]
fn build_rejects_bad_steps() {
    assert!(matches!(
        SurfaceGrid::build(bolza(), 0.2),
        Err(CoreError::BadStep { .. })
    ));
    assert!(matches!(
        SurfaceGrid::build(bolza(), -0.01),
        Err(CoreError::BadStep { .. })
    ));
}
