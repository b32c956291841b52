//! Everything derived from a solved instance: the trace-free tensor xi, the
//! field B, the induced metric g with mu_g = (1+B) mu_rho, areas and energy,
//! the conformal factor lambda with gamma = e^{2 lambda} g of scalar
//! curvature -1, harmonic-map identities, and curvature diagnostics.

use crate::error::CoreError;
use crate::grid::ops::{self, Domain};
use crate::grid::{ScalarField, SurfaceGrid, SymTensorField};
use crate::linsolve::{gmres, BandLu, CsrMatrix};
use crate::sym2::Sym2;
use crate::theta::TtField;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BinaryHeap;

/// Injectivity radius of the base surface in the curvature -1/2
/// normalization: sqrt2 arccosh(1 + sqrt2). Supplied, not computed.
pub fn inj_rho() -> f64 {
    std::f64::consts::SQRT_2 * (1.0 + std::f64::consts::SQRT_2).acosh()
}

/// xi_ab = z_ab - (u_;ab - (1/2) rho_ab Delta_rho u): the seed minus the
/// trace-free covariant Hessian. Trace-free by construction.
pub fn compute_xi(
    grid: &SurfaceGrid,
    tt: &TtField,
    u: &ScalarField,
) -> Result<SymTensorField, CoreError> {
    let hess = grid.hessian_rho(u)?;
    let n = grid.n_interior();
    if tt.tensor.len() != n {
        return Err(CoreError::FieldLength {
            got: tt.tensor.len(),
            expected: n,
        });
    }
    let mut xi = SymTensorField::zeros(n);
    for i in 0..n {
        let h = hess.at(i);
        let x11 = tt.tensor.t11[i] - 0.5 * (h.xx - h.yy);
        let x12 = tt.tensor.t12[i] - h.xy;
        xi.set(i, Sym2::new(x11, x12, -x11));
    }
    Ok(xi)
}

/// B = sqrt(1 + 2 |xi|_rho^2) per node, with the location of the minimum.
pub fn compute_b(grid: &SurfaceGrid, xi: &SymTensorField) -> (ScalarField, usize) {
    let n = grid.n_interior();
    let mut values = Vec::with_capacity(n);
    let mut min_node = 0usize;
    let mut min_b = f64::INFINITY;
    for i in 0..n {
        let e2f = grid.rho_at(i).0;
        let q = (xi.t11[i] * xi.t11[i] + xi.t12[i] * xi.t12[i]) / (e2f * e2f);
        let b = (1.0 + 4.0 * q).sqrt();
        if b < min_b && grid.quad_weight(i) > 0.0 {
            min_b = b;
            min_node = i;
        }
        values.push(b);
    }
    (ScalarField { values }, min_node)
}

/// Solves (1+B) g^{ab} = -2 xi^{ab} + B rho^{ab} for the inverse metric and
/// inverts it pointwise. Returns g and mu_g/mu_rho.
pub fn compute_g(
    grid: &SurfaceGrid,
    xi: &SymTensorField,
    b: &ScalarField,
) -> Result<(SymTensorField, ScalarField), CoreError> {
    let n = grid.n_interior();
    let mut g = SymTensorField::zeros(n);
    let mut mu_ratio = Vec::with_capacity(n);
    for i in 0..n {
        let e2f = grid.rho_at(i).0;
        let bi = b.values[i];
        let inv2 = 1.0 / (e2f * e2f);
        // raising both indices of a covariant tensor divides by e^{4f}
        let ginv = Sym2::new(
            (bi / e2f - 2.0 * xi.t11[i] * inv2) / (1.0 + bi),
            (-2.0 * xi.t12[i] * inv2) / (1.0 + bi),
            (bi / e2f + 2.0 * xi.t11[i] * inv2) / (1.0 + bi),
        );
        let det = ginv.det();
        if det <= 0.0 || !det.is_finite() {
            return Err(CoreError::NotPositiveDefinite { node: i, det });
        }
        let gi = ginv.inverse().expect("det checked positive");
        mu_ratio.push(gi.det().sqrt() / e2f);
        g.set(i, gi);
    }
    Ok((g, ScalarField { values: mu_ratio }))
}

/// Area and energy bookkeeping from one solution.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AreaReport {
    pub area_g: f64,
    pub area_rho: f64,
    pub integral_u: f64,
    /// E(g) = A(g) - A(rho).
    pub energy: f64,
    /// |A(g) - A(rho) - int u|, which vanishes in the continuum.
    pub identity_residual: f64,
}

pub fn area_energy(
    grid: &SurfaceGrid,
    u: &ScalarField,
    b: &ScalarField,
) -> Result<AreaReport, CoreError> {
    let n = grid.n_interior();
    let one_plus_b = ScalarField::new(b.values.iter().map(|v| 1.0 + v).collect())?;
    let area_g = grid.integrate_rho(&one_plus_b)?;
    let area_rho = grid.integrate_rho(&ScalarField::constant(1.0, n))?;
    let integral_u = grid.integrate_rho(u)?;
    let energy = area_g - area_rho;
    Ok(AreaReport {
        area_g,
        area_rho,
        integral_u,
        energy,
        identity_residual: (area_g - area_rho - integral_u).abs(),
    })
}

/// Pointwise energy densities of the identity map from (Sigma, g) to
/// (Sigma, rho): |dw|^2 = (e + J)/2 and |dbar w|^2 = (e - J)/2 with
/// e = (1/2) g^{ab} rho_ab and J = mu_rho/mu_g.
pub fn energy_densities(
    grid: &SurfaceGrid,
    g: &SymTensorField,
    mu_ratio: &ScalarField,
) -> Result<(ScalarField, ScalarField), CoreError> {
    let n = grid.n_interior();
    let mut holo = Vec::with_capacity(n);
    let mut anti = Vec::with_capacity(n);
    for i in 0..n {
        let e2f = grid.rho_at(i).0;
        let inv = g.at(i).inverse().ok_or(CoreError::NotPositiveDefinite {
            node: i,
            det: g.at(i).det(),
        })?;
        let e = 0.5 * e2f * (inv.xx + inv.yy);
        let j = 1.0 / mu_ratio.values[i];
        holo.push(0.5 * (e + j));
        anti.push(0.5 * (e - j));
    }
    Ok((ScalarField { values: holo }, ScalarField { values: anti }))
}

/// First and second centered differences of the three components of an
/// extended tensor field at interior nodes.
struct TensorJet {
    e: ops::NodeDerivs,
    f: ops::NodeDerivs,
    g: ops::NodeDerivs,
}

fn tensor_ext(grid: &SurfaceGrid, t: &SymTensorField) -> Result<[Vec<f64>; 3], CoreError> {
    let ext = grid.extend_tensor(t)?;
    let mut xx = Vec::with_capacity(ext.len());
    let mut xy = Vec::with_capacity(ext.len());
    let mut yy = Vec::with_capacity(ext.len());
    for s in &ext {
        xx.push(s.xx);
        xy.push(s.xy);
        yy.push(s.yy);
    }
    Ok([xx, xy, yy])
}

fn tensor_jet(grid: &SurfaceGrid, ext: &[Vec<f64>; 3], i: usize) -> TensorJet {
    let nb = &grid.neighbor_rows()[i];
    let h = grid.h();
    TensorJet {
        e: ops::node_derivs(&ext[0], nb, i, h),
        f: ops::node_derivs(&ext[1], nb, i, h),
        g: ops::node_derivs(&ext[2], nb, i, h),
    }
}

/// Scalar curvature R(g) = 2K via the Brioschi formula with centered
/// differences of the metric components.
pub fn curvature_g(grid: &SurfaceGrid, g: &SymTensorField) -> Result<ScalarField, CoreError> {
    let ext = tensor_ext(grid, g)?;
    let n = grid.n_interior();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let j = tensor_jet(grid, &ext, i);
        let (e, f, gg) = (j.e.u, j.f.u, j.g.u);
        let m1 = [
            [
                -0.5 * j.e.d22 + j.f.d12 - 0.5 * j.g.d11,
                0.5 * j.e.d1,
                j.f.d1 - 0.5 * j.e.d2,
            ],
            [j.f.d2 - 0.5 * j.g.d1, e, f],
            [0.5 * j.g.d2, f, gg],
        ];
        let m2 = [
            [0.0, 0.5 * j.e.d2, 0.5 * j.g.d1],
            [0.5 * j.e.d2, e, f],
            [0.5 * j.g.d1, f, gg],
        ];
        let det = e * gg - f * f;
        if det <= 0.0 {
            return Err(CoreError::NotPositiveDefinite { node: i, det });
        }
        let k = (det3(&m1) - det3(&m2)) / (det * det);
        out.push(2.0 * k);
    }
    ScalarField::new(out)
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Divergence-form Laplace-Beltrami machinery of a metric given on the
/// extended node set: Delta_g v = (1/mu_g) d_a (mu_g g^{ab} d_b v).
struct DivForm {
    /// mu_g g^{ab} per extended node.
    m: Vec<Sym2>,
    /// 1/mu_g per interior node.
    inv_mu: Vec<f64>,
}

impl DivForm {
    fn build(grid: &SurfaceGrid, g: &SymTensorField) -> Result<DivForm, CoreError> {
        let ext = grid.extend_tensor(g)?;
        let mut m = Vec::with_capacity(ext.len());
        for (i, s) in ext.iter().enumerate() {
            let det = s.det();
            if det <= 0.0 || !det.is_finite() {
                return Err(CoreError::NotPositiveDefinite { node: i, det });
            }
            let mu = det.sqrt();
            let inv = s.inverse().expect("det checked positive");
            m.push(Sym2::new(mu * inv.xx, mu * inv.xy, mu * inv.yy));
        }
        let inv_mu = ext[..grid.n_interior()]
            .iter()
            .map(|s| 1.0 / s.det().sqrt())
            .collect();
        Ok(DivForm { m, inv_mu })
    }

    /// Nine-point couplings of Delta_g at row `i` as (slot, weight) pairs
    /// plus the center weight; slot indexing follows the neighbor table.
    fn row(&self, grid: &SurfaceGrid, i: usize) -> ([f64; 8], f64) {
        use crate::grid::ops::{E, N, NE, NW, S, SE, SW, W};
        let nb = &grid.neighbor_rows()[i];
        let h = grid.h();
        let inv_h2 = 1.0 / (h * h);
        let q = 0.25 * inv_h2;
        let mc = self.m[i];
        let me = self.m[nb[E] as usize];
        let mw = self.m[nb[W] as usize];
        let mn = self.m[nb[N] as usize];
        let ms = self.m[nb[S] as usize];
        let mut w = [0.0f64; 8];
        // flux form for the diagonal part with arithmetic half-point means
        let ae = 0.5 * (mc.xx + me.xx) * inv_h2;
        let aw = 0.5 * (mc.xx + mw.xx) * inv_h2;
        let an = 0.5 * (mc.yy + mn.yy) * inv_h2;
        let as_ = 0.5 * (mc.yy + ms.yy) * inv_h2;
        w[E] += ae;
        w[W] += aw;
        w[N] += an;
        w[S] += as_;
        let mut center = -(ae + aw + an + as_);
        // d_x(M_xy d_y v): centered differences of neighbor-sampled fluxes
        w[NE] += me.xy * q;
        w[SE] -= me.xy * q;
        w[NW] -= mw.xy * q;
        w[SW] += mw.xy * q;
        // d_y(M_xy d_x v)
        w[NE] += mn.xy * q;
        w[NW] -= mn.xy * q;
        w[SE] -= ms.xy * q;
        w[SW] += ms.xy * q;
        let scale = self.inv_mu[i];
        for v in &mut w {
            *v *= scale;
        }
        center *= scale;
        (w, center)
    }

    /// Applies Delta_g to the interior values `v`.
    fn apply(&self, grid: &SurfaceGrid, v: &ScalarField) -> Result<ScalarField, CoreError> {
        let ext = grid.extend_scalar(v)?;
        let n = grid.n_interior();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let nb = &grid.neighbor_rows()[i];
            let (w, c) = self.row(grid, i);
            let mut acc = c * ext[i];
            for (slot, wt) in w.iter().enumerate() {
                acc += wt * ext[nb[slot] as usize];
            }
            out.push(acc);
        }
        ScalarField::new(out)
    }

    /// CSR triplets of Delta_g with ghost columns expanded, plus the direct
    /// coupling bandwidth.
    fn triplets(&self, grid: &SurfaceGrid) -> (Vec<(u32, u32, f64)>, usize) {
        let n = grid.n_interior();
        let mut trips = Vec::with_capacity(10 * n);
        let mut bw = 1usize;
        for i in 0..n {
            let nb = &grid.neighbor_rows()[i];
            let (w, c) = self.row(grid, i);
            trips.push((i as u32, i as u32, c));
            for (slot, wt) in w.iter().enumerate() {
                let col = nb[slot];
                if (col as usize) < n {
                    bw = bw.max((col as i64 - i as i64).unsigned_abs() as usize);
                }
                grid.expand_column(col, *wt, &mut |cc, vv| trips.push((i as u32, cc, vv)));
            }
        }
        (trips, bw)
    }
}

/// Solves Delta_g lambda = -(1/2) mu_rho/mu_g + (1/2) e^{2 lambda} by Newton
/// iteration, so that gamma = e^{2 lambda} g has scalar curvature -1.
pub fn solve_lambda(
    grid: &SurfaceGrid,
    g: &SymTensorField,
    mu_ratio: &ScalarField,
) -> Result<ScalarField, CoreError> {
    let n = grid.n_interior();
    let form = DivForm::build(grid, g)?;
    // exact when B is constant; the general starting point
    let mut lam = ScalarField::new(
        mu_ratio
            .values
            .iter()
            .map(|r| -0.5 * r.ln())
            .collect::<Vec<_>>(),
    )?;
    let res = |l: &ScalarField, form: &DivForm| -> Result<(Vec<f64>, f64), CoreError> {
        let lap = form.apply(grid, l)?;
        let mut out = Vec::with_capacity(n);
        let mut sup = 0.0f64;
        for i in 0..n {
            let v = lap.values[i] + 0.5 / mu_ratio.values[i] - 0.5 * (2.0 * l.values[i]).exp();
            sup = sup.max(v.abs());
            out.push(v);
        }
        Ok((out, sup))
    };
    let (mut f, mut f_norm) = res(&lam, &form)?;
    for _ in 0..30 {
        if f_norm <= 1e-10 {
            return Ok(lam);
        }
        let (mut trips, bw) = form.triplets(grid);
        for i in 0..n {
            trips.push((i as u32, i as u32, -(2.0 * lam.values[i]).exp()));
        }
        let jac = CsrMatrix::from_triplets(n, &trips)?;
        let pre = BandLu::factor_banded_part(&jac, bw)?;
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let delta = gmres(&jac, &pre, &rhs, 1e-12, 200.min(n))?;
        let mut lambda_step = 1.0;
        loop {
            let trial = ScalarField::new(
                lam.values
                    .iter()
                    .zip(&delta)
                    .map(|(a, d)| a + lambda_step * d)
                    .collect::<Vec<_>>(),
            )?;
            let (tf, tn) = res(&trial, &form)?;
            if tn < f_norm {
                lam = trial;
                f = tf;
                f_norm = tn;
                break;
            }
            lambda_step *= 0.5;
            if lambda_step < 1e-4 {
                return Err(CoreError::NonConvergence {
                    iterations: 0,
                    best_residual: f_norm,
                    history: vec![f_norm],
                    best: Box::new(lam),
                });
            }
        }
    }
    if f_norm <= 1e-10 {
        Ok(lam)
    } else {
        Err(CoreError::NonConvergence {
            iterations: 30,
            best_residual: f_norm,
            history: vec![f_norm],
            best: Box::new(lam),
        })
    }
}

/// Christoffel symbols of g at interior nodes from centered differences,
/// as gamma[c][index ab in {11 -> 0, 12 -> 1, 22 -> 2}].
fn christoffel_g(
    grid: &SurfaceGrid,
    ext: &[Vec<f64>; 3],
    i: usize,
) -> Result<[[f64; 3]; 2], CoreError> {
    let j = tensor_jet(grid, ext, i);
    let gm = Sym2::new(j.e.u, j.f.u, j.g.u);
    let inv = gm.inverse().ok_or(CoreError::NotPositiveDefinite {
        node: i,
        det: gm.det(),
    })?;
    // lowered symbols [ab][d]
    let low = [
        [0.5 * j.e.d1, j.f.d1 - 0.5 * j.e.d2],
        [0.5 * j.e.d2, 0.5 * j.g.d1],
        [j.f.d2 - 0.5 * j.g.d1, 0.5 * j.g.d2],
    ];
    let mut out = [[0.0f64; 3]; 2];
    for ab in 0..3 {
        out[0][ab] = inv.xx * low[ab][0] + inv.xy * low[ab][1];
        out[1][ab] = inv.xy * low[ab][0] + inv.yy * low[ab][1];
    }
    Ok(out)
}

/// Tension field of the identity map from (Sigma, g) to (Sigma, rho):
/// V^c = g^{ab} (Gamma(g)^c_ab - Gamma(rho)^c_ab). Returns the pointwise
/// rho-norm of V and its sup over octagon nodes.
pub fn harmonicity_residual(
    grid: &SurfaceGrid,
    g: &SymTensorField,
) -> Result<(ScalarField, f64), CoreError> {
    let ext = tensor_ext(grid, g)?;
    let n = grid.n_interior();
    let mut mag = Vec::with_capacity(n);
    let mut sup = 0.0f64;
    for i in 0..n {
        let ch = christoffel_g(grid, &ext, i)?;
        let (e2f, f1, f2) = grid.rho_at(i);
        // conformal-chart symbols of rho: [11, 12, 22] per upper index
        let rho_ch = [[f1, f2, -f1], [-f2, f1, f2]];
        let inv = g.at(i).inverse().ok_or(CoreError::NotPositiveDefinite {
            node: i,
            det: g.at(i).det(),
        })?;
        // contract with g^{ab}: weights (11, 12, 22) -> (xx, 2 xy, yy)
        let wts = [inv.xx, 2.0 * inv.xy, inv.yy];
        let mut v = [0.0f64; 2];
        for c in 0..2 {
            for ab in 0..3 {
                v[c] += wts[ab] * (ch[c][ab] - rho_ch[c][ab]);
            }
        }
        let norm = (e2f * (v[0] * v[0] + v[1] * v[1])).sqrt();
        if grid.quad_weight(i) > 0.0 {
            sup = sup.max(norm);
        }
        mag.push(norm);
    }
    Ok((ScalarField { values: mag }, sup))
}

/// Diagnostics of the auxiliary identities satisfied by B and the Hopf
/// density on a solved instance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BReport {
    /// Sup of |Delta_g B - 2B/(B^2-1)|grad_g B|^2 + (B-1)| where B > 1.05.
    pub b_equation_sup: f64,
    /// Number of nodes entering the B-equation residual.
    pub b_equation_nodes: usize,
    /// Sup of |grad_g log B|.
    pub grad_log_b_sup: f64,
    /// Sup of | |phi|_g^2 - (B-1)/(4(B+1)) |.
    pub hopf_identity_sup: f64,
    /// Sup of the g-divergence of the g-trace-free part of rho; the
    /// discrete stand-in for dbar phi = 0.
    pub holomorphy_sup: f64,
}

pub fn b_identities(
    grid: &SurfaceGrid,
    g: &SymTensorField,
    b: &ScalarField,
    hopf: &[Complex64],
) -> Result<BReport, CoreError> {
    let n = grid.n_interior();
    let form = DivForm::build(grid, g)?;
    let lap_b = form.apply(grid, b)?;
    let ext_b = grid.extend_scalar(b)?;
    let ext_g = tensor_ext(grid, g)?;
    let h = grid.h();

    let mut report = BReport {
        b_equation_sup: 0.0,
        b_equation_nodes: 0,
        grad_log_b_sup: 0.0,
        hopf_identity_sup: 0.0,
        holomorphy_sup: 0.0,
    };

    // g-trace-free part of rho for the holomorphy check
    let mut p = SymTensorField::zeros(n);
    for i in 0..n {
        let e2f = grid.rho_at(i).0;
        let inv = g.at(i).inverse().ok_or(CoreError::NotPositiveDefinite {
            node: i,
            det: g.at(i).det(),
        })?;
        let trace = e2f * (inv.xx + inv.yy);
        let gm = g.at(i);
        p.set(
            i,
            Sym2::new(
                e2f - 0.5 * trace * gm.xx,
                -0.5 * trace * gm.xy,
                e2f - 0.5 * trace * gm.yy,
            ),
        );
    }
    let ext_p = tensor_ext(grid, &p)?;

    for i in 0..n {
        if grid.quad_weight(i) <= 0.0 {
            continue;
        }
        let nb = &grid.neighbor_rows()[i];
        let bi = b.values[i];
        let d1 = (ext_b[nb[1] as usize] - ext_b[nb[0] as usize]) * 0.5 / h;
        let d2 = (ext_b[nb[3] as usize] - ext_b[nb[2] as usize]) * 0.5 / h;
        let inv = g.at(i).inverse().ok_or(CoreError::NotPositiveDefinite {
            node: i,
            det: g.at(i).det(),
        })?;
        let grad_sq = inv.quad(d1, d2);
        report.grad_log_b_sup = report.grad_log_b_sup.max(grad_sq.sqrt() / bi);
        if bi > 1.05 {
            let r = lap_b.values[i] - 2.0 * bi / (bi * bi - 1.0) * grad_sq + (bi - 1.0);
            report.b_equation_sup = report.b_equation_sup.max(r.abs());
            report.b_equation_nodes += 1;
        }
        let hopf_sq = hopf[i].norm_sqr();
        let target = 0.25 * (bi - 1.0) / (bi + 1.0);
        report.hopf_identity_sup = report.hopf_identity_sup.max((hopf_sq - target).abs());

        // (div_g P)_b = g^{ac} (d_a P_cb - Gamma^d_ac P_db - Gamma^d_ab P_cd)
        let ch = christoffel_g(grid, &ext_g, i)?;
        let jp = tensor_jet(grid, &ext_p, i);
        let dp = [
            [jp.e.d1, jp.f.d1, jp.g.d1],
            [jp.e.d2, jp.f.d2, jp.g.d2],
        ];
        let pv = [[p.t11[i], p.t12[i]], [p.t12[i], p.t22[i]]];
        let ginv = [[inv.xx, inv.xy], [inv.xy, inv.yy]];
        let comp = |a: usize, c: usize| a + c; // index of P_{ac} in (xx, xy, yy)
        let sym = |a: usize, b_: usize| {
            // Christoffel slot for the symmetric pair (a, b_)
            a + b_
        };
        let mut div = [0.0f64; 2];
        for bb in 0..2 {
            for a in 0..2 {
                for c in 0..2 {
                    let mut t = dp[a][comp(c, bb)];
                    for d in 0..2 {
                        t -= ch[d][sym(a, c)] * pv[d][bb] + ch[d][sym(a, bb)] * pv[c][d];
                    }
                    div[bb] += ginv[a][c] * t;
                }
            }
        }
        // measure in the g-norm of a covector
        let dn = (inv.quad(div[0], div[1])).max(0.0).sqrt();
        report.holomorphy_sup = report.holomorphy_sup.max(dn);
    }
    Ok(report)
}

/// Full derived bundle for one solved seed.
#[derive(Debug, Clone)]
pub struct DerivedGeometry {
    pub xi: SymTensorField,
    pub b: ScalarField,
    pub min_b: f64,
    pub min_b_node: usize,
    pub g: SymTensorField,
    pub mu_ratio: ScalarField,
    pub lambda: ScalarField,
    pub gamma: SymTensorField,
    /// Frame-normalized Hopf density: |hopf|^2 equals |phi|_g^2.
    pub hopf: Vec<Complex64>,
    pub area: AreaReport,
}

pub fn derive(
    grid: &SurfaceGrid,
    tt: &TtField,
    u: &ScalarField,
) -> Result<DerivedGeometry, CoreError> {
    let xi = compute_xi(grid, tt, u)?;
    let (b, min_b_node) = compute_b(grid, &xi);
    let (g, mu_ratio) = compute_g(grid, &xi, &b)?;
    let area = area_energy(grid, u, &b)?;
    let lambda = solve_lambda(grid, &g, &mu_ratio)?;
    let n = grid.n_interior();
    let mut gamma = SymTensorField::zeros(n);
    let mut hopf = Vec::with_capacity(n);
    for i in 0..n {
        let s = (2.0 * lambda.values[i]).exp();
        gamma.set(i, g.at(i) * s);
        let e2f = grid.rho_at(i).0;
        hopf.push(
            -Complex64::new(xi.t11[i], -xi.t12[i]) / (e2f * (1.0 + b.values[i])),
        );
    }
    let min_b = b.values[min_b_node];
    Ok(DerivedGeometry {
        xi,
        b,
        min_b,
        min_b_node,
        g,
        mu_ratio,
        lambda,
        gamma,
        hopf,
        area,
    })
}

/// Largest two-sweep graph distance over the interior lattice with g-edge
/// lengths; a lower estimate of diam(g).
pub fn diameter_estimate(grid: &SurfaceGrid, g: &SymTensorField) -> f64 {
    let (_, far, _) = dijkstra_far(grid, g, 0);
    let (_, _, d) = dijkstra_far(grid, g, far);
    d
}

/// Upper bound 4 sqrt2 (2 + |z|) A(rho) / (pi inj(rho)) that the diameter
/// estimate is compared against.
pub fn diameter_bound(seed_sup: f64, area_rho: f64) -> f64 {
    diameter_bound_with(seed_sup, area_rho, inj_rho())
}

/// Same bound with a caller-supplied injectivity radius.
pub fn diameter_bound_with(seed_sup: f64, area_rho: f64, inj: f64) -> f64 {
    4.0 * std::f64::consts::SQRT_2 * (2.0 + seed_sup) * area_rho / (std::f64::consts::PI * inj)
}

fn dijkstra_far(grid: &SurfaceGrid, g: &SymTensorField, start: usize) -> (Vec<f64>, usize, f64) {
    use crate::grid::ops::NEIGHBOR_OFFSETS;
    let n = grid.n_interior();
    let h = grid.h();
    let mut dist = vec![f64::INFINITY; n];
    let mut heap: BinaryHeap<std::cmp::Reverse<(u64, usize)>> = BinaryHeap::new();
    let key = |d: f64| (d * 1e12) as u64;
    dist[start] = 0.0;
    heap.push(std::cmp::Reverse((0, start)));
    while let Some(std::cmp::Reverse((k, i))) = heap.pop() {
        if k > key(dist[i]) {
            continue;
        }
        let nb = &grid.neighbor_rows()[i];
        for (slot, (di, dj)) in NEIGHBOR_OFFSETS.iter().enumerate() {
            let j = nb[slot] as usize;
            if j >= n {
                continue;
            }
            let (dx, dy) = (*di as f64 * h, *dj as f64 * h);
            let qa = g.at(i).quad(dx, dy).max(0.0).sqrt();
            let qb = g.at(j).quad(dx, dy).max(0.0).sqrt();
            let w = 0.5 * (qa + qb);
            let nd = dist[i] + w;
            if nd < dist[j] {
                dist[j] = nd;
                heap.push(std::cmp::Reverse((key(nd), j)));
            }
        }
    }
    let mut far = start;
    let mut dmax = 0.0;
    for i in 0..n {
        if grid.quad_weight(i) > 0.0 && dist[i].is_finite() && dist[i] > dmax {
            dmax = dist[i];
            far = i;
        }
    }
    (dist, far, dmax)
}
