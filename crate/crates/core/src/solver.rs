//! Damped Newton solver for the vertical equation in flat form:
//! F(u) = (u,11 + u,22) - e^{2f} u + W = 0,
//! W = sqrt(e^{4f} + X^2 + Y^2),
//! X = 2 z11 - (u;11 - u;22), Y = 2 z12 - 2 u;12.
//! Dividing by e^{2f} recovers Delta_rho u - u + sqrt(1 + 2|xi|_rho^2) = 0
//! with xi = (X/2, Y/2) trace-free.

use crate::error::CoreError;
use crate::grid::ops::{self, Domain, E, N, NE, NW, S, SE, SW, W as WW};
use crate::grid::{MmsProblem, PatchGrid, ScalarField, SurfaceGrid, SymTensorField};
use crate::linsolve::{gmres, BandLu, CsrMatrix};
use crate::sym2::Sym2;
use crate::theta::{rho_norm, TtField};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Convergence threshold on the sup norm of F.
    pub tol: f64,
    pub max_iter: usize,
    /// Smallest step fraction tried before declaring a stall.
    pub damping_floor: f64,
    /// Relative residual target of the inner linear solves.
    pub gmres_tol: f64,
    pub gmres_max: usize,
}

impl Default for NewtonOptions {
    fn default() -> NewtonOptions {
        NewtonOptions {
            tol: 1e-10,
            max_iter: 50,
            damping_floor: 1e-4,
            gmres_tol: 1e-12,
            gmres_max: 200,
        }
    }
}

/// Residual and frozen coefficients of the linearization at one iterate.
/// Coefficient fields multiply, per interior node,
/// delta u_{,11} (fr), delta u_{,22} (ft), delta u_{,12} (-2 fs),
/// delta u_{,1} (fp), delta u_{,2} (fq); the zero-order term is -e^{2f}.
#[derive(Debug, Clone)]
pub struct NewtonWorkspace {
    pub residual: Vec<f64>,
    pub res_norm: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub fr: Vec<f64>,
    pub fs: Vec<f64>,
    pub ft: Vec<f64>,
    pub fp: Vec<f64>,
    pub fq: Vec<f64>,
    /// min over nodes of fr ft - fs^2 = e^{4f}/W^2; positive means the
    /// frozen-coefficient operator is elliptic everywhere.
    pub min_ellipticity: f64,
}

/// One pass over the interior nodes: residual plus linearization data.
fn eval<D: Domain + ?Sized>(
    dom: &D,
    zz: Option<&SymTensorField>,
    source: Option<&[f64]>,
    u: &[f64],
) -> NewtonWorkspace {
    let n = dom.n_interior();
    let h = dom.h();
    let ext = ops::extended(dom, u);
    let e2f = dom.e2f();
    let g1 = dom.f_grad1();
    let g2 = dom.f_grad2();
    let nbs = dom.neighbors();

    let mut ws = NewtonWorkspace {
        residual: vec![0.0; n],
        res_norm: 0.0,
        x: vec![0.0; n],
        y: vec![0.0; n],
        w: vec![0.0; n],
        fr: vec![0.0; n],
        fs: vec![0.0; n],
        ft: vec![0.0; n],
        fp: vec![0.0; n],
        fq: vec![0.0; n],
        min_ellipticity: f64::INFINITY,
    };
    for i in 0..n {
        let nd = ops::node_derivs(&ext, &nbs[i], i, h);
        let (h11, h22, h12) = ops::covariant_hessian(&nd, g1[i], g2[i]);
        let (z11, z12) = match zz {
            Some(t) => (t.t11[i], t.t12[i]),
            None => (0.0, 0.0),
        };
        let x = 2.0 * z11 - (h11 - h22);
        let y = 2.0 * z12 - 2.0 * h12;
        let w = (e2f[i] * e2f[i] + x * x + y * y).sqrt();
        let mut f = (nd.d11 + nd.d22) - e2f[i] * nd.u + w;
        if let Some(s) = source {
            f += s[i];
        }
        ws.residual[i] = f;
        ws.res_norm = ws.res_norm.max(f.abs());
        ws.x[i] = x;
        ws.y[i] = y;
        ws.w[i] = w;
        let (fr, ft, fs) = (1.0 - x / w, 1.0 + x / w, y / w);
        ws.fr[i] = fr;
        ws.ft[i] = ft;
        ws.fs[i] = fs;
        ws.fp[i] = 2.0 * (g1[i] * x + g2[i] * y) / w;
        ws.fq[i] = 2.0 * (-g2[i] * x + g1[i] * y) / w;
        ws.min_ellipticity = ws.min_ellipticity.min(fr * ft - fs * fs);
    }
    ws
}

/// Flat-form residual F at the interior nodes.
pub fn residual(
    grid: &SurfaceGrid,
    tt: &TtField,
    u: &ScalarField,
) -> Result<ScalarField, CoreError> {
    check_len(grid.n_interior(), tt, u)?;
    let ws = eval(grid, Some(&tt.tensor), None, &u.values);
    ScalarField::new(ws.residual)
}

/// Residual plus the frozen stencil coefficients at `u`.
pub fn linearize(
    grid: &SurfaceGrid,
    tt: &TtField,
    u: &ScalarField,
) -> Result<NewtonWorkspace, CoreError> {
    check_len(grid.n_interior(), tt, u)?;
    Ok(eval(grid, Some(&tt.tensor), None, &u.values))
}

fn check_len(n: usize, tt: &TtField, u: &ScalarField) -> Result<(), CoreError> {
    if tt.tensor.len() != n {
        return Err(CoreError::FieldLength {
            got: tt.tensor.len(),
            expected: n,
        });
    }
    if u.len() != n {
        return Err(CoreError::FieldLength {
            got: u.len(),
            expected: n,
        });
    }
    Ok(())
}

/// Jacobian of the flat residual in CSR form, with ghost columns expanded
/// onto their interpolation taps. Also returns the stencil bandwidth of the
/// direct (interior-to-interior) couplings for the band preconditioner.
fn assemble<D: Domain + ?Sized>(
    dom: &D,
    ws: &NewtonWorkspace,
) -> Result<(CsrMatrix, usize), CoreError> {
    let n = dom.n_interior();
    let h = dom.h();
    let inv_h2 = 1.0 / (h * h);
    let inv_2h = 0.5 / h;
    let half_h2 = 0.5 * inv_h2;
    let e2f = dom.e2f();
    let nbs = dom.neighbors();
    let mut trips: Vec<(u32, u32, f64)> = Vec::with_capacity(12 * n);
    let mut bw = 1usize;
    for i in 0..n {
        let row = i as u32;
        trips.push((row, row, -2.0 * (ws.fr[i] + ws.ft[i]) * inv_h2 - e2f[i]));
        let stencil = [
            (WW, ws.fr[i] * inv_h2 - ws.fp[i] * inv_2h),
            (E, ws.fr[i] * inv_h2 + ws.fp[i] * inv_2h),
            (S, ws.ft[i] * inv_h2 - ws.fq[i] * inv_2h),
            (N, ws.ft[i] * inv_h2 + ws.fq[i] * inv_2h),
            (SW, -ws.fs[i] * half_h2),
            (SE, ws.fs[i] * half_h2),
            (NW, ws.fs[i] * half_h2),
            (NE, -ws.fs[i] * half_h2),
        ];
        for (slot, c) in stencil {
            let col = nbs[i][slot];
            if (col as usize) < n {
                bw = bw.max((col as i64 - i as i64).unsigned_abs() as usize);
            }
            dom.expand_column(col, c, &mut |cc, vv| trips.push((row, cc, vv)));
        }
    }
    Ok((CsrMatrix::from_triplets(n, &trips)?, bw))
}

#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub u: ScalarField,
    pub iterations: usize,
    pub final_residual: f64,
    /// Sup-norm residual of every iterate, starting with the initial guess.
    pub history: Vec<f64>,
    pub min_ellipticity: f64,
}

/// Damped Newton iteration on any domain. `zz` is the seed tensor (absent
/// means zero seed) and `source` an optional extra term added to F, used by
/// the manufactured-solution runs.
pub fn newton_solve_on<D: Domain + ?Sized>(
    dom: &D,
    zz: Option<&SymTensorField>,
    source: Option<&[f64]>,
    u0: &ScalarField,
    opts: &NewtonOptions,
) -> Result<NewtonResult, CoreError> {
    let n = dom.n_interior();
    if u0.len() != n {
        return Err(CoreError::FieldLength {
            got: u0.len(),
            expected: n,
        });
    }
    if let Some(t) = zz {
        if t.len() != n {
            return Err(CoreError::FieldLength {
                got: t.len(),
                expected: n,
            });
        }
    }
    if let Some(s) = source {
        if s.len() != n {
            return Err(CoreError::FieldLength {
                got: s.len(),
                expected: n,
            });
        }
    }

    let mut u = u0.values.clone();
    let mut ws = eval(dom, zz, source, &u);
    let mut history = vec![ws.res_norm];
    let mut best = u.clone();
    let mut best_res = ws.res_norm;
    let mut min_ell = ws.min_ellipticity;
    let mut iterations = 0usize;

    loop {
        if ws.res_norm <= opts.tol {
            return Ok(NewtonResult {
                u: ScalarField::new(u)?,
                iterations,
                final_residual: ws.res_norm,
                history,
                min_ellipticity: min_ell,
            });
        }
        if iterations >= opts.max_iter {
            return Err(CoreError::NonConvergence {
                iterations,
                best_residual: best_res,
                history,
                best: Box::new(ScalarField { values: best }),
            });
        }

        let (jac, bw) = assemble(dom, &ws)?;
        let pre = BandLu::factor_banded_part(&jac, bw)?;
        let rhs: Vec<f64> = ws.residual.iter().map(|r| -r).collect();
        let delta = gmres(&jac, &pre, &rhs, opts.gmres_tol, opts.gmres_max.min(n))?;

        let mut lambda = 1.0;
        let mut step = None;
        while lambda >= opts.damping_floor {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
            let tws = eval(dom, zz, source, &trial);
            if tws.res_norm.is_finite() && tws.res_norm < ws.res_norm {
                step = Some((trial, tws));
                break;
            }
            lambda *= 0.5;
        }
        let Some((trial, tws)) = step else {
            return Err(CoreError::NonConvergence {
                iterations,
                best_residual: best_res,
                history,
                best: Box::new(ScalarField { values: best }),
            });
        };
        u = trial;
        ws = tws;
        iterations += 1;
        history.push(ws.res_norm);
        min_ell = min_ell.min(ws.min_ellipticity);
        if ws.res_norm < best_res {
            best_res = ws.res_norm;
            best = u.clone();
        }
    }
}

/// Solution of the vertical equation for one seed.
#[derive(Debug, Clone)]
pub struct MoncriefSolution {
    pub u: ScalarField,
    /// Fraction of the seed that was active (1 for a direct solve).
    pub amplitude: f64,
    pub iterations: usize,
    pub final_residual: f64,
    pub history: Vec<f64>,
    pub bounds: BoundsReport,
}

/// Default initial guess 1 + |z|_sup / (2 sqrt 2): the midpoint of the
/// a-priori band for u.
pub fn default_initial(grid: &SurfaceGrid, tt: &TtField) -> ScalarField {
    ScalarField::constant(
        1.0 + tt.sup_norm / (2.0 * std::f64::consts::SQRT_2),
        grid.n_interior(),
    )
}

/// Solves the vertical equation for the given seed. `u0` overrides the
/// default initial guess.
pub fn newton_solve(
    grid: &SurfaceGrid,
    tt: &TtField,
    u0: Option<&ScalarField>,
    opts: &NewtonOptions,
) -> Result<MoncriefSolution, CoreError> {
    let init = match u0 {
        Some(v) => v.clone(),
        None => default_initial(grid, tt),
    };
    let res = newton_solve_on(grid, Some(&tt.tensor), None, &init, opts)?;
    let bounds = check_bounds(grid, tt, &res.u);
    Ok(MoncriefSolution {
        u: res.u,
        amplitude: 1.0,
        iterations: res.iterations,
        final_residual: res.final_residual,
        history: res.history,
        bounds,
    })
}

const CONTINUATION_DEPTH: usize = 12;

/// Solves along an ascending amplitude ladder, warm-starting each stage from
/// the previous solution. A failed stage is bridged by bisecting amplitudes;
/// only the requested stages are returned.
pub fn continuation_solve(
    grid: &SurfaceGrid,
    tt: &TtField,
    amplitudes: &[f64],
    opts: &NewtonOptions,
) -> Result<Vec<MoncriefSolution>, CoreError> {
    if amplitudes.is_empty() {
        return Err(CoreError::InvalidInput("empty amplitude ladder".into()));
    }
    if amplitudes[0] < 0.0 || amplitudes[0] > 0.5 {
        return Err(CoreError::InvalidInput(format!(
            "first amplitude {} outside [0, 0.5]",
            amplitudes[0]
        )));
    }
    if let Some(w) = amplitudes.windows(2).find(|w| w[1] <= w[0]) {
        return Err(CoreError::InvalidInput(format!(
            "amplitudes not ascending at {} -> {}",
            w[0], w[1]
        )));
    }

    let mut out = Vec::with_capacity(amplitudes.len());
    let first = tt.scaled(amplitudes[0]);
    let mut anchor = (0.0, default_initial(grid, &first));
    for &a in amplitudes {
        let sol = climb(grid, tt, a, &mut anchor, opts)?;
        out.push(sol);
    }
    Ok(out)
}

/// Newton at amplitude `target` from the anchor iterate, bisecting the
/// amplitude gap whenever Newton stalls. The anchor moves to the target on
/// success.
fn climb(
    grid: &SurfaceGrid,
    tt: &TtField,
    target: f64,
    anchor: &mut (f64, ScalarField),
    opts: &NewtonOptions,
) -> Result<MoncriefSolution, CoreError> {
    let mut depth = 0usize;
    let mut a_try = target;
    loop {
        let scaled = tt.scaled(a_try);
        match newton_solve_on(grid, Some(&scaled.tensor), None, &anchor.1, opts) {
            Ok(res) => {
                anchor.0 = a_try;
                anchor.1 = res.u.clone();
                if a_try == target {
                    let bounds = check_bounds(grid, &scaled, &res.u);
                    return Ok(MoncriefSolution {
                        u: res.u,
                        amplitude: target,
                        iterations: res.iterations,
                        final_residual: res.final_residual,
                        history: res.history,
                        bounds,
                    });
                }
                a_try = target;
            }
            Err(CoreError::NonConvergence { .. }) => {
                depth += 1;
                if depth > CONTINUATION_DEPTH {
                    return Err(CoreError::ContinuationStuck {
                        amplitude: a_try,
                        depth,
                    });
                }
                a_try = 0.5 * (anchor.0 + a_try);
            }
            Err(e) => return Err(e),
        }
    }
}

/// A-priori band for a single solution: 1 <= u <= 1 + |z|_sup / sqrt 2,
/// with slack 1e-3 (1 + |z|_sup) for discretization error.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundsReport {
    pub min_u: f64,
    pub max_u: f64,
    pub seed_sup: f64,
    pub slack: f64,
    /// min_u - 1 + slack; nonnegative when the lower bound holds.
    pub lower_margin: f64,
    /// 1 + seed_sup/sqrt2 + slack - max_u; nonnegative when the upper holds.
    pub upper_margin: f64,
    pub pass: bool,
}

pub fn check_bounds(grid: &SurfaceGrid, tt: &TtField, u: &ScalarField) -> BoundsReport {
    let mut min_u = f64::INFINITY;
    let mut max_u = f64::NEG_INFINITY;
    for &v in &u.values {
        min_u = min_u.min(v);
        max_u = max_u.max(v);
    }
    let _ = grid;
    let slack = 1e-3 * (1.0 + tt.sup_norm);
    let lower_margin = min_u - 1.0 + slack;
    let upper_margin = 1.0 + tt.sup_norm / std::f64::consts::SQRT_2 + slack - max_u;
    BoundsReport {
        min_u,
        max_u,
        seed_sup: tt.sup_norm,
        slack,
        lower_margin,
        upper_margin,
        pass: lower_margin >= 0.0 && upper_margin >= 0.0,
    }
}

/// Comparison bounds for two solved seeds: the sup-norm contraction
/// |u1 - u2| <= |z1 - z2|_sup / sqrt 2, the ray bound along a common seed
/// direction, and the normalized-difference bound with a_i = |z_i|_sup.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PairBounds {
    /// rhs + slack - lhs for |u1 - u2| <= |z1 - z2|_sup / sqrt 2.
    pub diff_margin: f64,
    /// Margin of |u1 - u2/s| <= |1 - 1/s| when z2 = s z1; absent otherwise.
    pub ray_margin: Option<f64>,
    /// Margin of the normalized bound; absent when either seed vanishes.
    pub normalized_margin: Option<f64>,
    pub slack: f64,
    pub pass: bool,
}

/// Sup over octagon nodes of sqrt2 |alpha t1 + beta t2|_rho, the same
/// normalization as TtField::sup_norm.
fn sup_rho_combo(
    grid: &SurfaceGrid,
    t1: &SymTensorField,
    alpha: f64,
    t2: &SymTensorField,
    beta: f64,
) -> f64 {
    let mut sup = 0.0f64;
    for i in 0..grid.n_interior() {
        if grid.quad_weight(i) <= 0.0 {
            continue;
        }
        let t = Sym2::new(
            alpha * t1.t11[i] + beta * t2.t11[i],
            alpha * t1.t12[i] + beta * t2.t12[i],
            alpha * t1.t22[i] + beta * t2.t22[i],
        );
        sup = sup.max(std::f64::consts::SQRT_2 * rho_norm(grid.rho_at(i).0, t));
    }
    sup
}

/// Ratio s with c2 = s c1, if the coefficient vectors are positively
/// collinear.
fn ray_ratio(c1: &[f64; 6], c2: &[f64; 6]) -> Option<f64> {
    let n1: f64 = c1.iter().map(|v| v * v).sum();
    let n2: f64 = c2.iter().map(|v| v * v).sum();
    if n1 == 0.0 || n2 == 0.0 {
        return None;
    }
    let d: f64 = c1.iter().zip(c2).map(|(a, b)| a * b).sum();
    let s = d / n1;
    let resid2 = (n2 - d * d / n1).max(0.0);
    if s > 0.0 && resid2 <= 1e-20 * n2 {
        Some(s)
    } else {
        None
    }
}

pub fn check_pair(
    grid: &SurfaceGrid,
    t1: &TtField,
    u1: &ScalarField,
    t2: &TtField,
    u2: &ScalarField,
) -> PairBounds {
    let inv_sqrt2 = 1.0 / std::f64::consts::SQRT_2;
    let slack = 1e-3 * (1.0 + t1.sup_norm.max(t2.sup_norm));

    let lhs_diff = u1
        .values
        .iter()
        .zip(&u2.values)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let rhs_diff = inv_sqrt2 * sup_rho_combo(grid, &t1.tensor, 1.0, &t2.tensor, -1.0);
    let diff_margin = rhs_diff + slack - lhs_diff;

    let ray_margin = ray_ratio(&t1.coeffs, &t2.coeffs).map(|s| {
        let lhs = u1
            .values
            .iter()
            .zip(&u2.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b / s).abs()));
        (1.0 - 1.0 / s).abs() + slack - lhs
    });

    let normalized_margin = if t1.sup_norm > 0.0 && t2.sup_norm > 0.0 {
        let (a1, a2) = (t1.sup_norm, t2.sup_norm);
        let lhs = u1
            .values
            .iter()
            .zip(&u2.values)
            .fold(0.0f64, |m, (p, q)| m.max((p / a1 - q / a2).abs()));
        let rhs = (1.0 / a1 - 1.0 / a2).abs()
            + inv_sqrt2 * sup_rho_combo(grid, &t1.tensor, 1.0 / a1, &t2.tensor, -1.0 / a2);
        Some(rhs + slack - lhs)
    } else {
        None
    };

    let pass = diff_margin >= 0.0
        && ray_margin.is_none_or(|m| m >= 0.0)
        && normalized_margin.is_none_or(|m| m >= 0.0);
    PairBounds {
        diff_margin,
        ray_margin,
        normalized_margin,
        slack,
        pass,
    }
}

/// Solves the manufactured problem on its Dirichlet patch and returns the
/// grid, the Newton output, and the sup error against the exact profile.
pub fn mms_solve(
    problem: &MmsProblem,
    h: f64,
    opts: &NewtonOptions,
) -> Result<(PatchGrid, NewtonResult, f64), CoreError> {
    let patch = problem.patch(h)?;
    let source: Vec<f64> = (0..patch.n_interior())
        .map(|i| problem.source(patch.node(i)))
        .collect();
    let u0 = ScalarField::constant(1.0, patch.n_interior());
    let res = newton_solve_on(&patch, None, Some(&source), &u0, opts)?;
    let err = (0..patch.n_interior())
        .map(|i| (res.u.values[i] - problem.exact(patch.node(i))).abs())
        .fold(0.0f64, f64::max);
    Ok((patch, res, err))
}
