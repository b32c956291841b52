//! The forward map psi (seed tensor to hyperbolic metric), its inverse
//! (hyperbolic metric back to the seed), round-trip verification, and the
//! energy properness scan along rays of seeds.

use crate::error::CoreError;
use crate::geometry::{self, DerivedGeometry};
use crate::grid::ops::{self, Domain};
use crate::grid::{ScalarField, SurfaceGrid, SymTensorField};
use crate::linsolve::{gmres, BandLu, CsrMatrix};
use crate::solver::{self, MoncriefSolution, NewtonOptions};
use crate::sym2::Sym2;
use crate::theta::{verify_tt, TtCheck, TtField};
use serde::{Deserialize, Serialize};

/// A constant-curvature metric sample in the fixed chart, with a note on
/// where it came from.
#[derive(Debug, Clone)]
pub struct GammaMetric {
    pub gamma: SymTensorField,
    pub label: String,
}

/// Validation summary for a metric claimed to be hyperbolic.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GammaCheck {
    pub min_det: f64,
    /// sup over octagon nodes of |R(gamma) + 1|.
    pub curvature_defect: f64,
    /// tension of the identity map toward the base metric.
    pub harmonicity_sup: f64,
}

impl GammaMetric {
    pub fn validate(&self, grid: &SurfaceGrid) -> Result<GammaCheck, CoreError> {
        let n = grid.n_interior();
        if self.gamma.len() != n {
            return Err(CoreError::FieldLength {
                got: self.gamma.len(),
                expected: n,
            });
        }
        let mut min_det = f64::INFINITY;
        for i in 0..n {
            let det = self.gamma.at(i).det();
            if det <= 0.0 || !det.is_finite() {
                return Err(CoreError::NotPositiveDefinite { node: i, det });
            }
            min_det = min_det.min(det);
        }
        let r = geometry::curvature_g(grid, &self.gamma)?;
        let mut curvature_defect = 0.0f64;
        for i in 0..n {
            if grid.quad_weight(i) > 0.0 {
                curvature_defect = curvature_defect.max((r.values[i] + 1.0).abs());
            }
        }
        let (_, harmonicity_sup) = geometry::harmonicity_residual(grid, &self.gamma)?;
        Ok(GammaCheck {
            min_det,
            curvature_defect,
            harmonicity_sup,
        })
    }

    /// Serializes the per-node components together with the grid fingerprint
    /// so a later import can refuse a mismatched grid.
    pub fn to_json(&self, grid: &SurfaceGrid) -> Result<String, CoreError> {
        let doc = GammaDoc {
            grid: crate::report::grid_fingerprint(grid),
            h: grid.h(),
            n: self.gamma.len(),
            label: self.label.clone(),
            gxx: self.gamma.t11.clone(),
            gxy: self.gamma.t12.clone(),
            gyy: self.gamma.t22.clone(),
        };
        serde_json::to_string(&doc).map_err(|e| CoreError::InvalidInput(e.to_string()))
    }

    pub fn from_json(grid: &SurfaceGrid, text: &str) -> Result<GammaMetric, CoreError> {
        let doc: GammaDoc =
            serde_json::from_str(text).map_err(|e| CoreError::InvalidInput(e.to_string()))?;
        let fp = crate::report::grid_fingerprint(grid);
        if doc.grid != fp {
            return Err(CoreError::InvalidInput(format!(
                "metric was sampled on grid {} but the current grid is {fp}",
                doc.grid
            )));
        }
        if doc.n != grid.n_interior() || doc.gxx.len() != doc.n {
            return Err(CoreError::FieldLength {
                got: doc.gxx.len(),
                expected: grid.n_interior(),
            });
        }
        Ok(GammaMetric {
            gamma: SymTensorField::from_components(doc.gxx, doc.gxy, doc.gyy)?,
            label: doc.label,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct GammaDoc {
    grid: String,
    h: f64,
    n: usize,
    label: String,
    gxx: Vec<f64>,
    gxy: Vec<f64>,
    gyy: Vec<f64>,
}

/// Output of one forward run.
#[derive(Debug, Clone)]
pub struct PsiRun {
    pub gamma: GammaMetric,
    pub geometry: DerivedGeometry,
    pub solution: MoncriefSolution,
}

/// Forward map: solve, derive the geometry, return gamma = e^{2 lambda} g.
pub fn psi(grid: &SurfaceGrid, tt: &TtField, opts: &NewtonOptions) -> Result<PsiRun, CoreError> {
    let solution = solver::newton_solve(grid, tt, None, opts)?;
    let geometry = geometry::derive(grid, tt, &solution.u)?;
    let gamma = GammaMetric {
        gamma: geometry.gamma.clone(),
        label: "forward".into(),
    };
    Ok(PsiRun {
        gamma,
        geometry,
        solution,
    })
}

/// Everything the inverse construction produces on the way from gamma back
/// to a seed tensor.
#[derive(Debug, Clone)]
pub struct InverseIntermediate {
    /// e(gamma, rho) = (1/2) gamma^{ab} rho_ab.
    pub energy_density: ScalarField,
    /// mu_rho / mu_gamma.
    pub jacobian_ratio: ScalarField,
    /// gamma-trace-free part of rho, scaled by -1/2.
    pub khat: SymTensorField,
    pub lambda: ScalarField,
    pub g: SymTensorField,
    pub xi: SymTensorField,
    pub b: ScalarField,
    pub u: ScalarField,
    /// Recovered seed tensor.
    pub z: SymTensorField,
    /// |k|^2_g per node (branch check: must stay below 1).
    pub k_norm_sq: ScalarField,
    /// sup |e^2 - 2|khat|^2_gamma - (mu_rho/mu_gamma)^2|.
    pub positivity_sup: f64,
    /// sup | |k|^2_g - B/(B+1) |.
    pub branch_sup: f64,
    /// sup of the trace/asymmetry removed when projecting recovered xi.
    pub projection_sup: f64,
    /// sup |Delta_rho u - u + B| after the linear solve.
    pub linear_residual: f64,
}

/// Inverse map: pointwise tensor algebra plus one linear elliptic solve.
pub fn psi_inverse(
    grid: &SurfaceGrid,
    gamma: &GammaMetric,
) -> Result<InverseIntermediate, CoreError> {
    let n = grid.n_interior();
    if gamma.gamma.len() != n {
        return Err(CoreError::FieldLength {
            got: gamma.gamma.len(),
            expected: n,
        });
    }
    let mut energy_density = Vec::with_capacity(n);
    let mut jacobian_ratio = Vec::with_capacity(n);
    let mut khat = SymTensorField::zeros(n);
    let mut lambda = Vec::with_capacity(n);
    let mut g = SymTensorField::zeros(n);
    let mut xi = SymTensorField::zeros(n);
    let mut b = Vec::with_capacity(n);
    let mut k_norm_sq = Vec::with_capacity(n);
    let mut positivity_sup = 0.0f64;
    let mut projection_sup = 0.0f64;

    for i in 0..n {
        let e2f = grid.rho_at(i).0;
        let ga = gamma.gamma.at(i);
        let det = ga.det();
        if det <= 0.0 || !det.is_finite() {
            return Err(CoreError::NotPositiveDefinite { node: i, det });
        }
        let gi = ga.inverse().expect("det checked positive");
        let mu_gamma = det.sqrt();
        let e = 0.5 * e2f * (gi.xx + gi.yy);
        let jr = e2f / mu_gamma;
        // khat = -(1/2)(rho - e gamma)
        let kh = Sym2::new(
            -0.5 * (e2f - e * ga.xx),
            0.5 * e * ga.xy,
            -0.5 * (e2f - e * ga.yy),
        );
        // |khat|^2_gamma through the mixed matrix gamma^{-1} khat
        let m11 = gi.xx * kh.xx + gi.xy * kh.xy;
        let m12 = gi.xx * kh.xy + gi.xy * kh.yy;
        let m21 = gi.xy * kh.xx + gi.yy * kh.xy;
        let m22 = gi.xy * kh.xy + gi.yy * kh.yy;
        let khat_sq = m11 * m11 + 2.0 * m12 * m21 + m22 * m22;
        positivity_sup = positivity_sup
            .max((e * e - 2.0 * khat_sq - jr * jr).abs() / (e * e).max(1.0));

        let scale = e + jr; // e^{-2 lambda}
        let lam = -0.5 * scale.ln();
        // xi_a^c = (mu_g/mu_rho) g^{bc} khat_ab, lowered with rho; the
        // normalization of g cancels, leaving xi_chart = mu_gamma khat gamma^{-1}
        let s = mu_gamma;
        let x11 = s * (kh.xx * gi.xx + kh.xy * gi.xy);
        let x12 = s * (kh.xx * gi.xy + kh.xy * gi.yy);
        let x21 = s * (kh.xy * gi.xx + kh.yy * gi.xy);
        let x22 = s * (kh.xy * gi.xy + kh.yy * gi.yy);
        let t11 = 0.5 * (x11 - x22);
        let t12 = 0.5 * (x12 + x21);
        projection_sup = projection_sup
            .max((x11 + x22).abs().max((x12 - x21).abs()) / e2f);

        let bi = (1.0 + 4.0 * (t11 * t11 + t12 * t12) / (e2f * e2f)).sqrt();
        energy_density.push(e);
        jacobian_ratio.push(jr);
        khat.set(i, kh);
        lambda.push(lam);
        g.set(i, ga * scale);
        xi.set(i, Sym2::new(t11, t12, -t11));
        b.push(bi);
        // |k|^2_g = |khat|^2_g + 1/2 on the CMC slice normalization
        k_norm_sq.push(khat_sq / (scale * scale) + 0.5);
    }

    let b = ScalarField { values: b };
    let k_norm_sq = ScalarField { values: k_norm_sq };
    let mut branch_sup = 0.0f64;
    for i in 0..n {
        let want = b.values[i] / (b.values[i] + 1.0);
        branch_sup = branch_sup.max((k_norm_sq.values[i] - want).abs());
    }

    let (u, linear_residual) = solve_linear_u(grid, &b)?;

    // z_ab = xi_ab + trace-free covariant Hessian of u
    let hess = grid.hessian_rho(&u)?;
    let mut z = SymTensorField::zeros(n);
    for i in 0..n {
        let hm = hess.at(i);
        z.set(
            i,
            Sym2::new(
                xi.t11[i] + 0.5 * (hm.xx - hm.yy),
                xi.t12[i] + hm.xy,
                -(xi.t11[i] + 0.5 * (hm.xx - hm.yy)),
            ),
        );
    }

    Ok(InverseIntermediate {
        energy_density: ScalarField {
            values: energy_density,
        },
        jacobian_ratio: ScalarField {
            values: jacobian_ratio,
        },
        khat,
        lambda: ScalarField { values: lambda },
        g,
        xi,
        b,
        u,
        z,
        k_norm_sq,
        positivity_sup,
        branch_sup,
        projection_sup,
        linear_residual,
    })
}

/// Solves the linear problem Delta_rho u - u + B = 0.
fn solve_linear_u(
    grid: &SurfaceGrid,
    b: &ScalarField,
) -> Result<(ScalarField, f64), CoreError> {
    let n = grid.n_interior();
    let h = grid.h();
    let inv_h2 = 1.0 / (h * h);
    let nbs = grid.neighbor_rows();
    let mut trips = Vec::with_capacity(6 * n);
    let mut bw = 1usize;
    for i in 0..n {
        let e2f = grid.rho_at(i).0;
        trips.push((i as u32, i as u32, -4.0 * inv_h2 - e2f));
        for slot in [ops::W, ops::E, ops::S, ops::N] {
            let col = nbs[i][slot];
            if (col as usize) < n {
                bw = bw.max((col as i64 - i as i64).unsigned_abs() as usize);
            }
            grid.expand_column(col, inv_h2, &mut |cc, vv| trips.push((i as u32, cc, vv)));
        }
    }
    let a = CsrMatrix::from_triplets(n, &trips)?;
    let pre = BandLu::factor_banded_part(&a, bw)?;
    let rhs: Vec<f64> = (0..n)
        .map(|i| -grid.rho_at(i).0 * b.values[i])
        .collect();
    let x = gmres(&a, &pre, &rhs, 1e-13, 200.min(n))?;
    let u = ScalarField::new(x)?;
    let lap = grid.laplacian_rho(&u)?;
    let mut sup = 0.0f64;
    for i in 0..n {
        sup = sup.max((lap.values[i] - u.values[i] + b.values[i]).abs());
    }
    Ok((u, sup))
}

/// Forward-then-inverse comparison on one seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundTripReport {
    pub seed_sup: f64,
    /// sup-norm (reported units) of recovered minus input seed.
    pub abs_error: f64,
    pub rel_error: f64,
    /// Agreement of B computed by the forward and inverse routes.
    pub b_dev: f64,
    /// Agreement of lambda computed by the forward and inverse routes.
    pub lambda_dev: f64,
    pub positivity_sup: f64,
    pub branch_sup: f64,
    pub linear_residual: f64,
    /// TT quality of the recovered tensor.
    pub trace_max: f64,
    pub div_max: f64,
}

pub fn round_trip(
    grid: &SurfaceGrid,
    tt: &TtField,
    opts: &NewtonOptions,
) -> Result<RoundTripReport, CoreError> {
    let run = psi(grid, tt, opts)?;
    let inv = psi_inverse(grid, &run.gamma)?;
    let n = grid.n_interior();
    let mut abs_error = 0.0f64;
    let mut b_dev = 0.0f64;
    let mut lambda_dev = 0.0f64;
    for i in 0..n {
        b_dev = b_dev.max((inv.b.values[i] - run.geometry.b.values[i]).abs());
        lambda_dev =
            lambda_dev.max((inv.lambda.values[i] - run.geometry.lambda.values[i]).abs());
        if grid.quad_weight(i) > 0.0 {
            let d = inv.z.at(i) - tt.tensor.at(i);
            let e2f = grid.rho_at(i).0;
            abs_error =
                abs_error.max(std::f64::consts::SQRT_2 * crate::theta::rho_norm(e2f, d));
        }
    }
    let recovered = TtField::from_tensor(grid, tt.coeffs, inv.z.clone());
    let check: TtCheck = verify_tt(grid, &recovered)?;
    Ok(RoundTripReport {
        seed_sup: tt.sup_norm,
        abs_error,
        rel_error: abs_error / tt.sup_norm.max(1e-300),
        b_dev,
        lambda_dev,
        positivity_sup: inv.positivity_sup,
        branch_sup: inv.branch_sup,
        linear_residual: inv.linear_residual,
        trace_max: check.trace_max,
        div_max: check.div_max,
    })
}

/// One row of the energy properness scan.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScanRow {
    pub scale: f64,
    pub sup_norm: f64,
    pub energy: f64,
    pub area_g: f64,
    pub area_rho: f64,
    pub min_b: f64,
    pub max_b: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
    /// Least-squares fit E ~ slope * |z| + intercept over all rows.
    pub fit_slope: f64,
    pub fit_intercept: f64,
    /// min and max of E/|z| over the larger half of the scales.
    pub ratio_low: f64,
    pub ratio_high: f64,
}

impl ScanTable {
    /// The properties the scan is expected to exhibit.
    pub fn check(&self) -> Result<(), CoreError> {
        for w in self.rows.windows(2) {
            if w[1].energy <= w[0].energy {
                return Err(CoreError::InvalidInput(format!(
                    "energy not increasing between scales {} and {}",
                    w[0].scale, w[1].scale
                )));
            }
        }
        for r in &self.rows {
            let cap = (1.0 + r.sup_norm) * r.area_rho * 1.01;
            if r.energy > cap {
                return Err(CoreError::InvalidInput(format!(
                    "energy {} above the area bound {} at scale {}",
                    r.energy, cap, r.scale
                )));
            }
        }
        if !(self.ratio_low > 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "no positive lower envelope: ratio_low = {}",
                self.ratio_low
            )));
        }
        Ok(())
    }
}

/// Solves along an ascending ray of seed amplitudes and tabulates energy
/// against seed size.
pub fn properness_scan(
    grid: &SurfaceGrid,
    direction: &TtField,
    scales: &[f64],
    opts: &NewtonOptions,
) -> Result<ScanTable, CoreError> {
    if direction.sup_norm <= 0.0 {
        return Err(CoreError::InvalidInput(
            "properness scan needs a nonzero direction".into(),
        ));
    }
    let unit = direction.scaled(1.0 / direction.sup_norm);
    let sols = solver::continuation_solve(grid, &unit, scales, opts)?;
    let mut rows = Vec::with_capacity(sols.len());
    for sol in &sols {
        let seed = unit.scaled(sol.amplitude);
        let xi = geometry::compute_xi(grid, &seed, &sol.u)?;
        let (b, min_node) = geometry::compute_b(grid, &xi);
        let area = geometry::area_energy(grid, &sol.u, &b)?;
        let mut max_b = 0.0f64;
        for i in 0..grid.n_interior() {
            if grid.quad_weight(i) > 0.0 {
                max_b = max_b.max(b.values[i]);
            }
        }
        rows.push(ScanRow {
            scale: sol.amplitude,
            sup_norm: seed.sup_norm,
            energy: area.energy,
            area_g: area.area_g,
            area_rho: area.area_rho,
            min_b: b.values[min_node],
            max_b,
            iterations: sol.iterations,
        });
    }
    let m = rows.len() as f64;
    let sx: f64 = rows.iter().map(|r| r.sup_norm).sum();
    let sy: f64 = rows.iter().map(|r| r.energy).sum();
    let sxx: f64 = rows.iter().map(|r| r.sup_norm * r.sup_norm).sum();
    let sxy: f64 = rows.iter().map(|r| r.sup_norm * r.energy).sum();
    let denom = m * sxx - sx * sx;
    let (fit_slope, fit_intercept) = if denom.abs() > 1e-300 {
        let slope = (m * sxy - sx * sy) / denom;
        (slope, (sy - slope * sx) / m)
    } else {
        (0.0, sy / m)
    };
    let half = rows.len() / 2;
    let mut ratio_low = f64::INFINITY;
    let mut ratio_high = 0.0f64;
    for r in &rows[half..] {
        let ratio = r.energy / r.sup_norm.max(1e-300);
        ratio_low = ratio_low.min(ratio);
        ratio_high = ratio_high.max(ratio);
    }
    Ok(ScanTable {
        rows,
        fit_slope,
        fit_intercept,
        ratio_low,
        ratio_high,
    })
}
