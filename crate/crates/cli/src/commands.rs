//! The five subcommands. Each returns the finished report and the process
//! exit code; main writes the report and prints the summary.

use crate::config::RunConfig;
use crate::output::{
    GeometryInfo, GridInfo, GroupInfo, MmsInfo, MmsLevel, RoundtripRow, RunReport, ScanRayInfo,
    SeedInfo, SolverInfo, Stopwatch, write_csv,
};
use anyhow::Result;
use hma_core::theta::{assemble_tt, random_tt, verify_tt};
use hma_core::{
    diameter_bound_with, geometry, inj_rho, grid_fingerprint, mms_solve, solver, teich,
    CoreError, ElementTable, FuchsianGroup, MmsProblem, RhoMetric, ScalarField, SurfaceGrid,
    ThetaCache, TtField,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

/// Tolerance for finite-difference-limited diagnostics, calibrated at
/// h = 0.02 and scaled by h^2 down to a floor where series truncation and
/// solver noise take over.
fn fd_tol(c_at_002: f64, h: f64) -> f64 {
    let s = (h / 0.02) * (h / 0.02);
    c_at_002 * s.max(0.3)
}

struct Stage {
    group: FuchsianGroup,
    grid: SurfaceGrid,
    cache: ThetaCache,
}

fn build_stage(
    cfg: &RunConfig,
    report: &mut RunReport,
    watch: &mut Stopwatch,
) -> Result<Stage, CoreError> {
    let group = FuchsianGroup::bolza()?;
    let grid = SurfaceGrid::build_with_budget(&group, cfg.grid.h, cfg.grid.word_budget)?;
    watch.lap(report, "grid");
    let table = ElementTable::enumerate(&group, cfg.series.depth);
    let cache = ThetaCache::build(&grid, &table);
    watch.lap(report, "series");
    report.grid = Some(GridInfo {
        h: grid.h(),
        interior_nodes: grid.n_interior(),
        octagon_nodes: grid.n_octagon(),
        fingerprint: grid_fingerprint(&grid),
    });
    report.group = Some(GroupInfo {
        relation_residual: group.relation_residual(),
        series_depth: cfg.series.depth,
        series_elements: table.len(),
        elements_per_level: (0..=cfg.series.depth).map(|l| table.level_count(l)).collect(),
    });
    Ok(Stage { group, grid, cache })
}

pub fn cmd_solve(cfg: &RunConfig, dir: &Path) -> Result<(RunReport, i32)> {
    let mut report = RunReport::new("solve", cfg);
    let mut watch = Stopwatch::start();
    let code = match solve_inner(cfg, dir, &mut report, &mut watch) {
        Ok(()) => report.finish(),
        Err(e) => report.fail_with(&e),
    };
    watch.lap(&mut report, "total_remainder");
    Ok((report, code))
}

fn solve_inner(
    cfg: &RunConfig,
    dir: &Path,
    report: &mut RunReport,
    watch: &mut Stopwatch,
) -> Result<(), CoreError> {
    let coeffs = cfg
        .coefficients()
        .map_err(|e| CoreError::InvalidInput(e.to_string()))?;
    let stage = build_stage(cfg, report, watch)?;
    let grid = &stage.grid;
    let h = grid.h();

    let tt = assemble_tt(grid, &stage.cache, coeffs);
    let tt_check = verify_tt(grid, &tt)?;
    report.seed = Some(SeedInfo {
        coefficients: coeffs,
        sup_norm: tt.sup_norm,
        trace_max: tt_check.trace_max,
        div_max: tt_check.div_max,
        nodes_checked: tt_check.n_checked,
    });
    watch.lap(report, "seed");

    let run = teich::psi(grid, &tt, &cfg.newton_options())?;
    watch.lap(report, "solve_and_derive");
    let geo = &run.geometry;
    let sol = &run.solution;
    report.solver = Some(SolverInfo {
        iterations: sol.iterations,
        final_residual: sol.final_residual,
        history: sol.history.clone(),
        min_u: sol.bounds.min_u,
        max_u: sol.bounds.max_u,
    });

    let mut mu_rel = 0.0f64;
    for i in 0..grid.n_interior() {
        let want = 1.0 + geo.b.values[i];
        mu_rel = mu_rel.max((geo.mu_ratio.values[i] - want).abs() / want);
    }
    let (tension_field, tension_sup) = geometry::harmonicity_residual(grid, &geo.g)?;
    let b_rep = geometry::b_identities(grid, &geo.g, &geo.b, &geo.hopf)?;
    let r_g = geometry::curvature_g(grid, &geo.g)?;
    let mut curvature_defect = 0.0f64;
    for i in 0..grid.n_interior() {
        if grid.quad_weight(i) > 0.0 {
            curvature_defect =
                curvature_defect.max((r_g.values[i] + 1.0 / geo.mu_ratio.values[i]).abs());
        }
    }
    let gamma_check = run.gamma.validate(grid)?;
    let diameter_estimate = geometry::diameter_estimate(grid, &geo.g);
    let inj = cfg.inj_override.unwrap_or_else(inj_rho);
    let diameter_bound = diameter_bound_with(tt.sup_norm, geo.area.area_rho, inj);
    report.geometry = Some(GeometryInfo {
        area: geo.area,
        b: b_rep,
        min_b: geo.min_b,
        mu_identity_rel: mu_rel,
        tension_sup,
        curvature_defect,
        gamma: gamma_check,
        diameter_estimate,
        diameter_bound,
    });
    watch.lap(report, "identities");

    let area_rho = geo.area.area_rho;
    let c = &mut report.checks;
    c.below("relation_residual", stage.group.relation_residual(), 1e-10);
    c.below("seed_trace_rel", tt_check.trace_max / tt.sup_norm.max(1e-12), 1e-6);
    c.below("seed_divergence_rel", tt_check.div_max / tt.sup_norm.max(1e-12), 1e-3);
    c.below("newton_residual", sol.final_residual, cfg.solver.tol);
    c.at_least("bound_lower_margin", sol.bounds.lower_margin, 0.0);
    c.at_least("bound_upper_margin", sol.bounds.upper_margin, 0.0);
    c.below("metric_density_rel", mu_rel, 1e-10);
    c.below("area_identity", geo.area.identity_residual, 0.005 * area_rho);
    c.at_least("area_lower", geo.area.area_g, 2.0 * area_rho * 0.99);
    c.below("area_upper", geo.area.area_g, (2.0 + tt.sup_norm) * area_rho * 1.01);
    c.below("energy_upper", geo.area.energy, (1.0 + tt.sup_norm) * area_rho * 1.01);
    c.below("min_b_excess", geo.min_b - 1.0, 0.02);
    c.below("hopf_identity", b_rep.hopf_identity_sup, 1e-8);
    c.below("b_equation", b_rep.b_equation_sup, fd_tol(0.08, h));
    c.below("holomorphy", b_rep.holomorphy_sup, fd_tol(0.08, h));
    c.below("tension", tension_sup, fd_tol(0.08, h));
    c.below("curvature_identity", curvature_defect, fd_tol(0.15, h));
    c.below("gamma_curvature", gamma_check.curvature_defect, fd_tol(0.3, h));
    c.at_least("gamma_min_det", gamma_check.min_det, f64::MIN_POSITIVE);
    c.below("diameter_vs_bound", diameter_estimate, diameter_bound);

    // per-node table: flat-residual in curved units plus identity defects
    let res = solver::residual(grid, &tt, &sol.u)?;
    let mut rows = Vec::with_capacity(grid.n_interior());
    for i in 0..grid.n_interior() {
        let z = grid.node(i);
        let e2f = grid.rho_at(i).0;
        rows.push(vec![
            i as f64,
            z.re,
            z.im,
            sol.u.values[i],
            geo.b.values[i],
            geo.lambda.values[i],
            res.values[i] / e2f,
            (r_g.values[i] + 1.0 / geo.mu_ratio.values[i]).abs(),
            tension_field.values[i],
        ]);
    }
    write_csv(
        &dir.join("fields.csv"),
        "node,x,y,u,B,lambda,residual,curvature_defect,tension",
        &rows,
    )
    .map_err(|e| CoreError::InvalidInput(e.to_string()))?;
    let gamma_text = run.gamma.to_json(grid)?;
    std::fs::write(dir.join("gamma.json"), gamma_text)
        .map_err(|e| CoreError::InvalidInput(e.to_string()))?;
    watch.lap(report, "outputs");
    Ok(())
}

pub fn cmd_mms(cfg: &RunConfig, _dir: &Path) -> Result<(RunReport, i32)> {
    let mut report = RunReport::new("mms", cfg);
    let mut watch = Stopwatch::start();
    let code = match mms_inner(cfg, &mut report, &mut watch) {
        Ok(regressed) => {
            let code = report.finish();
            if regressed {
                4
            } else {
                code
            }
        }
        Err(e) => report.fail_with(&e),
    };
    watch.lap(&mut report, "total_remainder");
    Ok((report, code))
}

fn mms_inner(
    cfg: &RunConfig,
    report: &mut RunReport,
    watch: &mut Stopwatch,
) -> Result<bool, CoreError> {
    let problem = MmsProblem {
        r_patch: cfg.mms.patch_radius,
        amplitude: cfg.mms.amplitude,
    };
    let rho = RhoMetric;
    let opts = cfg.newton_options();
    let mut levels = Vec::new();
    let mut solve_errs = Vec::new();
    let mut lap_errs = Vec::new();
    let mut hess_errs = Vec::new();
    for k in 0..cfg.mms.levels {
        let h = cfg.mms.h / (1 << k) as f64;
        let (patch, res, err) = mms_solve(&problem, h, &opts)?;
        let n = patch.n_interior();
        let exact = ScalarField::new((0..n).map(|i| problem.exact(patch.node(i))).collect())?;
        let lap = patch.laplacian_rho(&exact)?;
        let hess = patch.hessian_rho(&exact)?;
        let mut lap_err = 0.0f64;
        let mut hess_err = 0.0f64;
        for i in 0..n {
            let z = patch.node(i);
            let j = problem.jet(z);
            let e2f = rho.e2f(z);
            let (f1, f2) = rho.f_grad(z);
            lap_err = lap_err.max((lap.values[i] - (j.uxx + j.uyy) / e2f).abs());
            let radial = f1 * j.ux - f2 * j.uy;
            let cross = f1 * j.uy + f2 * j.ux;
            let hm = hess.at(i);
            hess_err = hess_err
                .max((hm.xx - (j.uxx - radial)).abs())
                .max((hm.xy - (j.uxy - cross)).abs())
                .max((hm.yy - (j.uyy + radial)).abs());
        }
        levels.push(MmsLevel {
            h,
            interior_nodes: n,
            solve_error: err,
            laplacian_error: lap_err,
            hessian_error: hess_err,
            iterations: res.iterations,
        });
        solve_errs.push(err);
        lap_errs.push(lap_err);
        hess_errs.push(hess_err);
        watch.lap(report, &format!("level_{k}"));
    }
    let orders = if cfg.mms.levels >= 2 {
        Some((
            hma_core::observed_order(&solve_errs),
            hma_core::observed_order(&lap_errs),
            hma_core::observed_order(&hess_errs),
        ))
    } else {
        None
    };
    report.mms = Some(MmsInfo {
        levels,
        order_solve: orders.map(|o| o.0),
        order_laplacian: orders.map(|o| o.1),
        order_hessian: orders.map(|o| o.2),
    });
    let mut regressed = false;
    if let Some((s, l, h)) = orders {
        let c = &mut report.checks;
        c.at_least("order_solve", s, 1.8);
        c.at_least("order_laplacian", l, 1.8);
        c.at_least("order_hessian", h, 1.8);
        regressed = s < 1.5 || l < 1.5 || h < 1.5;
    }
    Ok(regressed)
}

pub fn cmd_roundtrip(cfg: &RunConfig, dir: &Path) -> Result<(RunReport, i32)> {
    let mut report = RunReport::new("roundtrip", cfg);
    let mut watch = Stopwatch::start();
    let code = match roundtrip_inner(cfg, dir, &mut report, &mut watch) {
        Ok(()) => report.finish(),
        Err(e) => report.fail_with(&e),
    };
    watch.lap(&mut report, "total_remainder");
    Ok((report, code))
}

fn roundtrip_inner(
    cfg: &RunConfig,
    dir: &Path,
    report: &mut RunReport,
    watch: &mut Stopwatch,
) -> Result<(), CoreError> {
    let stage = build_stage(cfg, report, watch)?;
    let grid = &stage.grid;
    let opts = cfg.newton_options();
    let sup = cfg.roundtrip.sup;
    let mut directions: Vec<(String, TtField)> = Vec::new();
    for k in 0..6 {
        let mut coeffs = [0.0; 6];
        coeffs[k] = 1.0;
        let tt = assemble_tt(grid, &stage.cache, coeffs);
        directions.push((format!("e{k}"), tt.scaled(sup / tt.sup_norm)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    for k in 0..cfg.roundtrip.random_directions {
        directions.push((
            format!("r{k}"),
            random_tt(grid, &stage.cache, &mut rng, sup),
        ));
    }
    let mut rows = Vec::new();
    let mut csv_rows = Vec::new();
    for (idx, (label, tt)) in directions.iter().enumerate() {
        let rep = teich::round_trip(grid, tt, &opts)?;
        report.checks.below(
            &format!("rel_error_{label}"),
            rep.rel_error,
            1e-2,
        );
        report.checks.below(
            &format!("recovered_trace_{label}"),
            rep.trace_max / rep.seed_sup.max(1e-12),
            1e-6,
        );
        report.checks.below(
            &format!("recovered_divergence_{label}"),
            rep.div_max / rep.seed_sup.max(1e-12),
            2e-3,
        );
        csv_rows.push(vec![
            idx as f64,
            rep.seed_sup,
            rep.abs_error,
            rep.rel_error,
            rep.linear_residual,
            rep.trace_max,
            rep.div_max,
        ]);
        rows.push(RoundtripRow {
            label: label.clone(),
            seed_sup: rep.seed_sup,
            abs_error: rep.abs_error,
            rel_error: rep.rel_error,
            linear_residual: rep.linear_residual,
            trace_max: rep.trace_max,
            div_max: rep.div_max,
            b_dev: rep.b_dev,
            lambda_dev: rep.lambda_dev,
        });
        watch.lap(report, &format!("trip_{label}"));
    }
    report.roundtrip = Some(rows);
    write_csv(
        &dir.join("roundtrip.csv"),
        "direction,supnorm,absError,relError,linearResidual,traceMax,divMax",
        &csv_rows,
    )
    .map_err(|e| CoreError::InvalidInput(e.to_string()))?;
    Ok(())
}

pub fn cmd_scan(cfg: &RunConfig, dir: &Path) -> Result<(RunReport, i32)> {
    let mut report = RunReport::new("scan", cfg);
    let mut watch = Stopwatch::start();
    let code = match scan_inner(cfg, dir, &mut report, &mut watch) {
        Ok(()) => report.finish(),
        Err(e) => report.fail_with(&e),
    };
    watch.lap(&mut report, "total_remainder");
    Ok((report, code))
}

fn scan_inner(
    cfg: &RunConfig,
    dir: &Path,
    report: &mut RunReport,
    watch: &mut Stopwatch,
) -> Result<(), CoreError> {
    let coeffs = cfg
        .coefficients()
        .map_err(|e| CoreError::InvalidInput(e.to_string()))?;
    let stage = build_stage(cfg, report, watch)?;
    let grid = &stage.grid;
    let opts = cfg.newton_options();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut rays: Vec<TtField> = vec![assemble_tt(grid, &stage.cache, coeffs)];
    while rays.len() < cfg.scan.rays {
        rays.push(random_tt(grid, &stage.cache, &mut rng, 1.0));
    }
    let mut infos = Vec::new();
    for (k, ray) in rays.iter().enumerate() {
        let table = teich::properness_scan(grid, ray, &cfg.scan.schedule, &opts)?;
        let name = if k == 0 {
            "scan.csv".to_string()
        } else {
            format!("scan-{k}.csv")
        };
        let csv_rows: Vec<Vec<f64>> = table
            .rows
            .iter()
            .map(|r| vec![r.scale, r.sup_norm, r.energy, r.area_g, r.min_b, r.max_b])
            .collect();
        write_csv(
            &dir.join(name),
            "scale,supnorm,energy,areaG,minB,maxB",
            &csv_rows,
        )
        .map_err(|e| CoreError::InvalidInput(e.to_string()))?;
        let ok = table.check().is_ok();
        report
            .checks
            .at_least(&format!("ray{k}_shape_ok"), if ok { 1.0 } else { 0.0 }, 1.0);
        report
            .checks
            .at_least(&format!("ray{k}_fit_slope"), table.fit_slope, 1e-6);
        report
            .checks
            .at_least(&format!("ray{k}_ratio_low"), table.ratio_low, 1e-6);
        let mut dir6 = [0.0; 6];
        for (d, c) in dir6.iter_mut().zip(ray.coeffs.iter()) {
            *d = *c;
        }
        infos.push(ScanRayInfo {
            direction: dir6,
            rows: table.rows.clone(),
            fit_slope: table.fit_slope,
            fit_intercept: table.fit_intercept,
            ratio_low: table.ratio_low,
            ratio_high: table.ratio_high,
        });
        watch.lap(report, &format!("ray_{k}"));
    }
    report.scan = Some(infos);
    Ok(())
}

pub fn cmd_gen_group(cfg: &RunConfig, _dir: &Path) -> Result<(RunReport, i32)> {
    let mut report = RunReport::new("gen-group", cfg);
    let mut watch = Stopwatch::start();
    let code = match gen_group_inner(cfg, &mut report, &mut watch) {
        Ok(()) => report.finish(),
        Err(e) => report.fail_with(&e),
    };
    Ok((report, code))
}

fn gen_group_inner(
    cfg: &RunConfig,
    report: &mut RunReport,
    watch: &mut Stopwatch,
) -> Result<(), CoreError> {
    let group = FuchsianGroup::bolza()?;
    let table = ElementTable::enumerate(&group, cfg.series.depth);
    let level_counts: Vec<usize> = (0..=cfg.series.depth)
        .map(|l| table.level_count(l))
        .collect();
    report.group = Some(GroupInfo {
        relation_residual: group.relation_residual(),
        series_depth: cfg.series.depth,
        series_elements: table.len(),
        elements_per_level: level_counts,
    });
    let c = &mut report.checks;
    c.below("relation_residual", group.relation_residual(), 1e-10);
    let r_v = 2.0f64.powf(-0.25);
    let vertex_dev = group
        .vertices()
        .iter()
        .map(|v| (v.norm() - r_v).abs())
        .fold(0.0f64, f64::max);
    c.below("vertex_radius_dev", vertex_dev, 1e-12);
    // each side pairing maps the octagon onto a disjoint copy: the center
    // must leave the fundamental domain under every generator
    let escaped = group
        .generators()
        .iter()
        .map(|g| g.apply(num_complex::Complex64::new(0.0, 0.0)))
        .filter(|z| !group.contains(*z))
        .count();
    c.at_least("generators_escape_domain", escaped as f64, 8.0);
    watch.lap(report, "group");
    Ok(())
}
