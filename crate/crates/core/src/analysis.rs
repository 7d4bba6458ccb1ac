//! Strong-error estimation against coupled references, moment estimation, and
//! convergence-order fitting.
//!
//! A refinement study couples every step size to the same noise: for Brownian
//! drivers each path's increments are generated once on the reference grid
//! and block-summed down to each coarser grid, and for jump drivers one
//! grid-free event realization drives every step size. The pathwise
//! difference between two resolutions then measures discretization error
//! only.
//!
//! The error functional is the Monte Carlo mean of `sup_n |Y_h - Y_ref|^p`
//! over the coarse grid indices, reported together with its `p`-th root, its
//! standard error, and the matching `sup` moment of the coarse path. The sup
//! over grid times is a desk surrogate for the sup over `[0, T]`: intra-step
//! excursions shrink at a faster rate than the error itself, so the grid sup
//! does not change fitted slopes. Slopes are fitted by ordinary least squares
//! on `ln(err_p)` vs `ln(h)`.
//!
//! All path loops are parallel but order-deterministic: per-path results are
//! collected in path-index order and reduced sequentially, so reports do not
//! depend on the number of threads.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driver::{coarsen, gen_brownian_indexed, gen_jumps_indexed, BrownianPathIncrements};
use crate::error::{Error, Result};
use crate::model::{
    build_grid, DiffusionSystem, GridSpec, History, InitialSegment, JumpSystem, PathRecord,
    Rational,
};
use crate::scheme::{simulate_bm, simulate_jump};

/// One row of a convergence or moment report, at a single step size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    /// Step size.
    pub h: f64,
    /// Number of Monte Carlo paths behind the estimates.
    pub n_paths: usize,
    /// Moment order of the error functional.
    pub p: f64,
    /// Estimate of `E[sup_n |Y_h - Y_ref|^p]`.
    pub err_p: f64,
    /// `err_p^(1/p)`, the order-`alpha` view of the same estimate.
    pub err_root: f64,
    /// Monte Carlo standard error of `err_p`.
    pub stderr: f64,
    /// Estimate of `E[sup_n |Y_h|^p]` for the coarse path.
    pub moment_p: f64,
}

/// Ordinary least squares fit of `ln(err)` against `ln(h)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// A convergence study: one row per step size, decreasing in `h`, plus the
/// fitted order.
///
/// `fit` is absent when a fit is impossible, i.e. when fewer than two rows
/// exist or some row has `err_p = 0` (exact self-comparison); it is never
/// silently fabricated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
    pub fit: Option<OrderFit>,
}

impl ErrorReport {
    /// Renders the report as CSV with the fixed column set
    /// `h,n_paths,p,err_p,err_root,stderr,moment_p`.
    ///
    /// Floats are rendered with 17 significant digits, so parsing them back
    /// recovers the exact values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,n_paths,p,err_p,err_root,stderr,moment_p\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.h, r.n_paths, r.p, r.err_p, r.err_root, r.stderr, r.moment_p
            );
        }
        out
    }
}

/// One row of a moment sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub h: f64,
    pub n_paths: usize,
    pub p: f64,
    /// Estimate of `E[sup_n |Y_h|^p]`.
    pub moment_p: f64,
}

/// Renders moment rows as CSV with columns `h,n_paths,p,moment_p`.
pub fn moments_to_csv(rows: &[MomentRow]) -> String {
    let mut out = String::from("h,n_paths,p,moment_p\n");
    for r in rows {
        let _ = writeln!(out, "{:.16e},{},{:.16e},{:.16e}", r.h, r.n_paths, r.p, r.moment_p);
    }
    out
}

/// Exact per-path reference: maps a driver realization to the flattened
/// reference values at the driver's grid indices `0, ..., M`.
pub type ExactPathMap = Arc<dyn Fn(&BrownianPathIncrements) -> Vec<f64> + Send + Sync>;

/// The common parameters of a refinement sweep.
///
/// `h_list` must be strictly decreasing; every entry must build a valid grid
/// with `horizon` and `delay`. The reference resolution is passed separately
/// by the estimators that need one.
#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub horizon: Rational,
    pub delay: Rational,
    pub h_list: Vec<Rational>,
    /// Moment order `p >= 2` of the error functional.
    pub p: f64,
    pub n_paths: usize,
    pub base_seed: u64,
}

fn validate_sweep(sweep: &SweepSpec) -> Result<Vec<GridSpec>> {
    if sweep.n_paths < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 paths for a Monte Carlo estimate, got {}",
            sweep.n_paths
        )));
    }
    if !(sweep.p >= 2.0 && sweep.p.is_finite()) {
        return Err(Error::InvalidRange(format!("moment order p={} must be >= 2", sweep.p)));
    }
    if sweep.h_list.is_empty() {
        return Err(Error::InvalidRange("h_list must be non-empty".into()));
    }
    for w in sweep.h_list.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::InvalidRange("h_list must be strictly decreasing".into()));
        }
    }
    sweep.h_list.iter().map(|&h| build_grid(sweep.horizon, sweep.delay, h)).collect()
}

/// Integer refinement factor `coarse / fine`, or `NotDivisible`.
fn refinement_factor(coarse: Rational, fine: Rational) -> Result<usize> {
    let ratio = coarse / fine;
    if !ratio.is_integer() || ratio < Rational::from_integer(1) {
        return Err(Error::NotDivisible(format!(
            "step {coarse} is not an integer multiple of reference step {fine}"
        )));
    }
    Ok(*ratio.numer() as usize)
}

/// Measures `max_n |coarse[n] - fine[k n]|` over the coarse grid indices
/// `n = 0, ..., M`, the pathwise sup distance at shared grid times.
///
/// # Errors
///
/// [`Error::GridMismatch`] unless `fine`'s grid refines `coarse`'s grid by
/// exactly the factor `k` (same horizon and delay, `k * fine.h = coarse.h`)
/// and the dimensions agree; [`Error::ExplodedRecord`] if either record was
/// cut short by an explosion.
pub fn sup_diff(coarse: &PathRecord, fine: &PathRecord, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::GridMismatch("refinement factor must be positive".into()));
    }
    let cg = coarse.grid();
    let fg = fine.grid();
    if cg.horizon() != fg.horizon()
        || cg.delay() != fg.delay()
        || fg.step() * Rational::from_integer(k as i64) != cg.step()
    {
        return Err(Error::GridMismatch(format!(
            "fine grid (h={}) does not refine coarse grid (h={}) by factor {k}",
            fg.step(),
            cg.step()
        )));
    }
    if coarse.dim() != fine.dim() {
        return Err(Error::GridMismatch(format!(
            "records have dimensions {} and {}",
            coarse.dim(),
            fine.dim()
        )));
    }
    if let Some(step) = coarse.exploded_from().or(fine.exploded_from()) {
        return Err(Error::ExplodedRecord { step });
    }
    let mut sup: f64 = 0.0;
    for n in 0..=cg.steps() as i64 {
        let a = coarse.value(n);
        let b = fine.value(n * k as i64);
        let dist: f64 = a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        sup = sup.max(dist);
    }
    Ok(sup)
}

/// Sup distance between a record and flattened reference values at the same
/// grid indices `0, ..., M`.
fn sup_diff_values(rec: &PathRecord, reference: &[f64]) -> Result<f64> {
    let d = rec.dim();
    let rows = rec.grid().steps() + 1;
    if reference.len() != rows * d {
        return Err(Error::GridMismatch(format!(
            "reference has {} entries, expected {}",
            reference.len(),
            rows * d
        )));
    }
    if let Some(step) = rec.exploded_from() {
        return Err(Error::ExplodedRecord { step });
    }
    let mut sup: f64 = 0.0;
    for n in 0..rows {
        let a = rec.value(n as i64);
        let b = &reference[n * d..(n + 1) * d];
        let dist: f64 = a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        sup = sup.max(dist);
    }
    Ok(sup)
}

/// Mean over paths of `max_n |values[n]|^p`, the empirical `sup` moment.
///
/// # Errors
///
/// [`Error::InsufficientData`] on an empty collection,
/// [`Error::InvalidRange`] for `p < 2`, [`Error::ExplodedRecord`] if a path
/// was cut short.
pub fn moment_estimate(paths: &[PathRecord], p: f64) -> Result<f64> {
    if paths.is_empty() {
        return Err(Error::InsufficientData("moment estimate over zero paths".into()));
    }
    if !(p >= 2.0 && p.is_finite()) {
        return Err(Error::InvalidRange(format!("moment order p={p} must be >= 2")));
    }
    let mut sum = 0.0;
    for rec in paths {
        if let Some(step) = rec.exploded_from() {
            return Err(Error::ExplodedRecord { step });
        }
        sum += rec.sup_norm().powf(p);
    }
    Ok(sum / paths.len() as f64)
}

/// Ordinary least squares of `ln(err)` on `ln(h)`.
///
/// A degenerate regression with zero variance in `ln(err)` (constant errors)
/// reports slope 0 and `r_squared = 1`: the fitted line reproduces the data
/// exactly.
///
/// # Errors
///
/// [`Error::InsufficientData`] with fewer than two pairs,
/// [`Error::NonPositiveValue`] if any `h` or `err` is not strictly positive
/// and finite.
pub fn fit_order(pairs: &[(f64, f64)]) -> Result<OrderFit> {
    if pairs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "order fit needs at least 2 points, got {}",
            pairs.len()
        )));
    }
    for &(h, err) in pairs {
        if !(h > 0.0 && h.is_finite() && err > 0.0 && err.is_finite()) {
            return Err(Error::NonPositiveValue(format!(
                "order fit needs positive finite pairs, got ({h}, {err})"
            )));
        }
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|&(h, _)| h.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|&(_, e)| e.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..pairs.len() {
        let dx = xs[i] - x_mean;
        let dy = ys[i] - y_mean;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::InvalidRange("order fit needs at least two distinct h values".into()));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_res = syy - slope * sxy;
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(OrderFit { slope, intercept, r_squared })
}

/// Per-path, per-row accumulation shared by all sweep estimators: runs
/// `per_path(j)` for every path in parallel, then reduces in path-index
/// order. `per_path` returns `(err^p, sup_moment^p)` per row.
fn accumulate_rows<F>(
    n_rows: usize,
    n_paths: usize,
    per_path: F,
) -> Result<Vec<(f64, f64, f64)>>
where
    F: Fn(usize) -> Result<Vec<(f64, f64)>> + Sync,
{
    let per_path_results: Vec<Result<Vec<(f64, f64)>>> =
        (0..n_paths).into_par_iter().map(|j| per_path(j)).collect();
    // (sum err^p, sum squared err^p, sum moment^p) per row
    let mut sums = vec![(0.0f64, 0.0f64, 0.0f64); n_rows];
    for result in per_path_results {
        let row_values = result?;
        debug_assert_eq!(row_values.len(), n_rows);
        for (i, (dp, mp)) in row_values.into_iter().enumerate() {
            sums[i].0 += dp;
            sums[i].1 += dp * dp;
            sums[i].2 += mp;
        }
    }
    Ok(sums)
}

fn rows_from_sums(
    grids: &[GridSpec],
    sums: &[(f64, f64, f64)],
    p: f64,
    n_paths: usize,
) -> Vec<ErrorRow> {
    let n = n_paths as f64;
    grids
        .iter()
        .zip(sums.iter())
        .map(|(g, &(sum_dp, sum_dp_sq, sum_mp))| {
            let err_p = sum_dp / n;
            let variance = ((sum_dp_sq - n * err_p * err_p) / (n - 1.0)).max(0.0);
            ErrorRow {
                h: g.step_f64(),
                n_paths,
                p,
                err_p,
                err_root: err_p.powf(1.0 / p),
                stderr: (variance / n).sqrt(),
                moment_p: sum_mp / n,
            }
        })
        .collect()
}

fn fit_rows(rows: &[ErrorRow]) -> Option<OrderFit> {
    if rows.len() < 2 || rows.iter().any(|r| r.err_p <= 0.0) {
        return None;
    }
    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.err_p)).collect();
    fit_order(&pairs).ok()
}

/// Strong self-convergence study for a Brownian-driven system.
///
/// For each path, increments are generated once on the `h_ref` grid, the
/// reference is simulated there, and every `h` in the sweep runs on the
/// block-summed coarsening of the same increments. `h_ref` must divide every
/// entry of `h_list`.
pub fn strong_error_bm(
    sys: &DiffusionSystem,
    history: &History,
    sweep: &SweepSpec,
    h_ref: Rational,
) -> Result<ErrorReport> {
    let grids = validate_sweep(sweep)?;
    let grid_ref = build_grid(sweep.horizon, sweep.delay, h_ref)?;
    let factors: Vec<usize> = sweep
        .h_list
        .iter()
        .map(|&h| refinement_factor(h, h_ref))
        .collect::<Result<_>>()?;
    let seg_ref = sample_segment_checked(&grid_ref, history, sys.dim_state)?;
    let segs: Vec<InitialSegment> = grids
        .iter()
        .map(|g| sample_segment_checked(g, history, sys.dim_state))
        .collect::<Result<_>>()?;
    let p = sweep.p;
    let sums = accumulate_rows(grids.len(), sweep.n_paths, |j| {
        let fine = gen_brownian_indexed(&grid_ref, sys.dim_noise, sweep.base_seed, j as u64);
        let y_ref = simulate_bm(sys, &seg_ref, &fine)?;
        let mut out = Vec::with_capacity(grids.len());
        for i in 0..grids.len() {
            let drv = coarsen(&fine, factors[i])?;
            let y = simulate_bm(sys, &segs[i], &drv)?;
            let d = sup_diff(&y, &y_ref, factors[i])?;
            out.push((d.powf(p), y.sup_norm().powf(p)));
        }
        Ok(out)
    })?;
    let rows = rows_from_sums(&grids, &sums, p, sweep.n_paths);
    let fit = fit_rows(&rows);
    Ok(ErrorReport { rows, fit })
}

/// Strong-error study against a closed-form reference.
///
/// Increments are generated once per path on the finest grid of the sweep
/// and coarsened to every other `h`; the reference values at each grid's
/// times come from `exact_path` applied to that grid's own increments, so
/// scheme and reference always see the same noise.
pub fn strong_error_bm_exact(
    sys: &DiffusionSystem,
    history: &History,
    exact_path: &ExactPathMap,
    sweep: &SweepSpec,
) -> Result<ErrorReport> {
    let grids = validate_sweep(sweep)?;
    let h_min = *sweep.h_list.last().expect("validated non-empty");
    let grid_min = build_grid(sweep.horizon, sweep.delay, h_min)?;
    let factors: Vec<usize> = sweep
        .h_list
        .iter()
        .map(|&h| refinement_factor(h, h_min))
        .collect::<Result<_>>()?;
    let segs: Vec<InitialSegment> = grids
        .iter()
        .map(|g| sample_segment_checked(g, history, sys.dim_state))
        .collect::<Result<_>>()?;
    let p = sweep.p;
    let sums = accumulate_rows(grids.len(), sweep.n_paths, |j| {
        let fine = gen_brownian_indexed(&grid_min, sys.dim_noise, sweep.base_seed, j as u64);
        let mut out = Vec::with_capacity(grids.len());
        for i in 0..grids.len() {
            let drv = coarsen(&fine, factors[i])?;
            let reference = exact_path(&drv);
            let y = simulate_bm(sys, &segs[i], &drv)?;
            let d = sup_diff_values(&y, &reference)?;
            out.push((d.powf(p), y.sup_norm().powf(p)));
        }
        Ok(out)
    })?;
    let rows = rows_from_sums(&grids, &sums, p, sweep.n_paths);
    let fit = fit_rows(&rows);
    Ok(ErrorReport { rows, fit })
}

/// Strong self-convergence study for a jump-driven system.
///
/// One grid-free event realization per path drives the reference at `h_ref`
/// and every coarser resolution, realizing "same noise, different
/// discretization" without any coarsening step. Requires
/// `sys.alpha * p < 1`, the admissible taming range for the jump scheme at
/// moment order `p`.
pub fn strong_error_jump(
    sys: &JumpSystem,
    history: &History,
    sweep: &SweepSpec,
    h_ref: Rational,
) -> Result<ErrorReport> {
    let grids = validate_sweep(sweep)?;
    if sys.alpha * sweep.p >= 1.0 {
        return Err(Error::InvalidRange(format!(
            "alpha * p = {} must be < 1 for the jump scheme",
            sys.alpha * sweep.p
        )));
    }
    let grid_ref = build_grid(sweep.horizon, sweep.delay, h_ref)?;
    for &h in &sweep.h_list {
        refinement_factor(h, h_ref)?;
    }
    let seg_ref = sample_segment_checked(&grid_ref, history, sys.dim_state)?;
    let segs: Vec<InitialSegment> = grids
        .iter()
        .map(|g| sample_segment_checked(g, history, sys.dim_state))
        .collect::<Result<_>>()?;
    let p = sweep.p;
    let factors: Vec<usize> = sweep
        .h_list
        .iter()
        .map(|&h| refinement_factor(h, h_ref))
        .collect::<Result<_>>()?;
    let sums = accumulate_rows(grids.len(), sweep.n_paths, |j| {
        let jr = gen_jumps_indexed(
            &grid_ref,
            sys.total_intensity,
            &sys.mark_sampler,
            sweep.base_seed,
            j as u64,
        )?;
        let z_ref = simulate_jump(sys, &seg_ref, &grid_ref, &jr)?;
        let mut out = Vec::with_capacity(grids.len());
        for i in 0..grids.len() {
            let z = simulate_jump(sys, &segs[i], &grids[i], &jr)?;
            let d = sup_diff(&z, &z_ref, factors[i])?;
            out.push((d.powf(p), z.sup_norm().powf(p)));
        }
        Ok(out)
    })?;
    let rows = rows_from_sums(&grids, &sums, p, sweep.n_paths);
    let fit = fit_rows(&rows);
    Ok(ErrorReport { rows, fit })
}

/// Moment sweep for a Brownian-driven system: `E[sup_n |Y_h|^p]` per step
/// size, each resolution on its own independently generated increments.
pub fn moment_sweep_bm(
    sys: &DiffusionSystem,
    history: &History,
    sweep: &SweepSpec,
) -> Result<Vec<MomentRow>> {
    let grids = validate_sweep(sweep)?;
    let segs: Vec<InitialSegment> = grids
        .iter()
        .map(|g| sample_segment_checked(g, history, sys.dim_state))
        .collect::<Result<_>>()?;
    let p = sweep.p;
    let sums = accumulate_rows(grids.len(), sweep.n_paths, |j| {
        let mut out = Vec::with_capacity(grids.len());
        for i in 0..grids.len() {
            let drv = gen_brownian_indexed(&grids[i], sys.dim_noise, sweep.base_seed, j as u64);
            let y = simulate_bm(sys, &segs[i], &drv)?;
            out.push((0.0, y.sup_norm().powf(p)));
        }
        Ok(out)
    })?;
    Ok(moment_rows(&grids, &sums, p, sweep.n_paths))
}

/// Moment sweep for a jump-driven system.
pub fn moment_sweep_jump(
    sys: &JumpSystem,
    history: &History,
    sweep: &SweepSpec,
) -> Result<Vec<MomentRow>> {
    let grids = validate_sweep(sweep)?;
    let segs: Vec<InitialSegment> = grids
        .iter()
        .map(|g| sample_segment_checked(g, history, sys.dim_state))
        .collect::<Result<_>>()?;
    let p = sweep.p;
    let sums = accumulate_rows(grids.len(), sweep.n_paths, |j| {
        let mut out = Vec::with_capacity(grids.len());
        for i in 0..grids.len() {
            let jr = gen_jumps_indexed(
                &grids[i],
                sys.total_intensity,
                &sys.mark_sampler,
                sweep.base_seed,
                j as u64,
            )?;
            let z = simulate_jump(sys, &segs[i], &grids[i], &jr)?;
            out.push((0.0, z.sup_norm().powf(p)));
        }
        Ok(out)
    })?;
    Ok(moment_rows(&grids, &sums, p, sweep.n_paths))
}

fn moment_rows(
    grids: &[GridSpec],
    sums: &[(f64, f64, f64)],
    p: f64,
    n_paths: usize,
) -> Vec<MomentRow> {
    grids
        .iter()
        .zip(sums.iter())
        .map(|(g, &(_, _, sum_mp))| MomentRow {
            h: g.step_f64(),
            n_paths,
            p,
            moment_p: sum_mp / n_paths as f64,
        })
        .collect()
}

fn sample_segment_checked(
    grid: &GridSpec,
    history: &History,
    dim_state: usize,
) -> Result<InitialSegment> {
    let seg = crate::model::sample_segment(grid, history)?;
    if seg.dim() != dim_state {
        return Err(Error::GridMismatch(format!(
            "history produces dimension {}, system expects {dim_state}",
            seg.dim()
        )));
    }
    Ok(seg)
}
