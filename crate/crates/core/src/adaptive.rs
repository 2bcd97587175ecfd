//! Adaptive outer iterations and their reports.

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::multigrid::{
    mg_pcg, mwm_setup, pc_setup, v_cycle, CompositePreconditioner, CycleParams, CyclePreconditioner, Hierarchy,
    NullSpace,
};
use crate::sparse::{axpy, norm2, norm_inf, project_out_constant_in_place, SparseMatrix};

const DIVERGENCE_FACTOR: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConfig {
    /// Target for the residual 2-norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Re-setup trigger on the convergence factor.
    pub threshold: f64,
    /// Number of early re-setups whose smooth error comes from W-cycle PCG.
    pub num_w: usize,
    pub iter_w: usize,
    pub iter_v: usize,
    pub cycle: CycleParams,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            tol: 1e-8,
            max_iter: 2500,
            threshold: 0.4,
            num_w: 2,
            iter_w: 7,
            iter_v: 4,
            cycle: CycleParams::default(),
        }
    }
}

impl AdaptiveConfig {
    /// Re-setup after every iteration.
    pub fn every_step() -> Self {
        AdaptiveConfig {
            threshold: 1e-6,
            ..Self::default()
        }
    }

    pub fn balanced() -> Self {
        AdaptiveConfig {
            threshold: 0.4,
            ..Self::default()
        }
    }

    pub fn homogeneous() -> Self {
        AdaptiveConfig {
            threshold: 0.5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.threshold.is_nan() || self.threshold <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        self.cycle.validate()
    }
}

/// One hierarchy rebuild inside an adaptive solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resetup {
    /// 1-based iteration at whose end the hierarchy was rebuilt; the next
    /// iteration is the first cycle on the new hierarchy.
    pub iteration: usize,
    /// Convergence factor that fired the trigger: the window mean for general
    /// right-hand sides, the single-step ratio for the homogeneous solver.
    pub trigger: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub resetups: usize,
    pub resetup_log: Vec<Resetup>,
    /// ‖r_k‖₂ for k = 0..=iterations.
    pub residual_history: Vec<f64>,
    /// Mean of the last (up to) ten consecutive residual ratios.
    pub convr_last10: f64,
    /// Mean operator complexity over every hierarchy built.
    pub oc_avg: f64,
    pub wall_time: f64,
    pub converged: bool,
}

impl SolveReport {
    fn new(r0: f64) -> Self {
        SolveReport {
            iterations: 0,
            resetups: 0,
            resetup_log: Vec::new(),
            residual_history: vec![r0],
            convr_last10: 0.0,
            oc_avg: 0.0,
            wall_time: 0.0,
            converged: false,
        }
    }

    /// Consecutive residual ratios ‖r_{k+1}‖ / ‖r_k‖.
    pub fn ratios(&self) -> Vec<f64> {
        self.residual_history.windows(2).map(|w| w[1] / w[0]).collect()
    }

    fn finish(&mut self, tol: f64, complexities: &[f64], start: Instant) {
        let ratios = self.ratios();
        let tail = &ratios[ratios.len().saturating_sub(10)..];
        self.convr_last10 = if tail.is_empty() {
            0.0
        } else {
            tail.iter().sum::<f64>() / tail.len() as f64
        };
        self.oc_avg = complexities.iter().sum::<f64>() / complexities.len() as f64;
        self.converged = *self.residual_history.last().unwrap() <= tol;
        self.wall_time = start.elapsed().as_secs_f64();
    }
}

fn check_inputs(a: &SparseMatrix, b: &[f64], x0: &[f64]) -> Result<()> {
    let n = a.n_rows();
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            op: "solve",
            expected: n,
            got: a.n_cols(),
        });
    }
    for len in [b.len(), x0.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                op: "solve",
                expected: n,
                got: len,
            });
        }
    }
    Ok(())
}

fn check_consistent(b: &[f64]) -> Result<()> {
    let sum: f64 = b.iter().sum();
    if sum.abs() > 1e-10 * b.len() as f64 * norm_inf(b) {
        return Err(Error::InconsistentRhs { sum });
    }
    Ok(())
}

/// Approximates the error `e` in `A e = r` with a few multigrid-preconditioned
/// CG steps started from `e0`.
///
/// The number of hierarchies built so far decides the preconditioner: while it
/// is at most `num_w`, `iter_w` steps with a W-cycle on the newest hierarchy;
/// afterwards `iter_v` steps with the composite V-cycle over all of `hist`.
/// Returns `(e_unit, e_raw)` where `e_unit` is `e_raw` projected onto 1⊥ and
/// normalized.
pub fn approximate_smooth_error(
    a: &SparseMatrix,
    r: &[f64],
    hist: &[Hierarchy],
    e0: &[f64],
    cfg: &AdaptiveConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let newest = hist.last().ok_or(Error::EmptyHierarchyList)?;
    let outcome = if hist.len() <= cfg.num_w {
        let pc = CyclePreconditioner {
            hierarchy: newest,
            params: cfg.cycle,
            gamma: 2,
        };
        mg_pcg(a, r, e0, &pc, cfg.iter_w, NullSpace::Constant)?
    } else {
        let pc = CompositePreconditioner {
            hierarchies: hist,
            params: cfg.cycle,
        };
        mg_pcg(a, r, e0, &pc, cfg.iter_v, NullSpace::Constant)?
    };
    if outcome.breakdown {
        log::debug!("smooth-error PCG stopped early after {} steps", outcome.iterations);
    }
    let e_raw = outcome.x;
    let mut e_unit = e_raw.clone();
    project_out_constant_in_place(&mut e_unit);
    let norm = norm2(&e_unit);
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateError);
    }
    e_unit.iter_mut().for_each(|v| *v /= norm);
    Ok((e_unit, e_raw))
}

/// Stationary V-cycle iteration on the matching hierarchy.
pub fn baseline_uaamg(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    cfg: &AdaptiveConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    general_loop(a, b, x0, cfg, false)
}

/// Adaptive solve of `A x = b` for `b ⊥ 1`.
///
/// Each iteration applies one V-cycle with the newest hierarchy. When the mean
/// convergence factor since the last re-setup exceeds `threshold`, the current
/// error is approximated, a path-cover hierarchy is built from it, and the
/// approximation is added to `x`.
pub fn solve_general(a: &SparseMatrix, b: &[f64], x0: &[f64], cfg: &AdaptiveConfig) -> Result<(Vec<f64>, SolveReport)> {
    general_loop(a, b, x0, cfg, true)
}

fn general_loop(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    cfg: &AdaptiveConfig,
    adaptive: bool,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    cfg.validate()?;
    check_inputs(a, b, x0)?;
    check_consistent(b)?;
    let a_shared = Arc::new(a.clone());
    let mut hist = vec![mwm_setup(Arc::clone(&a_shared), &cfg.cycle)?];
    let mut complexities = vec![hist[0].operator_complexity()];

    let mut x = x0.to_vec();
    let mut r = a.residual(b, &x)?;
    let r0 = norm2(&r);
    let mut report = SolveReport::new(r0);
    let mut r_norm = r0;
    // Each error estimate starts from zero: the previous estimate has already
    // been added to x, so it is not an approximation of the current error.
    let zero = vec![0.0; x.len()];
    let mut window: Vec<f64> = Vec::new();

    while report.iterations < cfg.max_iter && r_norm > cfg.tol {
        v_cycle(hist.last().unwrap(), b, &mut x, &cfg.cycle)?;
        project_out_constant_in_place(&mut x);
        r = a.residual(b, &x)?;
        let mut next = norm2(&r);
        window.push(next / r_norm);
        let mean = window.iter().sum::<f64>() / window.len() as f64;
        if adaptive && mean > cfg.threshold && next > cfg.tol {
            let (e_unit, e_raw) = approximate_smooth_error(a, &r, &hist, &zero, cfg)?;
            let h = pc_setup(Arc::clone(&a_shared), &e_unit, &cfg.cycle)?;
            complexities.push(h.operator_complexity());
            hist.push(h);
            axpy(1.0, &e_raw, &mut x);
            project_out_constant_in_place(&mut x);
            r = a.residual(b, &x)?;
            next = norm2(&r);
            log::debug!(
                "iter {}: re-setup {} (window mean {mean:.3}), residual {next:.3e}",
                report.iterations + 1,
                hist.len() - 1
            );
            window.clear();
            report.resetup_log.push(Resetup {
                iteration: report.iterations + 1,
                trigger: mean,
            });
        }
        report.iterations += 1;
        report.residual_history.push(next);
        r_norm = next;
        if !next.is_finite() || next > DIVERGENCE_FACTOR * r0 {
            report.resetups = hist.len() - 1;
            report.finish(cfg.tol, &complexities, start);
            return Err(Error::Diverged(Box::new(report)));
        }
    }
    report.resetups = hist.len() - 1;
    report.finish(cfg.tol, &complexities, start);
    Ok((x, report))
}

/// Adaptive solve of `A x = 0` from a nonzero start.
///
/// Since the exact solution is zero, the iterate itself is the error. Whenever
/// a single V-cycle reduces the residual by less than `threshold`, the
/// hierarchy is rebuilt from the normalized iterate.
pub fn solve_homogeneous(a: &SparseMatrix, x0: &[f64], cfg: &AdaptiveConfig) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    cfg.validate()?;
    let b = vec![0.0; a.n_rows()];
    check_inputs(a, &b, x0)?;

    let mut x = x0.to_vec();
    let mut r_norm = norm2(&a.spmv(&x)?);
    let r0 = r_norm;
    let mut report = SolveReport::new(r0);
    if x.iter().all(|&v| v == 0.0) {
        report.finish(cfg.tol, &[1.0], start);
        report.converged = true;
        return Ok((x, report));
    }
    let a_shared = Arc::new(a.clone());
    let mut h = mwm_setup(Arc::clone(&a_shared), &cfg.cycle)?;
    let mut complexities = vec![h.operator_complexity()];

    while report.iterations < cfg.max_iter && r_norm > cfg.tol {
        v_cycle(&h, &b, &mut x, &cfg.cycle)?;
        project_out_constant_in_place(&mut x);
        let next = norm2(&a.spmv(&x)?);
        report.iterations += 1;
        report.residual_history.push(next);
        if !next.is_finite() || next > DIVERGENCE_FACTOR * r0 {
            report.resetups = complexities.len() - 1;
            report.finish(cfg.tol, &complexities, start);
            return Err(Error::Diverged(Box::new(report)));
        }
        if next / r_norm > cfg.threshold && next > cfg.tol {
            report.resetup_log.push(Resetup {
                iteration: report.iterations,
                trigger: next / r_norm,
            });
            let norm = norm2(&x);
            let e: Vec<f64> = x.iter().map(|v| v / norm).collect();
            h = pc_setup(Arc::clone(&a_shared), &e, &cfg.cycle)?;
            complexities.push(h.operator_complexity());
            log::debug!(
                "iter {}: re-setup {} (ratio {:.3})",
                report.iterations,
                complexities.len() - 1,
                next / r_norm
            );
        }
        r_norm = next;
    }
    report.resetups = complexities.len() - 1;
    report.finish(cfg.tol, &complexities, start);
    Ok((x, report))
}
