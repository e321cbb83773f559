//! Mach-number sweeps against the incompressible reference.

use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{self, RunStatus};
use crate::operators;
use crate::{Error, Result};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "MACHLIMIT_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsResult {
    pub eps: f64,
    pub status: RunStatus,
    /// `||u^eps(T) - v(T)||_{L2}`.
    pub error_l2: f64,
    pub error_h1: f64,
    pub phi_eps_sup: f64,
    pub phi_eps_initial: f64,
    pub steps: usize,
    pub max_cg_iters: usize,
    pub rho_min: f64,
    pub rho_max: f64,
    pub csv: Option<PathBuf>,
}

/// Rate between two adjacent successful runs; `None` when undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRate {
    pub eps_coarse: f64,
    pub eps_fine: f64,
    pub ratio: f64,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub dt: f64,
    pub t_final: f64,
    pub runs: Vec<EpsResult>,
    pub rates: Vec<PairRate>,
    /// Least-squares slope over all successful runs.
    pub fitted_rate: Option<f64>,
}

impl SweepResult {
    pub fn errors_l2(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.error_l2).collect()
    }
}

/// Least-squares slope of `log(error)` against `log(eps)`; non-positive or
/// non-finite errors are skipped, fewer than two points give `None`.
pub fn fit_rate(errors: &[f64], eps: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = errors
        .iter()
        .zip(eps)
        .filter(|(e, x)| **e > 0.0 && e.is_finite() && **x > 0.0)
        .map(|(e, x)| (x.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// `log(e_k / e_{k+1}) / log(eps_k / eps_{k+1})` between neighbouring
/// successful runs.
pub fn pair_rates(runs: &[EpsResult]) -> Vec<PairRate> {
    let ok: Vec<&EpsResult> = runs.iter().filter(|r| r.status.is_ok()).collect();
    ok.windows(2)
        .map(|w| {
            let ratio = w[1].error_l2 / w[0].error_l2;
            let de = (w[0].eps / w[1].eps).ln();
            let rate = if de.abs() > 0.0 && ratio > 0.0 && ratio.is_finite() {
                Some((w[0].error_l2 / w[1].error_l2).ln() / de)
            } else {
                None
            };
            PairRate {
                eps_coarse: w[0].eps,
                eps_fine: w[1].eps,
                ratio,
                rate,
            }
        })
        .collect()
}

/// Worker count: `jobs`, capped by `MACHLIMIT_THREADS` when set.
pub fn effective_jobs(jobs: usize) -> usize {
    let cap = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok());
    match cap {
        Some(c) if c >= 1 => jobs.min(c).max(1),
        _ => jobs.max(1),
    }
}

/// Runs every `eps` of the config (in parallel over at most `jobs` workers),
/// compares with the incompressible reference at `T`, and writes the
/// per-eps CSVs plus `sweep_summary.json` when `write` is set.
pub fn run_sweep(cfg: &ExperimentConfig, jobs: usize, write: bool) -> Result<SweepResult> {
    if cfg.eps_list.len() < 2 {
        return Err(Error::Config("a sweep needs at least two eps values".into()));
    }
    let dt = run::fixed_dt(cfg)?;
    let reference = run::simulate_incompressible(cfg, dt)?;
    log::info!("sweep: reference done, dt={dt:.6e}, {} runs", cfg.eps_list.len());

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(effective_jobs(jobs))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let runs: Vec<Result<EpsResult>> = pool.install(|| {
        cfg.eps_list
            .par_iter()
            .map(|&eps| {
                let out = run::simulate(cfg, eps, dt)?;
                let mut diff = out.state.u.clone();
                diff.axpy(-1.0, &reference.v)?;
                let err = operators::sobolev_parts(&diff, 1);
                let csv = if write {
                    Some(run::write_outputs(&out, &cfg.out_dir, cfg.snapshots)?)
                } else {
                    None
                };
                let (rho_min, rho_max) = out.state.density_bounds();
                let failed = !out.status.is_ok();
                Ok(EpsResult {
                    eps,
                    error_l2: if failed { f64::NAN } else { err.l2_sq.sqrt() },
                    error_h1: if failed { f64::NAN } else { err.h1_sq().sqrt() },
                    phi_eps_sup: out.phi_eps_sup(),
                    phi_eps_initial: out.phi_eps_initial(),
                    steps: out.steps,
                    max_cg_iters: out.max_cg_iters,
                    rho_min,
                    rho_max,
                    status: out.status,
                    csv,
                })
            })
            .collect()
    });
    let runs: Vec<EpsResult> = runs.into_iter().collect::<Result<_>>()?;
    let rates = pair_rates(&runs);
    let ok: Vec<&EpsResult> = runs.iter().filter(|r| r.status.is_ok()).collect();
    let fitted_rate = fit_rate(
        &ok.iter().map(|r| r.error_l2).collect::<Vec<_>>(),
        &ok.iter().map(|r| r.eps).collect::<Vec<_>>(),
    );
    let result = SweepResult {
        dt,
        t_final: cfg.t_final,
        runs,
        rates,
        fitted_rate,
    };
    if write {
        std::fs::create_dir_all(&cfg.out_dir)?;
        let mut f = std::fs::File::create(cfg.out_dir.join("sweep_summary.json"))?;
        serde_json::to_writer_pretty(&mut f, &result)?;
        writeln!(f)?;
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let eps = [0.1, 0.05, 0.025];
        assert!((fit_rate(&[0.1, 0.05, 0.025], &eps).unwrap() - 1.0).abs() < 1e-12);
        let sq: Vec<f64> = eps.iter().map(|e| e * e).collect();
        assert!((fit_rate(&sq, &eps).unwrap() - 2.0).abs() < 1e-12);
        assert!(fit_rate(&[0.1, -1.0, 0.0], &eps).is_none());
        assert!(fit_rate(&[0.1, 0.1], &[0.1, 0.1]).is_none());
    }

    fn res(eps: f64, err: f64, ok: bool) -> EpsResult {
        EpsResult {
            eps,
            status: if ok { RunStatus::Completed } else { RunStatus::Failed("x".into()) },
            error_l2: err,
            error_h1: err,
            phi_eps_sup: 0.0,
            phi_eps_initial: 0.0,
            steps: 0,
            max_cg_iters: 0,
            rho_min: 1.0,
            rho_max: 1.0,
            csv: None,
        }
    }

    #[test]
    fn pair_rates_skip_failures_and_flag_degenerate_spacing() {
        let r = pair_rates(&[res(0.1, 0.1, true), res(0.05, f64::NAN, false), res(0.025, 0.025, true)]);
        assert_eq!(r.len(), 1);
        assert!((r[0].rate.unwrap() - 1.0).abs() < 1e-12);
        let r = pair_rates(&[res(0.1, 0.1, true), res(0.1, 0.1, true)]);
        assert_eq!(r[0].ratio, 1.0);
        assert!(r[0].rate.is_none());
    }
}
