//! Single runs: initial data, the time loop with diagnostics sampling, and
//! the time-series CSV.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, InitKind};
use crate::compressible::{self, CompressibleState, PhysParams};
use crate::diagnostics::{self, EnergyReport};
use crate::fields::{Field, VectorField};
use crate::geometry::Grid;
use crate::incompressible::{self, IncompressibleState};
use crate::operators;
use crate::Result;

pub const CSV_HEADER: &str = "# machlimit-csv v1";

pub const CSV_COLUMNS: [&str; 28] = [
    "t",
    "dt",
    "phi0",
    "psi0",
    "phi1",
    "psi1",
    "phi2",
    "psi2",
    "phi",
    "psi",
    "phi_eps",
    "decay_ratio",
    "l2_sigma",
    "h1_sigma",
    "h2_sigma",
    "l2_u",
    "h1_u",
    "h2_u",
    "h1_sigma_t",
    "h1_u_t",
    "eps_l2_sigma_tt",
    "eps_l2_u_tt",
    "bvort_residual",
    "divcurl_ratio",
    "mean_sigma",
    "rho_min",
    "rho_max",
    "cg_iters",
];

/// Velocity of the Taylor–Green vortex at amplitude `a` (axes 0 and 1).
pub fn taylor_green_velocity(grid: &Arc<Grid>, a: f64) -> VectorField {
    let (lx, ly) = (grid.lengths()[0], grid.lengths()[1]);
    VectorField::from_fn(grid, |c, x| {
        let (sx, cx) = (2.0 * PI * x[0] / lx).sin_cos();
        let (sy, cy) = (2.0 * PI * x[1] / ly).sin_cos();
        match c {
            0 => a * sx * cy,
            1 => -a * cx * sy,
            _ => 0.0,
        }
    })
}

/// Shear mode `u_0 = a cos(pi x_n / L_n)` across the last axis.
pub fn stokes_mode_velocity(grid: &Arc<Grid>, a: f64) -> VectorField {
    let last = grid.dim() - 1;
    let l = grid.lengths()[last];
    VectorField::from_fn(grid, |c, x| if c == 0 { a * (PI * x[last] / l).cos() } else { 0.0 })
}

/// Compressible initial state for a config at one `eps`.
pub fn initial_state(cfg: &ExperimentConfig, eps: f64) -> Result<CompressibleState> {
    let params = cfg.params(eps);
    let grid = Arc::new(Grid::with_slip(&cfg.grid, params.alpha)?);
    initial_state_on(&grid, cfg.init, params, cfg.theta)
}

pub fn initial_state_on(grid: &Arc<Grid>, init: InitKind, params: PhysParams, theta: f64) -> Result<CompressibleState> {
    match init {
        InitKind::WellPrepared => compressible::well_prepared_init(grid, params, theta),
        InitKind::TaylorGreen => {
            CompressibleState::new(Field::cell(grid), taylor_green_velocity(grid, theta), params)
        }
        InitKind::StokesMode => CompressibleState::new(Field::cell(grid), stokes_mode_velocity(grid, theta), params),
        InitKind::Zero => CompressibleState::zero(grid, params),
    }
}

/// The fixed step used for every run of a config: `cfg.dt` or the stable
/// step of the initial state (which does not depend on `eps`).
pub fn fixed_dt(cfg: &ExperimentConfig) -> Result<f64> {
    if let Some(dt) = cfg.dt {
        return Ok(dt);
    }
    Ok(compressible::stable_dt(&initial_state(cfg, cfg.eps_list[0])?))
}

/// Steps of sizes `dt, dt, ..., remainder` that land exactly on `t_final`.
pub fn step_sizes(t_final: f64, dt: f64) -> Vec<f64> {
    let n = ((t_final / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let mut v = vec![dt; n];
    v[n - 1] = t_final - dt * (n - 1) as f64;
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed(String),
}

impl RunStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }
}

/// One diagnostics row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub report: EnergyReport,
    /// Running max of the `phi^eps` integrand.
    pub phi_eps: f64,
    pub decay_ratio: f64,
    pub bvort_residual: f64,
    pub divcurl_ratio: f64,
    pub mean_sigma: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub cg_iters: usize,
}

impl Sample {
    fn values(&self) -> [f64; 28] {
        let r = &self.report;
        let n = &r.norms;
        [
            self.t,
            self.dt,
            r.phi0,
            r.psi0,
            r.phi1,
            r.psi1,
            r.phi2,
            r.psi2,
            r.phi,
            r.psi,
            self.phi_eps,
            self.decay_ratio,
            n.l2_sigma,
            n.h1_sigma,
            n.h2_sigma,
            n.l2_u,
            n.h1_u,
            n.h2_u,
            n.h1_sigma_t,
            n.h1_u_t,
            n.eps_l2_sigma_tt,
            n.eps_l2_u_tt,
            self.bvort_residual,
            self.divcurl_ratio,
            self.mean_sigma,
            self.rho_min,
            self.rho_max,
            self.cg_iters as f64,
        ]
    }
}

/// Diagnostics of one state; `step == 0` uses semidiscrete time derivatives.
pub fn sample_state(state: &CompressibleState, step: usize, dt: f64, cfg: &ExperimentConfig, running: f64) -> Sample {
    let derivs = if step == 0 {
        compressible::semidiscrete_time_derivatives(state).ok()
    } else {
        compressible::time_derivatives(state).ok()
    };
    let report = diagnostics::energy_report(state, derivs.as_ref(), &cfg.weights);
    let phi = diagnostics::update_phi_eps(report.phi_eps_instant, running, false);
    let (rho_min, rho_max) = state.density_bounds();
    Sample {
        step,
        t: state.t,
        dt,
        phi_eps: phi.running,
        decay_ratio: f64::NAN,
        bvort_residual: diagnostics::boundary_vorticity_residual(state).value,
        divcurl_ratio: operators::divcurl_ratio(&state.u).unwrap_or(f64::NAN),
        mean_sigma: state.sigma.mean(),
        rho_min,
        rho_max,
        cg_iters: state.cg_iters,
        report,
    }
}

/// Result of one compressible run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub eps: f64,
    pub dt: f64,
    pub steps: usize,
    pub samples: Vec<Sample>,
    pub state: CompressibleState,
    pub status: RunStatus,
    /// Largest `|mean sigma|` over every step.
    pub max_abs_mean_sigma: f64,
    pub max_cg_iters: usize,
}

impl RunOutput {
    pub fn phi_eps_sup(&self) -> f64 {
        self.samples.last().map_or(f64::NAN, |s| s.phi_eps)
    }

    pub fn phi_eps_initial(&self) -> f64 {
        self.samples.first().map_or(f64::NAN, |s| s.phi_eps)
    }

    pub fn decay_ratio_max(&self) -> f64 {
        let phi: Vec<f64> = self.samples.iter().map(|s| s.report.phi).collect();
        let psi: Vec<f64> = self.samples.iter().map(|s| s.report.psi).collect();
        let t: Vec<f64> = self.samples.iter().map(|s| s.t).collect();
        diagnostics::decay_ratio_times(&t, &phi, &psi).map_or(f64::NAN, |r| r.max())
    }

    /// Column of the CSV by name.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = CSV_COLUMNS.iter().position(|c| *c == name)?;
        Some(self.samples.iter().map(|s| s.values()[i]).collect())
    }
}

fn fill_decay_ratios(samples: &mut [Sample]) {
    if samples.len() < 2 {
        return;
    }
    let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let phi: Vec<f64> = samples.iter().map(|s| s.report.phi).collect();
    let psi: Vec<f64> = samples.iter().map(|s| s.report.psi).collect();
    if let Ok(r) = diagnostics::decay_ratio_times(&t, &phi, &psi) {
        for (s, v) in samples.iter_mut().zip(r.series) {
            s.decay_ratio = v;
        }
    }
}

/// Integrates one compressible run from `state` to `cfg.t_final`.
pub fn integrate(cfg: &ExperimentConfig, mut state: CompressibleState, dt: f64) -> RunOutput {
    let eps = state.params.eps;
    let opts = cfg.cg_options();
    let sizes = step_sizes(cfg.t_final, dt);
    let mut samples = vec![sample_state(&state, 0, 0.0, cfg, f64::NAN)];
    let mut status = RunStatus::Completed;
    let mut max_mean = state.sigma.mean().abs();
    let mut max_cg = 0;
    let mut steps = 0;
    for (i, &h) in sizes.iter().enumerate() {
        let res = compressible::step_with(&mut state, h, &opts);
        steps = i + 1;
        max_mean = max_mean.max(state.sigma.mean().abs());
        max_cg = max_cg.max(state.cg_iters);
        let last = i + 1 == sizes.len();
        if let Err(e) = res {
            log::warn!("eps={eps}: step {} failed: {e}", i + 1);
            status = RunStatus::Failed(e.to_string());
            let running = samples.last().map_or(f64::NAN, |s| s.phi_eps);
            samples.push(sample_state(&state, i + 1, h, cfg, running));
            break;
        }
        if (i + 1) % cfg.cadence == 0 || last {
            let running = samples.last().map_or(f64::NAN, |s| s.phi_eps);
            samples.push(sample_state(&state, i + 1, h, cfg, running));
        }
    }
    fill_decay_ratios(&mut samples);
    RunOutput {
        eps,
        dt,
        steps,
        samples,
        state,
        status,
        max_abs_mean_sigma: max_mean,
        max_cg_iters: max_cg,
    }
}

/// Runs the config at `eps` with the shared fixed step.
pub fn simulate(cfg: &ExperimentConfig, eps: f64, dt: f64) -> Result<RunOutput> {
    let state = initial_state(cfg, eps)?;
    Ok(integrate(cfg, state, dt))
}

/// Incompressible reference run with the same initial velocity and step.
pub fn simulate_incompressible(cfg: &ExperimentConfig, dt: f64) -> Result<IncompressibleState> {
    let init = initial_state(cfg, cfg.eps_list[0])?;
    let mut st = incompressible::match_init(&init)?;
    let (mu, alpha) = (cfg.phys.mu, cfg.phys.alpha);
    for h in step_sizes(cfg.t_final, dt) {
        incompressible::step_inc(&mut st, h, mu, alpha)?;
    }
    Ok(st)
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:e}")
    }
}

pub fn write_csv(samples: &[Sample], mut w: impl Write) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    writeln!(w, "{}", CSV_COLUMNS.join(","))?;
    for s in samples {
        let row: Vec<String> = s.values().iter().map(|&v| fmt(v)).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn eps_tag(eps: f64) -> String {
    format!("{eps}")
}

pub fn csv_path(dir: &Path, eps: f64) -> PathBuf {
    dir.join(format!("timeseries_{}.csv", eps_tag(eps)))
}

/// Writes the time series and (optionally) the final-state snapshots.
pub fn write_outputs(out: &RunOutput, dir: &Path, snapshots: bool) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = csv_path(dir, out.eps);
    let f = std::fs::File::create(&path)?;
    let mut w = std::io::BufWriter::new(f);
    write_csv(&out.samples, &mut w)?;
    w.flush()?;
    if snapshots {
        let tag = eps_tag(out.eps);
        out.state.sigma.save_binary(dir.join(format!("final_sigma_{tag}.bin")))?;
        out.state.u.save_binary(dir.join(format!("final_u_{tag}.bin")))?;
    }
    Ok(path)
}

/// `run`: one compressible run at `eps` (default: first of the list).
pub fn run_single(cfg: &ExperimentConfig, eps: Option<f64>) -> Result<RunOutput> {
    let eps = eps.unwrap_or(cfg.eps_list[0]);
    let cfg = cfg.clone().with_eps_list(vec![eps])?;
    let dt = fixed_dt(&cfg)?;
    log::info!("run eps={eps} dt={dt:.6e} T={}", cfg.t_final);
    let out = simulate(&cfg, eps, dt)?;
    write_outputs(&out, &cfg.out_dir, cfg.snapshots)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridSpec;

    fn small(init: InitKind) -> ExperimentConfig {
        ExperimentConfig {
            grid: GridSpec::channel(2, 8),
            init,
            t_final: 0.05,
            snapshots: false,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn step_sizes_land_on_t_final() {
        let s = step_sizes(1.0, 0.3);
        assert_eq!(s.len(), 4);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(step_sizes(0.01, 0.3), vec![0.01]);
        assert_eq!(step_sizes(0.9, 0.3).len(), 3);
    }

    #[test]
    fn zero_init_gives_zero_rows() {
        let cfg = small(InitKind::Zero);
        let out = simulate(&cfg, 0.1, 0.01).unwrap();
        assert!(out.status.is_ok());
        for s in &out.samples {
            for name in ["phi0", "phi1", "psi1", "l2_u", "h2_sigma", "mean_sigma", "bvort_residual"] {
                let i = CSV_COLUMNS.iter().position(|c| *c == name).unwrap();
                let v = s.values()[i];
                assert!(v == 0.0 || v.is_nan(), "{name} = {v}");
            }
        }
    }

    #[test]
    fn short_run_is_one_step_and_deterministic() {
        let mut cfg = small(InitKind::WellPrepared);
        cfg.t_final = 1e-4;
        let a = simulate(&cfg, 0.1, 1e-3).unwrap();
        assert_eq!(a.steps, 1);
        assert_eq!(a.samples.len(), 2);
        let b = simulate(&cfg, 0.1, 1e-3).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_csv(&a.samples, &mut x).unwrap();
        write_csv(&b.samples, &mut y).unwrap();
        assert_eq!(x, y);
        let text = String::from_utf8(x).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 28);
    }
}
