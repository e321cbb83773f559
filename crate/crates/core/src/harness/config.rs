//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # 2D channel, walls on the last axis
//! dim = 2
//! cells = 64
//! bc = periodic, slip_walls
//! eps = 0.1, 0.05, 0.025
//! mu = 0.01
//! init = well_prepared
//! theta = 0.05
//! t_final = 2.0
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cg::CgOptions;
use crate::compressible::PhysParams;
use crate::diagnostics::FunctionalWeights;
use crate::geometry::{AxisBc, GridSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    WellPrepared,
    TaylorGreen,
    StokesMode,
    Zero,
}

impl FromStr for InitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "well_prepared" => Ok(InitKind::WellPrepared),
            "taylor_green" => Ok(InitKind::TaylorGreen),
            "stokes_mode" => Ok(InitKind::StokesMode),
            "zero" => Ok(InitKind::Zero),
            other => Err(Error::Config(format!(
                "unknown init '{other}' (expected well_prepared, taylor_green, stokes_mode, zero)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub grid: GridSpec,
    /// Physical parameters; `eps` is overridden per run from `eps_list`.
    pub phys: PhysParams,
    pub eps_list: Vec<f64>,
    pub init: InitKind,
    pub theta: f64,
    pub t_final: f64,
    pub out_dir: PathBuf,
    /// Sample every `cadence` steps (plus the first and last level).
    pub cadence: usize,
    pub weights: FunctionalWeights,
    pub cg_rel_tol: f64,
    pub cg_max_iter: Option<usize>,
    /// Fixed step; `None` uses `stable_dt` of the initial state.
    pub dt: Option<f64>,
    /// Write final-state snapshots.
    pub snapshots: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let phys = PhysParams::default();
        ExperimentConfig {
            grid: GridSpec::channel(2, 32),
            phys,
            eps_list: vec![phys.eps],
            init: InitKind::WellPrepared,
            theta: 0.05,
            t_final: 1.0,
            out_dir: PathBuf::from("out"),
            cadence: 1,
            weights: FunctionalWeights::default(),
            cg_rel_tol: 1e-10,
            cg_max_iter: None,
            dt: None,
            snapshots: true,
        }
    }
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|_| Error::Config(format!("bad value '{}' for '{key}'", s.trim())))
        })
        .collect()
}

fn parse_one<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse::<T>()
        .map_err(|_| Error::Config(format!("bad value '{v}' for '{key}'")))
}

fn broadcast<T: Clone>(key: &str, v: Vec<T>, dim: usize) -> Result<Vec<T>> {
    match v.len() {
        1 => Ok(vec![v[0].clone(); dim]),
        n if n == dim => Ok(v),
        n => Err(Error::Config(format!("'{key}' has {n} entries, expected 1 or {dim}"))),
    }
}

impl ExperimentConfig {
    /// Parses the `key = value` format; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut dim = None;
        let (mut cells, mut lengths, mut bcs) = (None, None, None);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "dim" => dim = Some(parse_one::<usize>(key, value)?),
                "cells" => cells = Some(parse_list::<usize>(key, value)?),
                "lengths" | "length" => lengths = Some(parse_list::<f64>(key, value)?),
                "bc" => bcs = Some(parse_list::<AxisBc>(key, value)?),
                "eps" => cfg.eps_list = parse_list(key, value)?,
                "mu" => cfg.phys.mu = parse_one(key, value)?,
                "lam" | "lambda" => cfg.phys.lam = parse_one(key, value)?,
                "alpha" => cfg.phys.alpha = parse_one(key, value)?,
                "gamma" => cfg.phys.gamma = parse_one(key, value)?,
                "init" => cfg.init = value.parse()?,
                "theta" => cfg.theta = parse_one(key, value)?,
                "t_final" | "T" => cfg.t_final = parse_one(key, value)?,
                "out_dir" => cfg.out_dir = PathBuf::from(value),
                "cadence" => cfg.cadence = parse_one(key, value)?,
                "cg_rel_tol" => cfg.cg_rel_tol = parse_one(key, value)?,
                "cg_max_iter" => cfg.cg_max_iter = Some(parse_one(key, value)?),
                "dt" => cfg.dt = Some(parse_one(key, value)?),
                "snapshots" => cfg.snapshots = parse_one(key, value)?,
                k if k.starts_with("w.") => {
                    let v: f64 = parse_one(key, value)?;
                    let w = &mut cfg.weights;
                    match &k[2..] {
                        "c0" => w.c0 = v,
                        "c8" => w.c8 = v,
                        "c8c5" => w.c8c5 = v,
                        "c23" => w.c23 = v,
                        "c24" => w.c24 = v,
                        "big_k" => w.big_k = v,
                        "c12" => w.c12 = v,
                        "c11_13" => w.c11_13 = v,
                        "c20" => w.c20 = v,
                        other => return Err(Error::Config(format!("unknown weight '{other}'"))),
                    }
                }
                other => return Err(Error::Config(format!("line {}: unknown key '{other}'", lineno + 1))),
            }
        }
        let dim = dim.unwrap_or(cfg.grid.dim);
        cfg.grid = GridSpec {
            dim,
            cells: broadcast("cells", cells.unwrap_or_else(|| vec![32]), dim)?,
            lengths: broadcast("lengths", lengths.unwrap_or_else(|| vec![1.0]), dim)?,
            axis_bc: match bcs {
                Some(b) => broadcast("bc", b, dim)?,
                None => GridSpec::channel(dim, 4).axis_bc,
            },
        };
        cfg.phys.eps = cfg.eps_list[0];
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0) {
            return Err(Error::Config(format!("t_final = {} must be positive", self.t_final)));
        }
        if self.cadence < 1 {
            return Err(Error::Config("cadence must be >= 1".into()));
        }
        if self.eps_list.is_empty() {
            return Err(Error::Config("empty eps list".into()));
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config(format!(
                "eps list {:?} must be strictly decreasing",
                self.eps_list
            )));
        }
        if !(self.theta >= 0.0) {
            return Err(Error::Config(format!("theta = {} must be >= 0", self.theta)));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::Config(format!("dt = {dt} must be positive")));
            }
        }
        for &eps in &self.eps_list {
            PhysParams { eps, ..self.phys }.validate()?;
        }
        self.weights.validate()?;
        crate::geometry::Grid::new(&self.grid)?;
        Ok(())
    }

    /// Parameters of the run at `eps`.
    pub fn params(&self, eps: f64) -> PhysParams {
        PhysParams { eps, ..self.phys }
    }

    pub fn cg_options(&self) -> CgOptions {
        CgOptions {
            rel_tol: self.cg_rel_tol,
            max_iter: self.cg_max_iter,
        }
    }

    /// Replaces the eps list (CLI `--eps` / `--eps-list`), keeping validation.
    pub fn with_eps_list(mut self, eps: Vec<f64>) -> Result<Self> {
        self.eps_list = eps;
        if let Some(&e) = self.eps_list.first() {
            self.phys.eps = e;
        }
        self.validate()?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let cfg = ExperimentConfig::parse(
            "# comment\n dim = 2\ncells = 16, 8\nbc = periodic, slip_walls # trailing\n\
             eps = 0.1, 0.05\nmu = 0.02\ninit = taylor_green\nt_final = 0.5\nw.c8 = 3\ncadence = 2\n",
        )
        .unwrap();
        assert_eq!(cfg.grid.cells, vec![16, 8]);
        assert_eq!(cfg.grid.axis_bc, vec![AxisBc::Periodic, AxisBc::SlipWalls]);
        assert_eq!(cfg.eps_list, vec![0.1, 0.05]);
        assert_eq!(cfg.phys.mu, 0.02);
        assert_eq!(cfg.init, InitKind::TaylorGreen);
        assert_eq!(cfg.weights.c8, 3.0);
        assert_eq!(cfg.cadence, 2);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::parse("nonsense = 1").is_err());
        assert!(ExperimentConfig::parse("eps = 0.05, 0.1").is_err());
        assert!(ExperimentConfig::parse("t_final = 0").is_err());
        assert!(ExperimentConfig::parse("cadence = 0").is_err());
        assert!(ExperimentConfig::parse("mu = -1").is_err());
        assert!(ExperimentConfig::parse("cells = 2").is_err());
        assert!(ExperimentConfig::parse("just text").is_err());
    }
}
