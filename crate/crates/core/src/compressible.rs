//! Asymptotic-preserving IMEX integrator for the rescaled isentropic system
//!
//! ```text
//! sigma_t + div(sigma u) + (1/eps) div u = 0
//! rho (u_t + u.grad u) + (1/eps) p'(rho) grad sigma = 2 mu div D(u) + lam grad div u
//! ```
//!
//! with `rho = 1 + eps sigma` and `p(rho) = rho^gamma / gamma`. The stiff
//! constant-coefficient acoustic pair is implicit (one SPD Helmholtz solve
//! per step); convection, viscosity and the pressure deviation
//! `(p'(rho) - p'(1)) / eps` are explicit, so the stable step does not
//! depend on `eps`.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cg::{self, CgOptions, CgStats};
use crate::fields::{Field, Location, VectorField, WallRule};
use crate::geometry::Grid;
use crate::operators::{self, to_faces, EdgeField};
use crate::{Error, Result};

pub const DENSITY_MIN: f64 = 0.25;
pub const DENSITY_MAX: f64 = 4.0;
pub const CFL_SAFETY: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    pub eps: f64,
    pub mu: f64,
    pub lam: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for PhysParams {
    fn default() -> Self {
        PhysParams {
            eps: 0.1,
            mu: 0.01,
            lam: 0.01,
            alpha: 0.0,
            gamma: 1.4,
        }
    }
}

impl PhysParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return bad(format!("eps = {} outside (0, 1]", self.eps));
        }
        if !(self.mu > 0.0) {
            return bad(format!("mu = {} must be positive", self.mu));
        }
        if !(self.mu + 1.5 * self.lam >= 0.0) {
            return bad(format!("mu + 3 lam / 2 = {} < 0", self.mu + 1.5 * self.lam));
        }
        if !(self.alpha >= 0.0) {
            return bad(format!("alpha = {} < 0", self.alpha));
        }
        if !(self.gamma > 1.0) {
            return bad(format!("gamma = {} must exceed 1", self.gamma));
        }
        Ok(())
    }

    /// `p'(rho) = rho^(gamma - 1)`.
    #[inline]
    pub fn pprime(&self, rho: f64) -> f64 {
        rho.powf(self.gamma - 1.0)
    }
}

/// One stored time level.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub sigma: Field,
    pub u: VectorField,
}

#[derive(Debug, Clone)]
pub struct CompressibleState {
    pub sigma: Field,
    pub u: VectorField,
    pub t: f64,
    /// Previous levels, most recent first; at most two.
    pub history: VecDeque<Snapshot>,
    pub params: PhysParams,
    /// CG iterations of the last step.
    pub cg_iters: usize,
}

impl CompressibleState {
    /// Builds a state from fields, filling ghosts and zeroing wall normals.
    pub fn new(mut sigma: Field, mut u: VectorField, params: PhysParams) -> Result<Self> {
        params.validate()?;
        sigma.fill_ghosts(|_| WallRule::Even);
        u.zero_wall_normal();
        u.fill_ghost_velocity(params.alpha)?;
        Ok(CompressibleState {
            sigma,
            u,
            t: 0.0,
            history: VecDeque::with_capacity(2),
            params,
            cg_iters: 0,
        })
    }

    pub fn zero(grid: &Arc<Grid>, params: PhysParams) -> Result<Self> {
        Self::new(Field::cell(grid), VectorField::zeros(grid), params)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.sigma.grid()
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            t: self.t,
            sigma: self.sigma.clone(),
            u: self.u.clone(),
        }
    }

    /// Pushes the current level into the history ring and installs new fields.
    pub fn advance_to(&mut self, t: f64, sigma: Field, u: VectorField) {
        let prev = Snapshot {
            t: self.t,
            sigma: std::mem::replace(&mut self.sigma, sigma),
            u: std::mem::replace(&mut self.u, u),
        };
        self.history.push_front(prev);
        self.history.truncate(2);
        self.t = t;
    }

    /// `rho = 1 + eps sigma` on all storage.
    pub fn density(&self) -> Field {
        let eps = self.params.eps;
        self.sigma.map(|s| 1.0 + eps * s)
    }

    pub fn density_bounds(&self) -> (f64, f64) {
        self.density().min_max()
    }

    pub fn check_density(&self) -> Result<()> {
        let (lo, hi) = self.density_bounds();
        if !(lo >= DENSITY_MIN && hi <= DENSITY_MAX) {
            return Err(Error::DensityBound {
                t: self.t,
                rho_min: lo,
                rho_max: hi,
            });
        }
        Ok(())
    }
}

fn axis_mode(grid: &Grid, axis: usize, x: f64, harmonic: f64, odd: bool) -> f64 {
    let l = grid.lengths()[axis];
    let k = if grid.is_wall(axis) { harmonic * PI / l } else { 2.0 * harmonic * PI / l };
    if odd {
        (k * x).sin()
    } else {
        (k * x).cos()
    }
}

/// Wall-axis profile of the stream function. Sine modes vanish on the walls;
/// the polynomial corrections give the tangential velocity (the derivative
/// of the profile) the Robin slope `d_n u = -2 alpha u` on both walls, and
/// the cosine mode (3D, velocity proportional to the profile) likewise.
fn wall_profile(l: f64, x: f64, harmonic: f64, odd: bool, alpha: f64) -> f64 {
    let k = harmonic * PI / l;
    let even_harmonic = (harmonic as i64) % 2 == 0;
    if odd {
        let bump = x * x * (l - x) * (l - x) * if even_harmonic { (l - 2.0 * x) / l } else { 1.0 };
        (k * x).sin() + alpha * k / l.powi(2) * bump
    } else {
        let ramp = if even_harmonic {
            x * (l - x) / l
        } else {
            x * (l - x) * (l - 2.0 * x) / (l * l)
        };
        (k * x).cos() + 2.0 * alpha * ramp
    }
}

/// Stream function used by [`well_prepared_init`]: sine modes (vanishing on
/// the wall) along axes 0 and 1, cosine along axis 2, corrected for the
/// slip coefficient of the grid.
pub fn stream_function(grid: &Arc<Grid>) -> Field {
    let dim = grid.dim();
    let loc = Location::edge(2, dim);
    let mode = |x: [f64; 3], m: [f64; 3], phase: [bool; 3]| -> f64 {
        let mut v = 1.0;
        for a in 0..dim {
            let odd = if a < 2 { grid.is_wall(a) || phase[a] } else { false };
            v *= if grid.is_wall(a) {
                wall_profile(grid.lengths()[a], x[a], m[a], odd, grid.alpha())
            } else {
                axis_mode(grid, a, x[a], m[a], odd)
            };
        }
        v
    };
    let mut psi = Field::from_fn(grid, loc, |x| {
        mode(x, [1.0, 1.0, 1.0], [false, true, false]) + 0.5 * mode(x, [2.0, 1.0, 1.0], [true, true, false])
    });
    // exact zeros on the wall nodes keep u.n = 0 free of rounding
    let n = grid.cells();
    for a in 0..dim.min(2) {
        if !grid.is_wall(a) {
            continue;
        }
        let (lo, hi) = psi.storage_range();
        let mut idx = Vec::new();
        for i in lo[0]..hi[0] {
            for j in lo[1]..hi[1] {
                for k in lo[2]..hi[2] {
                    let p = [i, j, k];
                    if p[a] == 0 || p[a] == n[a] as isize {
                        idx.push(p);
                    }
                }
            }
        }
        for p in idx {
            psi.set(p, 0.0);
        }
    }
    psi
}

/// Discretely divergence-free velocity with unit max-norm.
pub fn solenoidal_velocity(grid: &Arc<Grid>) -> VectorField {
    let psi = stream_function(grid);
    let w = EdgeField::single(2, psi);
    let mut u = operators::curl_t_h(&w, grid);
    let m = u.max_abs();
    if m > 0.0 {
        u.scale(1.0 / m);
    }
    u
}

/// Smooth zero-mean profile compatible with zero-flux walls.
pub fn density_profile(grid: &Arc<Grid>) -> Field {
    let dim = grid.dim();
    let mut s = Field::from_fn(grid, Location::CELL, |x| {
        let mut v = 0.5;
        for a in 0..dim {
            v *= axis_mode(grid, a, x[a], 1.0, false);
        }
        v
    });
    s.remove_mean();
    s
}

/// Well-prepared data: `u0 = theta * (curl of a stream function)`, exactly
/// divergence-free with `u.n = 0`, and `sigma0 = eps * theta * s(x)`.
pub fn well_prepared_init(grid: &Arc<Grid>, params: PhysParams, theta: f64) -> Result<CompressibleState> {
    if !(theta >= 0.0) {
        return Err(Error::InvalidParams(format!("theta = {theta} must be >= 0")));
    }
    let grid = Arc::new(grid.with_alpha(params.alpha)?);
    let mut u = solenoidal_velocity(&grid);
    u.scale(theta);
    let mut sigma = density_profile(&grid);
    sigma.scale(params.eps * theta);
    CompressibleState::new(sigma, u, params)
}

/// `safety * min(h / (|u|_max + 1e-12), h^2 / (2 dim (2 mu + lam)))`.
pub fn stable_dt(state: &CompressibleState) -> f64 {
    let p = &state.params;
    stable_dt_for(state.grid(), state.u.max_abs(), 2.0 * p.mu + p.lam)
}

pub fn stable_dt_for(grid: &Grid, umax: f64, diffusivity: f64) -> f64 {
    let h = grid.min_spacing();
    let conv = h / (umax + 1e-12);
    let visc = if diffusivity > 0.0 {
        h * h / (2.0 * grid.dim() as f64 * diffusivity)
    } else {
        f64::INFINITY
    };
    CFL_SAFETY * conv.min(visc)
}

/// Face coefficients shared by the explicit and implicit parts.
struct Coefficients {
    inv_rho: VectorField,
    pprime: VectorField,
}

fn coefficients(state: &CompressibleState) -> Coefficients {
    let rho = state.density();
    let inv = rho.map(|r| 1.0 / r);
    let pp = rho.map(|r| state.params.pprime(r));
    let dim = state.grid().dim();
    let faces = |f: &Field| {
        VectorField::from_components((0..dim).map(|a| to_faces(f, a)).collect()).expect("faces")
    };
    Coefficients {
        inv_rho: faces(&inv),
        pprime: faces(&pp),
    }
}

fn mul_faces(a: &VectorField, b: &VectorField) -> VectorField {
    let comps = (0..a.dim())
        .map(|d| {
            let mut out = a.comp(d).clone();
            out.raw_mut().iter_mut().zip(b.comp(d).raw()).for_each(|(x, y)| *x *= y);
            out
        })
        .collect();
    VectorField::from_components(comps).expect("faces")
}

/// Explicit tendencies `(F_sigma, F_u)`; `F_u` carries only the pressure
/// deviation `(p'(rho) - p'(1)) / (eps rho) grad sigma`.
fn explicit_terms(state: &CompressibleState, co: &Coefficients) -> (Field, VectorField) {
    let p = &state.params;
    let dim = state.grid().dim();
    let sigma_faces =
        VectorField::from_components((0..dim).map(|a| to_faces(&state.sigma, a)).collect()).expect("faces");
    let mut f_sigma = operators::div_h(&mul_faces(&sigma_faces, &state.u));
    f_sigma.scale(-1.0);

    let visc = operators::viscous_h(&state.u, p.mu, p.lam);
    let mut f_u = mul_faces(&visc, &co.inv_rho);
    f_u.axpy(-1.0, &operators::convection_h(&state.u, &state.u)).expect("faces");
    let grad_s = operators::grad_h(&state.sigma);
    let pp1 = p.pprime(1.0);
    let mut dev = co.pprime.clone();
    for d in 0..dim {
        dev.comp_mut(d).add_constant(-pp1);
    }
    let dev = mul_faces(&mul_faces(&dev, &co.inv_rho), &grad_s);
    f_u.axpy(-1.0 / p.eps, &dev).expect("faces");
    (f_sigma, f_u)
}

/// Zeroes every non-owned sample of a face field computed from stencils.
fn restrict_owned(v: &mut VectorField, alpha: f64) -> Result<()> {
    v.zero_wall_normal();
    v.fill_ghost_velocity(alpha)
}

/// Semidiscrete right-hand side `(sigma_t, u_t)` of the full system.
pub fn rhs(state: &CompressibleState) -> Result<(Field, VectorField)> {
    let p = &state.params;
    let co = coefficients(state);
    let (mut s_t, mut u_t) = explicit_terms(state, &co);
    s_t.axpy(-1.0 / p.eps, &operators::div_h(&state.u))?;
    let grad_s = operators::grad_h(&state.sigma);
    let imp = mul_faces(&co.inv_rho, &grad_s);
    u_t.axpy(-p.pprime(1.0) / p.eps, &imp)?;
    s_t.fill_ghosts(|_| WallRule::Even);
    restrict_owned(&mut u_t, p.alpha)?;
    Ok((s_t, u_t))
}

/// First-order IMEX step of size `dt`.
pub fn step(state: &mut CompressibleState, dt: f64) -> Result<CgStats> {
    step_with(state, dt, &CgOptions::default())
}

pub fn step_with(state: &mut CompressibleState, dt: f64, opts: &CgOptions) -> Result<CgStats> {
    let p = state.params;
    let co = coefficients(state);
    let (f_sigma, f_u) = explicit_terms(state, &co);

    let mut u_star = state.u.clone();
    u_star.axpy(dt, &f_u)?;
    restrict_owned(&mut u_star, p.alpha)?;

    let mut rhs = state.sigma.clone();
    rhs.axpy(dt, &f_sigma)?;
    rhs.axpy(-dt / p.eps, &operators::div_h(&u_star))?;

    let pp1 = p.pprime(1.0);
    let kappa = dt * dt * pp1 / (p.eps * p.eps);
    let (sigma_new, stats) = cg::solve_helmholtz_faces(&rhs, &co.inv_rho, kappa, Some(&state.sigma), opts)?;

    let grad_new = operators::grad_h(&sigma_new);
    let mut u_new = u_star;
    u_new.axpy(-dt * pp1 / p.eps, &mul_faces(&co.inv_rho, &grad_new))?;
    restrict_owned(&mut u_new, p.alpha)?;

    let t_new = state.t + dt;
    state.advance_to(t_new, sigma_new, u_new);
    state.cg_iters = stats.iterations;
    let (rho_min, rho_max) = state.density_bounds();
    log::debug!(
        "t={t_new:.6e} dt={dt:.3e} cg={} rho=[{rho_min:.6}, {rho_max:.6}]",
        stats.iterations
    );
    state.check_density()?;
    Ok(stats)
}

/// Spectator check used by tests and the verification suite: helmholtz
/// solve for a cell-centered coefficient (averaged onto faces).
pub fn helmholtz_solve(rhs: &Field, coeff: &Field, kappa: f64) -> Result<(Field, CgStats)> {
    helmholtz_solve_with(rhs, coeff, kappa, &CgOptions::default())
}

pub fn helmholtz_solve_with(rhs: &Field, coeff: &Field, kappa: f64, opts: &CgOptions) -> Result<(Field, CgStats)> {
    let mut lo = f64::INFINITY;
    coeff.for_each_owned(|p| lo = lo.min(coeff.get(p)));
    if !(lo > 0.0) {
        return Err(Error::InvalidParams(format!(
            "Helmholtz coefficient must be positive (min {lo:.3e})"
        )));
    }
    let mut c = coeff.clone();
    c.fill_ghosts(|_| WallRule::Even);
    let mut r = rhs.clone();
    r.fill_ghosts(|_| WallRule::Even);
    cg::solve_helmholtz_faces(&r, &cg::coeff_to_faces(&c), kappa, None, opts)
}

/// Applies `s - kappa div(c grad s)` (the operator inverted by
/// [`helmholtz_solve`]) on owned cells.
pub fn helmholtz_apply(s: &Field, coeff: &Field, kappa: f64) -> Field {
    let mut c = coeff.clone();
    c.fill_ghosts(|_| WallRule::Even);
    let mut s = s.clone();
    s.fill_ghosts(|_| WallRule::Even);
    let faces = cg::coeff_to_faces(&c);
    let flux = mul_faces(&faces, &operators::grad_h(&s));
    let mut out = s.clone();
    out.axpy(-kappa, &operators::div_h(&flux)).expect("cells");
    out
}

/// Source of a set of time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeSource {
    /// Three-level backward differences.
    History,
    /// One stored level: first-order differences, no second derivatives.
    Warmup,
    /// Evaluated from the semidiscrete right-hand side.
    Semidiscrete,
}

#[derive(Debug, Clone)]
pub struct TimeDerivatives {
    pub sigma_t: Field,
    pub u_t: VectorField,
    pub sigma_tt: Option<Field>,
    pub u_tt: Option<VectorField>,
    pub source: DerivativeSource,
}

impl TimeDerivatives {
    pub fn has_second(&self) -> bool {
        self.sigma_tt.is_some() && self.u_tt.is_some()
    }

    pub fn zero(grid: &Arc<Grid>) -> TimeDerivatives {
        TimeDerivatives {
            sigma_t: Field::cell(grid),
            u_t: VectorField::zeros(grid),
            sigma_tt: Some(Field::cell(grid)),
            u_tt: Some(VectorField::zeros(grid)),
            source: DerivativeSource::Semidiscrete,
        }
    }
}

fn combine3(c: [f64; 3], f: [&Field; 3]) -> Field {
    let mut out = f[0].clone();
    out.scale(c[0]);
    out.axpy(c[1], f[1]).expect("layout");
    out.axpy(c[2], f[2]).expect("layout");
    out
}

fn combine3v(c: [f64; 3], f: [&VectorField; 3]) -> VectorField {
    let mut out = f[0].clone();
    out.scale(c[0]);
    out.axpy(c[1], f[1]).expect("layout");
    out.axpy(c[2], f[2]).expect("layout");
    out
}

/// Backward-difference time derivatives from the history ring.
///
/// With two stored levels the first derivatives use the three-point
/// one-sided formula and the second derivatives the three-point formula, both
/// on the actual timestamps. With one level only first-order first
/// derivatives are returned ([`DerivativeSource::Warmup`]).
pub fn time_derivatives(state: &CompressibleState) -> Result<TimeDerivatives> {
    match state.history.len() {
        0 => Err(Error::InvalidParams(
            "warmup: no stored time levels for time derivatives".into(),
        )),
        1 => {
            let prev = &state.history[0];
            let dt = state.t - prev.t;
            let mut s_t = state.sigma.clone();
            s_t.axpy(-1.0, &prev.sigma)?;
            s_t.scale(1.0 / dt);
            let mut u_t = state.u.clone();
            u_t.axpy(-1.0, &prev.u)?;
            u_t.scale(1.0 / dt);
            Ok(TimeDerivatives {
                sigma_t: s_t,
                u_t,
                sigma_tt: None,
                u_tt: None,
                source: DerivativeSource::Warmup,
            })
        }
        _ => {
            let (t0, t1, t2) = (state.t, state.history[0].t, state.history[1].t);
            let d1 = [
                1.0 / (t0 - t1) + 1.0 / (t0 - t2),
                (t0 - t2) / ((t1 - t0) * (t1 - t2)),
                (t0 - t1) / ((t2 - t0) * (t2 - t1)),
            ];
            let d2 = [
                2.0 / ((t0 - t1) * (t0 - t2)),
                2.0 / ((t1 - t0) * (t1 - t2)),
                2.0 / ((t2 - t0) * (t2 - t1)),
            ];
            let s = [&state.sigma, &state.history[0].sigma, &state.history[1].sigma];
            let u = [&state.u, &state.history[0].u, &state.history[1].u];
            Ok(TimeDerivatives {
                sigma_t: combine3(d1, s),
                u_t: combine3v(d1, u),
                sigma_tt: Some(combine3(d2, s)),
                u_tt: Some(combine3v(d2, u)),
                source: DerivativeSource::History,
            })
        }
    }
}

/// Time derivatives of the semidiscrete system at the current level:
/// first derivatives from [`rhs`], second derivatives from a central
/// directional difference of [`rhs`] along the first derivatives.
pub fn semidiscrete_time_derivatives(state: &CompressibleState) -> Result<TimeDerivatives> {
    let (s_t, u_t) = rhs(state)?;
    let scale_x = state.sigma.max_abs().max(state.u.max_abs());
    let scale_v = s_t.max_abs().max(u_t.max_abs());
    if scale_v == 0.0 {
        let g = state.grid();
        return Ok(TimeDerivatives {
            sigma_t: s_t,
            u_t,
            sigma_tt: Some(Field::cell(g)),
            u_tt: Some(VectorField::zeros(g)),
            source: DerivativeSource::Semidiscrete,
        });
    }
    let delta = 1e-4 * scale_x.max(1e-3) / scale_v;
    let shifted = |sign: f64| -> Result<(Field, VectorField)> {
        let mut st = state.clone();
        st.sigma.axpy(sign * delta, &s_t)?;
        st.u.axpy(sign * delta, &u_t)?;
        rhs(&st)
    };
    let (sp, up) = shifted(1.0)?;
    let (sm, um) = shifted(-1.0)?;
    let mut s_tt = sp;
    s_tt.axpy(-1.0, &sm)?;
    s_tt.scale(0.5 / delta);
    let mut u_tt = up;
    u_tt.axpy(-1.0, &um)?;
    u_tt.scale(0.5 / delta);
    Ok(TimeDerivatives {
        sigma_t: s_t,
        u_t,
        sigma_tt: Some(s_tt),
        u_tt: Some(u_tt),
        source: DerivativeSource::Semidiscrete,
    })
}

/// Classical RK4 step of the semidiscrete system (explicit reference
/// integrator; needs `dt` far below the acoustic time scale `eps h`).
pub fn rk4_step(state: &mut CompressibleState, dt: f64) -> Result<()> {
    let stage = |base: &CompressibleState, ks: &(Field, VectorField), c: f64| -> Result<CompressibleState> {
        let mut s = base.clone();
        s.sigma.axpy(c, &ks.0)?;
        s.u.axpy(c, &ks.1)?;
        s.u.zero_wall_normal();
        s.u.fill_ghost_velocity(base.params.alpha)?;
        s.sigma.fill_ghosts(|_| WallRule::Even);
        Ok(s)
    };
    let k1 = rhs(state)?;
    let k2 = rhs(&stage(state, &k1, 0.5 * dt)?)?;
    let k3 = rhs(&stage(state, &k2, 0.5 * dt)?)?;
    let k4 = rhs(&stage(state, &k3, dt)?)?;
    let mut sigma = state.sigma.clone();
    let mut u = state.u.clone();
    for (w, k) in [(1.0, &k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)] {
        sigma.axpy(dt * w / 6.0, &k.0)?;
        u.axpy(dt * w / 6.0, &k.1)?;
    }
    sigma.fill_ghosts(|_| WallRule::Even);
    u.zero_wall_normal();
    u.fill_ghost_velocity(state.params.alpha)?;
    let t = state.t + dt;
    state.advance_to(t, sigma, u);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridSpec;

    fn channel(n: usize) -> Arc<Grid> {
        Arc::new(Grid::new(&GridSpec::channel(2, n)).unwrap())
    }

    #[test]
    fn params_validation() {
        assert!(PhysParams::default().validate().is_ok());
        let mut p = PhysParams::default();
        p.mu = 0.0;
        assert!(p.validate().is_err());
        let mut p = PhysParams::default();
        p.lam = -1.0;
        assert!(p.validate().is_err());
        let mut p = PhysParams::default();
        p.eps = 1.5;
        assert!(p.validate().is_err());
    }

    #[test]
    fn stable_dt_hand_value() {
        let g = Arc::new(Grid::new(&GridSpec::torus(2, 32)).unwrap());
        let mut p = PhysParams::default();
        p.mu = 0.01;
        p.lam = 0.01;
        let s = CompressibleState::zero(&g, p).unwrap();
        let dt = stable_dt(&s);
        // 0.4 * (1/32)^2 / (4 * 0.03)
        assert!((dt - 3.255_208_333_333_333_5e-3).abs() < 1e-15);
        p.eps = 1e-4;
        let s2 = CompressibleState::zero(&g, p).unwrap();
        assert_eq!(stable_dt(&s2), dt);
    }

    #[test]
    fn convective_limit_dominates() {
        let g = channel(16);
        let mut s = CompressibleState::zero(&g, PhysParams::default()).unwrap();
        s.u.comp_mut(0).add_constant(1e4);
        let dt = stable_dt(&s);
        assert!((dt - 0.4 * (1.0 / 16.0) / (1e4 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn zero_state_is_fixed_point() {
        let g = channel(8);
        for eps in [1e-1, 1e-3] {
            let mut p = PhysParams::default();
            p.eps = eps;
            let mut s = CompressibleState::zero(&g, p).unwrap();
            for _ in 0..3 {
                step(&mut s, 0.01).unwrap();
            }
            assert_eq!(s.sigma.max_abs(), 0.0);
            assert_eq!(s.u.max_abs(), 0.0);
        }
    }

    #[test]
    fn init_is_divergence_free() {
        for spec in [GridSpec::channel(2, 16), GridSpec::closed_box(2, 16), GridSpec::torus(2, 16), GridSpec::channel(3, 8)] {
            let g = Arc::new(Grid::new(&spec).unwrap());
            let s = well_prepared_init(&g, PhysParams::default(), 0.05).unwrap();
            assert!(operators::div_h(&s.u).norm_l2() <= 1e-12);
            assert_eq!(s.u.wall_normal_max(), 0.0);
            assert!((s.u.max_abs() - 0.05).abs() < 1e-14);
            assert!(s.sigma.mean().abs() < 1e-15);
        }
        let g = channel(8);
        let s = well_prepared_init(&g, PhysParams::default(), 0.0).unwrap();
        assert_eq!(s.u.max_abs(), 0.0);
        assert_eq!(s.sigma.max_abs(), 0.0);
    }

    #[test]
    fn history_derivatives_exact_on_polynomials() {
        let g = channel(8);
        let mut s = CompressibleState::zero(&g, PhysParams::default()).unwrap();
        let set = |s: &mut CompressibleState, t: f64, f: &dyn Fn(f64) -> f64| {
            let sigma = Field::constant(&g, Location::CELL, f(t));
            let u = VectorField::zeros(&g);
            s.advance_to(t, sigma, u);
        };
        let lin = |t: f64| t;
        s.t = -1.0;
        set(&mut s, 0.1, &lin);
        set(&mut s, 0.25, &lin);
        set(&mut s, 0.3, &lin);
        let d = time_derivatives(&s).unwrap();
        d.sigma_t.for_each_owned(|p| assert!((d.sigma_t.get(p) - 1.0).abs() < 1e-12));
        assert!(d.sigma_tt.as_ref().unwrap().max_abs() < 1e-10);

        let quad = |t: f64| t * t;
        set(&mut s, 0.4, &quad);
        set(&mut s, 0.55, &quad);
        set(&mut s, 0.6, &quad);
        let d = time_derivatives(&s).unwrap();
        let stt = d.sigma_tt.unwrap();
        stt.for_each_owned(|p| assert!((stt.get(p) - 2.0).abs() < 1e-9));
        d.sigma_t.for_each_owned(|p| assert!((d.sigma_t.get(p) - 1.2).abs() < 1e-10));
    }

    #[test]
    fn frozen_state_has_zero_derivatives_and_warmup_is_flagged() {
        let g = channel(8);
        let mut s = well_prepared_init(&g, PhysParams::default(), 0.05).unwrap();
        assert!(time_derivatives(&s).is_err());
        let (sig, u) = (s.sigma.clone(), s.u.clone());
        s.advance_to(0.1, sig.clone(), u.clone());
        let d = time_derivatives(&s).unwrap();
        assert_eq!(d.source, DerivativeSource::Warmup);
        assert!(!d.has_second());
        s.advance_to(0.2, sig, u);
        let d = time_derivatives(&s).unwrap();
        assert!(d.sigma_t.max_abs() < 1e-14);
        assert!(d.u_t.max_abs() < 1e-14);
        assert!(d.u_tt.unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn helmholtz_round_trip_and_limits() {
        let g = Arc::new(Grid::new(&GridSpec::torus(2, 32)).unwrap());
        let one = Field::constant(&g, Location::CELL, 1.0);
        let exact = Field::from_fn(&g, Location::CELL, |x| (2.0 * PI * x[0]).cos());
        let rhs = helmholtz_apply(&exact, &one, 0.3);
        let (sol, _) = helmholtz_solve(&rhs, &one, 0.3).unwrap();
        let mut err = sol.clone();
        err.axpy(-1.0, &exact).unwrap();
        assert!(err.max_abs() <= 1e-9);
        let (c, _) = helmholtz_solve(&one, &one, 5.0).unwrap();
        c.for_each_owned(|p| assert!((c.get(p) - 1.0).abs() < 1e-12));
        let (same, st) = helmholtz_solve(&exact, &one, 0.0).unwrap();
        assert_eq!(st.iterations, 0);
        assert_eq!(same.owned_values(), exact.owned_values());
        let mut neg = one.clone();
        neg.set([3, 3, 0], -1.0);
        assert!(helmholtz_solve(&exact, &neg, 1.0).is_err());
    }

    #[test]
    fn mean_is_conserved_and_walls_stay_impermeable() {
        let g = Arc::new(Grid::new(&GridSpec::closed_box(2, 16)).unwrap());
        for eps in [1e-1, 1e-3] {
            let p = PhysParams {
                eps,
                alpha: 0.5,
                ..PhysParams::default()
            };
            let mut s = well_prepared_init(&g, p, 0.05).unwrap();
            let dt = stable_dt(&s);
            for _ in 0..20 {
                step(&mut s, dt).unwrap();
                assert!(s.sigma.mean().abs() <= 1e-13);
                assert_eq!(s.u.wall_normal_max(), 0.0);
            }
        }
    }
}
