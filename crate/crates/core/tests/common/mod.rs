#![allow(dead_code)]

pub mod oracle;

use std::sync::Arc;

use machlimit::compressible::{
    self, CompressibleState, DerivativeSource, PhysParams, TimeDerivatives,
};
use machlimit::fields::{Field, WallRule};
use machlimit::{Grid, GridSpec, VectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn grid(spec: &GridSpec, alpha: f64) -> Arc<Grid> {
    Arc::new(Grid::with_slip(spec, alpha).unwrap())
}

/// Uniform noise in `[-amp, amp]` on owned samples, ghosts untouched.
pub fn noise(f: &mut Field, r: &mut impl Rng, amp: f64) {
    let mut pts = Vec::new();
    f.for_each_owned(|p| pts.push(p));
    for p in pts {
        f.set(p, amp * (2.0 * r.gen::<f64>() - 1.0));
    }
}

pub fn random_scalar(g: &Arc<Grid>, r: &mut impl Rng, amp: f64) -> Field {
    let mut f = Field::cell(g);
    noise(&mut f, r, amp);
    f.fill_ghosts(|_| WallRule::Even);
    f
}

/// Random velocity with impermeable walls and slip ghosts for `alpha`.
pub fn random_velocity(g: &Arc<Grid>, r: &mut impl Rng, amp: f64, alpha: f64) -> VectorField {
    let mut u = VectorField::zeros(g);
    for a in 0..g.dim() {
        noise(u.comp_mut(a), r, amp);
    }
    u.zero_wall_normal();
    u.fill_ghost_velocity(alpha).unwrap();
    u
}

/// Raw noise in every component, ghosts filled with plain copies only
/// where a stencil may read them.
pub fn random_unconstrained(g: &Arc<Grid>, r: &mut impl Rng, amp: f64) -> VectorField {
    let mut u = VectorField::zeros(g);
    for a in 0..g.dim() {
        noise(u.comp_mut(a), r, amp);
        u.comp_mut(a).fill_ghosts(|_| WallRule::Even);
    }
    u
}

pub fn random_state(g: &Arc<Grid>, r: &mut impl Rng, params: PhysParams) -> CompressibleState {
    let sigma = random_scalar(g, r, 1.0);
    let u = random_velocity(g, r, 1.0, params.alpha);
    CompressibleState::new(sigma, u, params).unwrap()
}

pub fn random_derivatives(g: &Arc<Grid>, r: &mut impl Rng, alpha: f64) -> TimeDerivatives {
    TimeDerivatives {
        sigma_t: random_scalar(g, r, 1.0),
        u_t: random_velocity(g, r, 1.0, alpha),
        sigma_tt: Some(random_scalar(g, r, 1.0)),
        u_tt: Some(random_velocity(g, r, 1.0, alpha)),
        source: DerivativeSource::Semidiscrete,
    }
}

/// Classical RK4 on the semidiscrete system, many small steps.
pub fn rk4_reference(state: &CompressibleState, t_final: f64, steps: usize) -> CompressibleState {
    let mut s = state.clone();
    let dt = t_final / steps as f64;
    for _ in 0..steps {
        compressible::rk4_step(&mut s, dt).unwrap();
    }
    s
}

/// Max-norm distance over owned samples.
pub fn max_diff(a: &Field, b: &Field) -> f64 {
    let mut m = 0.0f64;
    a.for_each_owned(|p| m = m.max((a.get(p) - b.get(p)).abs()));
    m
}

pub fn max_diff_v(a: &VectorField, b: &VectorField) -> f64 {
    (0..a.dim()).map(|k| max_diff(a.comp(k), b.comp(k))).fold(0.0, f64::max)
}

/// Least-squares slope of `log e` against `log x`.
pub fn slope(x: &[f64], e: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let le: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let me = le.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&le).map(|(a, b)| (a - mx) * (b - me)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Prints one acceptance line outside the test harness capture.
pub fn report(id: u32, name: &str, pass: bool, detail: &str) {
    use std::io::Write;
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{tag}] criterion {id:>2} {name}: {detail}");
}
