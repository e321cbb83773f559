//! Energy functionals `Phi_0..Psi_2`, the composite `Phi`/`Psi`, the running
//! solution norm `phi^eps`, the decay-inequality ratio and the boundary
//! vorticity identity.
//!
//! Quadrature conventions:
//!
//! * unweighted squared norms are taken at the native location of the
//!   quantity (faces, cells, edges) with the trapezoid weights of
//!   [`Field::weight`];
//! * terms weighted by `rho`, `1/rho`, `p'(rho)` or `1/p'(rho)`, and cross
//!   terms between quantities living at different locations, are evaluated at
//!   cell centers after averaging face and edge samples onto cells
//!   ([`operators::to_cells`]);
//! * `|D(u)|^2` uses [`operators::Deformation::frobenius_sq_cells`];
//! * Hessians are co-located ([`operators::hessian_colocated`]) and
//!   `|hess f|^2 = sum_a f_aa^2 + 2 sum_{a<b} f_ab^2`;
//! * wall integrals use the wall traces of [`operators::boundary_sq`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::compressible::{CompressibleState, DerivativeSource, TimeDerivatives};
use crate::fields::{Field, VectorField};
use crate::operators::{self, to_cells, Components, EdgeField};
use crate::{Error, Result};

/// Denominator guard of [`decay_ratio`].
pub const RATIO_GUARD: f64 = 1e-30;
/// Samples with `Psi` below this are left out of the running max.
pub const PSI_FLOOR: f64 = 1e-20;

/// Positive weights of the functionals (all default to 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FunctionalWeights {
    /// Scale of `Psi_0 = c0 ||u||_{H1}^2`.
    pub c0: f64,
    /// Weight of the time-derivative energy inside `Phi_1`.
    pub c8: f64,
    /// Product weight of `||u_t||_{H1}^2` inside `Psi_1`.
    pub c8c5: f64,
    pub c23: f64,
    pub c24: f64,
    /// Weight of the `eps^2` second-derivative energy in `Phi_2`.
    pub big_k: f64,
    /// Numerator of the `||sqrt(rho) curl u_t||^2 / mu` group in `Phi_2`.
    pub c12: f64,
    /// Numerator of the curl-curl group (`/mu` in `Phi_2`, `/mu^2` in `Psi_2`).
    pub c11_13: f64,
    /// Weight of `||eps sigma_tt||^2` in `Psi_2`.
    pub c20: f64,
}

impl Default for FunctionalWeights {
    fn default() -> Self {
        FunctionalWeights {
            c0: 1.0,
            c8: 1.0,
            c8c5: 1.0,
            c23: 1.0,
            c24: 1.0,
            big_k: 1.0,
            c12: 1.0,
            c11_13: 1.0,
            c20: 1.0,
        }
    }
}

impl FunctionalWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("c0", self.c0),
            ("c8", self.c8),
            ("c8c5", self.c8c5),
            ("c23", self.c23),
            ("c24", self.c24),
            ("big_k", self.big_k),
            ("c12", self.c12),
            ("c11_13", self.c11_13),
            ("c20", self.c20),
        ];
        for (name, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("weight {name} = {v} must be positive")));
            }
        }
        Ok(())
    }
}

/// Individual norms entering the functionals and `phi^eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct SolutionNorms {
    pub l2_sigma: f64,
    pub h1_sigma: f64,
    pub h2_sigma: f64,
    pub l2_u: f64,
    pub h1_u: f64,
    pub h2_u: f64,
    pub h1_sigma_t: f64,
    pub h1_u_t: f64,
    /// `eps ||sigma_tt||_{L2}`; NaN during warmup.
    pub eps_l2_sigma_tt: f64,
    pub eps_l2_u_tt: f64,
}

impl SolutionNorms {
    /// `||(sigma,u)||_{H2} + ||(sigma_t,u_t)||_{H1} + eps ||(u_tt,sigma_tt)||_{L2}`,
    /// omitting terms that are not available.
    pub fn phi_eps_instant(&self) -> f64 {
        let mut v = self.h2_sigma.hypot(self.h2_u);
        let first = self.h1_sigma_t.hypot(self.h1_u_t);
        if first.is_finite() {
            v += first;
        }
        let second = self.eps_l2_sigma_tt.hypot(self.eps_l2_u_tt);
        if second.is_finite() {
            v += second;
        }
        v
    }
}

/// Every functional of one sample. Unavailable values (warmup) are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    pub phi0: f64,
    pub psi0: f64,
    pub phi1: f64,
    pub psi1: f64,
    pub phi2: f64,
    pub psi2: f64,
    pub phi: f64,
    pub psi: f64,
    /// Instantaneous `phi^eps` integrand (before the running max).
    pub phi_eps_instant: f64,
    pub norms: SolutionNorms,
    /// Individual weighted terms keyed `"<functional>.<term>"`.
    pub terms: BTreeMap<String, f64>,
    pub derivatives: Option<DerivativeSource>,
}

impl EnergyReport {
    pub fn term(&self, key: &str) -> Option<f64> {
        self.terms.get(key).copied()
    }

    pub fn has_phi2(&self) -> bool {
        self.phi2.is_finite()
    }
}

struct Cells {
    rho: Field,
    pp: Field,
    vol: f64,
}

impl Cells {
    fn new(state: &CompressibleState) -> Cells {
        let rho = state.density();
        let pp = rho.map(|r| state.params.pprime(r));
        Cells {
            rho,
            pp,
            vol: state.grid().cell_volume(),
        }
    }

    /// `sum_cells w * |a|^2 V` for a cell-centered component list.
    fn weighted_sq(&self, w: impl Fn(usize) -> f64, a: &[Field]) -> f64 {
        self.weighted_dot(w, a, a)
    }

    fn weighted_dot(&self, w: impl Fn(usize) -> f64, a: &[Field], b: &[Field]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        let mut s = 0.0;
        let mut k = 0;
        self.rho.for_each_owned(|p| {
            let mut d = 0.0;
            for (x, y) in a.iter().zip(b) {
                d += x.get(p) * y.get(p);
            }
            s += w(k) * d * self.vol;
            k += 1;
        });
        s
    }

    fn owned(&self, f: &Field) -> Vec<f64> {
        f.owned_values()
    }
}

fn cells_of<C: Components + ?Sized>(f: &C) -> Vec<Field> {
    f.fields().into_iter().map(to_cells).collect()
}

fn sq<C: Components + ?Sized>(f: &C) -> f64 {
    f.fields().into_iter().map(|c| c.norm_l2().powi(2)).sum()
}

fn grad_div(u: &VectorField) -> VectorField {
    operators::grad_h(&operators::div_h(u))
}

fn curl_curl(u: &VectorField) -> VectorField {
    operators::curl_t_h(&operators::curl_h(u), u.grid())
}

fn hess_weighted(f: &Field, w: &[f64], vol: f64) -> f64 {
    let mut s = 0.0;
    for ((a, b), h) in operators::hessian_colocated(f) {
        let mult = if a == b { 1.0 } else { 2.0 };
        for (v, wk) in h.owned_values().iter().zip(w) {
            s += mult * wk * v * v * vol;
        }
    }
    s
}

fn h1_sq<C: Components + ?Sized>(f: &C) -> f64 {
    operators::sobolev_parts(f, 1).h1_sq()
}

fn h2_sq<C: Components + ?Sized>(f: &C) -> f64 {
    operators::sobolev_parts(f, 2).h2_sq()
}

/// Solution norms of a state and its time derivatives.
pub fn solution_norms(state: &CompressibleState, d: Option<&TimeDerivatives>) -> SolutionNorms {
    let s = operators::sobolev_parts(&state.sigma, 2).report(2);
    let u = operators::sobolev_parts(&state.u, 2).report(2);
    let eps = state.params.eps;
    let (h1_sigma_t, h1_u_t, e_stt, e_utt) = match d {
        None => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
        Some(d) => (
            h1_sq(&d.sigma_t).sqrt(),
            h1_sq(&d.u_t).sqrt(),
            d.sigma_tt.as_ref().map_or(f64::NAN, |f| eps * f.norm_l2()),
            d.u_tt.as_ref().map_or(f64::NAN, |f| eps * f.norm_l2()),
        ),
    };
    SolutionNorms {
        l2_sigma: s.l2,
        h1_sigma: s.h1,
        h2_sigma: s.h2,
        l2_u: u.l2,
        h1_u: u.h1,
        h2_u: u.h2,
        h1_sigma_t,
        h1_u_t,
        eps_l2_sigma_tt: e_stt,
        eps_l2_u_tt: e_utt,
    }
}

/// `Phi_0 = int rho |u|^2 + p'(rho) sigma^2`, `Psi_0 = c0 ||u||_{H1}^2`.
pub fn phi0_psi0(state: &CompressibleState, w: &FunctionalWeights) -> (f64, f64) {
    let c = Cells::new(state);
    let rho = c.owned(&c.rho);
    let pp = c.owned(&c.pp);
    let ub = cells_of(&state.u);
    let kin = c.weighted_sq(|k| rho[k], &ub);
    let pot = c.weighted_sq(|k| pp[k], std::slice::from_ref(&state.sigma));
    (kin + pot, w.c0 * h1_sq(&state.u))
}

type Terms = Vec<(&'static str, f64)>;

fn phi1_terms(state: &CompressibleState, d: &TimeDerivatives, w: &FunctionalWeights) -> (Terms, Terms) {
    let p = &state.params;
    let c = Cells::new(state);
    let rho = c.owned(&c.rho);
    let pp = c.owned(&c.pp);
    let u = &state.u;
    let ub = cells_of(u);
    let utb = cells_of(&d.u_t);
    let curl = operators::curl_h(u);
    let div = operators::div_h(u);

    let strain = 2.0 * p.mu * {
        let f = operators::deformation_h(u).frobenius_sq_cells();
        f.owned_values().iter().sum::<f64>() * c.vol
    };
    let dil = p.lam * div.norm_l2().powi(2);
    let grad_sigma = sq(&operators::grad_h(&state.sigma));
    let kin_t = 2.0
        * w.c8
        * (c.weighted_sq(|k| rho[k], &utb) + c.weighted_sq(|k| pp[k], std::slice::from_ref(&d.sigma_t)));
    let cross = 2.0 * c.weighted_dot(|k| rho[k], &utb, &ub);
    let vort = c.weighted_sq(|k| rho[k], &cells_of(&curl));
    let slip = p.alpha * operators::sobolev_parts(u, 0).boundary_sq;
    let phi1 = vec![
        ("strain", strain),
        ("dilatation", dil),
        ("grad_sigma", grad_sigma),
        ("kinetic_t", kin_t),
        ("cross_ut_u", cross),
        ("vorticity", vort),
        ("slip_wall", slip),
    ];

    let pp_quarter = p.pprime(0.25);
    let gd = cells_of(&grad_div(u));
    let psi1 = vec![
        ("sigma_t", 0.5 * pp_quarter * d.sigma_t.norm_l2().powi(2)),
        ("grad_div", (2.0 * p.mu + p.lam) * c.weighted_sq(|k| 1.0 / pp[k], &gd)),
        ("h1_u_t", w.c8c5 * h1_sq(&d.u_t)),
        ("curl_curl", p.mu * sq(&curl_curl(u))),
    ];
    (phi1, psi1)
}

fn phi2_terms(
    state: &CompressibleState,
    d: &TimeDerivatives,
    s_tt: &Field,
    u_tt: &VectorField,
    w: &FunctionalWeights,
) -> (Terms, Terms) {
    let p = &state.params;
    let (mu, lam, eps) = (p.mu, p.lam, p.eps);
    let c = Cells::new(state);
    let rho = c.owned(&c.rho);
    let pp = c.owned(&c.pp);
    let u = &state.u;
    let ut = &d.u_t;
    let utb = cells_of(ut);
    let uttb = cells_of(u_tt);
    let gd = grad_div(u);
    let gdb = cells_of(&gd);
    let grad_st = cells_of(&operators::grad_h(&d.sigma_t));
    let curl_ut = cells_of(&operators::curl_h(ut));
    let div_ut = operators::div_h(ut);
    let cc = sq(&curl_curl(u));

    let strain_t = {
        let f = operators::deformation_h(ut).frobenius_sq_cells();
        2.0 * mu * f.owned_values().iter().sum::<f64>() * c.vol
            + lam * div_ut.norm_l2().powi(2)
            + p.alpha * operators::sobolev_parts(ut, 0).boundary_sq
    };
    let phi2 = vec![
        ("grad_div", (2.0 * mu + lam) * sq(&gd)),
        ("cross_ut_grad_div", -2.0 * c.weighted_dot(|k| rho[k], &utb, &gdb)),
        ("hess_sigma", operators::hessian_sq(&state.sigma)),
        ("div_u_t", div_ut.norm_l2().powi(2)),
        ("grad_sigma_t", c.weighted_sq(|k| pp[k] / rho[k], &grad_st)),
        ("vorticity_t", w.c12 / mu * c.weighted_sq(|k| rho[k], &curl_ut)),
        ("curl_curl", w.c11_13 / mu * cc),
        ("cross_utt_ut", eps * eps * c.weighted_dot(|k| rho[k], &uttb, &utb)),
        (
            "acoustic_tt",
            w.big_k
                * eps
                * eps
                * (c.weighted_sq(|k| pp[k], std::slice::from_ref(s_tt)) + c.weighted_sq(|k| rho[k], &uttb)),
        ),
        ("strain_t", 0.5 * eps * eps * strain_t),
    ];

    let inv_pp: Vec<f64> = pp.iter().map(|v| 1.0 / v).collect();
    let hess_div = hess_weighted(&operators::div_h(u), &inv_pp, c.vol);
    let gdt = cells_of(&grad_div(ut));
    let curl = operators::curl_h(u);
    let psi2 = vec![
        ("hess_div", (2.0 * mu + lam) * hess_div),
        ("grad_div_t", (2.0 * mu + lam) * c.weighted_sq(|k| 1.0 / rho[k], &gdt)),
        ("grad_sigma_t", c.weighted_sq(|k| pp[k], &grad_st)),
        ("curl_curl_t", 2.0 * sq(&curl_curl(ut))),
        ("vorticity_t", w.c11_13 / (mu * mu) * c.weighted_sq(|k| rho[k], &curl_ut)),
        ("h2_curl", 2.0 * h2_sq(&curl)),
        ("sigma_tt", w.c20 * eps * eps * s_tt.norm_l2().powi(2)),
        ("h1_u_tt", 2.0 * eps * eps * h1_sq(u_tt)),
        ("h2_sigma", h2_sq(&state.sigma)),
    ];
    (phi2, psi2)
}

fn total(t: &Terms) -> f64 {
    t.iter().map(|(_, v)| v).sum()
}

fn warmup_error() -> Error {
    Error::InvalidParams("warmup: time derivatives not available".into())
}

/// `(Phi_1, Psi_1)`; needs first time derivatives.
pub fn phi1_psi1(state: &CompressibleState, d: &TimeDerivatives, w: &FunctionalWeights) -> (f64, f64) {
    let (a, b) = phi1_terms(state, d, w);
    (total(&a), total(&b))
}

/// `(Phi_2, Psi_2)`; needs second time derivatives.
pub fn phi2_psi2(state: &CompressibleState, d: &TimeDerivatives, w: &FunctionalWeights) -> Result<(f64, f64)> {
    let (s_tt, u_tt) = match (&d.sigma_tt, &d.u_tt) {
        (Some(s), Some(u)) => (s, u),
        _ => return Err(warmup_error()),
    };
    let (a, b) = phi2_terms(state, d, s_tt, u_tt, w);
    Ok((total(&a), total(&b)))
}

/// Evaluates every functional and norm of one sample.
pub fn energy_report(state: &CompressibleState, d: Option<&TimeDerivatives>, w: &FunctionalWeights) -> EnergyReport {
    let mut terms = BTreeMap::new();
    let (phi0, psi0) = phi0_psi0(state, w);
    terms.insert("phi0.total".to_string(), phi0);
    terms.insert("psi0.total".to_string(), psi0);
    let mut record = |prefix: &str, t: &Terms| {
        for (k, v) in t {
            terms.insert(format!("{prefix}.{k}"), *v);
        }
        total(t)
    };
    let (mut phi1, mut psi1, mut phi2, mut psi2) = (f64::NAN, f64::NAN, f64::NAN, f64::NAN);
    if let Some(d) = d {
        let (a, b) = phi1_terms(state, d, w);
        phi1 = record("phi1", &a);
        psi1 = record("psi1", &b);
        if let (Some(s_tt), Some(u_tt)) = (&d.sigma_tt, &d.u_tt) {
            let (a, b) = phi2_terms(state, d, s_tt, u_tt, w);
            phi2 = record("phi2", &a);
            psi2 = record("psi2", &b);
        }
    }
    let norms = solution_norms(state, d);
    EnergyReport {
        t: state.t,
        phi0,
        psi0,
        phi1,
        psi1,
        phi2,
        psi2,
        phi: w.c23 * phi0 + w.c24 * phi1 + phi2,
        psi: w.c23 * psi0 + w.c24 * psi1 + psi2,
        phi_eps_instant: norms.phi_eps_instant(),
        norms,
        terms,
        derivatives: d.map(|d| d.source),
    }
}

/// Running maximum of the `phi^eps` integrand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct PhiEps {
    pub instant: f64,
    pub running: f64,
    /// Set when second derivatives were unavailable for this sample.
    pub warmup: bool,
}

pub fn phi_eps(state: &CompressibleState, d: Option<&TimeDerivatives>, running: f64) -> PhiEps {
    let norms = solution_norms(state, d);
    update_phi_eps(norms.phi_eps_instant(), running, !d.is_some_and(TimeDerivatives::has_second))
}

pub fn update_phi_eps(instant: f64, running: f64, warmup: bool) -> PhiEps {
    PhiEps {
        instant,
        running: if running.is_nan() { instant } else { running.max(instant) },
        warmup,
    }
}

/// Decay-inequality ratio series and its running maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRatio {
    /// `R(t_n)`; the last entry is NaN (no forward difference).
    pub series: Vec<f64>,
    /// Running max over admissible samples (finite, `Psi >= 1e-20`); NaN
    /// before the first admissible sample.
    pub running_max: Vec<f64>,
}

impl DecayRatio {
    pub fn max(&self) -> f64 {
        self.running_max.last().copied().unwrap_or(f64::NAN)
    }
}

/// `R_n = ((Phi_{n+1} - Phi_n)/dt + Psi_n) / (Psi_n (Phi_n + Phi_n^2) + 1e-30)`
/// with a uniform sample spacing `dt`.
pub fn decay_ratio(phi: &[f64], psi: &[f64], dt: f64) -> Result<DecayRatio> {
    let t: Vec<f64> = (0..phi.len()).map(|i| i as f64 * dt).collect();
    decay_ratio_times(&t, phi, psi)
}

/// [`decay_ratio`] on explicit sample times.
pub fn decay_ratio_times(t: &[f64], phi: &[f64], psi: &[f64]) -> Result<DecayRatio> {
    if phi.len() != psi.len() || phi.len() != t.len() {
        return Err(Error::InvalidParams("series lengths differ".into()));
    }
    if phi.len() < 2 {
        return Err(Error::InvalidParams("decay ratio needs at least two samples".into()));
    }
    let n = phi.len();
    let mut series = vec![f64::NAN; n];
    for i in 0..n - 1 {
        let dt = t[i + 1] - t[i];
        let num = (phi[i + 1] - phi[i]) / dt + psi[i];
        let den = psi[i] * (phi[i] + phi[i] * phi[i]) + RATIO_GUARD;
        series[i] = num / den;
    }
    let mut running_max = Vec::with_capacity(n);
    let mut m = f64::NAN;
    for i in 0..n {
        if series[i].is_finite() && psi[i] >= PSI_FLOOR {
            m = if m.is_nan() { series[i] } else { m.max(series[i]) };
        }
        running_max.push(m);
    }
    Ok(DecayRatio { series, running_max })
}

/// Boundary vorticity identity residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryResidual {
    pub value: f64,
    /// No walls: the identity holds vacuously.
    pub vacuous: bool,
}

/// `max |tau.(n x w) - 2 alpha u.tau|` over wall nodes and tangents, with
/// `w` extrapolated linearly to the wall from the first two interior nodes
/// and `u.tau` the wall trace. Tangent-wall corner nodes are skipped.
pub fn boundary_vorticity_residual(state: &CompressibleState) -> BoundaryResidual {
    boundary_vorticity_residual_of(&state.u, state.params.alpha)
}

pub fn boundary_vorticity_residual_of(u: &VectorField, alpha: f64) -> BoundaryResidual {
    let grid = u.grid();
    if !grid.has_walls() {
        return BoundaryResidual {
            value: 0.0,
            vacuous: true,
        };
    }
    let dim = grid.dim();
    let n = grid.cells();
    let curl: EdgeField = operators::curl_h(u);
    let mut worst = 0.0f64;
    for patch in grid.patches() {
        let a = patch.axis;
        let s = patch.side.sign();
        let (i1, i2, ig, ii) = match patch.side {
            crate::Side::Low => (1, 2, -1, 0),
            crate::Side::High => (n[a] as isize - 1, n[a] as isize - 2, n[a] as isize, n[a] as isize - 1),
        };
        for b in (0..dim).filter(|&b| b != a) {
            let c = 3 - a - b;
            let Some(w) = curl.along(c) else { continue };
            let sign = s * levi(b, a, c);
            let ub = u.comp(b);
            w.for_each_owned(|p| {
                if p[a] != i1 {
                    return;
                }
                if grid.is_wall(b) && (p[b] == 0 || p[b] == n[b] as isize) {
                    return;
                }
                let mut q = p;
                q[a] = i2;
                let w_ext = 2.0 * w.get(p) - w.get(q);
                let (mut g, mut i) = (p, p);
                g[a] = ig;
                i[a] = ii;
                let u_wall = 0.5 * (ub.get(g) + ub.get(i));
                worst = worst.max((sign * w_ext - 2.0 * alpha * u_wall).abs());
            });
        }
    }
    BoundaryResidual {
        value: worst,
        vacuous: false,
    }
}

fn levi(a: usize, b: usize, c: usize) -> f64 {
    match (a, b, c) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}
