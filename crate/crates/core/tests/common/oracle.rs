//! Direct-quadrature evaluation of every energy-functional term, written
//! from the continuous integrands with explicit index loops. Shares nothing
//! with the library beyond raw sample access (`Field::get`) and the grid
//! geometry.

use std::collections::BTreeMap;

use machlimit::compressible::{CompressibleState, TimeDerivatives};
use machlimit::diagnostics::FunctionalWeights;
use machlimit::{Field, VectorField};

type P = [isize; 3];

#[derive(Clone, Copy)]
pub struct Geo {
    pub dim: usize,
    pub n: [isize; 3],
    pub h: [f64; 3],
    pub wall: [bool; 3],
    pub vol: f64,
}

impl Geo {
    pub fn of(f: &Field) -> Geo {
        let g = f.grid();
        let c = g.cells();
        let h = g.spacing();
        let dim = g.dim();
        let mut wall = [false; 3];
        for (a, w) in wall.iter_mut().enumerate().take(dim) {
            *w = g.is_wall(a);
        }
        let vol = (0..dim).map(|a| h[a]).product();
        Geo {
            dim,
            n: [c[0] as isize, c[1] as isize, c[2] as isize],
            h,
            wall,
            vol,
        }
    }

    fn count(&self, st: [bool; 3], a: usize) -> isize {
        if a >= self.dim {
            1
        } else {
            self.n[a] + (st[a] && self.wall[a]) as isize
        }
    }

    pub fn owned(&self, st: [bool; 3]) -> Vec<P> {
        let m = [self.count(st, 0), self.count(st, 1), self.count(st, 2)];
        let mut v = Vec::new();
        for i in 0..m[0] {
            for j in 0..m[1] {
                for k in 0..m[2] {
                    v.push([i, j, k]);
                }
            }
        }
        v
    }

    fn trap(&self, st: [bool; 3], p: P) -> f64 {
        let mut w = self.vol;
        for a in 0..self.dim {
            if st[a] && self.wall[a] && (p[a] == 0 || p[a] == self.n[a]) {
                w *= 0.5;
            }
        }
        w
    }
}

fn e(a: usize) -> P {
    let mut p = [0; 3];
    p[a] = 1;
    p
}

fn add(p: P, q: P) -> P {
    [p[0] + q[0], p[1] + q[1], p[2] + q[2]]
}

fn sub(p: P, q: P) -> P {
    [p[0] - q[0], p[1] - q[1], p[2] - q[2]]
}

fn eps3(a: usize, b: usize, c: usize) -> f64 {
    let perm = [(0, 1, 2), (1, 2, 0), (2, 0, 1)];
    if perm.contains(&(a, b, c)) {
        1.0
    } else if perm.contains(&(a, c, b)) {
        -1.0
    } else {
        0.0
    }
}

/// A sampled quantity: staggering plus an evaluator on indices.
pub struct Q<'a> {
    pub st: [bool; 3],
    pub f: Box<dyn Fn(P) -> f64 + 'a>,
}

impl<'a> Q<'a> {
    fn at(&self, p: P) -> f64 {
        (self.f)(p)
    }
}

fn raw(f: &Field) -> Q<'_> {
    Q {
        st: f.location().staggered,
        f: Box::new(move |p| f.get(p)),
    }
}

fn div<'a>(g: Geo, u: &'a VectorField) -> Q<'a> {
    Q {
        st: [false; 3],
        f: Box::new(move |p| {
            (0..g.dim)
                .map(|a| (u.comp(a).get(add(p, e(a))) - u.comp(a).get(p)) / g.h[a])
                .sum()
        }),
    }
}

/// Face gradient of a cell quantity.
fn grad<'a>(g: Geo, s: &'a Q<'a>, a: usize) -> Q<'a> {
    Q {
        st: {
            let mut st = [false; 3];
            st[a] = true;
            st
        },
        f: Box::new(move |p| (s.at(p) - s.at(sub(p, e(a)))) / g.h[a]),
    }
}

fn curl_axes(g: Geo) -> Vec<usize> {
    if g.dim == 2 {
        vec![2]
    } else {
        vec![0, 1, 2]
    }
}

/// Edge component `c` of the circulation curl.
fn curl<'a>(g: Geo, u: &'a VectorField, c: usize) -> Q<'a> {
    let a = (c + 1) % 3;
    let b = (c + 2) % 3;
    let mut st = [false; 3];
    for (d, s) in st.iter_mut().enumerate().take(g.dim) {
        *s = d != c;
    }
    Q {
        st,
        f: Box::new(move |p| {
            // in 2D only c = 2 occurs, so a and b are always active axes
            (u.comp(b).get(p) - u.comp(b).get(sub(p, e(a)))) / g.h[a]
                - (u.comp(a).get(p) - u.comp(a).get(sub(p, e(b)))) / g.h[b]
        }),
    }
}

/// Face component `a` of curl(curl u).
fn curl_curl<'a>(g: Geo, u: &'a VectorField, a: usize) -> Q<'a> {
    let comps: Vec<(usize, Q<'a>)> = curl_axes(g).into_iter().map(|c| (c, curl(g, u, c))).collect();
    let mut st = [false; 3];
    st[a] = true;
    Q {
        st,
        f: Box::new(move |p| {
            let mut v = 0.0;
            for (c, w) in &comps {
                if *c == a {
                    continue;
                }
                let d = 3 - a - c;
                if d >= g.dim {
                    continue;
                }
                v += eps3(a, d, *c) * (w.at(add(p, e(d))) - w.at(p)) / g.h[d];
            }
            v
        }),
    }
}

/// Average onto cell centers over every staggered axis.
fn cell_avg<'a>(g: Geo, q: Q<'a>) -> Q<'a> {
    let axes: Vec<usize> = (0..g.dim).filter(|&a| q.st[a]).collect();
    Q {
        st: [false; 3],
        f: Box::new(move |p| {
            let k = axes.len();
            let mut s = 0.0;
            for mask in 0..(1usize << k) {
                let mut r = p;
                for (bit, &a) in axes.iter().enumerate() {
                    if mask >> bit & 1 == 1 {
                        r[a] += 1;
                    }
                }
                s += q.at(r);
            }
            s / (1usize << k) as f64
        }),
    }
}

fn l2sq(g: Geo, q: &Q) -> f64 {
    g.owned(q.st).into_iter().map(|p| g.trap(q.st, p) * q.at(p).powi(2)).sum()
}

fn wrap(g: Geo, st: [bool; 3], p: P, a: usize, d: isize) -> Option<P> {
    let m = g.count(st, a);
    let mut q = p;
    q[a] += d;
    if g.wall[a] {
        (q[a] >= 0 && q[a] < m).then_some(q)
    } else {
        q[a] = q[a].rem_euclid(m);
        Some(q)
    }
}

fn gradsq(g: Geo, q: &Q) -> f64 {
    let mut s = 0.0;
    for a in 0..g.dim {
        for p in g.owned(q.st) {
            if let Some(r) = wrap(g, q.st, p, a, 1) {
                s += g.vol * ((q.at(r) - q.at(p)) / g.h[a]).powi(2);
            }
        }
    }
    s
}

fn d1<'a>(g: Geo, q: &'a Q<'a>, a: usize) -> Q<'a> {
    Q {
        st: q.st,
        f: Box::new(move |p| {
            let h = g.h[a];
            match (wrap(g, q.st, p, a, -1), wrap(g, q.st, p, a, 1)) {
                (Some(l), Some(r)) => (q.at(r) - q.at(l)) / (2.0 * h),
                (None, Some(_)) => {
                    (-3.0 * q.at(p) + 4.0 * q.at(add(p, e(a))) - q.at(add(add(p, e(a)), e(a)))) / (2.0 * h)
                }
                (Some(_), None) => {
                    (3.0 * q.at(p) - 4.0 * q.at(sub(p, e(a))) + q.at(sub(sub(p, e(a)), e(a)))) / (2.0 * h)
                }
                (None, None) => 0.0,
            }
        }),
    }
}

fn d2(g: Geo, q: &Q, a: usize, p: P) -> f64 {
    let h2 = g.h[a] * g.h[a];
    let v = match (wrap(g, q.st, p, a, -1), wrap(g, q.st, p, a, 1)) {
        (Some(l), Some(r)) => q.at(l) - 2.0 * q.at(p) + q.at(r),
        (None, Some(_)) => q.at(p) - 2.0 * q.at(add(p, e(a))) + q.at(add(add(p, e(a)), e(a))),
        (Some(_), None) => q.at(p) - 2.0 * q.at(sub(p, e(a))) + q.at(sub(sub(p, e(a)), e(a))),
        (None, None) => 0.0,
    };
    v / h2
}

/// `sum_p w(p) |hess q(p)|^2` with `w` given per owned sample.
fn hess_sq(g: Geo, q: &Q, w: &dyn Fn(P) -> f64) -> f64 {
    let firsts: Vec<Q> = (0..g.dim).map(|a| d1(g, q, a)).collect();
    let mut s = 0.0;
    for p in g.owned(q.st) {
        let mut v = 0.0;
        for a in 0..g.dim {
            v += d2(g, q, a, p).powi(2);
            for b in a + 1..g.dim {
                let fa = &firsts[a];
                let mixed = d1(g, fa, b).at(p);
                v += 2.0 * mixed * mixed;
            }
        }
        s += w(p) * v;
    }
    s
}

fn boundary(g: Geo, q: &Q) -> f64 {
    let mut s = 0.0;
    for a in 0..g.dim {
        if !g.wall[a] {
            continue;
        }
        for high in [false, true] {
            for p in g.owned(q.st) {
                let val = if q.st[a] {
                    let target = if high { g.n[a] } else { 0 };
                    if p[a] != target {
                        continue;
                    }
                    q.at(p)
                } else {
                    let target = if high { g.n[a] - 1 } else { 0 };
                    if p[a] != target {
                        continue;
                    }
                    let ghost = if high { add(p, e(a)) } else { sub(p, e(a)) };
                    0.5 * (q.at(p) + q.at(ghost))
                };
                let mut w = 1.0;
                for b in (0..g.dim).filter(|&b| b != a) {
                    w *= g.h[b];
                    if q.st[b] && g.wall[b] && (p[b] == 0 || p[b] == g.n[b]) {
                        w *= 0.5;
                    }
                }
                s += w * val * val;
            }
        }
    }
    s
}

fn h1sq(g: Geo, q: &Q) -> f64 {
    l2sq(g, q) + gradsq(g, q)
}

fn h2sq(g: Geo, q: &Q) -> f64 {
    h1sq(g, q) + hess_sq(g, q, &|p| g.trap(q.st, p))
}

/// `sum_cells w |a|^2 V` / `sum_cells w a.b V` over lists of cell quantities.
fn cell_int(g: Geo, w: &dyn Fn(P) -> f64, a: &[Q], b: &[Q]) -> f64 {
    let mut s = 0.0;
    for p in g.owned([false; 3]) {
        let d: f64 = a.iter().zip(b).map(|(x, y)| x.at(p) * y.at(p)).sum();
        s += w(p) * d * g.vol;
    }
    s
}

fn face_cells<'a>(g: Geo, u: &'a VectorField) -> Vec<Q<'a>> {
    (0..g.dim).map(|a| cell_avg(g, raw(u.comp(a)))).collect()
}

/// `int |D(u)|^2` with diagonal entries at cells and off-diagonal entries
/// averaged from edges.
fn deformation_sq(g: Geo, u: &VectorField) -> f64 {
    let mut s = 0.0;
    let off: Vec<Q> = {
        let mut v = Vec::new();
        for a in 0..g.dim {
            for b in a + 1..g.dim {
                let mut st = [false; 3];
                st[a] = true;
                st[b] = true;
                let q = Q {
                    st,
                    f: Box::new(move |p| {
                        0.5 * ((u.comp(a).get(p) - u.comp(a).get(sub(p, e(b)))) / g.h[b]
                            + (u.comp(b).get(p) - u.comp(b).get(sub(p, e(a)))) / g.h[a])
                    }),
                };
                v.push(cell_avg(g, q));
            }
        }
        v
    };
    for p in g.owned([false; 3]) {
        let mut v = 0.0;
        for a in 0..g.dim {
            v += ((u.comp(a).get(add(p, e(a))) - u.comp(a).get(p)) / g.h[a]).powi(2);
        }
        for q in &off {
            v += 2.0 * q.at(p).powi(2);
        }
        s += v * g.vol;
    }
    s
}

fn vec_sum(g: Geo, u: &VectorField, f: impl Fn(Geo, &Q) -> f64) -> f64 {
    (0..g.dim).map(|a| f(g, &raw(u.comp(a)))).sum()
}

fn cells<'a>(g: Geo, qs: &'a [Q<'a>]) -> Vec<Q<'a>> {
    qs.iter()
        .map(|q| {
            cell_avg(
                g,
                Q {
                    st: q.st,
                    f: Box::new(move |p| q.at(p)),
                },
            )
        })
        .collect()
}

fn curls(g: Geo, v: &VectorField) -> Vec<Q<'_>> {
    curl_axes(g).into_iter().map(|c| cell_avg(g, curl(g, v, c))).collect()
}

/// Every term keyed like `EnergyReport::terms`.
pub fn terms(state: &CompressibleState, d: &TimeDerivatives, w: &FunctionalWeights) -> BTreeMap<String, f64> {
    let g = Geo::of(&state.sigma);
    let prm = state.params;
    let (mu, lam, eps, alpha) = (prm.mu, prm.lam, prm.eps, prm.alpha);
    let gamma = prm.gamma;
    let rho = |p: P| 1.0 + eps * state.sigma.get(p);
    let pp = |p: P| rho(p).powf(gamma - 1.0);
    let u = &state.u;
    let ut = &d.u_t;
    let utt = d.u_tt.as_ref().expect("second derivatives");
    let s_t = &d.sigma_t;
    let s_tt = d.sigma_tt.as_ref().expect("second derivatives");

    let ub = face_cells(g, u);
    let utb = face_cells(g, ut);
    let uttb = face_cells(g, utt);
    let sig = [raw(&state.sigma)];
    let sig_t = [raw(s_t)];
    let sig_tt = [raw(s_tt)];

    let divu = div(g, u);
    let divut = div(g, ut);
    let gd: Vec<Q> = (0..g.dim).map(|a| grad(g, &divu, a)).collect();
    let gdt: Vec<Q> = (0..g.dim).map(|a| grad(g, &divut, a)).collect();
    let s_t_q = raw(s_t);
    let grad_st: Vec<Q> = (0..g.dim).map(|a| grad(g, &s_t_q, a)).collect();
    let sig_q = raw(&state.sigma);
    let grad_s: Vec<Q> = (0..g.dim).map(|a| grad(g, &sig_q, a)).collect();
    let cc_sq = |v: &VectorField| (0..g.dim).map(|a| l2sq(g, &curl_curl(g, v, a))).sum::<f64>();
    let vb = |v: &VectorField| vec_sum(g, v, boundary);

    let mut t = BTreeMap::new();
    let mut put = |k: &str, v: f64| {
        t.insert(k.to_string(), v);
    };

    // Phi_0 / Psi_0
    put("phi0.total", cell_int(g, &rho, &ub, &ub) + cell_int(g, &pp, &sig, &sig));
    put("psi0.total", w.c0 * vec_sum(g, u, h1sq));

    // Phi_1 / Psi_1
    put("phi1.strain", 2.0 * mu * deformation_sq(g, u));
    put("phi1.dilatation", lam * l2sq(g, &divu));
    put("phi1.grad_sigma", grad_s.iter().map(|q| l2sq(g, q)).sum());
    put(
        "phi1.kinetic_t",
        2.0 * w.c8 * (cell_int(g, &rho, &utb, &utb) + cell_int(g, &pp, &sig_t, &sig_t)),
    );
    put("phi1.cross_ut_u", 2.0 * cell_int(g, &rho, &utb, &ub));
    let cu = curls(g, u);
    put("phi1.vorticity", cell_int(g, &rho, &cu, &cu));
    put("phi1.slip_wall", alpha * vb(u));

    put("psi1.sigma_t", 0.5 * 0.25f64.powf(gamma - 1.0) * l2sq(g, &sig_t[0]));
    let gdb = cells(g, &gd);
    put("psi1.grad_div", (2.0 * mu + lam) * cell_int(g, &|p| 1.0 / pp(p), &gdb, &gdb));
    put("psi1.h1_u_t", w.c8c5 * vec_sum(g, ut, h1sq));
    put("psi1.curl_curl", mu * cc_sq(u));

    // Phi_2 / Psi_2
    put("phi2.grad_div", (2.0 * mu + lam) * gd.iter().map(|q| l2sq(g, q)).sum::<f64>());
    put("phi2.cross_ut_grad_div", -2.0 * cell_int(g, &rho, &utb, &gdb));
    put("phi2.hess_sigma", hess_sq(g, &sig[0], &|p| g.trap([false; 3], p)));
    put("phi2.div_u_t", l2sq(g, &divut));
    let gstb = cells(g, &grad_st);
    put("phi2.grad_sigma_t", cell_int(g, &|p| pp(p) / rho(p), &gstb, &gstb));
    let cut = curls(g, ut);
    put("phi2.vorticity_t", w.c12 / mu * cell_int(g, &rho, &cut, &cut));
    put("phi2.curl_curl", w.c11_13 / mu * cc_sq(u));
    put("phi2.cross_utt_ut", eps * eps * cell_int(g, &rho, &uttb, &utb));
    put(
        "phi2.acoustic_tt",
        w.big_k * eps * eps * (cell_int(g, &pp, &sig_tt, &sig_tt) + cell_int(g, &rho, &uttb, &uttb)),
    );
    put(
        "phi2.strain_t",
        0.5 * eps * eps * (2.0 * mu * deformation_sq(g, ut) + lam * l2sq(g, &divut) + alpha * vb(ut)),
    );

    put("psi2.hess_div", (2.0 * mu + lam) * hess_sq(g, &divu, &|p| g.vol / pp(p)));
    let gdtb = cells(g, &gdt);
    put("psi2.grad_div_t", (2.0 * mu + lam) * cell_int(g, &|p| 1.0 / rho(p), &gdtb, &gdtb));
    put("psi2.grad_sigma_t", cell_int(g, &pp, &gstb, &gstb));
    put("psi2.curl_curl_t", 2.0 * cc_sq(ut));
    put("psi2.vorticity_t", w.c11_13 / (mu * mu) * cell_int(g, &rho, &cut, &cut));
    let curl_h2: f64 = curl_axes(g).into_iter().map(|c| h2sq(g, &curl(g, u, c))).sum();
    put("psi2.h2_curl", 2.0 * curl_h2);
    put("psi2.sigma_tt", w.c20 * eps * eps * l2sq(g, &sig_tt[0]));
    put("psi2.h1_u_tt", 2.0 * eps * eps * vec_sum(g, utt, h1sq));
    put("psi2.h2_sigma", h2sq(g, &sig[0]));
    t
}
