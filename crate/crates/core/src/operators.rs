//! Second-order MAC difference operators and discrete Sobolev norms.
//!
//! Every operator reads ghost-filled inputs and writes every output sample
//! whose stencil lies inside the stored box; samples out of reach are 0.
//! With ghost width 2 this leaves all owned samples valid for compositions
//! of up to three first differences (e.g. `grad(div u)`, `curl_t(curl u)`).
//!
//! Norms never read ghosts (apart from wall traces): first differences are
//! taken between neighbouring owned samples, second differences are
//! co-located, centered in the interior and one-sided on the outermost layer
//! next to a wall.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::fields::{Field, Location, VectorField};
use crate::geometry::Grid;
use crate::{Error, Result};

#[inline]
fn shift(p: [isize; 3], axis: usize, d: isize) -> [isize; 3] {
    let mut q = p;
    q[axis] += d;
    q
}

fn for_each_stored(f: &Field, mut g: impl FnMut([isize; 3])) {
    let (lo, hi) = f.storage_range();
    for i in lo[0]..hi[0] {
        for j in lo[1]..hi[1] {
            for k in lo[2]..hi[2] {
                g([i, j, k]);
            }
        }
    }
}

/// First difference along `axis`; flips the staggering on that axis.
pub fn diff(f: &Field, axis: usize) -> Field {
    let inv_h = 1.0 / f.grid().spacing()[axis];
    let to_face = !f.is_staggered(axis);
    let mut out = Field::zeros(f.grid(), f.location().flip(axis));
    let mut vals = Vec::new();
    for_each_stored(&out, |p| {
        let (hi, lo) = if to_face {
            (p, shift(p, axis, -1))
        } else {
            (shift(p, axis, 1), p)
        };
        if let (Some(a), Some(b)) = (f.try_get(hi), f.try_get(lo)) {
            vals.push((p, (a - b) * inv_h));
        }
    });
    for (p, v) in vals {
        out.set(p, v);
    }
    out
}

/// Two-point average along `axis`; flips the staggering on that axis.
pub fn interp(f: &Field, axis: usize) -> Field {
    let to_face = !f.is_staggered(axis);
    let mut out = Field::zeros(f.grid(), f.location().flip(axis));
    let mut vals = Vec::new();
    for_each_stored(&out, |p| {
        let (hi, lo) = if to_face {
            (p, shift(p, axis, -1))
        } else {
            (shift(p, axis, 1), p)
        };
        if let (Some(a), Some(b)) = (f.try_get(hi), f.try_get(lo)) {
            vals.push((p, 0.5 * (a + b)));
        }
    });
    for (p, v) in vals {
        out.set(p, v);
    }
    out
}

/// Averages a field onto cell centers along every staggered axis.
pub fn to_cells(f: &Field) -> Field {
    let mut out = f.clone();
    for a in 0..f.grid().dim() {
        if out.is_staggered(a) {
            out = interp(&out, a);
        }
    }
    out
}

/// Averages a cell-centered scalar onto the faces normal to `axis`.
pub fn to_faces(f: &Field, axis: usize) -> Field {
    debug_assert!(!f.is_staggered(axis));
    interp(f, axis)
}

/// Cell-centered divergence `sum_a (u_a(i+1) - u_a(i)) / h_a`.
pub fn div_h(u: &VectorField) -> Field {
    let mut out = diff(u.comp(0), 0);
    for a in 1..u.dim() {
        out.axpy(1.0, &diff(u.comp(a), a)).expect("same layout");
    }
    out
}

/// Face-centered gradient `(s(i) - s(i-1)) / h_a`.
pub fn grad_h(s: &Field) -> VectorField {
    debug_assert_eq!(s.location(), Location::CELL);
    let comps = (0..s.grid().dim()).map(|a| diff(s, a)).collect();
    VectorField::from_components(comps).expect("face layout")
}

/// Curl components on cell edges: one node-located scalar in 2D (axis 2),
/// three edge fields in 3D.
#[derive(Debug, Clone)]
pub struct EdgeField {
    axes: Vec<usize>,
    comps: Vec<Field>,
}

impl EdgeField {
    /// Edge field with a single component parallel to `axis`.
    pub fn single(axis: usize, f: Field) -> EdgeField {
        EdgeField {
            axes: vec![axis],
            comps: vec![f],
        }
    }

    pub fn from_parts(axes: Vec<usize>, comps: Vec<Field>) -> EdgeField {
        assert_eq!(axes.len(), comps.len());
        EdgeField { axes, comps }
    }

    pub fn axes(&self) -> &[usize] {
        &self.axes
    }

    pub fn components(&self) -> &[Field] {
        &self.comps
    }

    /// Component parallel to `axis`, if present.
    pub fn along(&self, axis: usize) -> Option<&Field> {
        self.axes.iter().position(|&c| c == axis).map(|i| &self.comps[i])
    }

    pub fn norm_l2(&self) -> f64 {
        self.comps.iter().map(|c| c.norm_l2().powi(2)).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().map(Field::max_abs).fold(0.0, f64::max)
    }
}

fn curl_axes(dim: usize) -> Vec<usize> {
    if dim == 2 {
        vec![2]
    } else {
        vec![0, 1, 2]
    }
}

/// `w_c = d_a u_b - d_b u_a` with `(c, a, b)` cyclic.
pub fn curl_h(u: &VectorField) -> EdgeField {
    let dim = u.dim();
    let axes = curl_axes(dim);
    let comps = axes
        .iter()
        .map(|&c| {
            let a = (c + 1) % 3;
            let b = (c + 2) % 3;
            let mut w = diff(u.comp(b), a);
            w.axpy(-1.0, &diff(u.comp(a), b)).expect("edge layout");
            w
        })
        .collect();
    EdgeField { axes, comps }
}

fn levi_civita(a: usize, b: usize, c: usize) -> f64 {
    match (a, b, c) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Curl of an edge field back onto faces; adjoint partner of [`curl_h`].
pub fn curl_t_h(w: &EdgeField, grid: &Arc<Grid>) -> VectorField {
    let dim = grid.dim();
    let mut out = VectorField::zeros(grid);
    for a in 0..dim {
        for (&c, wc) in w.axes.iter().zip(&w.comps) {
            if c == a {
                continue;
            }
            let d = 3 - a - c;
            if d >= dim {
                continue;
            }
            let s = levi_civita(a, d, c);
            out.comp_mut(a).axpy(s, &diff(wc, d)).expect("face layout");
        }
    }
    out
}

fn second_diff(f: &Field, axis: usize) -> Field {
    let inv_h2 = f.grid().spacing()[axis].powi(-2);
    let mut out = Field::zeros(f.grid(), f.location());
    let mut vals = Vec::new();
    for_each_stored(f, |p| {
        if let (Some(l), Some(r)) = (f.try_get(shift(p, axis, -1)), f.try_get(shift(p, axis, 1))) {
            vals.push((p, (l - 2.0 * f.get(p) + r) * inv_h2));
        }
    });
    for (p, v) in vals {
        out.set(p, v);
    }
    out
}

/// Componentwise 5-point (2D) / 7-point (3D) Laplacian.
pub fn laplacian_h(u: &VectorField) -> VectorField {
    let dim = u.dim();
    let comps = (0..dim)
        .map(|a| {
            let mut acc = second_diff(u.comp(a), 0);
            for b in 1..dim {
                acc.axpy(1.0, &second_diff(u.comp(a), b)).expect("same layout");
            }
            acc
        })
        .collect();
    VectorField::from_components(comps).expect("face layout")
}

/// Scalar 5/7-point Laplacian of a cell field.
pub fn laplacian_scalar(s: &Field) -> Field {
    let mut acc = second_diff(s, 0);
    for b in 1..s.grid().dim() {
        acc.axpy(1.0, &second_diff(s, b)).expect("same layout");
    }
    acc
}

/// `D(u) = (grad u + grad u^T) / 2` in native MAC locations: diagonal entries
/// at cell centers, off-diagonal entries `(a, b)`, `a < b`, on the edges
/// staggered along `a` and `b`.
#[derive(Debug, Clone)]
pub struct Deformation {
    pub diag: Vec<Field>,
    pub off: Vec<((usize, usize), Field)>,
}

pub fn deformation_h(u: &VectorField) -> Deformation {
    let dim = u.dim();
    let diag = (0..dim).map(|a| diff(u.comp(a), a)).collect();
    let mut off = Vec::new();
    for a in 0..dim {
        for b in a + 1..dim {
            let mut d = diff(u.comp(a), b);
            d.axpy(1.0, &diff(u.comp(b), a)).expect("edge layout");
            d.scale(0.5);
            off.push(((a, b), d));
        }
    }
    Deformation { diag, off }
}

impl Deformation {
    /// `|D|^2 = sum_ab D_ab^2` at cell centers, off-diagonals averaged from
    /// their edges.
    pub fn frobenius_sq_cells(&self) -> Field {
        let mut out = self.diag[0].map(|v| v * v);
        for d in &self.diag[1..] {
            out.axpy(1.0, &d.map(|v| v * v)).expect("cell layout");
        }
        for (_, d) in &self.off {
            let c = to_cells(d);
            out.axpy(2.0, &c.map(|v| v * v)).expect("cell layout");
        }
        out
    }

    /// Row divergence `(div D)_a` on the faces normal to `a`.
    pub fn divergence(&self, grid: &Arc<Grid>) -> VectorField {
        let dim = grid.dim();
        let mut out = VectorField::zeros(grid);
        for a in 0..dim {
            let fa = out.comp_mut(a);
            fa.axpy(1.0, &diff(&self.diag[a], a)).expect("face layout");
            for ((p, q), d) in &self.off {
                if *p == a {
                    fa.axpy(1.0, &diff(d, *q)).expect("face layout");
                } else if *q == a {
                    fa.axpy(1.0, &diff(d, *p)).expect("face layout");
                }
            }
        }
        out
    }
}

/// `2 mu div D(u) + lam grad div u` on faces.
pub fn viscous_h(u: &VectorField, mu: f64, lam: f64) -> VectorField {
    let grid = Arc::clone(u.grid());
    let mut out = deformation_h(u).divergence(&grid);
    out.scale(2.0 * mu);
    if lam != 0.0 {
        out.axpy(lam, &grad_h(&div_h(u))).expect("face layout");
    }
    out
}

/// `int 2 mu |D(u)|^2 + lam (div u)^2 dx` over owned cells.
pub fn strain_energy(u: &VectorField, mu: f64, lam: f64) -> f64 {
    let d2 = deformation_h(u).frobenius_sq_cells();
    let dv = div_h(u);
    let mut s = 0.0;
    d2.for_each_owned(|p| s += d2.weight(p) * (2.0 * mu * d2.get(p) + lam * dv.get(p).powi(2)));
    s
}

/// Advective term `(u . grad) u` on faces, centered differences and centered
/// interpolation of the transverse components.
pub fn convection_h(u: &VectorField, v: &VectorField) -> VectorField {
    let grid = u.grid();
    let dim = grid.dim();
    let h = grid.spacing();
    let mut out = VectorField::zeros(grid);
    for a in 0..dim {
        let ua = v.comp(a);
        let mut vals = Vec::new();
        let target = out.comp(a);
        target.for_each_owned(|p| {
            let mut acc = 0.0;
            for b in 0..dim {
                let carrier = if b == a {
                    u.comp(a).get(p)
                } else {
                    // u_b is staggered along b, centered along a
                    let ub = u.comp(b);
                    let p00 = shift(p, a, -1);
                    let p01 = shift(p00, b, 1);
                    let p11 = shift(p, b, 1);
                    0.25 * (ub.get(p00) + ub.get(p01) + ub.get(p) + ub.get(p11))
                };
                let grad = (ua.get(shift(p, b, 1)) - ua.get(shift(p, b, -1))) / (2.0 * h[b]);
                acc += carrier * grad;
            }
            vals.push((p, acc));
        });
        let oc = out.comp_mut(a);
        for (p, val) in vals {
            oc.set(p, val);
        }
    }
    out
}

/// True if the sample at `p` sits at least two cell widths from every wall.
fn away_from_walls(f: &Field, p: [isize; 3]) -> bool {
    let grid = f.grid();
    let x = f.position(p);
    let h = grid.spacing();
    let l = grid.lengths();
    (0..grid.dim()).all(|a| {
        !grid.is_wall(a) || (x[a] >= 2.0 * h[a] - 1e-12 * h[a] && l[a] - x[a] >= 2.0 * h[a] - 1e-12 * h[a])
    })
}

/// Max-norm of `lap u - (grad div u - curl_t curl u)` over owned faces at
/// least two cells from any wall.
pub fn identity_residual(u: &VectorField) -> f64 {
    let grid = Arc::clone(u.grid());
    let lap = laplacian_h(u);
    let gd = grad_h(&div_h(u));
    let cc = curl_t_h(&curl_h(u), &grid);
    let mut worst = 0.0f64;
    for a in 0..grid.dim() {
        let (l, g, c) = (lap.comp(a), gd.comp(a), cc.comp(a));
        l.for_each_owned(|p| {
            if away_from_walls(l, p) {
                worst = worst.max((l.get(p) - (g.get(p) - c.get(p))).abs());
            }
        });
    }
    worst
}

/// Full Sobolev norms; `h1^2 = l2^2 + |grad f|^2`, `h2^2 = h1^2 + |hess f|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct NormReport {
    pub l2: f64,
    pub h1: f64,
    pub h2: f64,
    pub boundary_l2: f64,
}

/// Squared pieces of the Sobolev norms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SobolevParts {
    pub l2_sq: f64,
    pub grad_sq: f64,
    pub hess_sq: f64,
    pub boundary_sq: f64,
}

impl std::ops::Add for SobolevParts {
    type Output = SobolevParts;
    fn add(self, o: SobolevParts) -> SobolevParts {
        SobolevParts {
            l2_sq: self.l2_sq + o.l2_sq,
            grad_sq: self.grad_sq + o.grad_sq,
            hess_sq: self.hess_sq + o.hess_sq,
            boundary_sq: self.boundary_sq + o.boundary_sq,
        }
    }
}

impl SobolevParts {
    pub fn report(self, up_to: u8) -> NormReport {
        let l2 = self.l2_sq.sqrt();
        let h1 = if up_to >= 1 { (self.l2_sq + self.grad_sq).sqrt() } else { l2 };
        let h2 = if up_to >= 2 {
            (self.l2_sq + self.grad_sq + self.hess_sq).sqrt()
        } else {
            h1
        };
        NormReport {
            l2,
            h1,
            h2,
            boundary_l2: self.boundary_sq.sqrt(),
        }
    }

    pub fn h1_sq(&self) -> f64 {
        self.l2_sq + self.grad_sq
    }

    pub fn h2_sq(&self) -> f64 {
        self.l2_sq + self.grad_sq + self.hess_sq
    }
}

/// Anything made of one or more fields.
pub trait Components {
    fn fields(&self) -> Vec<&Field>;
}

impl Components for Field {
    fn fields(&self) -> Vec<&Field> {
        vec![self]
    }
}

impl Components for VectorField {
    fn fields(&self) -> Vec<&Field> {
        self.components().iter().collect()
    }
}

impl Components for EdgeField {
    fn fields(&self) -> Vec<&Field> {
        self.comps.iter().collect()
    }
}

/// Owned-sample neighbour along an axis: wraps on periodic axes, `None`
/// past the ends of a wall axis.
#[inline]
fn neighbour(f: &Field, p: [isize; 3], axis: usize, d: isize) -> Option<[isize; 3]> {
    let m = f.owned_shape()[axis] as isize;
    let mut q = p;
    q[axis] += d;
    if f.grid().is_wall(axis) {
        (q[axis] >= 0 && q[axis] < m).then_some(q)
    } else {
        q[axis] = q[axis].rem_euclid(m);
        Some(q)
    }
}

/// Co-located first derivative over owned samples: centered, second-order
/// one-sided at wall ends. Ghosts of the result are zero.
pub fn d1_colocated(f: &Field, axis: usize) -> Field {
    let h = f.grid().spacing()[axis];
    let m = f.owned_shape()[axis] as isize;
    let mut out = Field::zeros(f.grid(), f.location());
    let mut vals = Vec::new();
    f.for_each_owned(|p| {
        let v = match (neighbour(f, p, axis, -1), neighbour(f, p, axis, 1)) {
            (Some(l), Some(r)) => (f.get(r) - f.get(l)) / (2.0 * h),
            (None, Some(_)) => {
                let (q1, q2) = (shift(p, axis, 1), shift(p, axis, 2));
                (-3.0 * f.get(p) + 4.0 * f.get(q1) - f.get(q2)) / (2.0 * h)
            }
            (Some(_), None) => {
                let (q1, q2) = (shift(p, axis, -1), shift(p, axis, -2));
                (3.0 * f.get(p) - 4.0 * f.get(q1) + f.get(q2)) / (2.0 * h)
            }
            (None, None) => 0.0,
        };
        vals.push((p, v));
    });
    debug_assert!(m >= 3);
    for (p, v) in vals {
        out.set(p, v);
    }
    out
}

/// Co-located second derivative over owned samples: centered, shifted
/// one-sided stencil on the outermost layer at a wall.
pub fn d2_colocated(f: &Field, axis: usize) -> Field {
    let inv_h2 = f.grid().spacing()[axis].powi(-2);
    let mut out = Field::zeros(f.grid(), f.location());
    let mut vals = Vec::new();
    f.for_each_owned(|p| {
        let v = match (neighbour(f, p, axis, -1), neighbour(f, p, axis, 1)) {
            (Some(l), Some(r)) => f.get(l) - 2.0 * f.get(p) + f.get(r),
            (None, Some(_)) => f.get(p) - 2.0 * f.get(shift(p, axis, 1)) + f.get(shift(p, axis, 2)),
            (Some(_), None) => f.get(p) - 2.0 * f.get(shift(p, axis, -1)) + f.get(shift(p, axis, -2)),
            (None, None) => 0.0,
        };
        vals.push((p, v * inv_h2));
    });
    for (p, v) in vals {
        out.set(p, v);
    }
    out
}

/// Hessian entries `(a, b)` with `a <= b`, co-located on the owned samples.
pub fn hessian_colocated(f: &Field) -> Vec<((usize, usize), Field)> {
    let dim = f.grid().dim();
    let mut out = Vec::new();
    let firsts: Vec<Field> = (0..dim).map(|a| d1_colocated(f, a)).collect();
    for a in 0..dim {
        out.push(((a, a), d2_colocated(f, a)));
        for b in a + 1..dim {
            out.push(((a, b), d1_colocated(&firsts[a], b)));
        }
    }
    out
}

/// `sum_ab |d_a d_b f|^2` weighted over owned samples.
pub fn hessian_sq(f: &Field) -> f64 {
    let mut s = 0.0;
    for ((a, b), hf) in hessian_colocated(f) {
        let mult = if a == b { 1.0 } else { 2.0 };
        hf.for_each_owned(|p| s += mult * f.weight(p) * hf.get(p).powi(2));
    }
    s
}

/// `sum |f(i+1) - f(i)|^2 / h^2 * V` over neighbouring owned samples.
pub fn grad_sq(f: &Field) -> f64 {
    let grid = f.grid();
    let vol = grid.cell_volume();
    let h = grid.spacing();
    let mut s = 0.0;
    for a in 0..grid.dim() {
        f.for_each_owned(|p| {
            if let Some(q) = neighbour(f, p, a, 1) {
                s += vol * ((f.get(q) - f.get(p)) / h[a]).powi(2);
            }
        });
    }
    s
}

/// Wall trace of a field: the wall sample if staggered along the wall axis,
/// otherwise the mean of the first interior and first ghost sample.
pub fn boundary_sq(f: &Field) -> f64 {
    let grid = f.grid();
    let dim = grid.dim();
    let n = grid.cells();
    let h = grid.spacing();
    let mut s = 0.0;
    for patch in grid.patches() {
        let a = patch.axis;
        let (wall_idx, ghost_idx, inner_idx) = match (f.is_staggered(a), patch.side) {
            (true, crate::Side::Low) => (Some(0), 0, 0),
            (true, crate::Side::High) => (Some(n[a] as isize), 0, 0),
            (false, crate::Side::Low) => (None, -1, 0),
            (false, crate::Side::High) => (None, n[a] as isize, n[a] as isize - 1),
        };
        f.for_each_owned(|p| {
            let target = wall_idx.unwrap_or(inner_idx);
            if p[a] != target {
                return;
            }
            let val = match wall_idx {
                Some(_) => f.get(p),
                None => {
                    let mut g = p;
                    g[a] = ghost_idx;
                    0.5 * (f.get(p) + f.get(g))
                }
            };
            let mut w = 1.0;
            for b in (0..dim).filter(|&b| b != a) {
                w *= h[b];
                if f.is_staggered(b) && grid.is_wall(b) && (p[b] == 0 || p[b] == n[b] as isize) {
                    w *= 0.5;
                }
            }
            s += w * val * val;
        });
    }
    s
}

pub fn sobolev_parts<F: Components + ?Sized>(f: &F, up_to: u8) -> SobolevParts {
    f.fields()
        .into_iter()
        .map(|c| SobolevParts {
            l2_sq: c.norm_l2().powi(2),
            grad_sq: if up_to >= 1 { grad_sq(c) } else { 0.0 },
            hess_sq: if up_to >= 2 { hessian_sq(c) } else { 0.0 },
            boundary_sq: boundary_sq(c),
        })
        .fold(SobolevParts::default(), |a, b| a + b)
}

/// L², H¹, H² and wall-trace norms of a field.
pub fn norms<F: Components + ?Sized>(f: &F, up_to: u8) -> Result<NormReport> {
    if up_to > 2 {
        return Err(Error::InvalidParams(format!("norm order {up_to} > 2")));
    }
    Ok(sobolev_parts(f, up_to).report(up_to))
}

/// `||grad u|| / (||div u|| + ||curl u||)` for slip-compatible `u`.
///
/// Returns `+inf` when the denominator vanishes (< 1e-14) but the gradient
/// does not (>= 1e-10), and 0 when both vanish.
pub fn divcurl_ratio(u: &VectorField) -> Result<f64> {
    let wn = u.wall_normal_max();
    if wn > 1e-14 {
        return Err(Error::NotSlipCompatible(format!(
            "wall-normal velocity {wn:.3e} on a slip wall"
        )));
    }
    let num = u.components().iter().map(grad_sq).sum::<f64>().sqrt();
    let den = div_h(u).norm_l2() + curl_h(u).norm_l2();
    if den < 1e-14 {
        return Ok(if num >= 1e-10 { f64::INFINITY } else { 0.0 });
    }
    Ok(num / den)
}
