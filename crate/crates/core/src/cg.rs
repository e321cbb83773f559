//! Conjugate gradients for the cell-centered elliptic operator
//! `A s = shift * s - kappa * div(c grad s)`
//! with zero-flux walls and periodic wrap, acting on owned cells only.

use std::sync::Arc;

use crate::fields::{Field, Location, VectorField};
use crate::geometry::Grid;
use crate::operators::to_faces;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    pub rel_tol: f64,
    /// `None` selects `10 * max_cells`.
    pub max_iter: Option<usize>,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            rel_tol: 1e-10,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub rel_residual: f64,
    pub history: Vec<f64>,
}

/// Dense representation of `shift * I - kappa * div(c grad)` on owned cells.
pub struct EllipticOperator {
    n: [usize; 3],
    dim: usize,
    shift: f64,
    /// Per axis: coupling between cell `i` and its `+e_a` neighbour,
    /// `kappa * c_face / h_a^2`; zero across walls.
    coupling: Vec<Vec<f64>>,
    /// Per axis: linear offset of the `+e_a` neighbour (`usize::MAX` across a wall).
    plus: Vec<Vec<usize>>,
}

impl EllipticOperator {
    /// `face_coeff` holds `c` on faces (ghost-filled so periodic face `n`
    /// equals face `0`).
    pub fn new(grid: &Grid, shift: f64, kappa: f64, face_coeff: Option<&VectorField>) -> Self {
        let n = grid.cells();
        let dim = grid.dim();
        let h = grid.spacing();
        let len = n[0] * n[1] * n[2];
        let mut coupling = vec![vec![0.0; len]; dim];
        let mut plus = vec![vec![usize::MAX; len]; dim];
        for i in 0..n[0] {
            for j in 0..n[1] {
                for k in 0..n[2] {
                    let idx = (i * n[1] + j) * n[2] + k;
                    let p = [i, j, k];
                    for a in 0..dim {
                        let mut q = p;
                        q[a] += 1;
                        let wall = grid.is_wall(a);
                        if q[a] == n[a] {
                            if wall {
                                continue;
                            }
                            q[a] = 0;
                        }
                        let face = [p[0] as isize, p[1] as isize, p[2] as isize];
                        let mut fidx = face;
                        fidx[a] += 1;
                        let c = face_coeff.map_or(1.0, |fc| fc.comp(a).get(fidx));
                        coupling[a][idx] = kappa * c / (h[a] * h[a]);
                        plus[a][idx] = (q[0] * n[1] + q[1]) * n[2] + q[2];
                    }
                }
            }
        }
        EllipticOperator {
            n,
            dim,
            shift,
            coupling,
            plus,
        }
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = self.shift * xi;
        }
        for a in 0..self.dim {
            let cpl = &self.coupling[a];
            let plus = &self.plus[a];
            for i in 0..x.len() {
                let q = plus[i];
                if q == usize::MAX {
                    continue;
                }
                let flux = cpl[i] * (x[q] - x[i]);
                y[i] -= flux;
                y[q] += flux;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Solves `A x = b` in place. When `singular` is set the constant null
/// space is projected out of `b` and every iterate.
pub fn solve_dense(
    op: &EllipticOperator,
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
    singular: bool,
) -> Result<CgStats> {
    let mut b = b.to_vec();
    if singular {
        remove_mean(&mut b);
        remove_mean(x);
    }
    let bnorm = dot(&b, &b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats::default());
    }
    let n = b.len();
    let mut r = vec![0.0; n];
    op.apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    if singular {
        remove_mean(&mut r);
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let mut history = vec![rr.sqrt() / bnorm];
    let target = rel_tol * bnorm;
    let mut it = 0;
    while rr.sqrt() > target {
        if it == max_iter {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: rr.sqrt() / bnorm,
                history,
            });
        }
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::InvalidParams(format!(
                "operator not positive definite (p.Ap = {pap:.3e})"
            )));
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if singular {
            remove_mean(&mut r);
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        it += 1;
        history.push(rr.sqrt() / bnorm);
    }
    if singular {
        remove_mean(x);
    }
    Ok(CgStats {
        iterations: it,
        rel_residual: rr.sqrt() / bnorm,
        history,
    })
}

fn default_max_iter(grid: &Grid, opts: &CgOptions) -> usize {
    opts.max_iter.unwrap_or(10 * grid.max_cells())
}

/// Solves `s - kappa * div(c grad s) = rhs` with `c` given on faces.
///
/// The mean of the solution equals the mean of `rhs`. The result has its
/// ghosts filled (even reflection at walls).
pub fn solve_helmholtz_faces(
    rhs: &Field,
    face_coeff: &VectorField,
    kappa: f64,
    guess: Option<&Field>,
    opts: &CgOptions,
) -> Result<(Field, CgStats)> {
    if !(kappa >= 0.0) {
        return Err(Error::InvalidParams(format!("kappa = {kappa} must be >= 0")));
    }
    let grid = Arc::clone(rhs.grid());
    let mut out = Field::cell(&grid);
    if kappa == 0.0 {
        out.copy_from(rhs)?;
        out.fill_ghosts(|_| crate::fields::WallRule::Even);
        return Ok((out, CgStats::default()));
    }
    let op = EllipticOperator::new(&grid, 1.0, kappa, Some(face_coeff));
    let b = rhs.owned_values();
    let mut x = guess.map_or_else(|| b.clone(), Field::owned_values);
    let stats = solve_dense(&op, &b, &mut x, opts.rel_tol, default_max_iter(&grid, opts), false)?;
    // constants are eigenvectors with eigenvalue 1: restore the exact mean
    let shift = (b.iter().sum::<f64>() - x.iter().sum::<f64>()) / x.len() as f64;
    x.iter_mut().for_each(|v| *v += shift);
    write_owned(&mut out, &x);
    out.fill_ghosts(|_| crate::fields::WallRule::Even);
    Ok((out, stats))
}

/// Solves `-div(grad q) = rhs` for mean-zero `q` (mean of `rhs` removed).
pub fn solve_poisson(rhs: &Field, rel_tol: f64, opts: &CgOptions) -> Result<(Field, CgStats)> {
    let grid = Arc::clone(rhs.grid());
    let op = EllipticOperator::new(&grid, 0.0, 1.0, None);
    let b = rhs.owned_values();
    let mut x = vec![0.0; b.len()];
    let stats = solve_dense(&op, &b, &mut x, rel_tol, default_max_iter(&grid, opts), true)?;
    let mut out = Field::cell(&grid);
    write_owned(&mut out, &x);
    out.fill_ghosts(|_| crate::fields::WallRule::Even);
    Ok((out, stats))
}

pub(crate) fn write_owned(f: &mut Field, vals: &[f64]) {
    let mut idx = Vec::with_capacity(vals.len());
    f.for_each_owned(|p| idx.push(p));
    for (p, &v) in idx.into_iter().zip(vals) {
        f.set(p, v);
    }
}

/// Face averages of a cell-centered coefficient.
pub fn coeff_to_faces(coeff: &Field) -> VectorField {
    debug_assert_eq!(coeff.location(), Location::CELL);
    let comps = (0..coeff.grid().dim()).map(|a| to_faces(coeff, a)).collect();
    VectorField::from_components(comps).expect("face layout")
}
