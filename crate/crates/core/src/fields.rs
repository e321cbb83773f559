//! Cell-centered scalars and face-staggered vectors with ghost layers.
//!
//! A [`Field`] is a box of samples whose position along each axis is either
//! cell-centered (`x = (i + 1/2) h`) or staggered (`x = i h`). Face
//! components of a velocity are staggered along their own axis, curl
//! components along the two other axes, and scalars along none.
//!
//! Along a staggered wall axis the owned samples are `0..=n` (both wall
//! positions included); along a staggered periodic axis they are `0..n` and
//! index `n` is a ghost copy of index `0`. Ghost width is 2 on active axes.

use std::fmt;
use std::io::{BufRead, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::geometry::Grid;
use crate::{Error, Result};

/// Per-axis staggering of a field. Inactive axes are never staggered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Location {
    pub staggered: [bool; 3],
}

impl Location {
    pub const CELL: Location = Location {
        staggered: [false; 3],
    };

    /// Faces normal to `axis`.
    pub fn face(axis: usize) -> Location {
        let mut s = [false; 3];
        s[axis] = true;
        Location { staggered: s }
    }

    /// Edges parallel to `axis` (nodes in 2D when `axis == 2`).
    pub fn edge(axis: usize, dim: usize) -> Location {
        let mut s = [false; 3];
        for (b, st) in s.iter_mut().enumerate().take(dim) {
            *st = b != axis;
        }
        Location { staggered: s }
    }

    pub fn flip(self, axis: usize) -> Location {
        let mut s = self.staggered;
        s[axis] = !s[axis];
        Location { staggered: s }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag: String = self
            .staggered
            .iter()
            .map(|&s| if s { 's' } else { 'c' })
            .collect();
        write!(f, "{tag}")
    }
}

/// Ghost rule across a wall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WallRule {
    Even,
    Odd,
    /// `(u_g - u_i)/d + alpha (u_g + u_i) = 0` for a mirror pair at distance `d`.
    Robin(f64),
}

/// Scalar boundary choice for cell-centered quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarBc {
    /// Wrap on periodic axes, even reflection on walls.
    NeumannZero,
    /// Wrap on every axis, walls included.
    Periodic,
}

#[derive(Clone)]
pub struct Field {
    grid: Arc<Grid>,
    loc: Location,
    ghost: [usize; 3],
    ext: [usize; 3],
    data: Vec<f64>,
}

pub type ScalarField = Field;

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("loc", &self.loc)
            .field("owned", &self.owned_shape())
            .finish()
    }
}

impl Field {
    pub fn zeros(grid: &Arc<Grid>, loc: Location) -> Field {
        let n = grid.cells();
        let mut ghost = [0usize; 3];
        let mut ext = [1usize; 3];
        for a in 0..3 {
            ghost[a] = grid.ghost(a);
            let stag = loc.staggered[a] && a < grid.dim();
            ext[a] = n[a] + stag as usize + 2 * ghost[a];
        }
        let mut loc = loc;
        for a in grid.dim()..3 {
            loc.staggered[a] = false;
        }
        Field {
            grid: Arc::clone(grid),
            loc,
            ghost,
            ext,
            data: vec![0.0; ext[0] * ext[1] * ext[2]],
        }
    }

    pub fn cell(grid: &Arc<Grid>) -> Field {
        Field::zeros(grid, Location::CELL)
    }

    /// Fills every stored sample, ghosts included, from a function of position.
    pub fn from_fn(grid: &Arc<Grid>, loc: Location, f: impl Fn([f64; 3]) -> f64) -> Field {
        let mut out = Field::zeros(grid, loc);
        let (lo, hi) = out.storage_range();
        for i in lo[0]..hi[0] {
            for j in lo[1]..hi[1] {
                for k in lo[2]..hi[2] {
                    let x = out.position([i, j, k]);
                    out.set([i, j, k], f(x));
                }
            }
        }
        out
    }

    pub fn constant(grid: &Arc<Grid>, loc: Location, c: f64) -> Field {
        let mut f = Field::zeros(grid, loc);
        f.data.iter_mut().for_each(|v| *v = c);
        f
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn location(&self) -> Location {
        self.loc
    }

    pub fn is_staggered(&self, axis: usize) -> bool {
        self.loc.staggered[axis]
    }

    /// Owned sample count per axis.
    pub fn owned_shape(&self) -> [usize; 3] {
        let n = self.grid.cells();
        let mut m = [1usize; 3];
        for a in 0..3 {
            m[a] = n[a] + (self.loc.staggered[a] && self.grid.is_wall(a)) as usize;
        }
        m
    }

    /// Half-open storage index range (ghosts included).
    pub fn storage_range(&self) -> ([isize; 3], [isize; 3]) {
        let mut lo = [0isize; 3];
        let mut hi = [0isize; 3];
        for a in 0..3 {
            lo[a] = -(self.ghost[a] as isize);
            hi[a] = lo[a] + self.ext[a] as isize;
        }
        (lo, hi)
    }

    pub fn ghost_width(&self, axis: usize) -> usize {
        self.ghost[axis]
    }

    #[inline]
    fn offset(&self, p: [isize; 3]) -> usize {
        let i = (p[0] + self.ghost[0] as isize) as usize;
        let j = (p[1] + self.ghost[1] as isize) as usize;
        let k = (p[2] + self.ghost[2] as isize) as usize;
        debug_assert!(i < self.ext[0] && j < self.ext[1] && k < self.ext[2], "index {p:?} out of storage");
        (i * self.ext[1] + j) * self.ext[2] + k
    }

    #[inline]
    pub fn get(&self, p: [isize; 3]) -> f64 {
        self.data[self.offset(p)]
    }

    #[inline]
    pub fn set(&mut self, p: [isize; 3], v: f64) {
        let o = self.offset(p);
        self.data[o] = v;
    }

    #[inline]
    pub fn add(&mut self, p: [isize; 3], v: f64) {
        let o = self.offset(p);
        self.data[o] += v;
    }

    /// Like [`Field::get`] but `None` outside the stored box.
    #[inline]
    pub fn try_get(&self, p: [isize; 3]) -> Option<f64> {
        let (lo, hi) = self.storage_range();
        (0..3)
            .all(|a| p[a] >= lo[a] && p[a] < hi[a])
            .then(|| self.get(p))
    }

    /// Physical coordinate of a sample.
    pub fn position(&self, p: [isize; 3]) -> [f64; 3] {
        let h = self.grid.spacing();
        let mut x = [0.0; 3];
        for a in 0..self.grid.dim() {
            let off = if self.loc.staggered[a] { 0.0 } else { 0.5 };
            x[a] = (p[a] as f64 + off) * h[a];
        }
        x
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }

    pub fn raw_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Calls `f` on every owned index.
    pub fn for_each_owned(&self, mut f: impl FnMut([isize; 3])) {
        let m = self.owned_shape();
        for i in 0..m[0] as isize {
            for j in 0..m[1] as isize {
                for k in 0..m[2] as isize {
                    f([i, j, k]);
                }
            }
        }
    }

    /// Quadrature weight of an owned sample: cell volume, halved for every
    /// staggered wall axis on which the sample sits on the wall.
    #[inline]
    pub fn weight(&self, p: [isize; 3]) -> f64 {
        let mut w = self.grid.cell_volume();
        let n = self.grid.cells();
        for a in 0..self.grid.dim() {
            if self.loc.staggered[a] && self.grid.is_wall(a) && (p[a] == 0 || p[a] == n[a] as isize) {
                w *= 0.5;
            }
        }
        w
    }

    fn check_layout(&self, other: &Field) -> Result<()> {
        if self.loc != other.loc {
            return Err(Error::LayoutMismatch(format!(
                "locations {} and {} differ",
                self.loc, other.loc
            )));
        }
        if !(Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid) {
            return Err(Error::LayoutMismatch("fields live on different grids".into()));
        }
        Ok(())
    }

    /// Volume-weighted inner product over owned samples.
    pub fn dot(&self, other: &Field) -> Result<f64> {
        self.check_layout(other)?;
        let mut s = 0.0;
        self.for_each_owned(|p| s += self.weight(p) * self.get(p) * other.get(p));
        Ok(s)
    }

    pub fn norm_l2(&self) -> f64 {
        let mut s = 0.0;
        self.for_each_owned(|p| s += self.weight(p) * self.get(p).powi(2));
        s.sqrt()
    }

    /// Volume-weighted integral of the owned samples.
    pub fn integral(&self) -> f64 {
        let mut s = 0.0;
        self.for_each_owned(|p| s += self.weight(p) * self.get(p));
        s
    }

    pub fn mean(&self) -> f64 {
        self.integral() / self.grid.volume()
    }

    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        self.for_each_owned(|p| m = m.max(self.get(p).abs()));
        m
    }

    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        self.for_each_owned(|p| {
            let v = self.get(p);
            lo = lo.min(v);
            hi = hi.max(v);
        });
        (lo, hi)
    }

    /// `self += alpha * x` on every stored sample.
    pub fn axpy(&mut self, alpha: f64, x: &Field) -> Result<()> {
        self.check_layout(x)?;
        self.data
            .iter_mut()
            .zip(&x.data)
            .for_each(|(y, &xv)| *y += alpha * xv);
        Ok(())
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    pub fn copy_from(&mut self, other: &Field) -> Result<()> {
        self.check_layout(other)?;
        self.data.copy_from_slice(&other.data);
        Ok(())
    }

    pub fn add_constant(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v += c);
    }

    /// `a * x + b * y`, elementwise on all storage.
    pub fn lincomb(a: f64, x: &Field, b: f64, y: &Field) -> Result<Field> {
        x.check_layout(y)?;
        let mut out = x.clone();
        out.data
            .iter_mut()
            .zip(&y.data)
            .for_each(|(o, &yv)| *o = a * *o + b * yv);
        Ok(out)
    }

    /// Elementwise map on all storage.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = f(*v));
        out
    }

    /// Fills ghosts: periodic axes wrap, wall axes follow `rule(axis)`.
    ///
    /// Axes are processed in order over the full storage range of the other
    /// axes, which makes corner ghosts consistent.
    pub fn fill_ghosts(&mut self, rule: impl Fn(usize) -> WallRule) {
        let dim = self.grid.dim();
        for a in 0..dim {
            if self.grid.is_wall(a) {
                self.fill_wall_axis(a, rule(a));
            } else {
                self.fill_periodic_axis(a);
            }
        }
    }

    fn lines_along(&self, axis: usize) -> Vec<[isize; 3]> {
        let (lo, hi) = self.storage_range();
        let mut out = Vec::new();
        let (b, c) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        for pb in lo[b]..hi[b] {
            for pc in lo[c]..hi[c] {
                let mut p = [0isize; 3];
                p[b] = pb;
                p[c] = pc;
                out.push(p);
            }
        }
        out
    }

    fn fill_periodic_axis(&mut self, a: usize) {
        let n = self.grid.cells()[a] as isize;
        let (lo, hi) = self.storage_range();
        for base in self.lines_along(a) {
            let mut p = base;
            let mut q = base;
            for i in lo[a]..0 {
                p[a] = i;
                q[a] = i + n;
                let v = self.get(q);
                self.set(p, v);
            }
            for i in n..hi[a] {
                p[a] = i;
                q[a] = i - n;
                let v = self.get(q);
                self.set(p, v);
            }
        }
    }

    fn fill_wall_axis(&mut self, a: usize, rule: WallRule) {
        let n = self.grid.cells()[a] as isize;
        let g = self.ghost[a] as isize;
        let h = self.grid.spacing()[a];
        let stag = self.loc.staggered[a];
        for base in self.lines_along(a) {
            let mut p = base;
            let mut q = base;
            if stag {
                if rule == WallRule::Odd {
                    p[a] = 0;
                    self.set(p, 0.0);
                    p[a] = n;
                    self.set(p, 0.0);
                }
                let sign = if rule == WallRule::Odd { -1.0 } else { 1.0 };
                for k in 1..=g {
                    p[a] = -k;
                    q[a] = k;
                    let v = self.get(q);
                    self.set(p, sign * v);
                    p[a] = n + k;
                    q[a] = n - k;
                    let v = self.get(q);
                    self.set(p, sign * v);
                }
            } else {
                for k in 1..=g {
                    let factor = match rule {
                        WallRule::Even => 1.0,
                        WallRule::Odd => -1.0,
                        WallRule::Robin(alpha) => {
                            let d = (2 * k - 1) as f64 * h;
                            (1.0 - alpha * d) / (1.0 + alpha * d)
                        }
                    };
                    p[a] = -k;
                    q[a] = k - 1;
                    let v = self.get(q);
                    self.set(p, factor * v);
                    p[a] = n - 1 + k;
                    q[a] = n - k;
                    let v = self.get(q);
                    self.set(p, factor * v);
                }
            }
        }
    }

    /// Ghost fill for cell-centered scalars.
    pub fn fill_ghost_scalar(&mut self, bc: ScalarBc) {
        debug_assert_eq!(self.loc, Location::CELL);
        match bc {
            ScalarBc::NeumannZero => self.fill_ghosts(|_| WallRule::Even),
            ScalarBc::Periodic => {
                for a in 0..self.grid.dim() {
                    self.fill_periodic_axis(a);
                }
            }
        }
    }

    /// Sets the mean of the owned samples to zero (all storage shifted).
    pub fn remove_mean(&mut self) {
        let m = self.mean();
        self.add_constant(-m);
    }

    /// Owned samples in row-major order.
    pub fn owned_values(&self) -> Vec<f64> {
        let mut v = Vec::new();
        self.for_each_owned(|p| v.push(self.get(p)));
        v
    }

    /// Flat binary snapshot: one text header line, then little-endian `f64`
    /// owned values in row-major order.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        let m = self.owned_shape();
        let dim = self.grid.dim();
        let shape: Vec<String> = m[..dim].iter().map(|x| x.to_string()).collect();
        writeln!(
            w,
            "# machlimit-snapshot v1 location={} shape={}",
            self.loc,
            shape.join("x")
        )?;
        for v in self.owned_values() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a binary snapshot back into the owned samples of `self`.
    /// Ghosts are left untouched.
    pub fn read_binary_into(&mut self, r: impl Read) -> Result<()> {
        let mut r = std::io::BufReader::new(r);
        let mut header = String::new();
        r.read_line(&mut header)?;
        let shape = header
            .split_whitespace()
            .find_map(|t| t.strip_prefix("shape="))
            .ok_or_else(|| Error::Config("snapshot header lacks shape".into()))?;
        let dims: Vec<usize> = shape
            .split('x')
            .map(|s| s.parse::<usize>().map_err(|e| Error::Config(e.to_string())))
            .collect::<Result<_>>()?;
        let m = self.owned_shape();
        if dims[..] != m[..self.grid.dim()] {
            return Err(Error::LayoutMismatch(format!("snapshot shape {shape} != field shape")));
        }
        let mut idx = Vec::new();
        self.for_each_owned(|p| idx.push(p));
        let mut buf = [0u8; 8];
        for p in idx {
            r.read_exact(&mut buf)?;
            self.set(p, f64::from_le_bytes(buf));
        }
        Ok(())
    }

    /// CSV snapshot: `i,j[,k],x,y[,z],value`, one owned sample per row.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let dim = self.grid.dim();
        writeln!(w, "# machlimit-snapshot v1 location={}", self.loc)?;
        let axes = ["i", "j", "k"];
        let coords = ["x", "y", "z"];
        writeln!(
            w,
            "{},{},value",
            axes[..dim].join(","),
            coords[..dim].join(",")
        )?;
        let mut rows = Vec::new();
        self.for_each_owned(|p| {
            let x = self.position(p);
            let idx: Vec<String> = p[..dim].iter().map(|v| v.to_string()).collect();
            let pos: Vec<String> = x[..dim].iter().map(|v| format!("{v:.17e}")).collect();
            rows.push(format!("{},{},{:.17e}", idx.join(","), pos.join(","), self.get(p)));
        });
        for row in rows {
            writeln!(w, "{row}")?;
        }
        Ok(())
    }

    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_binary(std::io::BufWriter::new(f))
    }
}

/// MAC velocity: component `a` lives on the faces normal to axis `a`.
#[derive(Clone, Debug)]
pub struct VectorField {
    comps: Vec<Field>,
}

impl VectorField {
    pub fn zeros(grid: &Arc<Grid>) -> VectorField {
        VectorField {
            comps: (0..grid.dim()).map(|a| Field::zeros(grid, Location::face(a))).collect(),
        }
    }

    pub fn from_components(comps: Vec<Field>) -> Result<VectorField> {
        let grid = comps
            .first()
            .map(|c| Arc::clone(c.grid()))
            .ok_or_else(|| Error::LayoutMismatch("empty component list".into()))?;
        if comps.len() != grid.dim() {
            return Err(Error::LayoutMismatch("component count != dim".into()));
        }
        for (a, c) in comps.iter().enumerate() {
            if c.location() != Location::face(a) {
                return Err(Error::LayoutMismatch(format!("component {a} is not face-staggered")));
            }
        }
        Ok(VectorField { comps })
    }

    /// Fills all stored samples of component `a` with `f(a, x)`.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(usize, [f64; 3]) -> f64) -> VectorField {
        VectorField {
            comps: (0..grid.dim())
                .map(|a| Field::from_fn(grid, Location::face(a), |x| f(a, x)))
                .collect(),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.comps[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn comp(&self, a: usize) -> &Field {
        &self.comps[a]
    }

    pub fn comp_mut(&mut self, a: usize) -> &mut Field {
        &mut self.comps[a]
    }

    pub fn components(&self) -> &[Field] {
        &self.comps
    }

    /// Applies the slip ghost rules: odd reflection of the normal component
    /// (with the wall-face value forced to zero) and the Robin ghost
    /// `u_g = u_i (1 - alpha d) / (1 + alpha d)` for tangential components.
    pub fn fill_ghost_velocity(&mut self, alpha: f64) -> Result<()> {
        if !(alpha >= 0.0) {
            return Err(Error::InvalidParams(format!("slip coefficient alpha = {alpha} < 0")));
        }
        for (a, c) in self.comps.iter_mut().enumerate() {
            c.fill_ghosts(|b| if b == a { WallRule::Odd } else { WallRule::Robin(alpha) });
        }
        Ok(())
    }

    /// Zeros the normal component on every wall face.
    pub fn zero_wall_normal(&mut self) {
        let grid = Arc::clone(self.grid());
        for a in 0..grid.dim() {
            if !grid.is_wall(a) {
                continue;
            }
            let n = grid.cells()[a] as isize;
            let c = &mut self.comps[a];
            let (lo, hi) = c.storage_range();
            for base in c.lines_along(a) {
                let mut p = base;
                for i in [0, n] {
                    p[a] = i;
                    if (0..3).all(|d| p[d] >= lo[d] && p[d] < hi[d]) {
                        c.set(p, 0.0);
                    }
                }
            }
        }
    }

    /// Largest absolute normal velocity on owned wall faces.
    pub fn wall_normal_max(&self) -> f64 {
        let grid = self.grid();
        let mut m = 0.0f64;
        for a in 0..grid.dim() {
            if !grid.is_wall(a) {
                continue;
            }
            let n = grid.cells()[a] as isize;
            let c = &self.comps[a];
            c.for_each_owned(|p| {
                if p[a] == 0 || p[a] == n {
                    m = m.max(c.get(p).abs());
                }
            });
        }
        m
    }

    pub fn dot(&self, other: &VectorField) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::LayoutMismatch("vector dims differ".into()));
        }
        let mut s = 0.0;
        for (a, b) in self.comps.iter().zip(&other.comps) {
            s += a.dot(b)?;
        }
        Ok(s)
    }

    pub fn norm_l2(&self) -> f64 {
        self.comps
            .iter()
            .map(|c| c.norm_l2().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().map(Field::max_abs).fold(0.0, f64::max)
    }

    pub fn axpy(&mut self, alpha: f64, x: &VectorField) -> Result<()> {
        if self.dim() != x.dim() {
            return Err(Error::LayoutMismatch("vector dims differ".into()));
        }
        for (y, xv) in self.comps.iter_mut().zip(&x.comps) {
            y.axpy(alpha, xv)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, c: f64) {
        self.comps.iter_mut().for_each(|f| f.scale(c));
    }

    pub fn lincomb(a: f64, x: &VectorField, b: f64, y: &VectorField) -> Result<VectorField> {
        let comps = x
            .comps
            .iter()
            .zip(&y.comps)
            .map(|(xc, yc)| Field::lincomb(a, xc, b, yc))
            .collect::<Result<Vec<_>>>()?;
        Ok(VectorField { comps })
    }

    pub fn copy_from(&mut self, other: &VectorField) -> Result<()> {
        for (y, x) in self.comps.iter_mut().zip(&other.comps) {
            y.copy_from(x)?;
        }
        Ok(())
    }

    /// Binary snapshot with one section per component.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        for c in &self.comps {
            c.write_binary(&mut w)?;
        }
        Ok(())
    }

    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_binary(std::io::BufWriter::new(f))
    }
}
