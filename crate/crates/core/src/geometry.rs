//! Structured grids on axis-aligned boxes.
//!
//! Every axis is either periodic or bounded by a pair of flat Navier slip
//! walls. Two-dimensional grids are stored as three-dimensional ones with a
//! single inactive layer along axis 2, so all stencil code is written once.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Smallest admissible cell count on an active axis.
pub const MIN_CELLS: usize = 4;

/// Boundary treatment of one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisBc {
    Periodic,
    SlipWalls,
}

impl AxisBc {
    pub fn is_wall(self) -> bool {
        matches!(self, AxisBc::SlipWalls)
    }
}

impl std::str::FromStr for AxisBc {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "periodic" => Ok(AxisBc::Periodic),
            "slip_walls" | "slip" | "walls" => Ok(AxisBc::SlipWalls),
            other => Err(Error::Config(format!("unknown axis boundary '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Low,
    High,
}

impl Side {
    /// Sign of the outward normal along the wall axis.
    pub fn sign(self) -> f64 {
        match self {
            Side::Low => -1.0,
            Side::High => 1.0,
        }
    }
}

/// User-facing grid description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub cells: Vec<usize>,
    pub lengths: Vec<f64>,
    pub axis_bc: Vec<AxisBc>,
}

impl GridSpec {
    /// Square (or cubic) domain with the same resolution and boundary tag on
    /// every axis.
    pub fn uniform(dim: usize, n: usize, length: f64, bc: AxisBc) -> Self {
        GridSpec {
            dim,
            cells: vec![n; dim],
            lengths: vec![length; dim],
            axis_bc: vec![bc; dim],
        }
    }

    /// Unit torus in `dim` dimensions.
    pub fn torus(dim: usize, n: usize) -> Self {
        Self::uniform(dim, n, 1.0, AxisBc::Periodic)
    }

    /// Periodic along every axis except the last one, which carries slip walls.
    pub fn channel(dim: usize, n: usize) -> Self {
        let mut spec = Self::uniform(dim, n, 1.0, AxisBc::Periodic);
        spec.axis_bc[dim - 1] = AxisBc::SlipWalls;
        spec
    }

    /// Slip walls on every axis.
    pub fn closed_box(dim: usize, n: usize) -> Self {
        Self::uniform(dim, n, 1.0, AxisBc::SlipWalls)
    }
}

/// One flat wall of the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPatch {
    pub axis: usize,
    pub side: Side,
    /// Outward unit normal, always `±e_axis`.
    pub normal: [f64; 3],
    /// Unit tangent vectors spanning the wall.
    pub tangent_basis: Vec<[f64; 3]>,
    pub slip_coeff: f64,
}

impl BoundaryPatch {
    /// Tangent axes of this wall, in increasing order.
    pub fn tangent_axes(&self, dim: usize) -> impl Iterator<Item = usize> + '_ {
        (0..dim).filter(move |&b| b != self.axis)
    }
}

/// Validated grid. Axis 2 is inactive (`n = 1`, no ghosts) in two dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: [usize; 3],
    lengths: [f64; 3],
    h: [f64; 3],
    bc: [AxisBc; 3],
    patches: Vec<BoundaryPatch>,
    alpha: f64,
}

impl Grid {
    /// Builds a grid with free-slip walls (`alpha = 0`).
    pub fn new(spec: &GridSpec) -> Result<Self> {
        Self::with_slip(spec, 0.0)
    }

    /// Builds a grid whose slip walls all carry the Navier coefficient `alpha`.
    pub fn with_slip(spec: &GridSpec, alpha: f64) -> Result<Self> {
        let dim = spec.dim;
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidGrid(format!("dim must be 2 or 3, got {dim}")));
        }
        if spec.cells.len() != dim || spec.lengths.len() != dim || spec.axis_bc.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "cells, lengths and axis_bc must each have {dim} entries"
            )));
        }
        if let Some(&c) = spec.cells.iter().find(|&&c| c < MIN_CELLS) {
            return Err(Error::InvalidGrid(format!(
                "cells below minimum: {c} < {MIN_CELLS}"
            )));
        }
        if let Some(&l) = spec.lengths.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidGrid(format!("nonpositive length {l}")));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParams(format!("slip coefficient alpha = {alpha} < 0")));
        }

        let mut n = [1usize; 3];
        let mut lengths = [1.0; 3];
        let mut h = [1.0; 3];
        let mut bc = [AxisBc::Periodic; 3];
        for a in 0..dim {
            n[a] = spec.cells[a];
            lengths[a] = spec.lengths[a];
            h[a] = spec.lengths[a] / spec.cells[a] as f64;
            bc[a] = spec.axis_bc[a];
        }

        let mut patches = Vec::new();
        for a in 0..dim {
            if !bc[a].is_wall() {
                continue;
            }
            for side in [Side::Low, Side::High] {
                let mut normal = [0.0; 3];
                normal[a] = side.sign();
                let tangent_basis = (0..dim)
                    .filter(|&b| b != a)
                    .map(|b| {
                        let mut t = [0.0; 3];
                        t[b] = 1.0;
                        t
                    })
                    .collect();
                patches.push(BoundaryPatch {
                    axis: a,
                    side,
                    normal,
                    tangent_basis,
                    slip_coeff: alpha,
                });
            }
        }

        Ok(Grid {
            dim,
            n,
            lengths,
            h,
            bc,
            patches,
            alpha,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cell counts, `1` on the inactive axis.
    pub fn cells(&self) -> [usize; 3] {
        self.n
    }

    pub fn lengths(&self) -> [f64; 3] {
        self.lengths
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.h
    }

    pub fn bc(&self, axis: usize) -> AxisBc {
        self.bc[axis]
    }

    pub fn is_wall(&self, axis: usize) -> bool {
        axis < self.dim && self.bc[axis].is_wall()
    }

    pub fn patches(&self) -> &[BoundaryPatch] {
        &self.patches
    }

    pub fn has_walls(&self) -> bool {
        !self.patches.is_empty()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Same geometry with a different slip coefficient.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParams(format!("slip coefficient alpha = {alpha} < 0")));
        }
        let mut g = self.clone();
        g.alpha = alpha;
        for p in &mut g.patches {
            p.slip_coeff = alpha;
        }
        Ok(g)
    }

    /// Ghost width along `axis`: 2 on active axes, 0 on the inactive one.
    pub fn ghost(&self, axis: usize) -> usize {
        if axis < self.dim {
            2
        } else {
            0
        }
    }

    pub fn cell_volume(&self) -> f64 {
        self.h[..self.dim].iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths[..self.dim].iter().product()
    }

    /// Total wall area (perimeter in 2D).
    pub fn wall_area(&self) -> f64 {
        self.patches
            .iter()
            .map(|p| (0..self.dim).filter(|&b| b != p.axis).map(|b| self.lengths[b]).product::<f64>())
            .sum()
    }

    pub fn max_cells(&self) -> usize {
        self.n[..self.dim].iter().copied().max().unwrap_or(1)
    }

    pub fn min_spacing(&self) -> f64 {
        self.h[..self.dim].iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            dim: self.dim,
            cells: self.n[..self.dim].to_vec(),
            lengths: self.lengths[..self.dim].to_vec(),
            axis_bc: self.bc[..self.dim].to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_square_has_no_patches() {
        let g = Grid::new(&GridSpec::torus(2, 8)).unwrap();
        assert!(g.patches().is_empty());
        assert_eq!(g.spacing()[..2], [0.125, 0.125]);
    }

    #[test]
    fn channel_has_two_walls() {
        let g = Grid::new(&GridSpec::channel(2, 8)).unwrap();
        assert_eq!(g.patches().len(), 2);
        assert_eq!(g.patches()[0].normal, [0.0, -1.0, 0.0]);
        assert_eq!(g.patches()[1].normal, [0.0, 1.0, 0.0]);
        for p in g.patches() {
            for t in &p.tangent_basis {
                let d: f64 = (0..3).map(|i| t[i] * p.normal[i]).sum();
                assert_eq!(d, 0.0);
            }
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = GridSpec::torus(2, 8);
        s.cells = vec![2, 8];
        let e = Grid::new(&s).unwrap_err();
        assert!(e.to_string().contains("cells below minimum"));

        assert!(Grid::new(&GridSpec::torus(4, 8)).is_err());
        let mut s = GridSpec::torus(2, 8);
        s.lengths[1] = 0.0;
        assert!(Grid::new(&s).is_err());
        assert!(Grid::with_slip(&GridSpec::channel(2, 8), -1.0).is_err());
    }

    #[test]
    fn patch_count_matches_wall_axes() {
        for dim in [2, 3] {
            let g = Grid::new(&GridSpec::closed_box(dim, 6)).unwrap();
            assert_eq!(g.patches().len(), 2 * dim);
            assert!((g.wall_area() - 2.0 * dim as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn spacing_times_cells_is_length() {
        let s = GridSpec {
            dim: 3,
            cells: vec![7, 11, 13],
            lengths: vec![0.3, 2.7, 1.9],
            axis_bc: vec![AxisBc::Periodic, AxisBc::SlipWalls, AxisBc::Periodic],
        };
        let g = Grid::new(&s).unwrap();
        for a in 0..3 {
            let l = g.spacing()[a] * g.cells()[a] as f64;
            assert!((l - s.lengths[a]).abs() <= f64::EPSILON * s.lengths[a]);
        }
    }
}
