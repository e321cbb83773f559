//! Acoustic standing wave: first-order IMEX against classical RK4.
//!
//! The implicit acoustic step damps the wave; the error shrinks linearly in
//! the step size while RK4 resolves the oscillation with tiny steps.

use std::f64::consts::PI;
use std::sync::Arc;

use machlimit::compressible::{self, CompressibleState, PhysParams};
use machlimit::harness::run;
use machlimit::{AxisBc, Field, Grid, GridSpec, Location, VectorField};

fn main() -> machlimit::Result<()> {
    let spec = GridSpec {
        dim: 2,
        cells: vec![64, 4],
        lengths: vec![1.0, 0.0625],
        axis_bc: vec![AxisBc::Periodic; 2],
    };
    let g = Arc::new(Grid::new(&spec)?);
    let params = PhysParams { eps: 0.1, mu: 1e-10, lam: 0.0, alpha: 0.0, gamma: 1.4 };
    let sigma = Field::from_fn(&g, Location::CELL, |x| 1e-3 * (2.0 * PI * x[0]).cos());
    let init = CompressibleState::new(sigma, VectorField::zeros(&g), params)?;

    let t_end = 0.1;
    let mut reference = init.clone();
    for _ in 0..20_000 {
        compressible::rk4_step(&mut reference, t_end / 20_000.0)?;
    }
    let mut prev = None;
    for dt in [2e-3, 1e-3, 5e-4, 2.5e-4] {
        let mut s = init.clone();
        for h in run::step_sizes(t_end, dt) {
            compressible::step(&mut s, h)?;
        }
        s.sigma.axpy(-1.0, &reference.sigma)?;
        s.u.axpy(-1.0, &reference.u)?;
        let err = s.sigma.norm_l2().hypot(s.u.norm_l2());
        let order = prev.map_or(String::new(), |p: f64| format!("  order {:.3}", (p / err).log2()));
        println!("dt {dt:.2e}  error {err:.3e}{order}");
        prev = Some(err);
    }
    Ok(())
}
