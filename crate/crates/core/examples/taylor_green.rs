//! Incompressible projection solver against the decaying Taylor–Green vortex.

use std::f64::consts::PI;
use std::sync::Arc;

use machlimit::harness::run;
use machlimit::incompressible::{self, IncompressibleState};
use machlimit::{Grid, GridSpec};

fn main() -> machlimit::Result<()> {
    let mu = 0.01;
    let t_end = 0.1;
    for n in [16, 32, 64] {
        let g = Arc::new(Grid::new(&GridSpec::torus(2, n))?);
        let mut st = IncompressibleState::new(run::taylor_green_velocity(&g, 1.0), 0.0)?;
        let dt = incompressible::stable_dt_inc(&st, mu);
        for h in run::step_sizes(t_end, dt) {
            incompressible::step_inc(&mut st, h, mu, 0.0)?;
        }
        let mut err = run::taylor_green_velocity(&g, (-8.0 * PI * PI * mu * t_end).exp());
        err.axpy(-1.0, &st.v)?;
        println!(
            "N={n:3}  L2 error {:.3e}  div {:.1e}",
            err.norm_l2(),
            incompressible::divergence_residual(&st.v)
        );
    }
    Ok(())
}
