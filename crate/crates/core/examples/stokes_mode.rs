//! Free-slip shear mode in a channel: compressible and incompressible decay
//! rates against the heat-equation eigenvalue mu * pi^2.

use std::f64::consts::PI;

use machlimit::harness::{run, ExperimentConfig, InitKind};
use machlimit::incompressible;
use machlimit::{Field, GridSpec, Location};

fn main() -> machlimit::Result<()> {
    let cfg = ExperimentConfig {
        grid: GridSpec::channel(2, 32),
        init: InitKind::StokesMode,
        theta: 0.1,
        t_final: 1.0,
        cadence: usize::MAX,
        snapshots: false,
        eps_list: vec![0.01],
        ..Default::default()
    };
    let init = run::initial_state(&cfg, 0.01)?;
    let mode = Field::from_fn(init.grid(), Location::face(0), |x| (PI * x[1]).cos());
    let amp = |u: &machlimit::VectorField| u.comp(0).dot(&mode).unwrap() / mode.dot(&mode).unwrap();

    let dt = run::fixed_dt(&cfg)?;
    let out = run::simulate(&cfg, 0.01, dt)?;
    let inc = run::simulate_incompressible(&cfg, dt)?;
    let a0 = amp(&init.u);
    println!("expected rate     {:.6e}", cfg.phys.mu * PI * PI);
    println!("compressible      {:.6e}", -(amp(&out.state.u) / a0).ln());
    println!("incompressible    {:.6e}", -(amp(&inc.v) / a0).ln());
    println!("div of limit field {:.1e}", incompressible::divergence_residual(&inc.v));
    Ok(())
}
