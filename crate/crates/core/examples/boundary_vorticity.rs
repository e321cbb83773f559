//! Wall trace of the vorticity against twice the slip velocity, under
//! refinement, for free slip and a Robin slip coefficient.

use machlimit::diagnostics;
use machlimit::harness::{run, ExperimentConfig};
use machlimit::GridSpec;

fn main() -> machlimit::Result<()> {
    for alpha in [0.0, 0.5] {
        let mut prev: Option<f64> = None;
        for n in [16, 32, 64] {
            let mut cfg = ExperimentConfig {
                grid: GridSpec::channel(2, n),
                t_final: 0.05,
                cadence: usize::MAX,
                snapshots: false,
                eps_list: vec![0.1],
                ..Default::default()
            };
            cfg.phys.alpha = alpha;
            cfg.phys.mu = 0.05;
            let out = run::simulate(&cfg, 0.1, run::fixed_dt(&cfg)?)?;
            let r = diagnostics::boundary_vorticity_residual(&out.state).value;
            match prev {
                Some(p) => println!("alpha {alpha}  N={n:3}  residual {r:.3e}  order {:.2}", (p / r).log2()),
                None => println!("alpha {alpha}  N={n:3}  residual {r:.3e}"),
            }
            prev = Some(r);
        }
    }
    Ok(())
}
