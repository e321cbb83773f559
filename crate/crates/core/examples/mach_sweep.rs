//! Mach-number sweep: compressible runs converge to the incompressible
//! reference as eps decreases.

use machlimit::harness::{self, ExperimentConfig};
use machlimit::GridSpec;

fn main() -> machlimit::Result<()> {
    let cfg = ExperimentConfig {
        grid: GridSpec::channel(2, 32),
        t_final: 0.5,
        cadence: 50,
        eps_list: vec![0.1, 0.05, 0.025],
        ..Default::default()
    };
    let res = harness::run_sweep(&cfg, 3, false)?;
    for r in &res.runs {
        println!(
            "eps {:.4}  ||u - v|| {:.3e}  H1 {:.3e}  sup phi_eps {:.4e}  CG max {}",
            r.eps, r.error_l2, r.error_h1, r.phi_eps_sup, r.max_cg_iters
        );
    }
    for p in &res.rates {
        println!("ratio {:.3}  rate {:?}", p.ratio, p.rate);
    }
    println!("fitted rate {:?}", res.fitted_rate);
    Ok(())
}
