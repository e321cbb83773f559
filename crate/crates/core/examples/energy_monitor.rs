//! Single run with the energy functionals, the running solution norm and the
//! decay-inequality ratio written to CSV.
//!
//! cargo run --release --example energy_monitor -- [OUT_DIR]

use machlimit::harness::{self, ExperimentConfig};
use machlimit::GridSpec;

fn main() -> machlimit::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "out/energy_monitor".into());
    let cfg = ExperimentConfig {
        grid: GridSpec::channel(2, 32),
        t_final: 0.25,
        cadence: 10,
        eps_list: vec![0.05],
        out_dir: out.into(),
        ..Default::default()
    };
    let res = harness::run_single(&cfg, None)?;
    println!("{:>10} {:>13} {:>13} {:>13} {:>11}", "t", "Phi", "Psi", "phi_eps", "ratio");
    for s in &res.samples {
        println!(
            "{:>10.4e} {:>13.6e} {:>13.6e} {:>13.6e} {:>11.3e}",
            s.t, s.report.phi, s.report.psi, s.phi_eps, s.decay_ratio
        );
    }
    println!("empirical constant (running max of the ratio): {:.4e}", res.decay_ratio_max());
    println!("CSV written to {}", harness::run::csv_path(&cfg.out_dir, res.eps).display());
    Ok(())
}
