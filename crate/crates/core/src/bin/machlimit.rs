use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use machlimit::harness::{self, sweep, verify, ExperimentConfig};

#[derive(Parser)]
#[command(name = "machlimit", version, about = "Low-Mach compressible flow runs, sweeps and self-checks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one configuration and write its time series.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the first eps of the config.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep eps and compare against the incompressible reference.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        eps_list: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the verification suites.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(config: &PathBuf, out: Option<PathBuf>) -> machlimit::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(config)?;
    if let Some(out) = out {
        cfg.out_dir = out;
    }
    Ok(cfg)
}

fn thread_cap() {
    let cap = std::env::var(sweep::THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok());
    if let Some(n) = cap.filter(|&n| n >= 1) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    thread_cap();
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run { config, eps, out } => load(&config, out).and_then(|cfg| {
            let res = harness::run_single(&cfg, eps)?;
            println!(
                "eps {} : {} steps, status {:?}, sup phi_eps {:.6e}, output in {}",
                res.eps,
                res.steps,
                res.status,
                res.phi_eps_sup(),
                cfg.out_dir.display()
            );
            Ok(res.status.is_ok())
        }),
        Cmd::Sweep {
            config,
            eps_list,
            jobs,
            out,
        } => load(&config, out).and_then(|cfg| {
            let cfg = match eps_list {
                Some(list) => cfg.with_eps_list(list)?,
                None => cfg,
            };
            let res = harness::run_sweep(&cfg, jobs, true)?;
            println!("{:>10} {:>12} {:>12} {:>12}  status", "eps", "err_l2", "err_h1", "sup phi_eps");
            for r in &res.runs {
                println!(
                    "{:>10.4e} {:>12.4e} {:>12.4e} {:>12.4e}  {:?}",
                    r.eps, r.error_l2, r.error_h1, r.phi_eps_sup, r.status
                );
            }
            for p in &res.rates {
                match p.rate {
                    Some(rate) => println!("rate {:.4e} -> {:.4e}: {rate:.3}", p.eps_coarse, p.eps_fine),
                    None => println!("rate {:.4e} -> {:.4e}: undefined", p.eps_coarse, p.eps_fine),
                }
            }
            if let Some(r) = res.fitted_rate {
                println!("fitted rate {r:.3}");
            }
            println!("summary in {}", cfg.out_dir.join("sweep_summary.json").display());
            Ok(res.runs.iter().all(|r| r.status.is_ok()))
        }),
        Cmd::Verify { suite, out } => verify::verify(&suite, out.as_deref()).map(|rep| {
            print!("{}", rep.summary());
            rep.all_passed()
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
