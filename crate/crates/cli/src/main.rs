use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use frictionbem::config::{Mode, RunConfig};
use frictionbem::run::{read_records, record_rate, run, sweep_gamma, write_sweep, RunOverrides, RunRecord};

/// Stabilized mixed hp-BEM for 2D frictional contact.
#[derive(Parser)]
#[command(name = "frictionbem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the uniform or adaptive loop for a TOML config or a built-in
    /// benchmark (`tresca2d`, `coulomb2d`).
    Solve {
        config: String,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long = "gamma-bar")]
        gamma_bar: Option<f64>,
        #[arg(long = "max-steps")]
        max_steps: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also compute approximate errors against the last step.
        #[arg(long = "approx-error")]
        approx_error: bool,
    },
    /// Convergence rates of the columns of a run CSV.
    Rates {
        csv: PathBuf,
        /// Fit only the last N rows.
        #[arg(long)]
        last: Option<usize>,
    },
    /// Estimator on the initial mesh for several values of gamma-bar.
    SweepGamma {
        config: String,
        /// Comma separated list.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "elements-per-side")]
        elements_per_side: Option<usize>,
    },
}

fn print_record(r: &RunRecord) {
    println!(
        "{:>4} {:>7} {:>12.4e} {:>12.4e} {:>12.4e} {:>4} {:>9.2e} {:>8.2}",
        r.step,
        r.dof(),
        r.eta_total,
        r.eta_n,
        r.eta_c,
        r.newton_iters,
        r.merit.sqrt(),
        r.seconds
    );
}

fn rate_columns() -> Vec<(&'static str, fn(&RunRecord) -> f64)> {
    vec![
        ("eta_total", |r| r.eta_total),
        ("eta_n", |r| r.eta_n),
        ("eta_c", |r| r.eta_c),
        ("eta_v", |r| r.eta_v),
        ("eta_w", |r| r.eta_w),
        ("eta_k", |r| r.eta_k),
        ("eta_lambda_n", |r| r.eta_lambda_n),
        ("eta_slip", |r| r.eta_slip),
        ("eta_compl", |r| r.eta_compl),
        ("eta_pen", |r| r.eta_pen),
        ("eta_stick", |r| r.eta_stick),
        ("eta_align", |r| r.eta_align),
    ]
}

fn rates(records: &[RunRecord], last: Option<usize>) {
    for (name, col) in rate_columns() {
        match record_rate(records, |r| Some(col(r)), last) {
            Ok(v) => println!("{name} {v}"),
            Err(e) => println!("{name} n/a ({e})"),
        }
    }
    // the last row is the reference of the approximate error
    let n = records.len();
    if n > 0 && records[n - 1].approx_error.is_some() {
        match record_rate(&records[..n - 1], |r| r.approx_error, last) {
            Ok(v) => println!("approx_error {v}"),
            Err(e) => println!("approx_error n/a ({e})"),
        }
    }
}

fn main_inner(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Solve { config, mode, gamma_bar, max_steps, out, approx_error } => {
            let mut c = RunConfig::load(&config).with_context(|| format!("loading {config}"))?;
            RunOverrides { mode, gamma_bar, max_steps, out }.apply(&mut c);
            c.output.approx_error |= approx_error;
            c.validate()?;
            let res = run(&c)?;
            println!("step     dof    eta_total        eta_n        eta_c newt   merit^½  seconds");
            res.records.iter().for_each(print_record);
            if let Some(p) = &res.csv {
                println!("wrote {}", p.display());
            }
            if let Some(e) = res.error {
                eprintln!("run stopped early: {e}");
                return Ok(false);
            }
            Ok(true)
        }
        Command::Rates { csv, last } => {
            let records = read_records(&csv).with_context(|| format!("reading {}", csv.display()))?;
            if records.is_empty() {
                bail!("{} has no rows", csv.display());
            }
            rates(&records, last);
            Ok(true)
        }
        Command::SweepGamma { config, values, out, elements_per_side } => {
            let mut c = RunConfig::load(&config).with_context(|| format!("loading {config}"))?;
            if let Some(n) = elements_per_side {
                c.discretization.elements_per_side = n;
            }
            let rows = sweep_gamma(&c, &values)?;
            println!("gamma_bar    eta_total    eta_c        newton");
            for r in &rows {
                match r.eta_total {
                    Some(eta) => println!(
                        "{:<12.3e} {:<12.4e} {:<12.4e} {}",
                        r.gamma_bar,
                        eta,
                        r.eta_c.unwrap_or(f64::NAN),
                        r.newton_iters.unwrap_or(0)
                    ),
                    None => println!("{:<12.3e} failed", r.gamma_bar),
                }
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                let p = dir.join(format!("{}-gamma-sweep.csv", c.name));
                write_sweep(&p, &rows)?;
                println!("wrote {}", p.display());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match main_inner(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
