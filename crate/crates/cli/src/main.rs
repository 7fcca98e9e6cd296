use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jumpsignal::Signal;
use jumpsignal_cli::output::{emit_text, fmt_num, render_strategy};
use jumpsignal_cli::{emit_csv, emit_meta, render_csv, run_experiment, run_simulation, CliError, ExperimentConfig};

/// Signal-driven mean-field equilibria and certainty-equivalent sweeps.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the reference equilibrium and print its strategy table.
    Solve(Common),
    /// Run the configured certainty-equivalent sweep.
    Sweep(Common),
    /// Check the closed-form values against a Monte Carlo estimate.
    Simulate(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; omitted blocks take the case-study defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the Monte Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of quadrature nodes.
    #[arg(long)]
    nodes: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.mc.seed = s;
        }
        if let Some(n) = self.nodes {
            cfg.quadrature.nodes = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn emit(&self, text: &str) -> Result<(), CliError> {
        match &self.out {
            Some(p) => emit_text(text, p),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn solve(args: &Common) -> Result<bool, CliError> {
    let cfg = args.load()?;
    let pop = cfg.reference_population()?;
    let res = jumpsignal::equilibrium::solve_mf_finite(&pop, &cfg.quadrature()?, &cfg.solver_config()?)?;
    args.emit(&render_strategy(&res))?;
    eprintln!(
        "converged={} iterations={} residual={}",
        res.converged,
        res.iterations,
        fmt_num(res.residual)
    );
    let labels: Vec<&str> = Signal::ALL.iter().map(|s| s.label()).collect();
    eprintln!("signals: {}", labels.join(" "));
    Ok(res.converged)
}

fn sweep(args: &Common) -> Result<bool, CliError> {
    let cfg = args.load()?;
    let table = run_experiment(&cfg)?;
    match &args.out {
        Some(p) => {
            emit_csv(&table, p)?;
            emit_meta(&table, &cfg, p)?;
        }
        None => print!("{}", render_csv(&table)),
    }
    for r in table.rows.iter().filter(|r| !r.converged) {
        eprintln!("not converged at {}={}", table.parameter, r.value);
    }
    Ok(table.all_converged())
}

fn simulate(args: &Common) -> Result<bool, CliError> {
    let cfg = args.load()?;
    let (res, rows) = run_simulation(&cfg)?;
    let mut text = String::from("type,value,mc_mean,mc_std_error,z\n");
    for r in &rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            r.type_index,
            fmt_num(r.value),
            fmt_num(r.mc_mean),
            fmt_num(r.mc_std_error),
            fmt_num(r.z_score())
        ));
    }
    args.emit(&text)?;
    Ok(res.converged)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Sweep(a) => sweep(a),
        Command::Simulate(a) => simulate(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
