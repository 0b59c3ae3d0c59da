use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use ltn_cli::{commands, ExperimentConfig, Overrides, Status};

/// Optimization-based local-to-nonlocal coupling in 1D.
#[derive(Parser)]
#[command(name = "ltn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one case at one horizon over one or more grid sizes.
    Run(Common),
    /// Solve a case for every horizon in an epsilon list.
    Sweep(Common),
    /// Run the property suite (stiffness, Q, norm bounds, gradient, BFGS).
    Verify(Common),
    /// Recompute the published M.1/M.2 tables for both kernels and compare.
    ReproduceTables(Common),
}

#[derive(Args)]
struct Common {
    /// Flat TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// patch, m1, m2, a1, a2, modeling-sweep, property-suite or custom.
    #[arg(long)]
    case: Option<String>,
    /// integrable or singular.
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Comma-separated horizons.
    #[arg(long, value_delimiter = ',')]
    epsilon_list: Option<Vec<f64>>,
    /// Grid size, e.g. 0.03125 or 2^-5.
    #[arg(long)]
    h: Option<String>,
    /// Range 2^-3..2^-7 or a comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    h_list: Option<String>,
    /// bfgs or normal.
    #[arg(long)]
    solver: Option<String>,
    /// BFGS gradient tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    jobs: Option<usize>,
    /// Write state matrices and Q in i j value format.
    #[arg(long)]
    dump_matrices: bool,
}

impl Common {
    fn resolve(self, published_grid: bool) -> Result<ExperimentConfig> {
        let mut flags = Overrides {
            case: self.case,
            kernel: self.kernel,
            epsilon: self.epsilon,
            epsilon_list: self.epsilon_list,
            h: self.h,
            h_list: self.h_list,
            solver: self.solver,
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
            output_dir: self.output_dir,
            jobs: self.jobs,
            dump_matrices: self.dump_matrices,
        };
        if published_grid {
            flags.h = None;
            flags.h_list = Some("2^-3..2^-7".into());
        }
        ExperimentConfig::load(self.config.as_deref(), flags)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(command: Command) -> Result<ExitCode> {
    let outcome = match command {
        Command::Run(c) => commands::run(&c.resolve(false)?)?,
        Command::Sweep(c) => commands::sweep(&c.resolve(false)?)?,
        Command::Verify(c) => commands::verify(&c.resolve(false)?)?,
        Command::ReproduceTables(c) => commands::reproduce_tables(&c.resolve(true)?)?,
    };
    let report = &outcome.report;
    let dir = report.config_output_dir();
    for r in &report.table {
        let rate = |v: Option<f64>| v.map(|v| format!("{v:5.2}")).unwrap_or_else(|| "    -".into());
        println!(
            "eps={:<6} h={:<10} e_un={:.3e} {} e_ul={:.3e} {} e_thn={:.3e} {}",
            r.epsilon,
            r.h,
            r.e_un,
            rate(r.rate_un),
            r.e_ul,
            rate(r.rate_ul),
            r.e_thn,
            rate(r.rate_thn)
        );
    }
    for p in &report.properties {
        for c in &p.checks {
            println!(
                "[{}] eps={} h={} {}: {}",
                if c.passed { "pass" } else { "FAIL" },
                p.epsilon,
                p.h,
                c.name,
                c.detail
            );
        }
    }
    if let Some(m) = &report.modeling {
        for r in &m.rows {
            println!(
                "eps={:<6} coupling={:.3e} modeling={:.3e}",
                r.epsilon, r.coupling_error, r.modeling_error
            );
        }
        println!("modeling order {:.3}, C = {:.3}", m.modeling_order, m.fitted_c);
    }
    for t in &report.comparisons {
        let c = &t.comparison;
        println!(
            "{}: {} of {} cells within tolerance",
            t.label,
            c.checked - c.mismatches.len(),
            c.checked
        );
        for m in &c.mismatches {
            println!(
                "  {}: computed {:.4e}, published {:.4e}",
                m.key, m.computed, m.published
            );
        }
        for u in &c.unreferenced {
            println!("  {u}: no published reference");
        }
    }
    println!("report: {}", dir.join("report.json").display());
    Ok(match report.status {
        Status::Ok => ExitCode::SUCCESS,
        Status::ChecksFailed => {
            eprintln!("property checks failed");
            ExitCode::FAILURE
        }
        Status::Failed => {
            eprintln!(
                "error: {}{}",
                report.error.as_deref().unwrap_or("run failed"),
                if report.partial {
                    " (partial artifacts written)"
                } else {
                    ""
                }
            );
            ExitCode::FAILURE
        }
    })
}
