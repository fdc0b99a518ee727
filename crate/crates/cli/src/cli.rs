//! Command-line definitions and dispatch.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::allocate::{load_problem, run_allocate};
use crate::audit::{labelled, render_failure, render_plot, render_report, run_audit, AuditOptions};
use crate::config::{self, SweepParam};
use crate::data::{read_episodes, write_episodes_file};
use crate::error::{CliError, Result};
use crate::rulecard;
use crate::simulate::{simulate, SimulateOptions};
use crate::sweep::{run_sweep, SweepSpec};

pub const DEFAULT_N: usize = 200;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(name = "tlc", version, about = "Rule cards, simulation and compliance audits for threshold-linear-cap bailouts")]
pub struct Cli {
    /// Directory for output files.
    #[arg(long, global = true, env = "TLC_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Publish the rule card for a configuration.
    Rulecard(RulecardArgs),
    /// Draw synthetic episodes from the configured rule.
    Simulate(SimulateArgs),
    /// Audit realized bailouts against the published rule.
    Audit(AuditArgs),
    /// Tabulate cutoffs and cap across a parameter range.
    Sweep(SweepArgs),
    /// Allocate a treasury budget across municipalities.
    Allocate(AllocateArgs),
}

#[derive(Debug, Args)]
pub struct RulecardArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Recorded verbatim on the card; omitted cards read `none`.
    #[arg(long)]
    pub timestamp: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Number of episodes.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Standard deviation of the additive Gaussian noise.
    #[arg(long, allow_hyphen_values = true)]
    pub noise: Option<f64>,
    /// Constant added to payouts above the upper cutoff.
    #[arg(long, allow_hyphen_values = true)]
    pub override_shift: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Episodes from a second institutional regime, for shift attribution.
    #[arg(long)]
    pub data_after: Option<PathBuf>,
    #[arg(long)]
    pub knot_grid: Option<usize>,
    /// Compliance tolerance; defaults to twice the residual standard error.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Exit with status 3 when a signature check fails.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// One of omega_t, b_bar, tau, w_b, threshold.
    #[arg(long)]
    pub param: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub from: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub to: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Move b_bar by this much per unit of omega_t.
    #[arg(long, allow_hyphen_values = true)]
    pub coupled_b_bar_slope: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AllocateArgs {
    /// Problem file with `budget` and `[[municipality]]` tables.
    #[arg(long, alias = "problem")]
    pub config: PathBuf,
    /// Cross-check against exhaustive grid search (three municipalities or fewer).
    #[arg(long)]
    pub verbose: bool,
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

fn prepare(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Console output; a closed pipe is not an error.
fn say(text: &str) {
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn wrote(paths: &[PathBuf]) {
    for p in paths {
        say(&format!("wrote {}\n", p.display()));
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let out = cli.out_dir.as_path();
    match cli.command {
        Command::Rulecard(a) => cmd_rulecard(&a, out),
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Audit(a) => cmd_audit(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out),
        Command::Allocate(a) => cmd_allocate(&a, out),
    }
}

fn cmd_rulecard(a: &RulecardArgs, out: &Path) -> Result<()> {
    let resolved = config::load(&a.config)?;
    let card = rulecard::build(&resolved, a.timestamp.as_deref())?;
    let text = rulecard::render_text(&card);
    prepare(out)?;
    let paths = vec![
        write(out, "rulecard.txt", &text)?,
        write(out, "rulecard.toml", &rulecard::to_toml(&card)?)?,
    ];
    say(&text);
    wrote(&paths);
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs, out: &Path) -> Result<()> {
    let resolved = config::load(&a.config)?;
    let section = resolved.simulate();
    let opts = SimulateOptions {
        n: a.n.or(section.n).unwrap_or(DEFAULT_N),
        seed: a.seed.or(section.seed).unwrap_or(DEFAULT_SEED),
        noise: a.noise.or(section.noise).unwrap_or(0.0),
        override_shift: a.override_shift.or(section.override_shift).unwrap_or(0.0),
        screening_beta: section.screening_beta,
    };
    let episodes = simulate(&resolved, &opts)?;
    prepare(out)?;
    let path = out.join("episodes.csv");
    write_episodes_file(&path, &episodes)?;
    say(&format!(
        "simulated {} episodes (seed {}, noise {}, override shift {})\n",
        opts.n, opts.seed, opts.noise, opts.override_shift
    ));
    wrote(&[path]);
    Ok(())
}

fn cmd_audit(a: &AuditArgs, out: &Path) -> Result<()> {
    let resolved = config::load(&a.config)?;
    if let Some(tol) = a.tol {
        if !(tol >= 0.0) {
            return Err(CliError::Validation(format!("--tol {tol} must be non-negative")));
        }
    }
    let data = read_episodes(&a.data)?;
    let after = a.data_after.as_deref().map(read_episodes).transpose()?;
    let opts = AuditOptions {
        knot_grid: a.knot_grid,
        tol: a.tol,
    };
    prepare(out)?;
    let report = match run_audit(&resolved, &data, after.as_deref(), &opts) {
        Ok(r) => r,
        Err(e @ CliError::Estimation(_)) => {
            let path = write(out, "audit_report.txt", &render_failure(&e.to_string(), &data))?;
            wrote(&[path]);
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    let text = render_report(&report, &data);
    let class_path = out.join("audit_classification.csv");
    write_episodes_file(&class_path, &labelled(&data, &report.labels))?;
    let paths = vec![
        write(out, "audit_report.txt", &text)?,
        class_path,
        write(out, "audit_plot.svg", &render_plot(&report, &data, &resolved))?,
    ];
    say(&text);
    wrote(&paths);
    let failed = report.failed_checks();
    if a.strict && !failed.is_empty() {
        let names: Vec<&str> = failed.iter().map(|c| c.name).collect();
        return Err(CliError::Signature(format!("signature checks failed: {}", names.join(", "))));
    }
    Ok(())
}

fn cmd_sweep(a: &SweepArgs, out: &Path) -> Result<()> {
    let resolved = config::load(&a.config)?;
    let section = resolved.config.sweep.clone();
    let parameter = match (&a.param, &section) {
        (Some(name), _) => SweepParam::parse(name).ok_or_else(|| {
            CliError::Validation(format!(
                "--param `{name}`: expected one of omega_t, b_bar, tau, w_b, threshold"
            ))
        })?,
        (None, Some(s)) => s.parameter,
        (None, None) => return Err(CliError::Validation("sweep: give --param or a [sweep] section".into())),
    };
    let pick = |flag: Option<f64>, from_section: Option<f64>, name: &str| {
        flag.or(from_section)
            .ok_or_else(|| CliError::Validation(format!("sweep: missing --{name}")))
    };
    let spec = SweepSpec {
        parameter,
        from: pick(a.from, section.as_ref().map(|s| s.from), "from")?,
        to: pick(a.to, section.as_ref().map(|s| s.to), "to")?,
        steps: a.steps.or(section.as_ref().map(|s| s.steps)).unwrap_or(21),
        coupled_b_bar_slope: a
            .coupled_b_bar_slope
            .or(section.as_ref().and_then(|s| s.coupled_b_bar_slope)),
    };
    let result = run_sweep(&resolved, &spec)?;
    prepare(out)?;
    let paths = vec![
        write(out, "sweep.csv", &result.to_csv()?)?,
        write(out, "sweep.svg", &result.render_plot())?,
    ];
    say(&result.summary(&resolved.params));
    wrote(&paths);
    Ok(())
}

fn cmd_allocate(a: &AllocateArgs, out: &Path) -> Result<()> {
    let problem = load_problem(&a.config)?;
    let output = run_allocate(&problem, a.verbose)?;
    let summary = output.summary(&problem);
    prepare(out)?;
    let paths = vec![
        write(out, "allocation.csv", &output.to_csv(&problem)?)?,
        write(out, "allocation.txt", &summary)?,
    ];
    say(&summary);
    wrote(&paths);
    if let Some(o) = &output.oracle {
        if !o.agrees {
            return Err(CliError::Estimation(format!(
                "allocation disagrees with grid search by {} (tolerance {})",
                o.max_gap, o.tolerance
            )));
        }
    }
    Ok(())
}
