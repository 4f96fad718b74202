use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use lockatpg::attack::{AttackConfig, SolverChoice};
use lockatpg::bench::{parse_bench, write_bench, BenchAst, GateKind};
use lockatpg::circuit::{build_circuit, cut_dffs, Circuit};
use lockatpg::driver::{run_atpg, ApproachChoice, AtpgConfig, DriverConfig, DEFAULT_GROUP_SIZE};
use lockatpg::fault::{enumerate_faults, parse_fault_list, Fault};
use lockatpg::fault_sim::run_fault_sim;
use lockatpg::lock::lock_fault_group;
use lockatpg::report::{parse_patterns, write_atpg_report, write_fault_sim_report, write_patterns};

/// Stuck-at test generation with the SAT attack on fault-locked circuits.
#[derive(Parser)]
#[command(name = "lockatpg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate patterns and classify faults as detected or redundant.
    Atpg(AtpgArgs),
    /// Replay a pattern file against a fault list.
    Faultsim(FaultsimArgs),
    /// Write the locked bench for a fault list.
    Lock(LockArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Approach {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Both,
}

#[derive(Args)]
struct AtpgArgs {
    #[arg(long)]
    bench: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    approach: Approach,
    /// `all` or a fault-list file.
    #[arg(long, default_value = "all")]
    faults: String,
    /// Random patterns simulated before any attack.
    #[arg(long, default_value_t = 1024)]
    prepass: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_GROUP_SIZE)]
    group_size: usize,
    /// Wall-clock budget per attack, in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Conflict budget per solver call.
    #[arg(long)]
    conflicts: Option<u64>,
    /// `builtin` or `extern:PATH`.
    #[arg(long, default_value = "builtin")]
    solver: String,
    #[arg(long)]
    patterns: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    dump_cnf: Option<PathBuf>,
    /// Print every DIP iteration to standard error.
    #[arg(long)]
    trace: bool,
    /// Add per-fault wall time to the report.
    #[arg(long)]
    timing: bool,
    /// Worker threads; defaults to the number of logical CPUs.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct FaultsimArgs {
    #[arg(long)]
    bench: PathBuf,
    #[arg(long)]
    patterns: PathBuf,
    #[arg(long, default_value = "all")]
    faults: String,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct LockArgs {
    #[arg(long)]
    bench: PathBuf,
    #[arg(long)]
    faults: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Parses a bench, cutting flip-flops into pseudo inputs and outputs.
fn load_bench(path: &Path) -> Result<(String, Circuit)> {
    let text = read(path)?;
    let mut ast: BenchAst = parse_bench(&text).with_context(|| format!("parsing {}", path.display()))?;
    if ast.gates.iter().any(|g| g.kind == GateKind::Dff) {
        ast = cut_dffs(&ast);
    }
    let c = build_circuit(&ast).with_context(|| format!("building {}", path.display()))?;
    let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
    Ok((name, c))
}

fn load_faults(c: &Circuit, list: &str) -> Result<Vec<Fault>> {
    if list == "all" {
        return Ok(enumerate_faults(c));
    }
    let path = Path::new(list);
    parse_fault_list(c, &read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn set_jobs(jobs: Option<usize>) -> Result<()> {
    if let Some(j) = jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global().context("starting worker pool")?;
    }
    Ok(())
}

fn parse_solver(s: &str) -> Result<SolverChoice> {
    match s {
        "builtin" => Ok(SolverChoice::Builtin),
        _ => match s.strip_prefix("extern:") {
            Some(p) if !p.is_empty() => Ok(SolverChoice::External(PathBuf::from(p))),
            _ => bail!("--solver must be `builtin` or `extern:PATH`, got `{s}`"),
        },
    }
}

fn cmd_atpg(a: AtpgArgs) -> Result<ExitCode> {
    set_jobs(a.jobs)?;
    let (name, c) = load_bench(&a.bench)?;
    let faults = load_faults(&c, &a.faults)?;
    let timeout = match a.timeout {
        Some(t) if !(t.is_finite() && t > 0.0) => bail!("--timeout must be a positive number of seconds"),
        t => t.map(Duration::from_secs_f64),
    };
    if a.group_size == 0 {
        bail!("--group-size must be at least 1");
    }
    if let Some(dir) = &a.dump_cnf {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let cfg = AtpgConfig {
        approach: match a.approach {
            Approach::One => ApproachChoice::One,
            Approach::Two => ApproachChoice::Two,
            Approach::Both => ApproachChoice::Both,
        },
        prepass_budget: a.prepass,
        seed: a.seed,
        driver: DriverConfig {
            attack: AttackConfig {
                seed: a.seed,
                conflict_limit: a.conflicts,
                timeout,
                solver: parse_solver(&a.solver)?,
                trace: a.trace,
                keep_formula: false,
            },
            group_size: a.group_size,
            retry_aborted: true,
            dump_dir: a.dump_cnf.clone(),
        },
    };
    let run = run_atpg(&c, Some(faults), &cfg)?;

    for (tag, r) in [("approach1", &run.approach1), ("approach2", &run.approach2)] {
        let Some((r, cov)) = r else { continue };
        for t in &r.traces {
            for e in &t.entries {
                eprintln!("trace {} iter={} dip={} response={} clauses={}", t.label, e.iteration, e.dip, e.response, e.clauses);
            }
        }
        println!(
            "{tag}: tf={} prepass={} df_p={} rf_p={} aborted={} patterns={} fc_t={:.2}",
            cov.total, cov.prepass_detected, cov.detected, cov.redundant, cov.aborted, r.patterns.len(), cov.fc_t
        );
    }
    if let Some(p) = &a.patterns {
        write(p, &write_patterns(&name, &c, &run.final_patterns()))?;
    }
    if let Some(p) = &a.report {
        write(p, &write_atpg_report(&name, &c, &cfg, &run, a.timing))?;
    }
    Ok(if run.num_aborted() > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn cmd_faultsim(a: FaultsimArgs) -> Result<ExitCode> {
    set_jobs(a.jobs)?;
    let (name, c) = load_bench(&a.bench)?;
    let faults = load_faults(&c, &a.faults)?;
    let patterns = parse_patterns(&read(&a.patterns)?, c.num_inputs())
        .with_context(|| format!("reading patterns from {}", a.patterns.display()))?;
    let rep = run_fault_sim(&c, &faults, &patterns, true)?;
    let text = write_fault_sim_report(&name, &c, &faults, patterns.len(), &rep);
    match &a.report {
        Some(p) => write(p, &text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_lock(a: LockArgs) -> Result<ExitCode> {
    let (_, c) = load_bench(&a.bench)?;
    let faults = parse_fault_list(&c, &read(&a.faults)?).with_context(|| format!("parsing {}", a.faults.display()))?;
    let lc = lock_fault_group(&c, &faults)?;
    write(&a.out, &write_bench(&lc.circuit.to_bench())?)?;
    let k_ref: String = lc.k_ref().iter().map(|&b| if b { '1' } else { '0' }).collect();
    println!("{k_ref}");
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Atpg(a) => cmd_atpg(a),
        Command::Faultsim(a) => cmd_faultsim(a),
        Command::Lock(a) => cmd_lock(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
