//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use crate::engine::{
    generate_synthetic, run_parallel, run_serial, run_worker, EngineOptions, OutputFormat, RunOutput, StrategyConfig,
    SyntheticSpec, WorkerTask,
};
use crate::error::{Error, Result};
use crate::model::{BenchRun, RepeatRecord, Strategy};
use crate::perf::{emit_plots, emit_report, write_csv, BenchReport, ReportOptions, StragglerPolicy};
use crate::trjio::seq::DEFAULT_PRECISION;
use crate::trjio::topology::topology_path;
use crate::trjio::{convert_seq_to_dense, read_topology, split_trajectory, write_topology};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Scratch directory override for split output.
pub const TMPDIR_ENV: &str = "TRAJBENCH_TMPDIR";

#[derive(Debug, Parser)]
#[command(name = "trajbench", version, about = "Parallel trajectory RMSD and I/O strategy benchmarks")]
pub struct Cli {
    /// Seed for synthetic data.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Output directory for commands that write derived files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic trajectory and its topology sidecar.
    Generate(GenerateArgs),
    /// Split a SEQ trajectory into contiguous segments.
    Split(SplitArgs),
    /// Convert a SEQ trajectory into a DENSE file of mobile atoms.
    Convert(ConvertArgs),
    /// Benchmark a strategy against a fresh serial baseline.
    Bench(BenchArgs),
    /// Render charts from report files.
    Report(ReportArgs),
    #[command(hide = true)]
    Worker(WorkerArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Seq,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Median,
    FastestGroup,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub frames: usize,
    #[arg(long)]
    pub atoms: usize,
    /// Mobile atom count (default: min(146, atoms)).
    #[arg(long)]
    pub mobile: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_PRECISION)]
    pub precision: f64,
    #[arg(long, value_enum, default_value_t = FormatArg::Seq)]
    pub format: FormatArg,
    pub path: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub segments: usize,
    pub src: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    pub src: PathBuf,
    pub topology: PathBuf,
    pub dst: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: Strategy,
    /// Worker counts, e.g. `1,2,4`.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub workers: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    /// Repeat the RMSD kernel this many times per frame.
    #[arg(long, default_value_t = 1)]
    pub workload: usize,
    /// Topology file (default: the trajectory's `.top` sidecar).
    #[arg(long)]
    pub topology: Option<PathBuf>,
    /// Trajectory files; segments for subfile and chain.
    pub trajectories: Vec<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Frame count for in_memory.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Atom count for in_memory.
    #[arg(long)]
    pub atoms: Option<usize>,
    #[arg(long)]
    pub mobile: Option<usize>,
    #[arg(long, value_enum, default_value_t = PolicyArg::Median)]
    pub policy: PolicyArg,
    /// Straggler threshold factor (default 1.5 median, 2.0 fastest group).
    #[arg(long)]
    pub factor: Option<f64>,
    /// Seconds to wait for workers.
    #[arg(long, default_value_t = 600.0)]
    pub timeout: f64,
    #[arg(long)]
    pub no_validate_index: bool,
    #[arg(long, default_value = "local")]
    pub machine: String,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Chart path; `<stem>_total.svg`, `<stem>_speedup.svg` and per-rank
    /// charts are written next to it.
    #[arg(long)]
    pub plot: PathBuf,
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WorkerArgs {
    /// Task description as JSON.
    #[arg(long)]
    pub task: String,
}

fn parse_strategy(s: &str) -> std::result::Result<Strategy, String> {
    s.parse::<Strategy>().map_err(|e| e.to_string())
}

/// Parses `std::env::args` and runs the command; returns the exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .target(env_logger::Target::Stderr)
        .try_init();

    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(Error::InvalidArgument(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(cli, a),
        Command::Split(a) => cmd_split(cli, a),
        Command::Convert(a) => cmd_convert(a),
        Command::Bench(a) => cmd_bench(cli, a),
        Command::Report(a) => cmd_report(a),
        Command::Worker(a) => cmd_worker(a),
    }
}

fn cmd_generate(cli: &Cli, a: &GenerateArgs) -> Result<()> {
    let mut spec = SyntheticSpec::new(a.frames, a.atoms, cli.seed);
    if let Some(m) = a.mobile {
        spec.n_mobile = m;
    }
    let format = match a.format {
        FormatArg::Seq => OutputFormat::Seq,
        FormatArg::Dense => OutputFormat::Dense,
    };
    let n = generate_synthetic(&spec, &a.path, format, a.precision)?;
    println!(
        "wrote {n} frames of {} atoms to {} (topology {})",
        a.atoms,
        a.path.display(),
        topology_path(&a.path).display()
    );
    Ok(())
}

fn split_dir(cli: &Cli, src: &Path) -> PathBuf {
    if let Some(out) = &cli.out {
        return out.clone();
    }
    if let Some(tmp) = std::env::var_os(TMPDIR_ENV) {
        return PathBuf::from(tmp);
    }
    src.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn cmd_split(cli: &Cli, a: &SplitArgs) -> Result<()> {
    let dir = split_dir(cli, &a.src);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let outcome = split_trajectory(&a.src, a.segments, &dir)?;
    for (path, n) in outcome.segments.iter().zip(&outcome.frames_per_segment) {
        println!("{}\t{n}", path.display());
    }
    println!("split time: {:.6} s", outcome.elapsed);
    Ok(())
}

fn cmd_convert(a: &ConvertArgs) -> Result<()> {
    let system = read_topology(&a.topology)?;
    let n = convert_seq_to_dense(&a.src, &system, &a.dst)?;
    write_topology(&system, topology_path(&a.dst))?;
    println!("wrote {n} frames of {} atoms to {}", system.n_mobile(), a.dst.display());
    Ok(())
}

fn base_config(cli: &Cli, a: &BenchArgs) -> Result<StrategyConfig> {
    let mut config = if a.strategy == Strategy::InMemory {
        let (Some(frames), Some(atoms)) = (a.frames, a.atoms) else {
            return Err(Error::invalid("in_memory needs --frames and --atoms"));
        };
        let mut spec = SyntheticSpec::new(frames, atoms, cli.seed);
        if let Some(m) = a.mobile {
            spec.n_mobile = m;
        }
        let mut c = StrategyConfig::in_memory(spec);
        c.topology = a.topology.clone();
        c
    } else {
        let topology = match &a.topology {
            Some(t) => t.clone(),
            None => {
                let first = a
                    .trajectories
                    .first()
                    .ok_or_else(|| Error::invalid(format!("{} needs a trajectory", a.strategy)))?;
                topology_path(first)
            }
        };
        StrategyConfig::new(a.strategy, a.trajectories.clone(), Some(topology))
    };
    config.workload_factor = a.workload;
    config.validate_index = !a.no_validate_index;
    Ok(config)
}

fn check_run(out: &RunOutput) -> Result<()> {
    for t in &out.timings {
        t.check_identities()
            .map_err(|e| Error::invalid(format!("rank {}: timing identity violated: {e}", t.rank)))?;
    }
    Ok(())
}

fn cmd_bench(cli: &Cli, a: &BenchArgs) -> Result<()> {
    if a.repeats == 0 {
        return Err(Error::invalid("--repeats must be at least 1"));
    }
    if a.workers.is_empty() || a.workers.contains(&0) {
        return Err(Error::invalid("--workers must list positive counts"));
    }
    let base = base_config(cli, a)?;
    let serial_config = if base.strategy == Strategy::Subfile {
        base.clone().with_workers(base.trajectories.len())
    } else {
        base.clone()
    };
    serial_config.validate()?;
    for &n in &a.workers {
        if n > 1 {
            base.clone().with_workers(n).validate()?;
        }
    }
    let mut engine = EngineOptions::current_exe()?;
    engine.timeout = Duration::from_secs_f64(a.timeout);

    let mut serial = BenchRun {
        strategy: base.strategy,
        n_workers: 1,
        workload_factor: a.workload,
        n_frames_total: 0,
        repeats: Vec::with_capacity(a.repeats),
    };
    for r in 0..a.repeats {
        let out = run_serial(&serial_config)?;
        check_run(&out)?;
        info!("serial repeat {r}: t_total {:.6} s", out.timings[0].t_n);
        serial.n_frames_total = out.rmsd.len();
        serial.repeats.push(RepeatRecord {
            timings: out.timings,
            rmsd: out.rmsd,
        });
    }
    let reference = serial.repeats[0].rmsd.clone();

    let mut runs = Vec::with_capacity(a.workers.len());
    for &n in &a.workers {
        if n == 1 {
            runs.push(serial.clone());
            continue;
        }
        let config = base.clone().with_workers(n);
        let mut run = BenchRun {
            strategy: base.strategy,
            n_workers: n,
            workload_factor: a.workload,
            n_frames_total: reference.len(),
            repeats: Vec::with_capacity(a.repeats),
        };
        for r in 0..a.repeats {
            let out = run_parallel(&config, &engine)?;
            check_run(&out)?;
            let max_diff = out
                .rmsd
                .iter()
                .zip(&reference)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            if out.rmsd.len() != reference.len() || max_diff > 1e-9 {
                warn!("N={n} repeat {r}: RMSD differs from serial by up to {max_diff:e}");
            }
            info!(
                "N={n} repeat {r}: t_total {:.6} s",
                out.timings.iter().map(|t| t.t_n).fold(0.0, f64::max)
            );
            run.repeats.push(RepeatRecord {
                timings: out.timings,
                rmsd: out.rmsd,
            });
        }
        runs.push(run);
    }

    let policy = match a.policy {
        PolicyArg::Median => StragglerPolicy::MedianFactor(a.factor.unwrap_or(1.5)),
        PolicyArg::FastestGroup => StragglerPolicy::FastestGroupFactor(a.factor.unwrap_or(2.0)),
    };
    let options = ReportOptions {
        machine: a.machine.clone(),
        policy,
    };
    let report = emit_report(&serial, &runs, &options)?;
    for p in &report.points {
        let product = p.speedup * p.t_total_mean;
        if (product - report.serial.t_total).abs() > 1e-12 * report.serial.t_total {
            return Err(Error::invalid(format!(
                "N={}: S·t_total = {product} differs from t_serial = {}",
                p.n_workers, report.serial.t_total
            )));
        }
    }

    match &a.report {
        Some(path) => report.write_json(path)?,
        None => {
            let mut stdout = io::stdout().lock();
            writeln!(stdout, "{}", report.to_json()?).map_err(|e| Error::io("stdout", e))?;
        }
    }
    if let Some(path) = &a.csv {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        write_csv(&runs, io::BufWriter::new(file))?;
    }
    for p in &report.points {
        eprintln!(
            "N={:<4} t_total {:>10.4} ± {:.4} s  S {:>6.2}  E {:>5.2}  stragglers {}",
            p.n_workers,
            p.t_total_mean,
            p.t_total_std,
            p.speedup,
            p.efficiency,
            p.stragglers.len()
        );
    }
    eprintln!("R_comp/IO = {}: {}", report.serial.r_comp_io, report.advice.summary);
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let reports = a
        .reports
        .iter()
        .map(|p| BenchReport::read_json(p))
        .collect::<Result<Vec<_>>>()?;
    for path in emit_plots(&reports, &a.plot)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_worker(a: &WorkerArgs) -> Result<()> {
    let task: WorkerTask = serde_json::from_str(&a.task)?;
    let stdin = io::stdin();
    let stdout = io::stdout();
    let mut input = stdin.lock();
    let mut output = stdout.lock();
    run_worker(&task, &mut input, &mut output)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_bench_flags() {
        let cli = Cli::try_parse_from([
            "trajbench", "bench", "--strategy", "subfile", "--workers", "2,4", "--repeats", "3", "a.seq", "b.seq",
        ])
        .unwrap();
        let Command::Bench(b) = cli.command else { panic!() };
        assert_eq!(b.strategy, Strategy::Subfile);
        assert_eq!(b.workers, vec![2, 4]);
        assert_eq!(b.repeats, 3);
        assert_eq!(b.workload, 1);
        assert_eq!(b.trajectories.len(), 2);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_from(["trajbench", "generate", "--bogus"]), EXIT_USAGE);
        assert_eq!(run_from(["trajbench", "bench", "--strategy", "nope"]), EXIT_USAGE);
        assert_eq!(run_from(["trajbench"]), EXIT_USAGE);
    }

    #[test]
    fn runtime_errors_exit_two() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("missing.seq");
        let code = run_from([
            "trajbench".as_ref(),
            "split".as_ref(),
            "--segments".as_ref(),
            "2".as_ref(),
            missing.as_os_str(),
        ]);
        assert_eq!(code, EXIT_RUNTIME);
    }
}
