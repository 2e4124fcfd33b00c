//! Split-apply-combine executor.
//!
//! The orchestrator splits the frames into one contiguous block per rank,
//! starts one worker process per rank, and assembles the gathered results in
//! rank order. Each worker opens its view of the trajectory according to the
//! strategy, runs [`block_rmsd`] over its block and sends a
//! [`wire::GatherMessage`] back.

pub mod synth;
pub mod wire;
mod worker;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{decompose_blocks, BlockAssignment, RankTiming, Strategy, System};
use crate::rmsd::block_rmsd;
use crate::trjio::{
    load_or_build_index, read_topology, ChainOptions, ChainReader, DenseReader, FrameSource,
    SegmentReader, SeqReader,
};

pub use synth::{generate_synthetic, InMemorySource, OutputFormat, SyntheticSpec};
pub use worker::{run_worker, WorkerTask};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(600);

/// Everything needed to run one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    /// SEQ file (shared_seq), segments (subfile, chain) or DENSE file
    /// (dense_parallel). Empty for in_memory.
    pub trajectories: Vec<PathBuf>,
    pub topology: Option<PathBuf>,
    pub n_workers: usize,
    pub workload_factor: usize,
    /// Required for in_memory.
    pub synthetic: Option<SyntheticSpec>,
    /// Check offset indexes against their files when opening.
    pub validate_index: bool,
}

impl StrategyConfig {
    pub fn new(strategy: Strategy, trajectories: Vec<PathBuf>, topology: Option<PathBuf>) -> Self {
        Self {
            strategy,
            trajectories,
            topology,
            n_workers: 1,
            workload_factor: 1,
            synthetic: None,
            validate_index: true,
        }
    }

    pub fn in_memory(spec: SyntheticSpec) -> Self {
        Self {
            synthetic: Some(spec),
            ..Self::new(Strategy::InMemory, Vec::new(), None)
        }
    }

    pub fn with_workers(mut self, n: usize) -> Self {
        self.n_workers = n;
        self
    }

    pub fn with_workload(mut self, x: usize) -> Self {
        self.workload_factor = x;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_workers == 0 {
            return Err(Error::invalid("n_workers must be at least 1"));
        }
        if self.workload_factor == 0 {
            return Err(Error::invalid("workload factor must be at least 1"));
        }
        let n_paths = self.trajectories.len();
        match self.strategy {
            Strategy::SharedSeq | Strategy::DenseParallel if n_paths != 1 => {
                return Err(Error::invalid(format!(
                    "{} takes exactly one trajectory, got {n_paths}",
                    self.strategy
                )))
            }
            Strategy::Subfile if n_paths != self.n_workers => {
                return Err(Error::invalid(format!(
                    "subfile needs one segment per worker: {n_paths} segments, {} workers",
                    self.n_workers
                )))
            }
            Strategy::Chain if n_paths == 0 => {
                return Err(Error::invalid("chain needs at least one segment"))
            }
            Strategy::InMemory if self.synthetic.is_none() => {
                return Err(Error::invalid(
                    "in_memory needs a seed and frame/atom counts",
                ))
            }
            _ => {}
        }
        if self.strategy != Strategy::InMemory && self.topology.is_none() {
            return Err(Error::invalid(format!("{} needs a topology", self.strategy)));
        }
        Ok(())
    }
}

/// Resolved inputs shared by the serial and parallel paths.
#[derive(Debug, Clone)]
struct Prepared {
    system: System,
    n_frames: usize,
}

/// Loads the topology, builds any missing offset indexes, and counts frames.
/// Runs once in the orchestrator before any worker starts.
fn prepare(config: &StrategyConfig) -> Result<Prepared> {
    config.validate()?;
    let load_system = || match &config.topology {
        Some(path) => read_topology(path),
        None => Err(Error::invalid("missing topology")),
    };
    let (system, n_frames) = match config.strategy {
        Strategy::InMemory => {
            let spec = config.synthetic.expect("validated");
            let system = match &config.topology {
                Some(path) => read_topology(path)?,
                None => spec.system()?,
            };
            (system, spec.n_frames)
        }
        Strategy::SharedSeq | Strategy::Subfile | Strategy::Chain => {
            let mut n = 0;
            for path in &config.trajectories {
                n += load_or_build_index(path, true)?.n_frames();
            }
            (load_system()?, n)
        }
        Strategy::DenseParallel => {
            let reader = DenseReader::open(&config.trajectories[0])?;
            let system = load_system()?;
            let system = if reader.n_atoms() == system.n_atoms() {
                system
            } else if reader.n_atoms() == system.n_mobile() {
                system.mobile_only()
            } else {
                return Err(Error::invalid(format!(
                    "dense file stores {} atoms; topology has {} atoms, {} mobile",
                    reader.n_atoms(),
                    system.n_atoms(),
                    system.n_mobile()
                )));
            };
            (system, reader.n_frames())
        }
    };
    if system.n_mobile() < 3 {
        return Err(Error::invalid("superposition needs at least 3 mobile atoms"));
    }
    Ok(Prepared { system, n_frames })
}

/// Opens the trajectory view one rank uses for `block`.
fn open_view(config: &StrategyConfig, block: BlockAssignment) -> Result<Box<dyn FrameSource>> {
    let options = ChainOptions {
        validate_index: config.validate_index,
    };
    Ok(match config.strategy {
        Strategy::SharedSeq => Box::new(SeqReader::open(&config.trajectories[0], config.validate_index)?),
        Strategy::Subfile => Box::new(SegmentReader::open(
            &config.trajectories[block.rank],
            block.start,
            block.len(),
        )?),
        Strategy::DenseParallel => Box::new(DenseReader::open(&config.trajectories[0])?),
        Strategy::Chain => Box::new(ChainReader::open(&config.trajectories, options)?),
        Strategy::InMemory => {
            let spec = config.synthetic.as_ref().expect("validated");
            Box::new(InMemorySource::generate(spec, block))
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    /// RMSD per frame, nm, in frame order.
    pub rmsd: Vec<f64>,
    /// Frame times, ps.
    pub times: Vec<f64>,
    /// One record per rank, in rank order.
    pub timings: Vec<RankTiming>,
    pub fallback_frames: usize,
}

/// Runs the whole trajectory as a single block in this process. `t_comm` is
/// zero.
pub fn run_serial(config: &StrategyConfig) -> Result<RunOutput> {
    let prepared = prepare(config)?;
    let block = BlockAssignment {
        rank: 0,
        start: 0,
        stop: prepared.n_frames,
    };
    let out = match config.strategy {
        // A serial run over segments reads them all through one chain.
        Strategy::Subfile => {
            let options = ChainOptions {
                validate_index: config.validate_index,
            };
            block_rmsd(
                || ChainReader::open(&config.trajectories, options),
                &prepared.system,
                block,
                config.workload_factor,
            )?
        }
        Strategy::InMemory => {
            let source = open_view(config, block)?;
            block_rmsd(|| Ok(source), &prepared.system, block, config.workload_factor)?
        }
        _ => block_rmsd(
            || open_view(config, block),
            &prepared.system,
            block,
            config.workload_factor,
        )?,
    };
    let timing = RankTiming::from_raw(0, out.timing, 0.0);
    Ok(RunOutput {
        rmsd: out.results.iter().map(|r| r.rmsd).collect(),
        times: out.results.iter().map(|r| r.time).collect(),
        timings: vec![timing],
        fallback_frames: out.fallback_frames,
    })
}

/// How worker processes are started.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineOptions {
    /// Executable that understands `worker --task <json>`.
    pub worker_exe: PathBuf,
    pub timeout: Duration,
}

impl EngineOptions {
    pub fn new(worker_exe: impl Into<PathBuf>) -> Self {
        Self {
            worker_exe: worker_exe.into(),
            timeout: DEFAULT_TIMEOUT,
        }
    }

    /// Uses the running executable as the worker.
    pub fn current_exe() -> Result<Self> {
        let exe = std::env::current_exe().map_err(|e| Error::io("current executable", e))?;
        Ok(Self::new(exe))
    }
}

enum Event {
    Gather(usize, wire::GatherMessage),
    Comm(usize, wire::CommReport),
    Failed(usize, String),
}

struct WorkerHandle {
    child: Child,
    stdin: Option<ChildStdin>,
    stderr: Option<thread::JoinHandle<String>>,
}

impl WorkerHandle {
    fn stderr_text(&mut self) -> String {
        self.stderr
            .take()
            .and_then(|h| h.join().ok())
            .unwrap_or_default()
            .trim()
            .to_string()
    }
}

fn kill_all(workers: &mut [WorkerHandle]) {
    for w in workers.iter_mut() {
        let _ = w.child.kill();
        let _ = w.child.wait();
    }
}

/// Runs `config` with one worker process per rank and gathers the results on
/// this process.
pub fn run_parallel(config: &StrategyConfig, options: &EngineOptions) -> Result<RunOutput> {
    let prepared = prepare(config)?;
    let blocks = decompose_blocks(prepared.n_frames, config.n_workers)?;
    if config.strategy == Strategy::Subfile {
        for (block, path) in blocks.iter().zip(&config.trajectories) {
            let len = load_or_build_index(path, true)?.n_frames();
            if len != block.len() {
                return Err(Error::invalid(format!(
                    "segment {} holds {len} frames, rank {} owns {}",
                    path.display(),
                    block.rank,
                    block.len()
                )));
            }
        }
    }

    let (tx, rx) = mpsc::channel::<Event>();
    let mut workers = Vec::with_capacity(blocks.len());
    for block in &blocks {
        let task = WorkerTask {
            config: config.clone(),
            block: *block,
            system: worker::SystemSpec::from_system(&prepared.system),
        };
        let json = serde_json::to_string(&task)?;
        let spawned = Command::new(&options.worker_exe)
            .arg("worker")
            .arg("--task")
            .arg(&json)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn();
        let mut child = match spawned {
            Ok(c) => c,
            Err(e) => {
                kill_all(&mut workers);
                return Err(Error::Worker {
                    rank: block.rank,
                    cause: format!("spawn {}: {e}", options.worker_exe.display()),
                });
            }
        };
        let rank = block.rank;
        let mut stdout = child.stdout.take().expect("piped");
        let mut stderr = child.stderr.take().expect("piped");
        let tx = tx.clone();
        thread::spawn(move || {
            let event = match wire::GatherMessage::read_from(&mut stdout) {
                Ok(Some(msg)) => Event::Gather(rank, msg),
                Ok(None) => Event::Failed(rank, "exited without sending results".into()),
                Err(e) => Event::Failed(rank, e.to_string()),
            };
            let failed = matches!(event, Event::Failed(..));
            if tx.send(event).is_err() || failed {
                return;
            }
            let event = match wire::CommReport::read_from(&mut stdout) {
                Ok(Some(report)) => Event::Comm(rank, report),
                Ok(None) => Event::Failed(rank, "exited before reporting t_comm".into()),
                Err(e) => Event::Failed(rank, e.to_string()),
            };
            let _ = tx.send(event);
        });
        let stderr_reader = thread::spawn(move || {
            let mut s = String::new();
            let _ = std::io::Read::read_to_string(&mut stderr, &mut s);
            s
        });
        workers.push(WorkerHandle {
            stdin: child.stdin.take(),
            child,
            stderr: Some(stderr_reader),
        });
    }
    drop(tx);

    let deadline = Instant::now() + options.timeout;
    let mut gathered: Vec<Option<wire::GatherMessage>> = vec![None; blocks.len()];
    let mut comm: Vec<Option<f64>> = vec![None; blocks.len()];
    let mut pending = 2 * blocks.len();
    while pending > 0 {
        let left = deadline.saturating_duration_since(Instant::now());
        let event = match rx.recv_timeout(left) {
            Ok(e) => e,
            Err(mpsc::RecvTimeoutError::Timeout) => {
                kill_all(&mut workers);
                return Err(Error::Timeout(options.timeout.as_secs_f64()));
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                kill_all(&mut workers);
                return Err(Error::Worker {
                    rank: 0,
                    cause: "result channel closed early".into(),
                });
            }
        };
        let failure = match event {
            Event::Gather(rank, msg) => {
                let block = blocks[rank];
                if msg.status != wire::STATUS_OK {
                    Some((rank, format!("reported status {}", msg.status)))
                } else if msg.rank != rank || msg.start != block.start || msg.stop != block.stop {
                    Some((rank, format!("sent block [{}, {}) for rank {}", msg.start, msg.stop, msg.rank)))
                } else {
                    let ack = workers[rank]
                        .stdin
                        .as_mut()
                        .expect("stdin open until ack")
                        .write_all(&[wire::ACK])
                        .and_then(|_| workers[rank].stdin.as_mut().unwrap().flush());
                    workers[rank].stdin = None;
                    gathered[rank] = Some(msg);
                    pending -= 1;
                    ack.err().map(|e| (rank, format!("ack failed: {e}")))
                }
            }
            Event::Comm(rank, report) => {
                if report.rank != rank || !(report.t_comm >= 0.0) {
                    Some((rank, "malformed comm report".to_string()))
                } else {
                    comm[rank] = Some(report.t_comm);
                    pending -= 1;
                    None
                }
            }
            Event::Failed(rank, cause) => Some((rank, cause)),
        };
        if let Some((rank, cause)) = failure {
            let _ = workers[rank].child.wait();
            let stderr = workers[rank].stderr_text();
            kill_all(&mut workers);
            let cause = if stderr.is_empty() { cause } else { format!("{cause}: {stderr}") };
            return Err(Error::Worker { rank, cause });
        }
    }

    for (rank, w) in workers.iter_mut().enumerate() {
        let status = w.child.wait().map_err(|e| Error::Worker {
            rank,
            cause: e.to_string(),
        })?;
        let stderr = w.stderr_text();
        if !status.success() {
            return Err(Error::Worker {
                rank,
                cause: format!("exited with {status}: {stderr}"),
            });
        }
        if !stderr.is_empty() {
            log::debug!("rank {rank}: {stderr}");
        }
    }

    let mut out = RunOutput {
        rmsd: vec![0.0; prepared.n_frames],
        times: vec![0.0; prepared.n_frames],
        timings: Vec::with_capacity(blocks.len()),
        fallback_frames: 0,
    };
    for (block, (msg, t_comm)) in blocks.iter().zip(gathered.into_iter().zip(comm)) {
        let msg = msg.expect("all gathered");
        out.rmsd[block.frames()].copy_from_slice(&msg.rmsd);
        out.times[block.frames()].copy_from_slice(&msg.times);
        let mut timing = RankTiming::from_raw(block.rank, msg.timing.raw(), 0.0);
        timing.set_comm(t_comm.expect("all reported"));
        out.timings.push(timing);
    }
    Ok(out)
}

/// Builds each path's offset index unless a valid one exists.
pub fn ensure_indexes(paths: &[impl AsRef<Path>]) -> Result<()> {
    for p in paths {
        load_or_build_index(p, true)?;
    }
    Ok(())
}
