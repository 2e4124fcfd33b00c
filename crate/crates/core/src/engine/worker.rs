use std::io::{Read, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BlockAssignment, RankTiming, Strategy, System, Vec3};
use crate::rmsd::block_rmsd;

use super::wire::{CommReport, GatherMessage, ACK, STATUS_OK};
use super::{open_view, StrategyConfig};

/// The analysed system as shipped to a worker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub n_atoms: usize,
    pub mobile_indices: Vec<usize>,
    pub reference_positions: Vec<Vec3>,
}

impl SystemSpec {
    pub fn from_system(system: &System) -> Self {
        Self {
            n_atoms: system.n_atoms(),
            mobile_indices: system.mobile_indices().to_vec(),
            reference_positions: system.reference_positions().to_vec(),
        }
    }

    pub fn to_system(&self) -> Result<System> {
        System::new(
            self.n_atoms,
            Vec::new(),
            self.mobile_indices.clone(),
            self.reference_positions.clone(),
        )
    }
}

/// What one worker process is asked to do.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerTask {
    pub config: StrategyConfig,
    pub block: BlockAssignment,
    pub system: SystemSpec,
}

/// Worker entry point: computes the block, sends the gather message on
/// `output`, waits for the acknowledgement on `input`, then reports the
/// time the send took.
///
/// On failure a message with a failed status is sent (best effort) and the
/// error is returned so the caller can report it and exit non-zero.
pub fn run_worker(task: &WorkerTask, input: &mut impl Read, output: &mut impl Write) -> Result<()> {
    let block = task.block;
    let message = match compute(task) {
        Ok(msg) => msg,
        Err(e) => {
            let _ = GatherMessage::failed(block).write_to(output);
            return Err(e);
        }
    };

    let send_start = Instant::now();
    message.write_to(output)?;
    let mut ack = [0u8; 1];
    input
        .read_exact(&mut ack)
        .map_err(|e| Error::Wire(format!("no acknowledgement from rank 0: {e}")))?;
    let t_comm = send_start.elapsed().as_secs_f64();
    if ack[0] != ACK {
        return Err(Error::Wire(format!("unexpected acknowledgement byte {:#x}", ack[0])));
    }
    CommReport {
        rank: block.rank,
        t_comm,
    }
    .write_to(output)
}

fn compute(task: &WorkerTask) -> Result<GatherMessage> {
    let system = task.system.to_system()?;
    let config = &task.config;
    let block = task.block;
    let out = if config.strategy == Strategy::InMemory {
        // Generation happens before any timer starts.
        let source = open_view(config, block)?;
        block_rmsd(|| Ok(source), &system, block, config.workload_factor)?
    } else {
        block_rmsd(|| open_view(config, block), &system, block, config.workload_factor)?
    };
    Ok(GatherMessage {
        rank: block.rank,
        start: block.start,
        stop: block.stop,
        rmsd: out.results.iter().map(|r| r.rmsd).collect(),
        times: out.results.iter().map(|r| r.time).collect(),
        timing: RankTiming::from_raw(block.rank, out.timing, 0.0),
        status: STATUS_OK,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::synth::SyntheticSpec;
    use crate::engine::wire::STATUS_FAILED;

    fn task(block: BlockAssignment) -> WorkerTask {
        let spec = SyntheticSpec::new(12, 20, 3);
        WorkerTask {
            config: StrategyConfig::in_memory(spec).with_workers(3),
            block,
            system: SystemSpec::from_system(&spec.system().unwrap()),
        }
    }

    #[test]
    fn in_process_worker_protocol() {
        let block = BlockAssignment { rank: 1, start: 4, stop: 8 };
        let mut out = Vec::new();
        run_worker(&task(block), &mut &[ACK][..], &mut out).unwrap();
        let mut r = out.as_slice();
        let msg = GatherMessage::read_from(&mut r).unwrap().unwrap();
        assert_eq!((msg.rank, msg.start, msg.stop), (1, 4, 8));
        assert_eq!(msg.rmsd.len(), 4);
        assert_eq!(msg.timing.t_io, 0.0);
        let report = CommReport::read_from(&mut r).unwrap().unwrap();
        assert_eq!(report.rank, 1);
        assert!(report.t_comm >= 0.0);
        assert!(r.is_empty());
    }

    #[test]
    fn missing_ack_is_an_error() {
        let block = BlockAssignment { rank: 0, start: 0, stop: 2 };
        let mut out = Vec::new();
        assert!(run_worker(&task(block), &mut &[][..], &mut out).is_err());
        assert!(run_worker(&task(block), &mut &[0u8][..], &mut Vec::new()).is_err());
    }

    #[test]
    fn failure_sends_failed_status() {
        let block = BlockAssignment { rank: 2, start: 10, stop: 14 };
        let mut out = Vec::new();
        assert!(run_worker(&task(block), &mut &[ACK][..], &mut out).is_err());
        let msg = GatherMessage::read_from(&mut out.as_slice()).unwrap().unwrap();
        assert_eq!(msg.status, STATUS_FAILED);
    }
}
