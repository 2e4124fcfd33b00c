//! Domain types shared by the engine, the trajectory formats and the metrics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cartesian position in nanometers.
pub type Vec3 = [f64; 3];

/// One trajectory frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordFrame {
    pub frame_index: usize,
    /// Picoseconds.
    pub time: f64,
    /// Unit cell vectors as rows, nanometers.
    pub box_vectors: [[f64; 3]; 3],
    pub positions: Vec<Vec3>,
}

impl CoordFrame {
    pub fn n_atoms(&self) -> usize {
        self.positions.len()
    }

    pub fn is_finite(&self) -> bool {
        self.positions.iter().flatten().all(|c| c.is_finite())
    }

    /// Copies the rows named by `indices` into `out`, reusing its allocation.
    pub fn select_into(&self, indices: &[usize], out: &mut Vec<Vec3>) {
        out.clear();
        out.extend(indices.iter().map(|&i| self.positions[i]));
    }
}

/// The analysed system: atom count, the mobile selection and its reference
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct System {
    n_atoms: usize,
    atom_names: Vec<String>,
    mobile_indices: Vec<usize>,
    reference_positions: Vec<Vec3>,
}

impl System {
    pub fn new(
        n_atoms: usize,
        atom_names: Vec<String>,
        mobile_indices: Vec<usize>,
        reference_positions: Vec<Vec3>,
    ) -> Result<Self> {
        if mobile_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("mobile indices must be strictly increasing"));
        }
        if let Some(&last) = mobile_indices.last() {
            if last >= n_atoms {
                return Err(Error::invalid(format!(
                    "mobile index {last} out of range for {n_atoms} atoms"
                )));
            }
        }
        if reference_positions.len() != mobile_indices.len() {
            return Err(Error::invalid(format!(
                "{} reference rows for {} mobile atoms",
                reference_positions.len(),
                mobile_indices.len()
            )));
        }
        if !atom_names.is_empty() && atom_names.len() != mobile_indices.len() {
            return Err(Error::invalid("atom name count does not match mobile count"));
        }
        if reference_positions.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite reference coordinate"));
        }
        Ok(Self {
            n_atoms,
            atom_names,
            mobile_indices,
            reference_positions,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn atom_names(&self) -> &[String] {
        &self.atom_names
    }

    pub fn mobile_indices(&self) -> &[usize] {
        &self.mobile_indices
    }

    pub fn n_mobile(&self) -> usize {
        self.mobile_indices.len()
    }

    pub fn reference_positions(&self) -> &[Vec3] {
        &self.reference_positions
    }

    /// The same selection seen through a file that stores only the mobile
    /// atoms, in order.
    pub fn mobile_only(&self) -> System {
        System {
            n_atoms: self.n_mobile(),
            atom_names: self.atom_names.clone(),
            mobile_indices: (0..self.n_mobile()).collect(),
            reference_positions: self.reference_positions.clone(),
        }
    }
}

/// Contiguous `[start, stop)` frame range owned by one rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockAssignment {
    pub rank: usize,
    pub start: usize,
    pub stop: usize,
}

impl BlockAssignment {
    pub fn len(&self) -> usize {
        self.stop - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.stop
    }

    pub fn frames(&self) -> std::ops::Range<usize> {
        self.start..self.stop
    }
}

/// Splits `n_frames_total` frames into `n_workers` contiguous blocks. The
/// first `n_frames_total % n_workers` ranks get one extra frame.
pub fn decompose_blocks(n_frames_total: usize, n_workers: usize) -> Result<Vec<BlockAssignment>> {
    if n_workers == 0 {
        return Err(Error::invalid("n_workers must be at least 1"));
    }
    let base = n_frames_total / n_workers;
    let extra = n_frames_total % n_workers;
    let mut start = 0;
    Ok((0..n_workers)
        .map(|rank| {
            let len = base + usize::from(rank < extra);
            let block = BlockAssignment {
                rank,
                start,
                stop: start + len,
            };
            start += len;
            block
        })
        .collect())
}

/// Derived overheads may dip below zero by clock noise, but no further.
pub const OVERHEAD_TOLERANCE: f64 = -1e-3;

/// Per-rank timing quantities of one run, in seconds.
///
/// `t_overhead1`, `t_overhead2` and `t_n` are derived from the raw fields and
/// are only ever set through [`RankTiming::from_raw`] and
/// [`RankTiming::set_comm`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RankTiming {
    pub rank: usize,
    pub t_opening_trajectory: f64,
    pub t_io: f64,
    pub t_comp: f64,
    pub t_end_loop: f64,
    pub t_all_frame: f64,
    pub t_rmsd: f64,
    pub t_comm: f64,
    pub t_overhead1: f64,
    pub t_overhead2: f64,
    pub t_n: f64,
    pub n_frames_processed: usize,
}

/// Raw measurements taken inside one block computation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RawTiming {
    pub t_opening_trajectory: f64,
    pub t_io: f64,
    pub t_comp: f64,
    pub t_end_loop: f64,
    pub t_all_frame: f64,
    pub t_rmsd: f64,
    pub n_frames_processed: usize,
}

impl RankTiming {
    pub fn from_raw(rank: usize, raw: RawTiming, t_comm: f64) -> Self {
        let mut timing = RankTiming {
            rank,
            t_opening_trajectory: raw.t_opening_trajectory,
            t_io: raw.t_io,
            t_comp: raw.t_comp,
            t_end_loop: raw.t_end_loop,
            t_all_frame: raw.t_all_frame,
            t_rmsd: raw.t_rmsd,
            t_comm: 0.0,
            t_overhead1: overhead1(raw.t_all_frame, raw.t_io, raw.t_comp, raw.t_end_loop),
            t_overhead2: overhead2(raw.t_rmsd, raw.t_all_frame, raw.t_opening_trajectory),
            t_n: 0.0,
            n_frames_processed: raw.n_frames_processed,
        };
        timing.set_comm(t_comm);
        timing
    }

    pub fn set_comm(&mut self, t_comm: f64) {
        self.t_comm = t_comm;
        self.t_n = self.t_rmsd + self.t_comm;
    }

    pub fn raw(&self) -> RawTiming {
        RawTiming {
            t_opening_trajectory: self.t_opening_trajectory,
            t_io: self.t_io,
            t_comp: self.t_comp,
            t_end_loop: self.t_end_loop,
            t_all_frame: self.t_all_frame,
            t_rmsd: self.t_rmsd,
            n_frames_processed: self.n_frames_processed,
        }
    }

    /// Checks the construction identities and sign constraints.
    pub fn check_identities(&self) -> std::result::Result<(), String> {
        if self.t_n != self.t_rmsd + self.t_comm {
            return Err(format!("rank {}: t_n != t_rmsd + t_comm", self.rank));
        }
        if self.t_overhead1 != overhead1(self.t_all_frame, self.t_io, self.t_comp, self.t_end_loop)
        {
            return Err(format!("rank {}: t_overhead1 identity violated", self.rank));
        }
        if self.t_overhead2 != overhead2(self.t_rmsd, self.t_all_frame, self.t_opening_trajectory) {
            return Err(format!("rank {}: t_overhead2 identity violated", self.rank));
        }
        let raw = [
            self.t_opening_trajectory,
            self.t_io,
            self.t_comp,
            self.t_end_loop,
            self.t_all_frame,
            self.t_rmsd,
            self.t_comm,
        ];
        if raw.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(format!("rank {}: negative or non-finite raw timing", self.rank));
        }
        if self.t_overhead1 < OVERHEAD_TOLERANCE || self.t_overhead2 < OVERHEAD_TOLERANCE {
            return Err(format!(
                "rank {}: overhead below clock tolerance ({}, {})",
                self.rank, self.t_overhead1, self.t_overhead2
            ));
        }
        Ok(())
    }
}

fn overhead1(t_all_frame: f64, t_io: f64, t_comp: f64, t_end_loop: f64) -> f64 {
    t_all_frame - t_io - t_comp - t_end_loop
}

fn overhead2(t_rmsd: f64, t_all_frame: f64, t_opening: f64) -> f64 {
    t_rmsd - t_all_frame - t_opening
}

/// How the ranks reach the trajectory data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Every rank opens the same SEQ file through its offset index.
    SharedSeq,
    /// Every rank opens its own pre-split SEQ segment.
    Subfile,
    /// Every rank reads its rows from one DENSE file at computed offsets.
    DenseParallel,
    /// Every rank opens all segments as one virtual trajectory.
    Chain,
    /// Synthetic coordinates generated in memory; no read I/O.
    InMemory,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::SharedSeq,
        Strategy::Subfile,
        Strategy::DenseParallel,
        Strategy::Chain,
        Strategy::InMemory,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::SharedSeq => "shared_seq",
            Strategy::Subfile => "subfile",
            Strategy::DenseParallel => "dense_parallel",
            Strategy::Chain => "chain",
            Strategy::InMemory => "in_memory",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown strategy '{s}'")))
    }
}

/// One repeat of a run: a timing record per rank and the gathered RMSD array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatRecord {
    pub timings: Vec<RankTiming>,
    pub rmsd: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRun {
    pub strategy: Strategy,
    pub n_workers: usize,
    pub workload_factor: usize,
    pub n_frames_total: usize,
    pub repeats: Vec<RepeatRecord>,
}

impl BenchRun {
    pub fn validate(&self) -> Result<()> {
        if self.workload_factor == 0 {
            return Err(Error::invalid("workload factor must be at least 1"));
        }
        for (i, rep) in self.repeats.iter().enumerate() {
            if rep.timings.len() != self.n_workers {
                return Err(Error::invalid(format!(
                    "repeat {i}: {} timing records for {} workers",
                    rep.timings.len(),
                    self.n_workers
                )));
            }
            if rep.rmsd.len() != self.n_frames_total {
                return Err(Error::invalid(format!(
                    "repeat {i}: {} RMSD values for {} frames",
                    rep.rmsd.len(),
                    self.n_frames_total
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ranges(blocks: &[BlockAssignment]) -> Vec<(usize, usize)> {
        blocks.iter().map(|b| (b.start, b.stop)).collect()
    }

    #[test]
    fn decompose_with_remainder() {
        let blocks = decompose_blocks(10, 3).unwrap();
        assert_eq!(ranges(&blocks), vec![(0, 4), (4, 7), (7, 10)]);
    }

    #[test]
    fn decompose_exact_division() {
        let blocks = decompose_blocks(2_512_200, 24).unwrap();
        assert_eq!(blocks.len(), 24);
        assert!(blocks.iter().all(|b| b.len() == 104_675));
        assert_eq!(blocks.last().unwrap().stop, 2_512_200);
    }

    #[test]
    fn decompose_more_workers_than_frames() {
        let blocks = decompose_blocks(3, 5).unwrap();
        assert_eq!(ranges(&blocks), vec![(0, 1), (1, 2), (2, 3), (3, 3), (3, 3)]);
        assert!(blocks[4].is_empty());
    }

    #[test]
    fn decompose_zero_workers() {
        assert!(matches!(decompose_blocks(10, 0), Err(Error::InvalidArgument(_))));
    }

    proptest! {
        #[test]
        fn decompose_covers_frames(t in 0usize..5000, n in 1usize..200) {
            let blocks = decompose_blocks(t, n).unwrap();
            prop_assert_eq!(blocks.len(), n);
            let sizes: Vec<usize> = blocks.iter().map(|b| b.len()).collect();
            prop_assert_eq!(sizes.iter().sum::<usize>(), t);
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let frames: Vec<usize> = blocks.iter().flat_map(|b| b.frames()).collect();
            prop_assert_eq!(frames, (0..t).collect::<Vec<_>>());
            for (rank, b) in blocks.iter().enumerate() {
                prop_assert_eq!(b.rank, rank);
            }
        }
    }

    #[test]
    fn timing_identities_hold_by_construction() {
        let raw = RawTiming {
            t_opening_trajectory: 0.013,
            t_io: 0.41,
            t_comp: 0.27,
            t_end_loop: 0.0007,
            t_all_frame: 0.6931,
            t_rmsd: 0.7102,
            n_frames_processed: 100,
        };
        let mut t = RankTiming::from_raw(2, raw, 0.003);
        t.check_identities().unwrap();
        assert_eq!(t.t_n, 0.7102 + 0.003);
        t.set_comm(0.5);
        t.check_identities().unwrap();
        assert_eq!(t.raw(), raw);
    }

    #[test]
    fn timing_rejects_negative_raw_values() {
        let raw = RawTiming {
            t_io: -0.1,
            ..RawTiming::default()
        };
        assert!(RankTiming::from_raw(0, raw, 0.0).check_identities().is_err());
    }

    #[test]
    fn system_validation() {
        let refs = vec![[0.0; 3]; 2];
        assert!(System::new(5, vec![], vec![1, 3], refs.clone()).is_ok());
        assert!(System::new(5, vec![], vec![3, 1], refs.clone()).is_err());
        assert!(System::new(5, vec![], vec![1, 1], refs.clone()).is_err());
        assert!(System::new(3, vec![], vec![1, 3], refs.clone()).is_err());
        assert!(System::new(5, vec![], vec![1, 2, 3], refs).is_err());
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in super::Strategy::ALL {
            assert_eq!(s.as_str().parse::<super::Strategy>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{s}\""));
        }
        assert!("mpi".parse::<super::Strategy>().is_err());
    }
}
