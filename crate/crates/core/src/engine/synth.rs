//! Deterministic synthetic trajectories.
//!
//! Frame `i` of a trajectory seeded with `seed` is drawn from its own ChaCha
//! stream, so any block can be generated without producing the frames before
//! it.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BlockAssignment, CoordFrame, System};
use crate::trjio::topology::{topology_path, write_topology};
use crate::trjio::{DenseWriter, FrameSource, SeqWriter};

/// Edge of the cubic box the coordinates are drawn from, nm.
pub const SYNTHETIC_BOX_NM: f64 = 10.0;
/// Time between frames, ps.
pub const SYNTHETIC_DT_PS: f64 = 1.0;
/// Mobile selection size used when none is given.
pub const DEFAULT_MOBILE_ATOMS: usize = 146;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_frames: usize,
    pub n_atoms: usize,
    pub n_mobile: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(n_frames: usize, n_atoms: usize, seed: u64) -> Self {
        Self {
            n_frames,
            n_atoms,
            n_mobile: n_atoms.min(DEFAULT_MOBILE_ATOMS),
            seed,
        }
    }

    pub fn frame(&self, i: usize) -> CoordFrame {
        synthetic_frame(self.seed, self.n_atoms, i)
    }

    pub fn system(&self) -> Result<System> {
        synthetic_system(self.seed, self.n_atoms, self.n_mobile)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Seq,
    Dense,
}

pub fn synthetic_frame(seed: u64, n_atoms: usize, i: usize) -> CoordFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    let positions = (0..n_atoms)
        .map(|_| {
            [
                rng.gen_range(0.0..SYNTHETIC_BOX_NM),
                rng.gen_range(0.0..SYNTHETIC_BOX_NM),
                rng.gen_range(0.0..SYNTHETIC_BOX_NM),
            ]
        })
        .collect();
    let l = SYNTHETIC_BOX_NM;
    CoordFrame {
        frame_index: i,
        time: i as f64 * SYNTHETIC_DT_PS,
        box_vectors: [[l, 0.0, 0.0], [0.0, l, 0.0], [0.0, 0.0, l]],
        positions,
    }
}

/// `n_mobile` indices spread evenly over `0..n_atoms`.
pub fn spread_indices(n_atoms: usize, n_mobile: usize) -> Vec<usize> {
    (0..n_mobile).map(|k| k * n_atoms / n_mobile).collect()
}

/// The system whose reference is the mobile selection of frame 0.
pub fn synthetic_system(seed: u64, n_atoms: usize, n_mobile: usize) -> Result<System> {
    if n_mobile > n_atoms {
        return Err(Error::invalid(format!(
            "cannot select {n_mobile} mobile atoms out of {n_atoms}"
        )));
    }
    let mobile = spread_indices(n_atoms, n_mobile);
    let frame0 = synthetic_frame(seed, n_atoms, 0);
    let reference = mobile.iter().map(|&i| frame0.positions[i]).collect();
    System::new(n_atoms, vec!["CA".to_string(); n_mobile], mobile, reference)
}

/// Writes a synthetic trajectory and its topology sidecar
/// (`<path>.top`); returns the frame count. DENSE output stores every atom.
pub fn generate_synthetic(
    spec: &SyntheticSpec,
    path: impl AsRef<Path>,
    format: OutputFormat,
    precision: f64,
) -> Result<usize> {
    let path = path.as_ref();
    let system = spec.system()?;
    let count = match format {
        OutputFormat::Seq => {
            let mut w = SeqWriter::create(path, precision)?;
            for i in 0..spec.n_frames {
                w.write_frame(&spec.frame(i))?;
            }
            w.finish()?
        }
        OutputFormat::Dense => {
            let mut w = DenseWriter::create(path, spec.n_frames, spec.n_atoms)?;
            for i in 0..spec.n_frames {
                let f = spec.frame(i);
                w.push(f.time, f.positions.into_iter())?;
            }
            w.finish()?
        }
    };
    write_topology(&system, topology_path(path))?;
    Ok(count)
}

/// Frames of one block held in memory. Reads perform no I/O.
pub struct InMemorySource {
    start: usize,
    n_frames_total: usize,
    n_atoms: usize,
    frames: Vec<CoordFrame>,
}

impl InMemorySource {
    pub fn generate(spec: &SyntheticSpec, block: BlockAssignment) -> Self {
        Self {
            start: block.start,
            n_frames_total: spec.n_frames,
            n_atoms: spec.n_atoms,
            frames: block.frames().map(|i| spec.frame(i)).collect(),
        }
    }
}

impl FrameSource for InMemorySource {
    fn n_frames(&self) -> usize {
        self.n_frames_total
    }

    fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    fn read_frame(&mut self, i: usize) -> Result<crate::model::CoordFrame> {
        i.checked_sub(self.start)
            .and_then(|k| self.frames.get(k))
            .cloned()
            .ok_or(Error::FrameOutOfRange {
                index: i,
                n_frames: self.n_frames_total,
            })
    }

    fn performs_io(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trjio::{seq_read_all, topology::read_topology};

    #[test]
    fn frames_are_deterministic_and_in_box() {
        let a = synthetic_frame(5, 20, 3);
        assert_eq!(a, synthetic_frame(5, 20, 3));
        assert_ne!(a.positions, synthetic_frame(6, 20, 3).positions);
        assert_ne!(a.positions, synthetic_frame(5, 20, 4).positions);
        assert!(a
            .positions
            .iter()
            .flatten()
            .all(|&c| (0.0..SYNTHETIC_BOX_NM).contains(&c)));
    }

    #[test]
    fn same_seed_same_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SyntheticSpec::new(7, 30, 11);
        let a = dir.path().join("a.seq");
        let b = dir.path().join("b.seq");
        let c = dir.path().join("c.seq");
        generate_synthetic(&spec, &a, OutputFormat::Seq, 1000.0).unwrap();
        generate_synthetic(&spec, &b, OutputFormat::Seq, 1000.0).unwrap();
        generate_synthetic(&SyntheticSpec { seed: 12, ..spec }, &c, OutputFormat::Seq, 1000.0)
            .unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
    }

    #[test]
    fn minimal_file_decodes() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SyntheticSpec::new(1, 5, 3);
        let p = dir.path().join("one.seq");
        assert_eq!(generate_synthetic(&spec, &p, OutputFormat::Seq, 1000.0).unwrap(), 1);
        let frames = seq_read_all(&p).unwrap();
        assert_eq!(frames.len(), 1);
        for (a, b) in frames[0].positions.iter().zip(&spec.frame(0).positions) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() <= 0.0005 + 1e-12);
            }
        }
        let system = read_topology(topology_path(&p)).unwrap();
        assert_eq!(system, spec.system().unwrap());
    }

    #[test]
    fn mobile_selection_is_spread() {
        assert_eq!(spread_indices(10, 5), vec![0, 2, 4, 6, 8]);
        let s = spread_indices(341, 146);
        assert_eq!(s.len(), 146);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert!(synthetic_system(1, 3, 4).is_err());
    }

    #[test]
    fn in_memory_block() {
        let spec = SyntheticSpec::new(10, 4, 2);
        let block = BlockAssignment { rank: 1, start: 4, stop: 7 };
        let mut src = InMemorySource::generate(&spec, block);
        assert!(!src.performs_io());
        assert_eq!(src.read_frame(5).unwrap(), spec.frame(5));
        assert!(src.read_frame(3).is_err());
        assert!(src.read_frame(7).is_err());
    }
}
