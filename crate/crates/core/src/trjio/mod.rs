//! Trajectory storage formats and tooling.

pub mod chain;
pub mod codec;
pub mod dense;
pub mod seq;
pub mod tools;
pub mod topology;

use crate::error::Result;
use crate::model::CoordFrame;

pub use chain::{chain_open, ChainOptions, ChainReader};
pub use dense::{dense_read_frame, DenseReader, DenseWriter};
pub use seq::{
    load_or_build_index, seq_build_index, seq_read_all, seq_validate_index, seq_write,
    OffsetIndex, SegmentReader, SeqReader, SeqWriter, DEFAULT_PRECISION,
};
pub use tools::{convert_seq_to_dense, split_trajectory, SplitOutcome};
pub use topology::{read_topology, write_topology};

/// A trajectory that can hand out decoded frames by index.
pub trait FrameSource {
    fn n_frames(&self) -> usize;
    fn n_atoms(&self) -> usize;
    fn read_frame(&mut self, index: usize) -> Result<CoordFrame>;

    /// False for sources that hold their frames in memory.
    fn performs_io(&self) -> bool {
        true
    }
}

impl<S: FrameSource + ?Sized> FrameSource for Box<S> {
    fn n_frames(&self) -> usize {
        (**self).n_frames()
    }

    fn n_atoms(&self) -> usize {
        (**self).n_atoms()
    }

    fn read_frame(&mut self, index: usize) -> Result<CoordFrame> {
        (**self).read_frame(index)
    }

    fn performs_io(&self) -> bool {
        (**self).performs_io()
    }
}

/// Reads frame `i` of a SEQ file through an already loaded offset index.
pub fn seq_read_frame(path: impl AsRef<std::path::Path>, index: &OffsetIndex, i: usize) -> Result<CoordFrame> {
    SeqReader::with_index(path, index.clone())?.read_frame(i)
}
