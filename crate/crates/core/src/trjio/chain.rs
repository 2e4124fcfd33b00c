use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::CoordFrame;

use super::seq::{load_or_build_index, SeqReader};
use super::FrameSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainOptions {
    /// Check every segment's offset index against its file before use.
    /// Disabling this skips the staleness check when many readers open the
    /// same segments concurrently.
    pub validate_index: bool,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            validate_index: true,
        }
    }
}

/// Several SEQ segments presented as one virtual trajectory.
///
/// Opening loads (or builds) the offset index of every segment and keeps a
/// handle to each, so the cost of opening grows with the segment count.
pub struct ChainReader {
    segments: Vec<SeqReader>,
    /// `starts[s]` is the global index of segment `s`'s first frame; the last
    /// entry is the total length.
    starts: Vec<usize>,
    n_atoms: usize,
}

impl ChainReader {
    pub fn open<P: AsRef<Path>>(paths: &[P], options: ChainOptions) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::invalid("chain needs at least one segment"));
        }
        let mut segments = Vec::with_capacity(paths.len());
        let mut starts = vec![0];
        let mut n_atoms = None;
        for path in paths {
            let path = path.as_ref();
            let index = load_or_build_index(path, options.validate_index)?;
            let reader = SeqReader::with_index(path, index)?;
            if reader.n_frames() > 0 {
                match n_atoms {
                    None => n_atoms = Some(reader.n_atoms()),
                    Some(n) if n != reader.n_atoms() => {
                        return Err(Error::invalid(format!(
                            "segment {} has {} atoms, chain has {n}",
                            path.display(),
                            reader.n_atoms()
                        )))
                    }
                    _ => {}
                }
            }
            starts.push(starts.last().unwrap() + reader.n_frames());
            segments.push(reader);
        }
        Ok(Self {
            segments,
            starts,
            n_atoms: n_atoms.unwrap_or(0),
        })
    }

    pub fn n_segments(&self) -> usize {
        self.segments.len()
    }

    pub fn segment_paths(&self) -> Vec<PathBuf> {
        self.segments.iter().map(|s| s.path().to_path_buf()).collect()
    }

    /// Maps a global frame index to `(segment, local index)`.
    pub fn locate(&self, global: usize) -> Option<(usize, usize)> {
        if global >= *self.starts.last().unwrap() {
            return None;
        }
        // Last segment whose start is <= global; empty segments are skipped
        // because their start equals the next one's.
        let s = self.starts.partition_point(|&start| start <= global) - 1;
        Some((s, global - self.starts[s]))
    }
}

impl FrameSource for ChainReader {
    fn n_frames(&self) -> usize {
        *self.starts.last().unwrap()
    }

    fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    fn read_frame(&mut self, i: usize) -> Result<CoordFrame> {
        let (s, local) = self.locate(i).ok_or(Error::FrameOutOfRange {
            index: i,
            n_frames: self.n_frames(),
        })?;
        let mut frame = self.segments[s].read_frame(local)?;
        frame.frame_index = i;
        Ok(frame)
    }
}

/// Opens `paths` as one virtual trajectory.
pub fn chain_open<P: AsRef<Path>>(paths: &[P], options: ChainOptions) -> Result<ChainReader> {
    ChainReader::open(paths, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trjio::seq::seq_write;

    fn frames(range: std::ops::Range<usize>, n: usize) -> Vec<CoordFrame> {
        range
            .map(|i| CoordFrame {
                frame_index: i,
                time: i as f64,
                box_vectors: [[0.0; 3]; 3],
                positions: (0..n).map(|a| [i as f64, a as f64, 0.5]).collect(),
            })
            .collect()
    }

    fn write_segments(dir: &Path, lens: &[usize], n_atoms: usize) -> Vec<PathBuf> {
        let mut start = 0;
        lens.iter()
            .enumerate()
            .map(|(k, &len)| {
                let p = dir.join(format!("s{k}.seq"));
                seq_write(&frames(start..start + len, n_atoms), 1000.0, &p).unwrap();
                start += len;
                p
            })
            .collect()
    }

    #[test]
    fn cumulative_mapping() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_segments(dir.path(), &[4, 3, 3], 2);
        let chain = chain_open(&paths, ChainOptions::default()).unwrap();
        assert_eq!(chain.n_frames(), 10);
        assert_eq!(chain.locate(5), Some((1, 1)));
        assert_eq!(chain.locate(0), Some((0, 0)));
        assert_eq!(chain.locate(3), Some((0, 3)));
        assert_eq!(chain.locate(9), Some((2, 2)));
        assert_eq!(chain.locate(10), None);
    }

    #[test]
    fn empty_segments_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_segments(dir.path(), &[2, 0, 0, 1], 2);
        let mut chain = chain_open(&paths, ChainOptions::default()).unwrap();
        assert_eq!(chain.locate(2), Some((3, 0)));
        let f = chain.read_frame(2).unwrap();
        assert_eq!(f.frame_index, 2);
        assert_eq!(f.positions[0][0], 2.0);
    }

    #[test]
    fn single_segment_matches_plain_reader() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_segments(dir.path(), &[6], 3);
        let mut chain = chain_open(&paths, ChainOptions::default()).unwrap();
        let mut plain = SeqReader::open(&paths[0], true).unwrap();
        for i in 0..6 {
            assert_eq!(chain.read_frame(i).unwrap(), plain.read_frame(i).unwrap());
        }
    }

    #[test]
    fn heterogeneous_atoms_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.seq");
        let b = dir.path().join("b.seq");
        seq_write(&frames(0..2, 3), 1000.0, &a).unwrap();
        seq_write(&frames(2..4, 4), 1000.0, &b).unwrap();
        assert!(matches!(
            chain_open(&[a, b], ChainOptions::default()),
            Err(Error::InvalidArgument(_))
        ));
        let none: [PathBuf; 0] = [];
        assert!(chain_open(&none, ChainOptions::default()).is_err());
    }

    #[test]
    fn validation_can_be_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_segments(dir.path(), &[3], 2);
        chain_open(&paths, ChainOptions::default()).unwrap();
        // Make the sidecar stale: with validation off the stale index is used.
        let f = std::fs::OpenOptions::new().write(true).open(&paths[0]).unwrap();
        f.set_modified(std::time::SystemTime::UNIX_EPOCH + std::time::Duration::from_secs(10))
            .unwrap();
        drop(f);
        let before = std::fs::read(crate::trjio::seq::index_path(&paths[0])).unwrap();
        chain_open(&paths, ChainOptions { validate_index: false }).unwrap();
        assert_eq!(std::fs::read(crate::trjio::seq::index_path(&paths[0])).unwrap(), before);
        chain_open(&paths, ChainOptions { validate_index: true }).unwrap();
        assert_ne!(std::fs::read(crate::trjio::seq::index_path(&paths[0])).unwrap(), before);
    }
}
