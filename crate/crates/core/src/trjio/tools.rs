use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::{decompose_blocks, System};

use super::dense::DenseWriter;
use super::seq::{load_or_build_index, SeqStream, SeqWriter, DEFAULT_PRECISION};

#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub segments: Vec<PathBuf>,
    pub frames_per_segment: Vec<usize>,
    /// Wall-clock seconds spent writing all segments.
    pub elapsed: f64,
}

/// File name of segment `k`: `traj.seq` becomes `traj.seg0003.seq`.
pub fn segment_path(src: &Path, out_dir: &Path, k: usize) -> PathBuf {
    let stem = src.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match src.extension() {
        Some(ext) => format!("{stem}.seg{k:04}.{}", ext.to_string_lossy()),
        None => format!("{stem}.seg{k:04}"),
    };
    out_dir.join(name)
}

/// Splits a SEQ file into `n_segments` files holding the frames of
/// `decompose_blocks(T, n_segments)`. Records are copied byte for byte.
pub fn split_trajectory(
    src: impl AsRef<Path>,
    n_segments: usize,
    out_dir: impl AsRef<Path>,
) -> Result<SplitOutcome> {
    let src = src.as_ref();
    let out_dir = out_dir.as_ref();
    if n_segments == 0 {
        return Err(Error::invalid("segment count must be at least 1"));
    }
    let started = Instant::now();
    let index = load_or_build_index(src, true)?;
    let blocks = decompose_blocks(index.n_frames(), n_segments)?;
    let mut stream = SeqStream::open(src)?;
    let mut segments = Vec::with_capacity(n_segments);
    for block in &blocks {
        let path = segment_path(src, out_dir, block.rank);
        let mut writer = SeqWriter::create(&path, DEFAULT_PRECISION)?;
        for _ in block.frames() {
            let pos = stream.position();
            let record = stream.next_record()?.ok_or_else(|| Error::Truncated {
                path: src.to_path_buf(),
                pos,
            })?;
            writer.write_record(&record)?;
        }
        writer.finish()?;
        segments.push(path);
    }
    Ok(SplitOutcome {
        segments,
        frames_per_segment: blocks.iter().map(|b| b.len()).collect(),
        elapsed: started.elapsed().as_secs_f64(),
    })
}

/// Converts a SEQ trajectory into a DENSE file holding only the mobile atoms
/// of `system`, and returns the frame count.
pub fn convert_seq_to_dense(
    src: impl AsRef<Path>,
    system: &System,
    dst: impl AsRef<Path>,
) -> Result<usize> {
    let src = src.as_ref();
    let index = load_or_build_index(src, true)?;
    if index.n_frames > 0 && index.n_atoms as usize != system.n_atoms() {
        return Err(Error::invalid(format!(
            "trajectory has {} atoms, topology expects {}",
            index.n_atoms,
            system.n_atoms()
        )));
    }
    let mobile = system.mobile_indices();
    let mut writer = DenseWriter::create(dst, index.n_frames(), mobile.len())?;
    let mut stream = SeqStream::open(src)?;
    for i in 0..index.n_frames() {
        let pos = stream.position();
        let frame = stream.next_frame(i)?.ok_or_else(|| Error::Truncated {
            path: src.to_path_buf(),
            pos,
        })?;
        writer.push(frame.time, mobile.iter().map(|&a| frame.positions[a]))?;
    }
    writer.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CoordFrame;
    use crate::trjio::chain::{chain_open, ChainOptions};
    use crate::trjio::dense::DenseReader;
    use crate::trjio::seq::{seq_read_all, seq_write, SeqReader};
    use crate::trjio::FrameSource;

    fn write_traj(path: &Path, t: usize, n: usize) -> Vec<CoordFrame> {
        let frames: Vec<_> = (0..t)
            .map(|i| CoordFrame {
                frame_index: i,
                time: i as f64 * 0.5,
                box_vectors: [[3.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 3.0]],
                positions: (0..n)
                    .map(|a| [((i * n + a) as f64 * 0.37).sin(), a as f64 * 0.1, i as f64 * 0.01])
                    .collect(),
            })
            .collect();
        seq_write(&frames, 1000.0, path).unwrap();
        frames
    }

    #[test]
    fn split_sizes_and_lossless_copy() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("traj.seq");
        write_traj(&src, 10, 5);
        let out = split_trajectory(&src, 3, dir.path()).unwrap();
        assert_eq!(out.frames_per_segment, vec![4, 3, 3]);
        assert!(out.elapsed >= 0.0);
        assert_eq!(out.segments[1], dir.path().join("traj.seg0001.seq"));

        let concatenated: Vec<u8> = out
            .segments
            .iter()
            .flat_map(|p| std::fs::read(p).unwrap())
            .collect();
        assert_eq!(concatenated, std::fs::read(&src).unwrap());

        let one = dir.path().join("one");
        std::fs::create_dir(&one).unwrap();
        let single = split_trajectory(&src, 1, &one).unwrap();
        assert_eq!(std::fs::read(&single.segments[0]).unwrap(), std::fs::read(&src).unwrap());
    }

    #[test]
    fn chain_over_split_reproduces_source() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("traj.seq");
        write_traj(&src, 23, 4);
        let original = seq_read_all(&src).unwrap();
        for k in [1, 2, 3, 7] {
            let sub = dir.path().join(format!("k{k}"));
            std::fs::create_dir(&sub).unwrap();
            let out = split_trajectory(&src, k, &sub).unwrap();
            let mut chain = chain_open(&out.segments, ChainOptions::default()).unwrap();
            assert_eq!(chain.n_frames(), original.len());
            for (i, f) in original.iter().enumerate() {
                assert_eq!(&chain.read_frame(i).unwrap(), f);
            }
        }
    }

    #[test]
    fn converter_keeps_mobile_rows() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("traj.seq");
        write_traj(&src, 12, 9);
        let system = System::new(9, vec![], vec![1, 4, 5, 8], vec![[0.0; 3]; 4]).unwrap();
        let dst = dir.path().join("traj.dense");
        assert_eq!(convert_seq_to_dense(&src, &system, &dst).unwrap(), 12);
        let mut dense = DenseReader::open(&dst).unwrap();
        let mut seq = SeqReader::open(&src, true).unwrap();
        assert_eq!(dense.n_atoms(), 4);
        for i in 0..12 {
            let d = dense.read_frame(i).unwrap();
            let s = seq.read_frame(i).unwrap();
            assert_eq!(d.time, s.time);
            for (row, &a) in d.positions.iter().zip(system.mobile_indices()) {
                for k in 0..3 {
                    assert!((row[k] - s.positions[a][k]).abs() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn converter_empty_source() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("e.seq");
        std::fs::write(&src, b"").unwrap();
        let system = System::new(3, vec![], vec![0, 1, 2], vec![[0.0; 3]; 3]).unwrap();
        let dst = dir.path().join("e.dense");
        assert_eq!(convert_seq_to_dense(&src, &system, &dst).unwrap(), 0);
        assert_eq!(std::fs::metadata(&dst).unwrap().len(), 36);
    }

    #[test]
    fn converter_checks_atom_count() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("traj.seq");
        write_traj(&src, 2, 5);
        let system = System::new(6, vec![], vec![0, 1, 2], vec![[0.0; 3]; 3]).unwrap();
        assert!(convert_seq_to_dense(&src, &system, dir.path().join("x.dense")).is_err());
    }
}
