//! DENSE: a fixed-stride `T × 3N` coordinate array with computed per-frame
//! offsets. Any frame can be read with one positioned read, so independent
//! readers never contend on a shared cursor.
//!
//! Layout, little-endian:
//!
//! | offset          | size   | field                                  |
//! |----------------:|-------:|----------------------------------------|
//! |               0 |      4 | magic `0x4D444453`                     |
//! |               4 |      4 | version `1`                            |
//! |               8 |      8 | frame count `T`                        |
//! |              16 |      4 | stored atom count `N`                  |
//! |              20 |      8 | `times_offset`                         |
//! |              28 |      8 | `coords_offset`                        |
//! |  `times_offset` | 4·T    | frame times, ps (`f32`)                |
//! | `coords_offset` | 12·N·T | coordinates, row-major, nm (`f32`)     |

use std::fs::File;
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::CoordFrame;

use super::FrameSource;

pub const DENSE_MAGIC: u32 = 0x4D44_4453;
pub const DENSE_VERSION: u32 = 1;
pub const DENSE_HEADER_LEN: u64 = 36;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseHeader {
    pub n_frames: u64,
    pub n_atoms_stored: u32,
    pub times_offset: u64,
    pub coords_offset: u64,
}

impl DenseHeader {
    pub fn new(n_frames: u64, n_atoms_stored: u32) -> Self {
        Self {
            n_frames,
            n_atoms_stored,
            times_offset: DENSE_HEADER_LEN,
            coords_offset: DENSE_HEADER_LEN + 4 * n_frames,
        }
    }

    pub fn frame_stride(&self) -> u64 {
        3 * u64::from(self.n_atoms_stored) * 4
    }

    pub fn frame_offset(&self, i: u64) -> u64 {
        self.coords_offset + i * self.frame_stride()
    }

    pub fn file_len(&self) -> u64 {
        self.coords_offset + self.n_frames * self.frame_stride()
    }

    pub fn to_bytes(&self) -> [u8; DENSE_HEADER_LEN as usize] {
        let mut b = [0u8; DENSE_HEADER_LEN as usize];
        b[0..4].copy_from_slice(&DENSE_MAGIC.to_le_bytes());
        b[4..8].copy_from_slice(&DENSE_VERSION.to_le_bytes());
        b[8..16].copy_from_slice(&self.n_frames.to_le_bytes());
        b[16..20].copy_from_slice(&self.n_atoms_stored.to_le_bytes());
        b[20..28].copy_from_slice(&self.times_offset.to_le_bytes());
        b[28..36].copy_from_slice(&self.coords_offset.to_le_bytes());
        b
    }

    fn parse(b: &[u8; DENSE_HEADER_LEN as usize], path: &Path) -> Result<Self> {
        let corrupt = |msg: &str| Error::Corrupt {
            path: path.to_path_buf(),
            pos: 0,
            msg: msg.into(),
        };
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        if u32_at(0) != DENSE_MAGIC {
            return Err(corrupt("bad dense magic"));
        }
        if u32_at(4) != DENSE_VERSION {
            return Err(corrupt("unsupported dense version"));
        }
        let header = Self {
            n_frames: u64_at(8),
            n_atoms_stored: u32_at(16),
            times_offset: u64_at(20),
            coords_offset: u64_at(28),
        };
        if header.times_offset < DENSE_HEADER_LEN
            || header.coords_offset < header.times_offset + 4 * header.n_frames
        {
            return Err(corrupt("inconsistent section offsets"));
        }
        Ok(header)
    }
}

/// Writes a DENSE file frame by frame; the frame count is fixed up front.
pub struct DenseWriter {
    path: PathBuf,
    out: BufWriter<File>,
    header: DenseHeader,
    times: Vec<f32>,
    row: Vec<u8>,
}

impl DenseWriter {
    pub fn create(path: impl AsRef<Path>, n_frames: usize, n_atoms: usize) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let n_atoms =
            u32::try_from(n_atoms).map_err(|_| Error::invalid("atom count exceeds u32"))?;
        let header = DenseHeader::new(n_frames as u64, n_atoms);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::with_capacity(1 << 20, file);
        out.write_all(&header.to_bytes())
            .and_then(|_| out.seek(SeekFrom::Start(header.coords_offset)).map(|_| ()))
            .map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            path,
            out,
            header,
            times: Vec::with_capacity(n_frames),
            row: Vec::with_capacity(header.frame_stride() as usize),
        })
    }

    /// Appends one frame of exactly `n_atoms_stored` positions.
    pub fn push(&mut self, time: f64, positions: impl ExactSizeIterator<Item = [f64; 3]>) -> Result<()> {
        if self.times.len() as u64 >= self.header.n_frames {
            return Err(Error::invalid("more frames than declared"));
        }
        if positions.len() != self.header.n_atoms_stored as usize {
            return Err(Error::invalid(format!(
                "frame has {} atoms, dense file stores {}",
                positions.len(),
                self.header.n_atoms_stored
            )));
        }
        self.row.clear();
        for p in positions {
            for c in p {
                self.row.extend_from_slice(&(c as f32).to_le_bytes());
            }
        }
        self.out
            .write_all(&self.row)
            .map_err(|e| Error::io(&self.path, e))?;
        self.times.push(time as f32);
        Ok(())
    }

    pub fn finish(mut self) -> Result<usize> {
        if self.times.len() as u64 != self.header.n_frames {
            return Err(Error::invalid(format!(
                "declared {} frames, wrote {}",
                self.header.n_frames,
                self.times.len()
            )));
        }
        let mut bytes = Vec::with_capacity(4 * self.times.len());
        for t in &self.times {
            bytes.extend_from_slice(&t.to_le_bytes());
        }
        let path = self.path.clone();
        self.out
            .seek(SeekFrom::Start(self.header.times_offset))
            .and_then(|_| self.out.write_all(&bytes))
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&path, e))?;
        let file = self.out.get_ref();
        file.set_len(self.header.file_len())
            .map_err(|e| Error::io(&path, e))?;
        Ok(self.times.len())
    }
}

/// Random-access DENSE reader using positioned reads.
pub struct DenseReader {
    path: PathBuf,
    file: File,
    header: DenseHeader,
    times: Vec<f32>,
    row: Vec<u8>,
}

impl DenseReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut hb = [0u8; DENSE_HEADER_LEN as usize];
        file.read_exact(&mut hb).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Truncated {
                path: path.clone(),
                pos: 0,
            },
            _ => Error::io(&path, e),
        })?;
        let header = DenseHeader::parse(&hb, &path)?;
        let len = file.metadata().map_err(|e| Error::io(&path, e))?.len();
        if len != header.file_len() {
            return Err(Error::Corrupt {
                path,
                pos: len,
                msg: format!("file is {len} bytes, header implies {}", header.file_len()),
            });
        }
        let mut tb = vec![0u8; 4 * header.n_frames as usize];
        file.read_exact_at(&mut tb, header.times_offset)
            .map_err(|e| Error::io(&path, e))?;
        let times = tb
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            path,
            file,
            row: vec![0u8; header.frame_stride() as usize],
            header,
            times,
        })
    }

    pub fn header(&self) -> &DenseHeader {
        &self.header
    }
}

impl FrameSource for DenseReader {
    fn n_frames(&self) -> usize {
        self.header.n_frames as usize
    }

    fn n_atoms(&self) -> usize {
        self.header.n_atoms_stored as usize
    }

    fn read_frame(&mut self, i: usize) -> Result<CoordFrame> {
        if i >= self.n_frames() {
            return Err(Error::FrameOutOfRange {
                index: i,
                n_frames: self.n_frames(),
            });
        }
        let offset = self.header.frame_offset(i as u64);
        self.file
            .read_exact_at(&mut self.row, offset)
            .map_err(|e| Error::io(&self.path, e))?;
        let positions = self
            .row
            .chunks_exact(12)
            .map(|c| {
                let f = |k: usize| f64::from(f32::from_le_bytes(c[4 * k..4 * k + 4].try_into().unwrap()));
                [f(0), f(1), f(2)]
            })
            .collect();
        Ok(CoordFrame {
            frame_index: i,
            time: f64::from(self.times[i]),
            box_vectors: [[0.0; 3]; 3],
            positions,
        })
    }
}

/// Reads frame `i` of a DENSE file.
pub fn dense_read_frame(path: impl AsRef<Path>, i: usize) -> Result<CoordFrame> {
    DenseReader::open(path)?.read_frame(i)
}
