//! SEQ: a variable-length, lossy, sequential trajectory format.
//!
//! Every frame is one self-describing record, little-endian:
//!
//! | offset | size | field                                |
//! |-------:|-----:|--------------------------------------|
//! |      0 |    4 | magic `0x4D445351`                   |
//! |      4 |    8 | frame index (`u64`)                  |
//! |     12 |    4 | time, ps (`f32`)                     |
//! |     16 |   36 | box, 3×3 row-major, nm (`f32`)       |
//! |     52 |    4 | precision, 1/nm (`f32`)              |
//! |     56 |    4 | atom count (`u32`)                   |
//! |     60 |    4 | payload length in bytes (`u32`)      |
//! |     64 |    n | payload (see [`super::codec`])       |
//!
//! Records cannot be located without a scan; [`OffsetIndex`] persists the
//! record offsets in a sidecar file next to the trajectory.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::time::UNIX_EPOCH;

use crate::error::{Error, Result};
use crate::model::CoordFrame;

use super::codec;
use super::FrameSource;

pub const SEQ_MAGIC: u32 = 0x4D44_5351;
pub const SEQ_HEADER_LEN: usize = 64;
pub const DEFAULT_PRECISION: f64 = 1000.0;
pub const INDEX_SUFFIX: &str = ".offidx";

/// Fixed-size part of a SEQ record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeqRecordHeader {
    pub frame_index: u64,
    pub time: f32,
    pub box_vectors: [f32; 9],
    pub precision: f32,
    pub n_atoms: u32,
    pub payload_len: u32,
}

impl SeqRecordHeader {
    pub fn to_bytes(&self) -> [u8; SEQ_HEADER_LEN] {
        let mut b = [0u8; SEQ_HEADER_LEN];
        b[0..4].copy_from_slice(&SEQ_MAGIC.to_le_bytes());
        b[4..12].copy_from_slice(&self.frame_index.to_le_bytes());
        b[12..16].copy_from_slice(&self.time.to_le_bytes());
        for (k, v) in self.box_vectors.iter().enumerate() {
            b[16 + 4 * k..20 + 4 * k].copy_from_slice(&v.to_le_bytes());
        }
        b[52..56].copy_from_slice(&self.precision.to_le_bytes());
        b[56..60].copy_from_slice(&self.n_atoms.to_le_bytes());
        b[60..64].copy_from_slice(&self.payload_len.to_le_bytes());
        b
    }

    /// Parses a header; `None` on bad magic.
    pub fn from_bytes(b: &[u8; SEQ_HEADER_LEN]) -> Option<Self> {
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let f32_at = |o: usize| f32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        if u32_at(0) != SEQ_MAGIC {
            return None;
        }
        let mut box_vectors = [0f32; 9];
        for (k, v) in box_vectors.iter_mut().enumerate() {
            *v = f32_at(16 + 4 * k);
        }
        Some(Self {
            frame_index: u64::from_le_bytes(b[4..12].try_into().unwrap()),
            time: f32_at(12),
            box_vectors,
            precision: f32_at(52),
            n_atoms: u32_at(56),
            payload_len: u32_at(60),
        })
    }

    pub fn record_len(&self) -> u64 {
        SEQ_HEADER_LEN as u64 + u64::from(self.payload_len)
    }
}

/// One undecoded record.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqRecord {
    pub header: SeqRecordHeader,
    pub payload: Vec<u8>,
}

impl SeqRecord {
    /// Decodes the record into a frame numbered `frame_index`.
    pub fn decode(&self, frame_index: usize) -> Option<CoordFrame> {
        let h = &self.header;
        let precision = f64::from(h.precision);
        if !(precision > 0.0) {
            return None;
        }
        let positions = codec::decode_positions(&self.payload, h.n_atoms as usize, precision)?;
        let mut box_vectors = [[0.0; 3]; 3];
        for (k, v) in h.box_vectors.iter().enumerate() {
            box_vectors[k / 3][k % 3] = f64::from(*v);
        }
        Some(CoordFrame {
            frame_index,
            time: f64::from(h.time),
            box_vectors,
            positions,
        })
    }
}

/// Streaming SEQ writer.
pub struct SeqWriter {
    path: PathBuf,
    out: BufWriter<File>,
    precision: f64,
    n_atoms: Option<u32>,
    n_frames: usize,
    payload: Vec<u8>,
}

impl SeqWriter {
    pub fn create(path: impl AsRef<Path>, precision: f64) -> Result<Self> {
        if !(precision > 0.0 && precision.is_finite()) {
            return Err(Error::invalid(format!("precision must be positive, got {precision}")));
        }
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            path,
            out: BufWriter::new(file),
            precision,
            n_atoms: None,
            n_frames: 0,
            payload: Vec::new(),
        })
    }

    fn check_atoms(&mut self, n_atoms: u32) -> Result<()> {
        match self.n_atoms {
            Some(n) if n != n_atoms => Err(Error::invalid(format!(
                "frame {} has {n_atoms} atoms, trajectory has {n}",
                self.n_frames
            ))),
            _ => {
                self.n_atoms = Some(n_atoms);
                Ok(())
            }
        }
    }

    pub fn write_frame(&mut self, frame: &CoordFrame) -> Result<()> {
        let n_atoms = u32::try_from(frame.n_atoms())
            .map_err(|_| Error::invalid("atom count exceeds u32"))?;
        self.check_atoms(n_atoms)?;
        codec::encode_positions(&frame.positions, self.precision, &mut self.payload)?;
        let mut box_vectors = [0f32; 9];
        for (k, v) in box_vectors.iter_mut().enumerate() {
            *v = frame.box_vectors[k / 3][k % 3] as f32;
        }
        let header = SeqRecordHeader {
            frame_index: self.n_frames as u64,
            time: frame.time as f32,
            box_vectors,
            precision: self.precision as f32,
            n_atoms,
            payload_len: u32::try_from(self.payload.len())
                .map_err(|_| Error::invalid("payload exceeds u32"))?,
        };
        self.out
            .write_all(&header.to_bytes())
            .and_then(|_| self.out.write_all(&self.payload))
            .map_err(|e| Error::io(&self.path, e))?;
        self.n_frames += 1;
        Ok(())
    }

    /// Appends an already-encoded record byte for byte.
    pub fn write_record(&mut self, record: &SeqRecord) -> Result<()> {
        self.check_atoms(record.header.n_atoms)?;
        self.out
            .write_all(&record.header.to_bytes())
            .and_then(|_| self.out.write_all(&record.payload))
            .map_err(|e| Error::io(&self.path, e))?;
        self.n_frames += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<usize> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.n_frames)
    }
}

/// Writes `frames` to a new SEQ file and returns the frame count.
pub fn seq_write<'a>(
    frames: impl IntoIterator<Item = &'a CoordFrame>,
    precision: f64,
    path: impl AsRef<Path>,
) -> Result<usize> {
    let mut w = SeqWriter::create(path, precision)?;
    for f in frames {
        w.write_frame(f)?;
    }
    w.finish()
}

/// Sequential record reader; needs no index.
pub struct SeqStream {
    path: PathBuf,
    reader: BufReader<File>,
    pos: u64,
}

impl SeqStream {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            path,
            reader: BufReader::with_capacity(1 << 16, file),
            pos: 0,
        })
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    pub fn seek_to(&mut self, pos: u64) -> Result<()> {
        if pos != self.pos {
            self.reader
                .seek(SeekFrom::Start(pos))
                .map_err(|e| Error::io(&self.path, e))?;
            self.pos = pos;
        }
        Ok(())
    }

    /// Reads the next header, or `None` at a clean end of file.
    pub fn next_header(&mut self) -> Result<Option<SeqRecordHeader>> {
        let mut buf = [0u8; SEQ_HEADER_LEN];
        let got = read_full(&mut self.reader, &mut buf).map_err(|e| Error::io(&self.path, e))?;
        if got == 0 {
            return Ok(None);
        }
        if got < SEQ_HEADER_LEN {
            return Err(Error::Truncated {
                path: self.path.clone(),
                pos: self.pos,
            });
        }
        let header = SeqRecordHeader::from_bytes(&buf).ok_or_else(|| Error::Corrupt {
            path: self.path.clone(),
            pos: self.pos,
            msg: "bad record magic".into(),
        })?;
        Ok(Some(header))
    }

    fn read_payload(&mut self, header: &SeqRecordHeader, start: u64) -> Result<Vec<u8>> {
        let mut payload = vec![0u8; header.payload_len as usize];
        let got =
            read_full(&mut self.reader, &mut payload).map_err(|e| Error::io(&self.path, e))?;
        if got < payload.len() {
            return Err(Error::Truncated {
                path: self.path.clone(),
                pos: start,
            });
        }
        self.pos = start + header.record_len();
        Ok(payload)
    }

    pub fn next_record(&mut self) -> Result<Option<SeqRecord>> {
        let start = self.pos;
        let Some(header) = self.next_header()? else {
            return Ok(None);
        };
        let payload = self.read_payload(&header, start)?;
        Ok(Some(SeqRecord { header, payload }))
    }

    /// Skips the payload of a header just returned by [`Self::next_header`].
    fn skip_payload(&mut self, header: &SeqRecordHeader, start: u64, file_len: u64) -> Result<()> {
        let end = start + header.record_len();
        if end > file_len {
            return Err(Error::Truncated {
                path: self.path.clone(),
                pos: start,
            });
        }
        self.reader
            .seek_relative(i64::from(header.payload_len))
            .map_err(|e| Error::io(&self.path, e))?;
        self.pos = end;
        Ok(())
    }

    pub fn next_frame(&mut self, frame_index: usize) -> Result<Option<CoordFrame>> {
        let start = self.pos;
        match self.next_record()? {
            None => Ok(None),
            Some(rec) => rec.decode(frame_index).map(Some).ok_or_else(|| Error::Corrupt {
                path: self.path.clone(),
                pos: start,
                msg: "payload does not decode".into(),
            }),
        }
    }
}

fn read_full(r: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Decodes every frame of a SEQ file in order.
pub fn seq_read_all(path: impl AsRef<Path>) -> Result<Vec<CoordFrame>> {
    let mut stream = SeqStream::open(path)?;
    let mut frames = Vec::new();
    while let Some(f) = stream.next_frame(frames.len())? {
        frames.push(f);
    }
    Ok(frames)
}

/// Persistent byte offsets of every record in a SEQ file, with the file
/// properties they were computed against.
///
/// Sidecar layout, little-endian: `n_frames u64`, `n_atoms u32`,
/// `trajectory_file_size u64`, `trajectory_mtime u64`, then `n_frames`
/// offsets as `u64`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffsetIndex {
    pub n_frames: u64,
    pub n_atoms: u32,
    pub trajectory_file_size: u64,
    pub trajectory_mtime: u64,
    pub offsets: Vec<u64>,
}

const INDEX_HEADER_LEN: usize = 28;

impl OffsetIndex {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(INDEX_HEADER_LEN + 8 * self.offsets.len());
        b.extend_from_slice(&self.n_frames.to_le_bytes());
        b.extend_from_slice(&self.n_atoms.to_le_bytes());
        b.extend_from_slice(&self.trajectory_file_size.to_le_bytes());
        b.extend_from_slice(&self.trajectory_mtime.to_le_bytes());
        for o in &self.offsets {
            b.extend_from_slice(&o.to_le_bytes());
        }
        b
    }

    pub fn from_bytes(b: &[u8]) -> Option<Self> {
        if b.len() < INDEX_HEADER_LEN {
            return None;
        }
        let n_frames = u64::from_le_bytes(b[0..8].try_into().ok()?);
        let n_atoms = u32::from_le_bytes(b[8..12].try_into().ok()?);
        let trajectory_file_size = u64::from_le_bytes(b[12..20].try_into().ok()?);
        let trajectory_mtime = u64::from_le_bytes(b[20..28].try_into().ok()?);
        let body = &b[INDEX_HEADER_LEN..];
        if body.len() as u64 != n_frames.checked_mul(8)? {
            return None;
        }
        let offsets: Vec<u64> = body
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let index = Self {
            n_frames,
            n_atoms,
            trajectory_file_size,
            trajectory_mtime,
            offsets,
        };
        index.is_well_formed().then_some(index)
    }

    fn is_well_formed(&self) -> bool {
        self.offsets.first().map_or(true, |&o| o == 0)
            && self.offsets.windows(2).all(|w| w[0] < w[1])
            && self.offsets.last().map_or(true, |&o| o < self.trajectory_file_size)
    }

    pub fn n_frames(&self) -> usize {
        self.offsets.len()
    }
}

pub fn index_path(trajectory: impl AsRef<Path>) -> PathBuf {
    let mut s = trajectory.as_ref().as_os_str().to_owned();
    s.push(INDEX_SUFFIX);
    PathBuf::from(s)
}

/// Size and whole-second modification time of a file.
fn file_stamp(path: &Path) -> Result<(u64, u64)> {
    let meta = std::fs::metadata(path).map_err(|e| Error::io(path, e))?;
    let mtime = meta
        .modified()
        .map_err(|e| Error::io(path, e))?
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok((meta.len(), mtime))
}

/// Scans a SEQ file once, writes the sidecar index and returns it.
pub fn seq_build_index(path: impl AsRef<Path>) -> Result<OffsetIndex> {
    let path = path.as_ref();
    let index = scan_offsets(path)?;
    write_index(path, &index)?;
    Ok(index)
}

fn scan_offsets(path: &Path) -> Result<OffsetIndex> {
    let (file_size, mtime) = file_stamp(path)?;
    let mut stream = SeqStream::open(path)?;
    let mut offsets = Vec::new();
    let mut n_atoms = None;
    loop {
        let start = stream.position();
        let Some(header) = stream.next_header()? else {
            break;
        };
        match n_atoms {
            None => n_atoms = Some(header.n_atoms),
            Some(n) if n != header.n_atoms => {
                return Err(Error::Corrupt {
                    path: path.to_path_buf(),
                    pos: start,
                    msg: format!("record has {} atoms, expected {n}", header.n_atoms),
                })
            }
            _ => {}
        }
        stream.skip_payload(&header, start, file_size)?;
        offsets.push(start);
    }
    Ok(OffsetIndex {
        n_frames: offsets.len() as u64,
        n_atoms: n_atoms.unwrap_or(0),
        trajectory_file_size: file_size,
        trajectory_mtime: mtime,
        offsets,
    })
}

fn write_index(path: &Path, index: &OffsetIndex) -> Result<()> {
    let sidecar = index_path(path);
    std::fs::write(&sidecar, index.to_bytes()).map_err(|e| Error::io(&sidecar, e))
}

/// Loads the sidecar index if present and parseable.
pub fn seq_load_index(path: impl AsRef<Path>) -> Result<Option<OffsetIndex>> {
    let sidecar = index_path(path);
    match std::fs::read(&sidecar) {
        Ok(bytes) => Ok(OffsetIndex::from_bytes(&bytes)),
        Err(e) if e.kind() == ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(&sidecar, e)),
    }
}

/// True iff `index` still describes the file at `path`: same atom count, file
/// size and modification time. Never fails; any problem reads as stale.
pub fn seq_validate_index(path: impl AsRef<Path>, index: &OffsetIndex) -> bool {
    let path = path.as_ref();
    let Ok((size, mtime)) = file_stamp(path) else {
        return false;
    };
    if size != index.trajectory_file_size || mtime != index.trajectory_mtime {
        return false;
    }
    let current_atoms = match SeqStream::open(path).and_then(|mut s| s.next_header()) {
        Ok(Some(h)) => h.n_atoms,
        Ok(None) => 0,
        Err(_) => return false,
    };
    current_atoms == index.n_atoms
}

/// Validates the sidecar index at `path`, reporting a missing sidecar as
/// invalid.
pub fn seq_validate_sidecar(path: impl AsRef<Path>) -> bool {
    match seq_load_index(path.as_ref()) {
        Ok(Some(index)) => seq_validate_index(path, &index),
        _ => false,
    }
}

/// Loads the sidecar index, rebuilding it when missing or, if `validate` is
/// set, stale.
pub fn load_or_build_index(path: impl AsRef<Path>, validate: bool) -> Result<OffsetIndex> {
    let path = path.as_ref();
    if let Some(index) = seq_load_index(path)? {
        if !validate || seq_validate_index(path, &index) {
            return Ok(index);
        }
        log::debug!("offset index for {} is stale, rebuilding", path.display());
    }
    seq_build_index(path)
}

/// Random-access SEQ reader backed by an offset index.
pub struct SeqReader {
    stream: SeqStream,
    index: OffsetIndex,
}

impl SeqReader {
    pub fn with_index(path: impl AsRef<Path>, index: OffsetIndex) -> Result<Self> {
        Ok(Self {
            stream: SeqStream::open(path)?,
            index,
        })
    }

    /// Opens `path`, loading its sidecar index or building one.
    pub fn open(path: impl AsRef<Path>, validate_index: bool) -> Result<Self> {
        let index = load_or_build_index(path.as_ref(), validate_index)?;
        Self::with_index(path, index)
    }

    pub fn index(&self) -> &OffsetIndex {
        &self.index
    }

    pub fn path(&self) -> &Path {
        &self.stream.path
    }

    pub fn read_record(&mut self, i: usize) -> Result<SeqRecord> {
        let offset = *self.index.offsets.get(i).ok_or(Error::FrameOutOfRange {
            index: i,
            n_frames: self.index.n_frames(),
        })?;
        self.stream.seek_to(offset)?;
        self.stream.next_record()?.ok_or_else(|| Error::Truncated {
            path: self.stream.path.clone(),
            pos: offset,
        })
    }
}

impl FrameSource for SeqReader {
    fn n_frames(&self) -> usize {
        self.index.n_frames()
    }

    fn n_atoms(&self) -> usize {
        self.index.n_atoms as usize
    }

    fn read_frame(&mut self, i: usize) -> Result<CoordFrame> {
        let record = self.read_record(i)?;
        record.decode(i).ok_or_else(|| Error::Corrupt {
            path: self.stream.path.clone(),
            pos: self.index.offsets[i],
            msg: "payload does not decode".into(),
        })
    }
}

/// Sequential reader over a segment file that holds global frames
/// `[first, first + len)`; frames must be requested in order.
pub struct SegmentReader {
    stream: SeqStream,
    first: usize,
    len: usize,
    next: usize,
    n_atoms: usize,
}

impl SegmentReader {
    pub fn open(path: impl AsRef<Path>, first: usize, len: usize) -> Result<Self> {
        let mut stream = SeqStream::open(path)?;
        let n_atoms = stream.next_header()?.map_or(0, |h| h.n_atoms as usize);
        stream.reader.rewind().map_err(|e| Error::io(&stream.path, e))?;
        stream.pos = 0;
        Ok(Self {
            stream,
            first,
            len,
            next: first,
            n_atoms,
        })
    }
}

impl FrameSource for SegmentReader {
    fn n_frames(&self) -> usize {
        self.first + self.len
    }

    fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    fn read_frame(&mut self, i: usize) -> Result<CoordFrame> {
        if i != self.next || i >= self.first + self.len {
            return Err(Error::invalid(format!(
                "segment reader expects frame {}, got {i}",
                self.next
            )));
        }
        let pos = self.stream.position();
        let frame = self.stream.next_frame(i)?.ok_or_else(|| Error::Truncated {
            path: self.stream.path.clone(),
            pos,
        })?;
        self.next += 1;
        Ok(frame)
    }
}
