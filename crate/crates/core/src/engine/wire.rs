//! Worker → rank-0 wire format.
//!
//! Every message is framed as `u32 body_len | body | u32 crc32(body)`,
//! little-endian. A gather body holds, in order:
//!
//! ```text
//! u32 rank
//! u64 block start, u64 block stop
//! u64 n, f64 × n   RMSD values (nm)
//! u64 n, f64 × n   frame times (ps)
//! RankTiming: u32 rank, f64 × 10 (t_opening_trajectory, t_io, t_comp,
//!             t_end_loop, t_all_frame, t_rmsd, t_comm, t_overhead1,
//!             t_overhead2, t_n), u64 n_frames_processed
//! u32 status
//! ```
//!
//! After rank 0 acknowledges a gather with [`ACK`], the worker sends a comm
//! report (`u32 rank, f64 t_comm`) carrying the time it spent sending.

use std::io::{ErrorKind, Read, Write};

use crate::error::{Error, Result};
use crate::model::{BlockAssignment, RankTiming};

pub const ACK: u8 = 0x06;
pub const STATUS_OK: u32 = 0;
pub const STATUS_FAILED: u32 = 1;

/// Upper bound on a frame body; guards against garbage lengths.
const MAX_BODY: u32 = 1 << 30;

#[derive(Debug, Clone, PartialEq)]
pub struct GatherMessage {
    pub rank: usize,
    pub start: usize,
    pub stop: usize,
    pub rmsd: Vec<f64>,
    pub times: Vec<f64>,
    pub timing: RankTiming,
    pub status: u32,
}

impl GatherMessage {
    pub fn failed(block: BlockAssignment) -> Self {
        Self {
            rank: block.rank,
            start: block.start,
            stop: block.start,
            rmsd: Vec::new(),
            times: Vec::new(),
            timing: RankTiming {
                rank: block.rank,
                ..RankTiming::default()
            },
            status: STATUS_FAILED,
        }
    }

    pub fn encode_body(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(128 + 16 * self.rmsd.len());
        put_u32(&mut b, self.rank as u32);
        put_u64(&mut b, self.start as u64);
        put_u64(&mut b, self.stop as u64);
        put_f64s(&mut b, &self.rmsd);
        put_f64s(&mut b, &self.times);
        let t = &self.timing;
        put_u32(&mut b, t.rank as u32);
        for v in [
            t.t_opening_trajectory,
            t.t_io,
            t.t_comp,
            t.t_end_loop,
            t.t_all_frame,
            t.t_rmsd,
            t.t_comm,
            t.t_overhead1,
            t.t_overhead2,
            t.t_n,
        ] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        put_u64(&mut b, t.n_frames_processed as u64);
        put_u32(&mut b, self.status);
        b
    }

    pub fn decode_body(body: &[u8]) -> Result<Self> {
        let mut c = Cursor { buf: body, pos: 0 };
        let rank = c.u32()? as usize;
        let start = c.u64()? as usize;
        let stop = c.u64()? as usize;
        let rmsd = c.f64s()?;
        let times = c.f64s()?;
        let timing_rank = c.u32()? as usize;
        let mut v = [0.0; 10];
        for slot in &mut v {
            *slot = c.f64()?;
        }
        let n_frames_processed = c.u64()? as usize;
        let status = c.u32()?;
        if c.pos != body.len() {
            return Err(Error::Wire(format!("{} trailing bytes", body.len() - c.pos)));
        }
        let msg = Self {
            rank,
            start,
            stop,
            rmsd,
            times,
            timing: RankTiming {
                rank: timing_rank,
                t_opening_trajectory: v[0],
                t_io: v[1],
                t_comp: v[2],
                t_end_loop: v[3],
                t_all_frame: v[4],
                t_rmsd: v[5],
                t_comm: v[6],
                t_overhead1: v[7],
                t_overhead2: v[8],
                t_n: v[9],
                n_frames_processed,
            },
            status,
        };
        msg.check()?;
        Ok(msg)
    }

    fn check(&self) -> Result<()> {
        if self.stop < self.start {
            return Err(Error::Wire("block stop before start".into()));
        }
        let n = self.stop - self.start;
        if self.rmsd.len() != n || self.times.len() != n {
            return Err(Error::Wire(format!(
                "block of {n} frames carries {} RMSD values and {} times",
                self.rmsd.len(),
                self.times.len()
            )));
        }
        if self.timing.rank != self.rank {
            return Err(Error::Wire("timing rank differs from message rank".into()));
        }
        Ok(())
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        write_frame(w, &self.encode_body())
    }

    /// Reads one message; `Ok(None)` if the stream ended before any byte.
    pub fn read_from(r: &mut impl Read) -> Result<Option<Self>> {
        read_frame(r)?.map(|b| Self::decode_body(&b)).transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommReport {
    pub rank: usize,
    pub t_comm: f64,
}

impl CommReport {
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let mut b = Vec::with_capacity(12);
        put_u32(&mut b, self.rank as u32);
        b.extend_from_slice(&self.t_comm.to_le_bytes());
        write_frame(w, &b)
    }

    pub fn read_from(r: &mut impl Read) -> Result<Option<Self>> {
        let Some(body) = read_frame(r)? else {
            return Ok(None);
        };
        let mut c = Cursor { buf: &body, pos: 0 };
        let rank = c.u32()? as usize;
        let t_comm = c.f64()?;
        if c.pos != body.len() {
            return Err(Error::Wire("oversized comm report".into()));
        }
        Ok(Some(Self { rank, t_comm }))
    }
}

pub fn write_frame(w: &mut impl Write, body: &[u8]) -> Result<()> {
    let len = u32::try_from(body.len())
        .ok()
        .filter(|&l| l <= MAX_BODY)
        .ok_or_else(|| Error::Wire("message too large".into()))?;
    let crc = crc32fast::hash(body);
    w.write_all(&len.to_le_bytes())
        .and_then(|_| w.write_all(body))
        .and_then(|_| w.write_all(&crc.to_le_bytes()))
        .and_then(|_| w.flush())
        .map_err(|e| Error::Wire(format!("send failed: {e}")))
}

pub fn read_frame(r: &mut impl Read) -> Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read(&mut len[..1]) {
        Ok(0) => return Ok(None),
        Ok(_) => {}
        Err(e) if e.kind() == ErrorKind::Interrupted => return read_frame(r),
        Err(e) => return Err(Error::Wire(format!("receive failed: {e}"))),
    }
    let recv = |e: std::io::Error| Error::Wire(format!("receive failed: {e}"));
    r.read_exact(&mut len[1..]).map_err(recv)?;
    let len = u32::from_le_bytes(len);
    if len > MAX_BODY {
        return Err(Error::Wire(format!("frame length {len} exceeds limit")));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body).map_err(recv)?;
    let mut crc = [0u8; 4];
    r.read_exact(&mut crc).map_err(recv)?;
    if u32::from_le_bytes(crc) != crc32fast::hash(&body) {
        return Err(Error::Wire("checksum mismatch".into()));
    }
    Ok(Some(body))
}

fn put_u32(b: &mut Vec<u8>, v: u32) {
    b.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(b: &mut Vec<u8>, v: u64) {
    b.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(b: &mut Vec<u8>, vs: &[f64]) {
    put_u64(b, vs.len() as u64);
    for v in vs {
        b.extend_from_slice(&v.to_le_bytes());
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Wire("message body too short".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Wire("array too long".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}
