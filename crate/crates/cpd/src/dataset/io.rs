//! Binary snapshot file format.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "CPD1" | version u32
//! sample_id u32 | geometry_param f64
//! domain: width, height, cx, cy, radius, notch_tip_x, notch_height, spacing (f64) | seed u64
//! n_particles u32 | n_frames u32 | n_triangles u32 | header crc32
//! ref positions: n * 2 f64 | crc32
//! per frame: positions n * 2 f64, alive bits ceil(T/8) bytes, crc32
//! ```
//!
//! Every block carries a trailing CRC32 so corruption surfaces as a checksum
//! error instead of garbage data.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::geometry::DomainSpec;
use crate::trajectory::{Frame, Trajectory};
use crate::vec2::Vec2;

use super::DatasetError;

const MAGIC: &[u8; 4] = b"CPD1";
const VERSION: u32 = 1;

struct CrcWriter<W: Write> {
    inner: W,
    hasher: crc32fast::Hasher,
}

impl<W: Write> CrcWriter<W> {
    fn new(inner: W) -> Self {
        CrcWriter {
            inner,
            hasher: crc32fast::Hasher::new(),
        }
    }

    fn put(&mut self, bytes: &[u8]) -> Result<(), DatasetError> {
        self.hasher.update(bytes);
        self.inner.write_all(bytes).map_err(DatasetError::Io)
    }

    fn put_u32(&mut self, v: u32) -> Result<(), DatasetError> {
        self.put(&v.to_le_bytes())
    }

    fn put_u64(&mut self, v: u64) -> Result<(), DatasetError> {
        self.put(&v.to_le_bytes())
    }

    fn put_f64(&mut self, v: f64) -> Result<(), DatasetError> {
        self.put(&v.to_le_bytes())
    }

    /// Write the running CRC and reset it for the next block.
    fn seal(&mut self) -> Result<(), DatasetError> {
        let crc = std::mem::take(&mut self.hasher).finalize();
        self.inner
            .write_all(&crc.to_le_bytes())
            .map_err(DatasetError::Io)
    }
}

struct CrcReader<R: Read> {
    inner: R,
    hasher: crc32fast::Hasher,
}

impl<R: Read> CrcReader<R> {
    fn new(inner: R) -> Self {
        CrcReader {
            inner,
            hasher: crc32fast::Hasher::new(),
        }
    }

    fn take(&mut self, buf: &mut [u8]) -> Result<(), DatasetError> {
        self.inner.read_exact(buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                DatasetError::Truncated
            } else {
                DatasetError::Io(e)
            }
        })?;
        self.hasher.update(buf);
        Ok(())
    }

    fn take_u32(&mut self) -> Result<u32, DatasetError> {
        let mut b = [0u8; 4];
        self.take(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn take_u64(&mut self) -> Result<u64, DatasetError> {
        let mut b = [0u8; 8];
        self.take(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn take_f64(&mut self) -> Result<f64, DatasetError> {
        let mut b = [0u8; 8];
        self.take(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    /// Read the stored CRC and compare against the running one.
    fn check_seal(&mut self) -> Result<(), DatasetError> {
        let expect = std::mem::take(&mut self.hasher).finalize();
        let mut b = [0u8; 4];
        self.inner.read_exact(&mut b).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                DatasetError::Truncated
            } else {
                DatasetError::Io(e)
            }
        })?;
        let stored = u32::from_le_bytes(b);
        if stored != expect {
            return Err(DatasetError::Checksum { stored, expect });
        }
        Ok(())
    }
}

fn write_positions<W: Write>(w: &mut CrcWriter<W>, pts: &[Vec2]) -> Result<(), DatasetError> {
    for p in pts {
        w.put_f64(p.x)?;
        w.put_f64(p.y)?;
    }
    Ok(())
}

fn pack_bits(flags: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; flags.len().div_ceil(8)];
    for (i, &f) in flags.iter().enumerate() {
        if f {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

fn unpack_bits(bytes: &[u8], n: usize) -> Vec<bool> {
    (0..n).map(|i| bytes[i / 8] & (1 << (i % 8)) != 0).collect()
}

/// Write a trajectory (or a single-frame mesh export) to `path`.
pub fn write_trajectory(traj: &Trajectory, path: &Path) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(DatasetError::Io)?;
    let mut w = CrcWriter::new(BufWriter::new(file));

    let n = traj.ref_positions.len() as u32;
    let n_frames = traj.frames.len() as u32;
    let n_tris = traj.frames.first().map_or(0, |f| f.alive.len()) as u32;
    let d = &traj.domain;

    w.put(MAGIC)?;
    w.put_u32(VERSION)?;
    w.put_u32(traj.sample_id)?;
    w.put_f64(traj.geometry_param)?;
    for v in [
        d.width,
        d.height,
        d.hole_center.x,
        d.hole_center.y,
        d.hole_radius,
        d.notch_tip_x,
        d.notch_height,
        d.target_spacing,
    ] {
        w.put_f64(v)?;
    }
    w.put_u64(d.seed)?;
    w.put_u32(n)?;
    w.put_u32(n_frames)?;
    w.put_u32(n_tris)?;
    w.seal()?;

    write_positions(&mut w, &traj.ref_positions)?;
    w.seal()?;

    for frame in &traj.frames {
        if frame.positions.len() != n as usize || frame.alive.len() != n_tris as usize {
            return Err(DatasetError::Format("inconsistent frame sizes".into()));
        }
        write_positions(&mut w, &frame.positions)?;
        w.put(&pack_bits(&frame.alive))?;
        w.seal()?;
    }
    w.inner.flush().map_err(DatasetError::Io)?;
    Ok(())
}

/// Read a trajectory written by [`write_trajectory`]; lossless round trip.
pub fn read_trajectory(path: &Path) -> Result<Trajectory, DatasetError> {
    let file = File::open(path).map_err(DatasetError::Io)?;
    let mut r = CrcReader::new(BufReader::new(file));

    let mut magic = [0u8; 4];
    r.take(&mut magic)?;
    if &magic != MAGIC {
        return Err(DatasetError::Format(format!(
            "bad magic {:?}, not a snapshot file",
            magic
        )));
    }
    let version = r.take_u32()?;
    if version != VERSION {
        return Err(DatasetError::Version {
            found: version,
            expect: VERSION,
        });
    }
    let sample_id = r.take_u32()?;
    let geometry_param = r.take_f64()?;
    let width = r.take_f64()?;
    let height = r.take_f64()?;
    let cx = r.take_f64()?;
    let cy = r.take_f64()?;
    let hole_radius = r.take_f64()?;
    let notch_tip_x = r.take_f64()?;
    let notch_height = r.take_f64()?;
    let target_spacing = r.take_f64()?;
    let seed = r.take_u64()?;
    let n = r.take_u32()? as usize;
    let n_frames = r.take_u32()? as usize;
    let n_tris = r.take_u32()? as usize;
    r.check_seal()?;

    // sanity bound so a corrupt header cannot trigger a huge allocation
    if n == 0 || n > 100_000_000 || n_frames > 100_000 {
        return Err(DatasetError::Format(format!(
            "implausible sizes: {n} particles, {n_frames} frames"
        )));
    }

    let read_pts = |r: &mut CrcReader<BufReader<File>>| -> Result<Vec<Vec2>, DatasetError> {
        let mut pts = Vec::with_capacity(n);
        for _ in 0..n {
            let x = r.take_f64()?;
            let y = r.take_f64()?;
            pts.push(Vec2::new(x, y));
        }
        Ok(pts)
    };

    let ref_positions = read_pts(&mut r)?;
    r.check_seal()?;

    let mut frames = Vec::with_capacity(n_frames);
    let mut bits = vec![0u8; n_tris.div_ceil(8)];
    for _ in 0..n_frames {
        let positions = read_pts(&mut r)?;
        r.take(&mut bits)?;
        r.check_seal()?;
        frames.push(Frame {
            positions,
            alive: unpack_bits(&bits, n_tris),
        });
    }

    Ok(Trajectory {
        sample_id,
        geometry_param,
        domain: DomainSpec {
            width,
            height,
            hole_center: Vec2::new(cx, cy),
            hole_radius,
            notch_tip_x,
            notch_height,
            target_spacing,
            seed,
        },
        ref_positions,
        frames,
    })
}
