//! Model checkpoint file.
//!
//! Little-endian: magic "ONET", version, variant and activation tags, layer
//! shapes, all parameters as f64, normalization constants, trailing CRC32
//! over the whole payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::dataset::Normalization;

use super::{Activation, DenseLayer, MlpParams, OperatorError, OperatorModel, Variant, ROWDY_HARMONICS};

const MAGIC: &[u8; 4] = b"ONET";
const VERSION: u32 = 1;

struct Sink<W: Write> {
    inner: W,
    hasher: crc32fast::Hasher,
}

impl<W: Write> Sink<W> {
    fn put(&mut self, bytes: &[u8]) -> Result<(), OperatorError> {
        self.hasher.update(bytes);
        self.inner.write_all(bytes)?;
        Ok(())
    }
    fn put_u32(&mut self, v: u32) -> Result<(), OperatorError> {
        self.put(&v.to_le_bytes())
    }
    fn put_f64(&mut self, v: f64) -> Result<(), OperatorError> {
        self.put(&v.to_le_bytes())
    }
}

struct Source<R: Read> {
    inner: R,
    hasher: crc32fast::Hasher,
}

impl<R: Read> Source<R> {
    fn take(&mut self, buf: &mut [u8]) -> Result<(), OperatorError> {
        self.inner
            .read_exact(buf)
            .map_err(|_| OperatorError::Checkpoint("truncated checkpoint".into()))?;
        self.hasher.update(buf);
        Ok(())
    }
    fn take_u32(&mut self) -> Result<u32, OperatorError> {
        let mut b = [0u8; 4];
        self.take(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }
    fn take_f64(&mut self) -> Result<f64, OperatorError> {
        let mut b = [0u8; 8];
        self.take(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }
}

fn write_mlp<W: Write>(s: &mut Sink<W>, mlp: &MlpParams) -> Result<(), OperatorError> {
    s.put_u32(mlp.layers.len() as u32)?;
    for layer in &mlp.layers {
        s.put_u32(layer.out_dim() as u32)?;
        s.put_u32(layer.in_dim() as u32)?;
        for v in layer.w.iter() {
            s.put_f64(*v)?;
        }
        for v in layer.b.iter() {
            s.put_f64(*v)?;
        }
        for v in layer.rowdy.iter() {
            s.put_f64(*v)?;
        }
    }
    Ok(())
}

fn read_mlp<R: Read>(s: &mut Source<R>, activation: Activation) -> Result<MlpParams, OperatorError> {
    let n_layers = s.take_u32()? as usize;
    if n_layers == 0 || n_layers > 1024 {
        return Err(OperatorError::Checkpoint(format!(
            "implausible layer count {n_layers}"
        )));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let out = s.take_u32()? as usize;
        let inp = s.take_u32()? as usize;
        if out == 0 || inp == 0 || out > 1 << 20 || inp > 1 << 20 {
            return Err(OperatorError::Checkpoint("implausible layer shape".into()));
        }
        let mut w = Array2::zeros((out, inp));
        for v in w.iter_mut() {
            *v = s.take_f64()?;
        }
        let mut b = Array1::zeros(out);
        for v in b.iter_mut() {
            *v = s.take_f64()?;
        }
        let mut rowdy = [0.0; ROWDY_HARMONICS];
        for v in rowdy.iter_mut() {
            *v = s.take_f64()?;
        }
        layers.push(DenseLayer { w, b, rowdy });
    }
    Ok(MlpParams { layers, activation })
}

/// Write model plus normalization constants.
pub fn write_checkpoint(
    model: &OperatorModel,
    norm: &Normalization,
    path: &Path,
) -> Result<(), OperatorError> {
    let file = File::create(path)?;
    let mut s = Sink {
        inner: BufWriter::new(file),
        hasher: crc32fast::Hasher::new(),
    };
    s.put(MAGIC)?;
    s.put_u32(VERSION)?;
    s.put_u32(match model.variant {
        Variant::Vanilla => 0,
        Variant::Fusion => 1,
    })?;
    s.put_u32(model.latent_dim as u32)?;
    s.put_u32(model.branch_in as u32)?;
    write_mlp(&mut s, &model.branch)?;
    write_mlp(&mut s, &model.trunk)?;
    for v in norm.to_vec() {
        s.put_f64(v)?;
    }
    let crc = s.hasher.clone().finalize();
    s.inner.write_all(&crc.to_le_bytes())?;
    s.inner.flush()?;
    Ok(())
}

/// Read a checkpoint; fails on magic/version/CRC mismatch.
pub fn read_checkpoint(path: &Path) -> Result<(OperatorModel, Normalization), OperatorError> {
    let file = File::open(path)?;
    let mut s = Source {
        inner: BufReader::new(file),
        hasher: crc32fast::Hasher::new(),
    };
    let mut magic = [0u8; 4];
    s.take(&mut magic)?;
    if &magic != MAGIC {
        return Err(OperatorError::Checkpoint("bad magic".into()));
    }
    let version = s.take_u32()?;
    if version != VERSION {
        return Err(OperatorError::Checkpoint(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let variant = match s.take_u32()? {
        0 => Variant::Vanilla,
        1 => Variant::Fusion,
        other => {
            return Err(OperatorError::Checkpoint(format!(
                "unknown variant tag {other}"
            )))
        }
    };
    let latent_dim = s.take_u32()? as usize;
    let branch_in = s.take_u32()? as usize;
    let activation = match variant {
        Variant::Vanilla => Activation::Tanh,
        Variant::Fusion => Activation::Rowdy,
    };
    let branch = read_mlp(&mut s, activation)?;
    let trunk = read_mlp(&mut s, activation)?;
    let mut norm_vec = vec![0.0; 12];
    for v in norm_vec.iter_mut() {
        *v = s.take_f64()?;
    }
    let norm = Normalization::from_vec(&norm_vec)
        .ok_or_else(|| OperatorError::Checkpoint("bad normalization block".into()))?;

    let expect = s.hasher.clone().finalize();
    let mut crc_bytes = [0u8; 4];
    s.inner
        .read_exact(&mut crc_bytes)
        .map_err(|_| OperatorError::Checkpoint("truncated checkpoint".into()))?;
    if u32::from_le_bytes(crc_bytes) != expect {
        return Err(OperatorError::Checkpoint("checksum mismatch".into()));
    }

    Ok((
        OperatorModel {
            variant,
            branch,
            trunk,
            latent_dim,
            branch_in,
        },
        norm,
    ))
}
