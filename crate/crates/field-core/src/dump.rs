//! Raw field dumps: the `CBF1` container.
//!
//! Layout: 16-byte header — magic `CBF1`, then rows, cols and channel count as
//! little-endian `u32` — followed by `rows * cols * channels` little-endian
//! `f64` samples, row-major with channels interleaved per pixel.

use std::fs;
use std::path::Path;

use crate::grid::{ScalarField, Vec3Field, VectorField2};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"CBF1";

/// A loaded raw dump; `data` is row-major, channel-interleaved.
#[derive(Clone, Debug)]
pub struct Cbf1 {
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Cbf1 {
    pub fn to_scalar(&self) -> Result<ScalarField> {
        if self.channels != 1 {
            return Err(Error::Dump(format!(
                "expected 1 channel, found {}",
                self.channels
            )));
        }
        Ok(ScalarField::from_vec(self.rows, self.cols, self.data.clone()))
    }

    pub fn to_vec3(&self) -> Result<Vec3Field> {
        if self.channels != 3 {
            return Err(Error::Dump(format!(
                "expected 3 channels, found {}",
                self.channels
            )));
        }
        Ok(Vec3Field::from_fn(self.rows, self.cols, |i, j| {
            let k = (i * self.cols + j) * 3;
            [self.data[k], self.data[k + 1], self.data[k + 2]]
        }))
    }

    pub fn to_vector2(&self) -> Result<VectorField2> {
        if self.channels != 2 {
            return Err(Error::Dump(format!(
                "expected 2 channels, found {}",
                self.channels
            )));
        }
        Ok(VectorField2::from_fn(self.rows, self.cols, |i, j| {
            let k = (i * self.cols + j) * 2;
            [self.data[k], self.data[k + 1]]
        }))
    }
}

/// Writes a raw dump. `data` must be row-major channel-interleaved with
/// `rows * cols * channels` samples.
pub fn write_cbf1(
    path: &Path,
    rows: usize,
    cols: usize,
    channels: usize,
    data: &[f64],
) -> Result<()> {
    if data.len() != rows * cols * channels {
        return Err(Error::Dump(format!(
            "data length {} does not match {rows}x{cols}x{channels}",
            data.len()
        )));
    }
    let mut out = Vec::with_capacity(16 + data.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    out.extend_from_slice(&(channels as u32).to_le_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_cbf1(path: &Path) -> Result<Cbf1> {
    let bytes = fs::read(path)?;
    if bytes.len() < 16 || &bytes[0..4] != MAGIC {
        return Err(Error::Dump(format!("{}: missing CBF1 header", path.display())));
    }
    let word = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
    let (rows, cols, channels) = (word(4), word(8), word(12));
    if rows == 0 || cols == 0 || channels == 0 {
        return Err(Error::Dump("CBF1 header has zero dimension".into()));
    }
    let n = rows * cols * channels;
    let expected = 16 + 8 * n;
    if bytes.len() != expected {
        return Err(Error::Dump(format!(
            "CBF1 payload is {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let data = bytes[16..]
        .chunks_exact(8)
        .map(|ch| f64::from_le_bytes(ch.try_into().unwrap()))
        .collect();
    Ok(Cbf1 {
        rows,
        cols,
        channels,
        data,
    })
}

/// Convenience wrappers for the common field shapes.
pub fn write_scalar(path: &Path, f: &ScalarField) -> Result<()> {
    write_cbf1(path, f.rows(), f.cols(), 1, f.data())
}

pub fn write_vec3(path: &Path, f: &Vec3Field) -> Result<()> {
    let flat: Vec<f64> = f.data().iter().flatten().copied().collect();
    write_cbf1(path, f.rows(), f.cols(), 3, &flat)
}

pub fn write_vector2(path: &Path, f: &VectorField2) -> Result<()> {
    let flat: Vec<f64> = f.data().iter().flatten().copied().collect();
    write_cbf1(path, f.rows(), f.cols(), 2, &flat)
}

/// Writes a multi-channel flux (one 2-vector field per channel) as a single
/// dump with `2 * n_channels` interleaved samples per pixel.
pub fn write_flux(path: &Path, flux: &[VectorField2]) -> Result<()> {
    assert!(!flux.is_empty(), "flux must have at least one channel");
    let (rows, cols) = (flux[0].rows(), flux[0].cols());
    let mut flat = Vec::with_capacity(rows * cols * 2 * flux.len());
    for i in 0..rows {
        for j in 0..cols {
            for ch in flux {
                let v = ch.get(i, j);
                flat.push(v[0]);
                flat.push(v[1]);
            }
        }
    }
    write_cbf1(path, rows, cols, 2 * flux.len(), &flat)
}
