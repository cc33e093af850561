//! Little-endian binary containers for cubes (`HSC1`), masks (`MSK1`) and
//! measurements (`MEA1`).
//!
//! Every file is a 4-byte magic, a run of `u32` LE header fields, then the
//! `f32` LE payload in row-major (cube: band-major planar) order. Nothing
//! else follows the payload.

use std::fs;
use std::path::Path;

use crate::cube::{Dims, HsiCube, Mask2D, Measurement};
use crate::error::{Error, FormatError, Result};

pub const CUBE_MAGIC: [u8; 4] = *b"HSC1";
pub const MASK_MAGIC: [u8; 4] = *b"MSK1";
pub const MEASUREMENT_MAGIC: [u8; 4] = *b"MEA1";

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &'static str) -> std::result::Result<&'a [u8], FormatError> {
        let available = self.bytes.len() - self.pos;
        if available < n {
            return Err(FormatError::Truncated {
                what,
                needed: n,
                available,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn magic(&mut self, expected: [u8; 4]) -> std::result::Result<(), FormatError> {
        let found: [u8; 4] = self.take(4, "magic")?.try_into().unwrap();
        if found != expected {
            return Err(FormatError::BadMagic { expected, found });
        }
        Ok(())
    }

    fn u32(&mut self) -> std::result::Result<u32, FormatError> {
        let b = self.take(4, "header")?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn payload(&mut self, count: usize) -> std::result::Result<Vec<f32>, FormatError> {
        let nbytes = count
            .checked_mul(4)
            .ok_or_else(|| FormatError::DimensionOverflow(format!("{count} elements")))?;
        let raw = self.take(nbytes, "payload")?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let rest = self.bytes.len() - self.pos;
        if rest != 0 {
            return Err(FormatError::TrailingBytes(rest));
        }
        Ok(values)
    }
}

fn element_count(dims: &[u32]) -> std::result::Result<usize, FormatError> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
        .filter(|n| n.checked_mul(4).is_some())
        .ok_or_else(|| FormatError::DimensionOverflow(format!("{dims:?}")))
}

fn dim_u32(v: usize, name: &str) -> Result<u32> {
    u32::try_from(v)
        .map_err(|_| FormatError::DimensionOverflow(format!("{name} = {v} exceeds u32")).into())
}

fn write_payload(out: &mut Vec<u8>, data: &[f32]) {
    out.reserve(data.len() * 4);
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_cube(cube: &HsiCube) -> Result<Vec<u8>> {
    let d = cube.dims();
    let mut out = Vec::with_capacity(16 + d.len() * 4);
    out.extend_from_slice(&CUBE_MAGIC);
    for (v, name) in [(d.height, "H"), (d.width, "W"), (d.bands, "L")] {
        out.extend_from_slice(&dim_u32(v, name)?.to_le_bytes());
    }
    write_payload(&mut out, cube.data());
    Ok(out)
}

/// Parse an `HSC1` buffer. Values are checked for finiteness but not
/// clamped, so the round trip is bit-exact.
pub fn decode_cube(bytes: &[u8]) -> Result<HsiCube> {
    let mut r = Reader::new(bytes);
    r.magic(CUBE_MAGIC)?;
    let (h, w, l) = (r.u32()?, r.u32()?, r.u32()?);
    if h == 0 || w == 0 || l == 0 {
        return Err(FormatError::InvalidHeader(format!("zero dimension {h}x{w}x{l}")).into());
    }
    let n = element_count(&[h, w, l])?;
    let data = r.payload(n)?;
    HsiCube::from_vec(Dims::new(h as usize, w as usize, l as usize)?, data)
}

pub fn encode_mask(mask: &Mask2D) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(12 + mask.data().len() * 4);
    out.extend_from_slice(&MASK_MAGIC);
    out.extend_from_slice(&dim_u32(mask.height(), "H")?.to_le_bytes());
    out.extend_from_slice(&dim_u32(mask.width(), "W")?.to_le_bytes());
    write_payload(&mut out, mask.data());
    Ok(out)
}

pub fn decode_mask(bytes: &[u8]) -> Result<Mask2D> {
    let mut r = Reader::new(bytes);
    r.magic(MASK_MAGIC)?;
    let (h, w) = (r.u32()?, r.u32()?);
    if h == 0 || w == 0 {
        return Err(FormatError::InvalidHeader(format!("zero dimension {h}x{w}")).into());
    }
    let n = element_count(&[h, w])?;
    let data = r.payload(n)?;
    Mask2D::new(h as usize, w as usize, data)
}

pub fn encode_measurement(meas: &Measurement) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(20 + meas.data().len() * 4);
    out.extend_from_slice(&MEASUREMENT_MAGIC);
    for (v, name) in [
        (meas.height(), "H"),
        (meas.width(), "Wm"),
        (meas.step(), "s"),
        (meas.bands(), "L"),
    ] {
        out.extend_from_slice(&dim_u32(v, name)?.to_le_bytes());
    }
    write_payload(&mut out, meas.data());
    Ok(out)
}

pub fn decode_measurement(bytes: &[u8]) -> Result<Measurement> {
    let mut r = Reader::new(bytes);
    r.magic(MEASUREMENT_MAGIC)?;
    let (h, wm, s, l) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
    if h == 0 || wm == 0 || l == 0 {
        return Err(FormatError::InvalidHeader(format!("zero dimension {h}x{wm}, L={l}")).into());
    }
    let n = element_count(&[h, wm])?;
    let data = r.payload(n)?;
    Measurement::new(h as usize, wm as usize, s as usize, l as usize, data)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(Error::from)
}

pub fn save_cube(cube: &HsiCube, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_cube(cube)?)?;
    Ok(())
}

pub fn load_cube(path: impl AsRef<Path>) -> Result<HsiCube> {
    decode_cube(&read(path.as_ref())?)
}

pub fn save_mask(mask: &Mask2D, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_mask(mask)?)?;
    Ok(())
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask2D> {
    decode_mask(&read(path.as_ref())?)
}

pub fn save_measurement(meas: &Measurement, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_measurement(meas)?)?;
    Ok(())
}

pub fn load_measurement(path: impl AsRef<Path>) -> Result<Measurement> {
    decode_measurement(&read(path.as_ref())?)
}
