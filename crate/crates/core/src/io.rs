//! Binary field and path files.
//!
//! Layout (all little-endian):
//!
//! ```text
//! field: "TFLD" u32 version u32 complexDim u32 pointsPerAxis f64 period
//!        u64 count  count × f64
//! path:  "TPTH" u32 version u32 complexDim u32 pointsPerAxis f64 period
//!        u32 timeSteps  u64 countPerSlice  timeSteps × countPerSlice × f64
//! ```
//!
//! Values are stored row-major over `x_1, y_1, …, x_n, y_n`, slices in time
//! order. Doubles are written bit-for-bit, so round trips are exact.

use crate::error::{Error, Result};
use crate::grid::{ScalarField, TorusGrid};
use crate::space::PathField;

const FIELD_MAGIC: &[u8; 4] = b"TFLD";
const PATH_MAGIC: &[u8; 4] = b"TPTH";
const VERSION: u32 = 1;
const MAX_TIME_STEPS: u32 = 100_000;

fn put_grid(out: &mut Vec<u8>, g: &TorusGrid) {
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(g.complex_dim() as u32).to_le_bytes());
    out.extend_from_slice(&(g.points_per_axis() as u32).to_le_bytes());
    out.extend_from_slice(&g.period().to_le_bytes());
}

pub fn encode_field(f: &ScalarField) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 8 * f.values().len());
    out.extend_from_slice(FIELD_MAGIC);
    put_grid(&mut out, f.grid());
    out.extend_from_slice(&(f.values().len() as u64).to_le_bytes());
    for v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn encode_path(p: &PathField) -> Vec<u8> {
    let per = p.grid().len();
    let mut out = Vec::with_capacity(40 + 8 * per * p.time_steps());
    out.extend_from_slice(PATH_MAGIC);
    put_grid(&mut out, p.grid());
    out.extend_from_slice(&(p.time_steps() as u32).to_le_bytes());
    out.extend_from_slice(&(per as u64).to_le_bytes());
    for v in p.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::Decode(format!("truncated input: need {n} bytes at offset {}", self.pos))
        })?;
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

    fn magic(&mut self, m: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != m {
            return Err(Error::Decode(format!("bad magic {:?}", String::from_utf8_lossy(got))));
        }
        Ok(())
    }

    fn grid(&mut self) -> Result<TorusGrid> {
        let version = self.u32()?;
        if version != VERSION {
            return Err(Error::Decode(format!("unsupported version {version}")));
        }
        let n = self.u32()? as usize;
        let points = self.u32()? as usize;
        let period = self.f64()?;
        TorusGrid::new(n, points, period).map_err(|e| Error::Decode(e.to_string()))
    }

    fn values(&mut self, count: usize) -> Result<Vec<f64>> {
        let bytes = count
            .checked_mul(8)
            .ok_or_else(|| Error::Decode("value count overflows".into()))?;
        let raw = self.take(bytes)?;
        let vals: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
            return Err(Error::Decode(format!("non-finite value at position {i}")));
        }
        Ok(vals)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Decode(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

pub fn decode_field(bytes: &[u8]) -> Result<ScalarField> {
    let mut r = Reader { buf: bytes, pos: 0 };
    r.magic(FIELD_MAGIC)?;
    let grid = r.grid()?;
    let count = r.u64()?;
    if count != grid.len() as u64 {
        return Err(Error::Decode(format!("count {count} does not match grid size {}", grid.len())));
    }
    let values = r.values(grid.len())?;
    r.finish()?;
    ScalarField::from_values(grid, values).map_err(|e| Error::Decode(e.to_string()))
}

pub fn decode_path(bytes: &[u8]) -> Result<PathField> {
    let mut r = Reader { buf: bytes, pos: 0 };
    r.magic(PATH_MAGIC)?;
    let grid = r.grid()?;
    let steps = r.u32()?;
    if !(2..=MAX_TIME_STEPS).contains(&steps) {
        return Err(Error::Decode(format!("time steps {steps} outside 2..={MAX_TIME_STEPS}")));
    }
    let per = r.u64()?;
    if per != grid.len() as u64 {
        return Err(Error::Decode(format!("slice size {per} does not match grid size {}", grid.len())));
    }
    let total = (steps as usize)
        .checked_mul(grid.len())
        .ok_or_else(|| Error::Decode("path size overflows".into()))?;
    let data = r.values(total)?;
    r.finish()?;
    PathField::from_data(grid, steps as usize, data).map_err(|e| Error::Decode(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip_is_bit_exact() {
        let g = TorusGrid::new(1, 8, 3.5).unwrap();
        let f = ScalarField::from_fn(g, |x| (x[0] * 1.7).sin() / 3.0 + x[1] * 1e-300);
        let back = decode_field(&encode_field(&f)).unwrap();
        assert_eq!(back.grid(), f.grid());
        for (a, b) in back.values().iter().zip(f.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn path_round_trip_is_bit_exact() {
        let g = TorusGrid::standard(2, 8).unwrap();
        let a = ScalarField::from_fn(g, |x| x[3].cos());
        let b = ScalarField::from_fn(g, |x| (x[0] + x[2]).sin());
        let p = PathField::linear(&a, &b, 5).unwrap();
        let back = decode_path(&encode_path(&p)).unwrap();
        assert_eq!(back.time_steps(), 5);
        assert!(back.data().iter().zip(p.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn corrupted_inputs_are_rejected() {
        let g = TorusGrid::standard(1, 8).unwrap();
        let bytes = encode_field(&ScalarField::constant(g, 1.0));
        assert!(decode_field(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_field(&extra).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_field(&bad).is_err());
        let mut nan = bytes.clone();
        let l = nan.len();
        nan[l - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode_field(&nan).is_err());
        assert!(decode_path(&bytes).is_err());
        assert!(decode_field(&[]).is_err());
    }
}
