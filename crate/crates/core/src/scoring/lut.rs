//! Table-driven scoring of quantized vectors.
//!
//! `LUT[j][k]` approximates `(x_i / sigma_X)(m_i / sigma_Y)` by the product of
//! the cell representatives.  Entries are stored in fixed point with
//! [`LUT_FRAC_BITS`] fractional bits and summed in `i128`, so the tally path
//! (histogram of `(j, k)` pairs, then one multiply per cell) and the direct
//! path (one lookup per component) give exactly the same number.

use super::ScoreContext;
use crate::codebook::{representatives, QuantizedVector};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

pub const LUT_FRAC_BITS: u32 = 32;
const MAGIC: &[u8; 4] = b"RLUT";
const VERSION: u16 = 1;

/// `2^b x 2^b` product table plus squared representatives for the norm term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreLut {
    b: u8,
    entries: Vec<i64>,
    rep_sq: Vec<i64>,
}

fn to_fixed(v: f64) -> i64 {
    (v * (1u64 << LUT_FRAC_BITS) as f64).round() as i64
}

fn from_fixed(v: i128) -> f64 {
    v as f64 / (1u64 << LUT_FRAC_BITS) as f64
}

/// Builds the table for bit depth `b` (1 to 12).
pub fn score_lut_build(b: u8) -> Result<ScoreLut> {
    if !(1..=12).contains(&b) {
        return Err(invalid("b", format!("LUT bit depth {b} outside [1, 12]")));
    }
    let rep = representatives(b);
    let size = rep.len();
    let mut entries = Vec::with_capacity(size * size);
    for &rj in &rep {
        entries.extend(rep.iter().map(|&rk| to_fixed(rj * rk)));
    }
    Ok(ScoreLut {
        b,
        entries,
        rep_sq: rep.iter().map(|&r| to_fixed(r * r)).collect(),
    })
}

impl ScoreLut {
    pub fn bits(&self) -> u8 {
        self.b
    }

    pub fn size(&self) -> usize {
        1 << self.b
    }

    #[inline]
    pub fn fixed(&self, j: u16, k: u16) -> i64 {
        self.entries[((j as usize) << self.b) | k as usize]
    }

    #[inline]
    pub fn fixed_sq(&self, k: u16) -> i64 {
        self.rep_sq[k as usize]
    }

    /// Entry `(j, k)` as a real number.
    pub fn value(&self, j: u16, k: u16) -> f64 {
        from_fixed(self.fixed(j, k) as i128)
    }

    /// Converts fixed-point sums into normalized `(a, b)`.
    pub fn unfix(a: i128, b: i128) -> (f64, f64) {
        (from_fixed(a), from_fixed(b))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(7 + 8 * (self.entries.len() + self.rep_sq.len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.b);
        for v in self.entries.iter().chain(&self.rep_sq) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |reason: &str| Error::Format {
            what: "LUT",
            reason: reason.to_string(),
        };
        if bytes.len() < 7 || &bytes[..4] != MAGIC {
            return Err(bad("bad magic"));
        }
        if u16::from_le_bytes([bytes[4], bytes[5]]) != VERSION {
            return Err(bad("unsupported version"));
        }
        let b = bytes[6];
        if !(1..=12).contains(&b) {
            return Err(bad("bit depth out of range"));
        }
        let size = 1usize << b;
        let body = &bytes[7..];
        if body.len() != 8 * (size * size + size) {
            return Err(bad("length does not match bit depth"));
        }
        let vals: Vec<i64> = body
            .chunks_exact(8)
            .map(|c| i64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(Self {
            b,
            entries: vals[..size * size].to_vec(),
            rep_sq: vals[size * size..].to_vec(),
        })
    }
}

fn check(qx: &QuantizedVector, qm: &QuantizedVector, lut: &ScoreLut, n: usize) -> Result<()> {
    if qx.len() != qm.len() || qx.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: if qx.len() != n { qx.len() } else { qm.len() },
        });
    }
    if qx.b != lut.b || qm.b != lut.b {
        return Err(invalid("b", "quantizer and LUT bit depths differ"));
    }
    Ok(())
}

/// Score from one table lookup per component.
pub fn score_lut_direct<R: Real>(
    ctx: &ScoreContext<R>,
    qx: &QuantizedVector,
    qm: &QuantizedVector,
    lut: &ScoreLut,
) -> Result<R> {
    check(qx, qm, lut, ctx.n())?;
    let mut a = 0i128;
    let mut b = 0i128;
    for (&j, &k) in qx.symbols.iter().zip(&qm.symbols) {
        a += lut.fixed(j, k) as i128;
        b += lut.fixed_sq(k) as i128;
    }
    let (a, b) = ScoreLut::unfix(a, b);
    Ok(ctx.score_normalized(R::cst(a), R::cst(b)))
}

/// Score from the `(j, k)` tally: `sum t_jk LUT[j][k]`, with the norm term
/// from the column sums of the tally.
pub fn score_tally<R: Real>(
    ctx: &ScoreContext<R>,
    qx: &QuantizedVector,
    qm: &QuantizedVector,
    lut: &ScoreLut,
) -> Result<R> {
    check(qx, qm, lut, ctx.n())?;
    let size = lut.size();
    let mut tally = vec![0u64; size * size];
    for (&j, &k) in qx.symbols.iter().zip(&qm.symbols) {
        tally[((j as usize) << lut.b) | k as usize] += 1;
    }
    let mut a = 0i128;
    let mut col = vec![0u64; size];
    for (idx, &t) in tally.iter().enumerate() {
        if t != 0 {
            a += t as i128 * lut.entries[idx] as i128;
            col[idx & (size - 1)] += t;
        }
    }
    let b: i128 = col
        .iter()
        .zip(&lut.rep_sq)
        .map(|(&c, &r)| c as i128 * r as i128)
        .sum();
    let (a, b) = ScoreLut::unfix(a, b);
    Ok(ctx.score_normalized(R::cst(a), R::cst(b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_bit_table() {
        let lut = score_lut_build(1).unwrap();
        let r = 0.674_489_750_196_081_7f64;
        assert!((lut.value(1, 1) - r * r).abs() < 1e-9);
        assert_eq!(lut.value(0, 1), -lut.value(1, 1));
        assert_eq!(lut.value(1, 0), -lut.value(1, 1));
        assert_eq!(lut.value(0, 0), lut.value(1, 1));
    }

    #[test]
    fn symmetric() {
        let lut = score_lut_build(6).unwrap();
        for j in 0..64 {
            for k in 0..64 {
                assert_eq!(lut.fixed(j, k), lut.fixed(k, j));
            }
        }
    }

    #[test]
    fn blob_roundtrip() {
        let lut = score_lut_build(4).unwrap();
        let bytes = lut.to_bytes();
        assert_eq!(ScoreLut::from_bytes(&bytes).unwrap(), lut);
        assert!(ScoreLut::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(score_lut_build(13).is_err());
        assert!(score_lut_build(0).is_err());
    }
}
