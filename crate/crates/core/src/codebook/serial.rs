//! Binary codebook interchange.
//!
//! Header: magic `RCBK`, version `u16`, `q` `u64`, `n` `u64`, `b` `u8`,
//! variant `u8`, all little-endian.  Variant 0 is a real table followed by
//! `q * n` `f64` values row-major; variants 1..=3 are a seed-expanded codebook
//! (expander ChaCha8, ChaCha20, zero) followed by `tau` and `mu`, each as a
//! `u32` byte length and the bytes.

use std::io::{Read, Write};

use super::pseudorandom::{Expander, PseudorandomCodebook};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"RCBK";
const VERSION: u16 = 1;

/// Public codebook data as written to disk; the true row index is never
/// serialized.
#[derive(Debug, Clone, PartialEq)]
pub enum SerializedCodebook {
    Real { q: u64, n: u64, rows: Vec<f64> },
    Pseudorandom(PseudorandomCodebook),
}

fn format_err(reason: impl Into<String>) -> Error {
    Error::Format {
        what: "codebook",
        reason: reason.into(),
    }
}

pub fn write_codebook<W: Write>(w: &mut W, cb: &SerializedCodebook) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    match cb {
        SerializedCodebook::Real { q, n, rows } => {
            if rows.len() as u64 != q * n {
                return Err(format_err("row data does not match q * n"));
            }
            w.write_all(&q.to_le_bytes())?;
            w.write_all(&n.to_le_bytes())?;
            w.write_all(&[0, 0])?;
            for v in rows {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        SerializedCodebook::Pseudorandom(p) => {
            w.write_all(&p.q.to_le_bytes())?;
            w.write_all(&(p.n as u64).to_le_bytes())?;
            w.write_all(&[p.b, p.expander.tag()])?;
            for field in [&p.tau[..], &p.mu[..]] {
                w.write_all(&(field.len() as u32).to_le_bytes())?;
                w.write_all(field)?;
            }
        }
    }
    Ok(())
}

fn read_array<const N: usize, Rd: Read>(r: &mut Rd) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_bytes<Rd: Read>(r: &mut Rd) -> Result<Vec<u8>> {
    let len = u32::from_le_bytes(read_array(r)?) as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn read_codebook<Rd: Read>(r: &mut Rd) -> Result<SerializedCodebook> {
    if &read_array::<4, _>(r)? != MAGIC {
        return Err(format_err("bad magic"));
    }
    let version = u16::from_le_bytes(read_array(r)?);
    if version != VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let q = u64::from_le_bytes(read_array(r)?);
    let n = u64::from_le_bytes(read_array(r)?);
    let [b, variant] = read_array::<2, _>(r)?;
    if variant == 0 {
        let len = q
            .checked_mul(n)
            .ok_or_else(|| format_err("q * n overflows"))? as usize;
        let mut rows = Vec::with_capacity(len.min(1 << 24));
        for _ in 0..len {
            rows.push(f64::from_le_bytes(read_array(r)?));
        }
        return Ok(SerializedCodebook::Real { q, n, rows });
    }
    let expander = Expander::from_tag(variant)
        .ok_or_else(|| format_err(format!("unknown variant {variant}")))?;
    let tau: [u8; 32] = read_bytes(r)?
        .try_into()
        .map_err(|_| format_err("tau must be 32 bytes"))?;
    let mu = read_bytes(r)?;
    if mu.len() as u64 != (n * b as u64).div_ceil(8) {
        return Err(format_err("mu length does not match n * b"));
    }
    Ok(SerializedCodebook::Pseudorandom(PseudorandomCodebook {
        tau,
        mu,
        q,
        n: n as usize,
        b,
        expander,
    }))
}
