//! Seed-expanded codebook.  Row `l` is `mu xor psi(tau, l, 0) | psi(tau, l, 1) | ...`,
//! truncated to `n * b` bits, where `psi` is a ChaCha keystream block: key
//! `tau`, stream id `l`, block counter `j`.  At `l = u` the mask cancels and
//! the row is Bob's quantized vector.
//!
//! Symbols are packed most-significant bit first; symbol `i` occupies bits
//! `i*b .. (i+1)*b` of the big-endian bit string.

use rand::{RngCore, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};
use serde::{Deserialize, Serialize};

use super::quantize::{check_bits, QuantizedVector};
use crate::error::{invalid, Result};

/// Bytes produced by one expander call.
pub const CHUNK_BYTES: usize = 64;

/// Keystream used for `psi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Expander {
    /// ChaCha with 8 rounds: fast, not intended as a cryptographic PRF.
    #[default]
    ChaCha8,
    /// ChaCha20.
    ChaCha20,
    /// Always zero; makes `mu` equal to Bob's vector.  Testing only.
    Zero,
}

impl Expander {
    pub(crate) fn tag(self) -> u8 {
        match self {
            Expander::ChaCha8 => 1,
            Expander::ChaCha20 => 2,
            Expander::Zero => 3,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(Expander::ChaCha8),
            2 => Some(Expander::ChaCha20),
            3 => Some(Expander::Zero),
            _ => None,
        }
    }
}

/// Chunk `j` of the mask for row `l`.
pub fn pr_chunk(expander: Expander, tau: &[u8; 32], l: u64, j: u64) -> [u8; CHUNK_BYTES] {
    let mut out = [0u8; CHUNK_BYTES];
    fill_chunks(expander, tau, l, j, &mut out);
    out
}

/// Writes consecutive chunks starting at `first` into `out` (any length).
fn fill_chunks(expander: Expander, tau: &[u8; 32], l: u64, first: u64, out: &mut [u8]) {
    let word_pos = first as u128 * (CHUNK_BYTES / 4) as u128;
    match expander {
        Expander::ChaCha8 => {
            let mut g = ChaCha8Rng::from_seed(*tau);
            g.set_stream(l);
            g.set_word_pos(word_pos);
            g.fill_bytes(out);
        }
        Expander::ChaCha20 => {
            let mut g = ChaCha20Rng::from_seed(*tau);
            g.set_stream(l);
            g.set_word_pos(word_pos);
            g.fill_bytes(out);
        }
        Expander::Zero => out.fill(0),
    }
}

/// Public data replacing the table: seed `tau` and masked vector `mu`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudorandomCodebook {
    pub tau: [u8; 32],
    /// `ceil(n * b / 8)` bytes; padding bits are zero.
    pub mu: Vec<u8>,
    pub q: u64,
    pub n: usize,
    pub b: u8,
    pub expander: Expander,
}

impl PseudorandomCodebook {
    pub fn bit_len(&self) -> usize {
        self.n * self.b as usize
    }

    /// Number of expander chunks per row.
    pub fn chunks(&self) -> usize {
        self.bit_len().div_ceil(CHUNK_BYTES * 8)
    }

    /// Row `l` into caller buffers; `bytes` is scratch space.
    pub fn reconstruct_into(&self, l: u64, bytes: &mut Vec<u8>, out: &mut Vec<u16>) {
        bytes.resize(self.mu.len(), 0);
        fill_chunks(self.expander, &self.tau, l, 0, bytes);
        for (a, m) in bytes.iter_mut().zip(&self.mu) {
            *a ^= m;
        }
        mask_tail(bytes, self.bit_len());
        unpack_into(bytes, self.b, self.n, out);
    }
}

fn mask_tail(bytes: &mut [u8], bits: usize) {
    let rem = bits % 8;
    if rem != 0 {
        if let Some(last) = bytes.last_mut() {
            *last &= 0xFFu8 << (8 - rem);
        }
    }
}

/// Packs symbols MSB-first into `ceil(len * b / 8)` bytes.
pub fn pack_symbols(v: &QuantizedVector) -> Vec<u8> {
    let b = v.b as usize;
    let mut out = vec![0u8; (v.len() * b).div_ceil(8)];
    if b == 8 {
        for (o, &s) in out.iter_mut().zip(&v.symbols) {
            *o = s as u8;
        }
        return out;
    }
    let mut bit = 0usize;
    for &s in &v.symbols {
        for k in (0..b).rev() {
            if (s >> k) & 1 == 1 {
                out[bit / 8] |= 0x80 >> (bit % 8);
            }
            bit += 1;
        }
    }
    out
}

fn unpack_into(bytes: &[u8], b: u8, n: usize, out: &mut Vec<u16>) {
    out.clear();
    if b == 8 {
        out.extend(bytes[..n].iter().map(|&x| x as u16));
        return;
    }
    let b = b as usize;
    let mut bit = 0usize;
    for _ in 0..n {
        let mut s = 0u16;
        for _ in 0..b {
            s = (s << 1) | ((bytes[bit / 8] >> (7 - bit % 8)) & 1) as u16;
            bit += 1;
        }
        out.push(s);
    }
}

/// Inverse of [`pack_symbols`].
pub fn unpack_symbols(bytes: &[u8], b: u8, n: usize) -> Result<QuantizedVector> {
    check_bits(b)?;
    if bytes.len() < (n * b as usize).div_ceil(8) {
        return Err(invalid("bytes", "too short for n symbols"));
    }
    let mut out = Vec::with_capacity(n);
    unpack_into(bytes, b, n, &mut out);
    Ok(QuantizedVector { symbols: out, b })
}

/// Masks Bob's quantized vector with row `u`'s keystream.
pub fn pr_encode(
    y: &QuantizedVector,
    u: u64,
    q: u64,
    tau: [u8; 32],
    expander: Expander,
) -> Result<PseudorandomCodebook> {
    if u >= q {
        return Err(invalid("u", format!("{u} outside [0, {q})")));
    }
    let mut mu = pack_symbols(y);
    let mut a = vec![0u8; mu.len()];
    fill_chunks(expander, &tau, u, 0, &mut a);
    for (m, k) in mu.iter_mut().zip(&a) {
        *m ^= k;
    }
    let bits = y.len() * y.b as usize;
    mask_tail(&mut mu, bits);
    Ok(PseudorandomCodebook {
        tau,
        mu,
        q,
        n: y.len(),
        b: y.b,
        expander,
    })
}

/// Row `l` of the expanded codebook.
pub fn pr_reconstruct_row(cb: &PseudorandomCodebook, l: u64) -> Result<QuantizedVector> {
    if l >= cb.q {
        return Err(invalid("l", format!("{l} outside [0, {})", cb.q)));
    }
    let mut bytes = Vec::new();
    let mut out = Vec::new();
    cb.reconstruct_into(l, &mut bytes, &mut out);
    Ok(QuantizedVector {
        symbols: out,
        b: cb.b,
    })
}
