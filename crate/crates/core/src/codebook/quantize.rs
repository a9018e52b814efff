use crate::error::{invalid, Result};
use crate::scalar::Real;
use crate::special::{norm_cdf, norm_quantile};

/// `b`-bit symbols, one per vector component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedVector {
    pub symbols: Vec<u16>,
    pub b: u8,
}

impl QuantizedVector {
    pub fn new(symbols: Vec<u16>, b: u8) -> Result<Self> {
        check_bits(b)?;
        if let Some(&s) = symbols.iter().find(|&&s| (s as u32) >> b != 0) {
            return Err(invalid("symbols", format!("{s} does not fit in {b} bits")));
        }
        Ok(Self { symbols, b })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

pub(crate) fn check_bits(b: u8) -> Result<()> {
    if !(1..=16).contains(&b) {
        return Err(invalid("b", format!("bit depth {b} outside [1, 16]")));
    }
    Ok(())
}

/// `floor(2^b Phi(v / sigma))`, clamped to `2^b - 1`.  Always evaluated in
/// `f64` so the symbols do not depend on the working precision.
#[inline]
pub fn quantize_scalar(v: f64, sigma: f64, b: u8) -> u16 {
    let cells = (1u32 << b) as f64;
    let top = (1u32 << b) - 1;
    let s = (cells * norm_cdf(v / sigma)).floor();
    if s.is_nan() {
        return 0;
    }
    (s as u32).min(top) as u16
}

/// Precomputed cell boundaries for one `(sigma, b)`.  Gives the same symbols
/// as [`quantize_scalar`]; inputs within rounding distance of a boundary are
/// re-evaluated through the CDF.
#[derive(Debug, Clone)]
pub struct Quantizer {
    sigma: f64,
    b: u8,
    edges: Vec<f64>,
}

impl Quantizer {
    pub fn new(sigma: f64, b: u8) -> Result<Self> {
        check_bits(b)?;
        if !(sigma > 0.0) {
            return Err(invalid("sigma", "must be positive"));
        }
        let cells = 1u32 << b;
        let edges = (1..cells)
            .map(|k| sigma * norm_quantile(k as f64 / cells as f64))
            .collect();
        Ok(Self { sigma, b, edges })
    }

    #[inline]
    pub fn symbol(&self, v: f64) -> u16 {
        let k = self.edges.partition_point(|&e| e <= v);
        let tol = 1e-9 * (self.sigma + v.abs());
        let near = |i: usize| self.edges.get(i).is_some_and(|&e| (e - v).abs() <= tol);
        if v.is_nan() || (k > 0 && near(k - 1)) || near(k) {
            return quantize_scalar(v, self.sigma, self.b);
        }
        k as u16
    }

    pub fn bits(&self) -> u8 {
        self.b
    }
}

/// Quantizes every component of `v` with scale `sigma`.
pub fn quantize<R: Real>(v: &[R], sigma: R, b: u8) -> Result<QuantizedVector> {
    check_bits(b)?;
    if !(sigma > R::zero()) {
        return Err(invalid("sigma", "must be positive"));
    }
    let sigma = sigma.as_f64();
    Ok(QuantizedVector {
        symbols: v
            .iter()
            .map(|&x| quantize_scalar(x.as_f64(), sigma, b))
            .collect(),
        b,
    })
}

/// Quantile midpoint `Phi^{-1}((s + 1/2) / 2^b)` of cell `s`, in units of the
/// quantizer scale.
pub fn cell_representative(s: u16, b: u8) -> f64 {
    norm_quantile((s as f64 + 0.5) / (1u32 << b) as f64)
}

/// Representatives for all `2^b` cells.
pub fn representatives(b: u8) -> Vec<f64> {
    (0..1u32 << b)
        .map(|s| cell_representative(s as u16, b))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centre_and_limits() {
        assert_eq!(quantize_scalar(0.0, 3.0, 8), 128);
        assert_eq!(quantize_scalar(f64::NEG_INFINITY, 1.0, 8), 0);
        assert_eq!(quantize_scalar(f64::INFINITY, 1.0, 8), 255);
        assert_eq!(quantize_scalar(50.0, 1.0, 16), u16::MAX);
        assert_eq!(quantize_scalar(-50.0, 1.0, 1), 0);
    }

    #[test]
    fn representative_falls_in_its_cell() {
        for b in [1u8, 4, 8] {
            for (s, r) in representatives(b).into_iter().enumerate() {
                assert_eq!(quantize_scalar(r, 1.0, b) as usize, s);
            }
        }
        let r = representatives(1);
        assert!((r[1] - 0.674_489_750_196_081_7).abs() < 1e-14);
        assert_eq!(r[0], -r[1]);
    }

    #[test]
    fn rejects_bad_bits() {
        assert!(quantize(&[0.0f64], 1.0, 0).is_err());
        assert!(quantize(&[0.0f64], 1.0, 17).is_err());
        assert!(QuantizedVector::new(vec![4], 2).is_err());
        assert!(QuantizedVector::new(vec![3], 2).is_ok());
    }

    #[test]
    fn quantizer_matches_scalar_path() {
        for b in [1u8, 3, 8, 12] {
            let qz = Quantizer::new(1.7, b).unwrap();
            let mut v = -9.0f64;
            while v < 9.0 {
                assert_eq!(qz.symbol(v), quantize_scalar(v, 1.7, b), "b={b} v={v}");
                v += 0.000_731;
            }
            for e in &qz.edges {
                for x in [*e, e.next_down(), e.next_up()] {
                    assert_eq!(qz.symbol(x), quantize_scalar(x, 1.7, b));
                }
            }
            assert_eq!(qz.symbol(f64::INFINITY), (1u32 << b) as u16 - 1);
            assert_eq!(qz.symbol(f64::NEG_INFINITY), 0);
        }
    }
}
