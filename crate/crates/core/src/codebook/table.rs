use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::rng::{self, Purpose};
use crate::scalar::Real;

/// `q x n` real table with Bob's vector at the secret row `u`.
///
/// Fake `j` (0-based, `j < q - 1`) sits at row `j` when `j < u` and at row
/// `j + 1` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookTable<R> {
    q: usize,
    n: usize,
    rows: Vec<R>,
    u: usize,
}

impl<R: Real> CodebookTable<R> {
    /// Assembles a table from explicit fakes; `fakes` holds `q - 1` rows of
    /// length `y.len()`, row-major.
    pub fn from_fakes(y: &[R], fakes: &[R], u: usize) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(invalid("y", "empty vector"));
        }
        if !fakes.len().is_multiple_of(n) {
            return Err(Error::LengthMismatch {
                expected: n * (fakes.len() / n + 1),
                actual: fakes.len(),
            });
        }
        let q = fakes.len() / n + 1;
        if q < 2 {
            return Err(invalid("q", "need at least one fake"));
        }
        if u >= q {
            return Err(invalid("u", format!("{u} outside [0, {q})")));
        }
        let mut rows = Vec::with_capacity(q * n);
        rows.extend_from_slice(&fakes[..u * n]);
        rows.extend_from_slice(y);
        rows.extend_from_slice(&fakes[u * n..]);
        Ok(Self { q, n, rows, u })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, l: usize) -> &[R] {
        &self.rows[l * self.n..(l + 1) * self.n]
    }

    /// All rows, row-major.
    pub fn as_slice(&self) -> &[R] {
        &self.rows
    }

    /// The hidden index.  Only the simulation harness, which plays both
    /// sides, should call this; the decoder sees the table through
    /// [`crate::decoder::RowProvider`].
    pub fn secret_index(&self) -> usize {
        self.u
    }

    /// Fakes in their original order (row `u` removed).
    pub fn fakes(&self) -> impl Iterator<Item = &[R]> {
        (0..self.q)
            .filter(move |&l| l != self.u)
            .map(move |l| self.row(l))
    }
}

/// Draws `u` uniformly, then `q - 1` fakes with i.i.d. `N(0, sigma_y2)`
/// components, all from the codebook stream of `seed`.
pub fn build_random_table<R: Real>(
    y: &[R],
    q: usize,
    sigma_y2: R,
    seed: u64,
) -> Result<CodebookTable<R>> {
    build_random_table_with(y, q, sigma_y2, &mut rng::stream(seed, 0, Purpose::Codebook))
}

pub fn build_random_table_with<R: Real, G: Rng + ?Sized>(
    y: &[R],
    q: usize,
    sigma_y2: R,
    rng: &mut G,
) -> Result<CodebookTable<R>> {
    if q < 2 {
        return Err(invalid("q", format!("{q} < 2")));
    }
    if !(sigma_y2 > R::zero()) {
        return Err(invalid("sigma_y2", "must be positive"));
    }
    let u = rng.random_range(0..q);
    let mut fakes = vec![R::zero(); (q - 1) * y.len()];
    rng::fill_normal(rng, sigma_y2, &mut fakes);
    CodebookTable::from_fakes(y, &fakes, u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_table_holds_y_once() {
        let y = [0.25f64, -1.5, 3.0];
        let t = build_random_table(&y, 2, 1.0, 9).unwrap();
        assert_eq!(t.q(), 2);
        let hits = (0..2).filter(|&l| t.row(l) == y).count();
        assert_eq!(hits, 1);
        assert_eq!(t.row(t.secret_index()), y);
    }

    #[test]
    fn removing_u_recovers_fakes_in_order() {
        let y = [9.0f64, 9.0];
        let fakes: Vec<f64> = (0..8).map(|v| v as f64).collect();
        for u in 0..5 {
            let t = CodebookTable::from_fakes(&y, &fakes, u).unwrap();
            let back: Vec<f64> = t.fakes().flatten().copied().collect();
            assert_eq!(back, fakes);
        }
        assert!(CodebookTable::from_fakes(&y, &fakes, 5).is_err());
    }
}
