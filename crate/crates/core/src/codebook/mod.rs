//! Bob's codebook: the q-row table that hides his measurement vector, the
//! quantile discretization shared with the LUT scorer, and the seed-expanded
//! variant that ships `(tau, mu)` instead of `q` rows.

mod pseudorandom;
mod quantize;
mod serial;
mod table;

pub use pseudorandom::{
    pack_symbols, pr_chunk, pr_encode, pr_reconstruct_row, unpack_symbols, Expander,
    PseudorandomCodebook, CHUNK_BYTES,
};
pub use quantize::{
    cell_representative, quantize, quantize_scalar, representatives, QuantizedVector, Quantizer,
};
pub use serial::{read_codebook, write_codebook, SerializedCodebook};
pub use table::{build_random_table, build_random_table_with, CodebookTable};

/// Default quantizer bit depth.
pub const DEFAULT_BITS: u8 = 8;
