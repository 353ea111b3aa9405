//! Random codebooks drawn from counter-based streams.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{InputLaws, RateTable};
use crate::error::{Error, Result};

/// Cap on the total number of codewords in one codebook set.
pub const CODEWORD_LIMIT: u128 = 1_000_000;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the stream named by `key` under `master`.
pub fn derive_seed(master: u64, key: &[u64]) -> u64 {
    key.iter()
        .fold(splitmix64(master), |h, &k| splitmix64(h ^ splitmix64(k)))
}

/// Independent generator for the stream named by `key`.
pub fn stream(master: u64, key: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, key))
}

/// `max(1, floor(e^(N r)))`, snapping values within `1e-9` relative of an integer to it so
/// that rates like `ln 2` give exact powers of two.
pub fn message_count(rate: f64, n: usize) -> u128 {
    let v = (n as f64 * rate).exp();
    if !v.is_finite() || v >= u128::MAX as f64 {
        return u128::MAX;
    }
    let nearest = v.round();
    let count = if (v - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        v.floor()
    };
    (count as u128).max(1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Book {
    count: usize,
    symbols: Vec<u16>,
}

/// Codewords for every user, rate index and message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodebookSet {
    n: usize,
    inputs: usize,
    books: Vec<Vec<Book>>,
}

/// Stream tag for codeword symbols.
const TAG_CODEWORD: u64 = 1;

/// Message counts `[user][rate]` for length `n`, checked against the codeword cap.
pub fn message_counts(rates: &RateTable, n: usize) -> Result<Vec<Vec<usize>>> {
    let mut total: u128 = 0;
    let mut out = Vec::with_capacity(rates.users());
    for k in 0..rates.users() {
        let mut row = Vec::with_capacity(rates.size());
        for &r in rates.user_rates(k) {
            let c = message_count(r, n);
            total = total.saturating_add(c);
            row.push(c.min(usize::MAX as u128) as usize);
        }
        out.push(row);
    }
    if total > CODEWORD_LIMIT {
        return Err(Error::TooManyCodewords {
            count: total,
            limit: CODEWORD_LIMIT,
        });
    }
    Ok(out)
}

/// Draws every codeword i.i.d. from its law; codeword `(k, i, w)` comes from its own stream.
pub fn generate_codebooks(
    seed: u64,
    rates: &RateTable,
    laws: &InputLaws,
    n: usize,
) -> Result<CodebookSet> {
    if n == 0 {
        return Err(Error::ConstraintViolation("codeword length must be at least 1".into()));
    }
    if laws.inputs() > u16::MAX as usize + 1 {
        return Err(Error::DimensionMismatch("input alphabet too large".into()));
    }
    let counts = message_counts(rates, n)?;
    let mut books = Vec::with_capacity(rates.users());
    for (k, row) in counts.iter().enumerate() {
        let mut per_rate = Vec::with_capacity(row.len());
        for (i, &count) in row.iter().enumerate() {
            let law = WeightedIndex::new(laws.get(k, i)?)
                .map_err(|e| Error::ConstraintViolation(format!("law of user {k}: {e}")))?;
            let mut symbols = Vec::with_capacity(count * n);
            for w in 0..count {
                let mut rng = stream(seed, &[TAG_CODEWORD, k as u64, i as u64, w as u64]);
                symbols.extend((0..n).map(|_| law.sample(&mut rng) as u16));
            }
            per_rate.push(Book { count, symbols });
        }
        books.push(per_rate);
    }
    Ok(CodebookSet {
        n,
        inputs: laws.inputs(),
        books,
    })
}

impl CodebookSet {
    /// Wraps explicit codewords `codewords[user][rate][message]`.
    pub fn from_codewords(
        n: usize,
        inputs: usize,
        codewords: Vec<Vec<Vec<Vec<usize>>>>,
    ) -> Result<Self> {
        let mut books = Vec::with_capacity(codewords.len());
        for per_rate in codewords {
            let mut row = Vec::with_capacity(per_rate.len());
            for words in per_rate {
                if words.is_empty() {
                    return Err(Error::ConstraintViolation("codebook has no codewords".into()));
                }
                let mut symbols = Vec::with_capacity(words.len() * n);
                for w in &words {
                    if w.len() != n || w.iter().any(|&x| x >= inputs) {
                        return Err(Error::DimensionMismatch(
                            "codeword length or symbol out of range".into(),
                        ));
                    }
                    symbols.extend(w.iter().map(|&x| x as u16));
                }
                row.push(Book {
                    count: words.len(),
                    symbols,
                });
            }
            books.push(row);
        }
        Ok(Self { n, inputs, books })
    }

    pub fn len_n(&self) -> usize {
        self.n
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn users(&self) -> usize {
        self.books.len()
    }

    pub fn rates(&self) -> usize {
        self.books.first().map_or(0, Vec::len)
    }

    pub fn count(&self, user: usize, rate: usize) -> usize {
        self.books[user][rate].count
    }

    pub fn codeword(&self, user: usize, rate: usize, message: usize) -> &[u16] {
        let n = self.n;
        &self.books[user][rate].symbols[message * n..(message + 1) * n]
    }

    /// Checks that the set matches a rate table and length.
    pub fn check(&self, rates: &RateTable, n: usize) -> Result<()> {
        if self.n != n || self.users() != rates.users() || self.rates() != rates.size() {
            return Err(Error::DimensionMismatch(
                "codebooks do not match the scenario".into(),
            ));
        }
        Ok(())
    }
}
