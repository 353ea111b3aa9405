//! Finite-alphabet multi-user channels, compound sets, class envelopes, rate tables and
//! input laws.
//!
//! Channel probabilities are stored flat. The row of an input tuple `(x_1, .., x_K)` is
//! indexed with user 1 as the most significant digit, so a `K = 2` binary channel has
//! rows `00, 01, 10, 11`. Users are numbered from zero inside the library.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for row sums and simplex checks.
pub const PROB_TOL: f64 = 1e-12;

/// Largest number of users a [`UserSet`] can describe.
pub const MAX_USERS: usize = 16;

/// Alphabet sizes shared by every channel of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub users: usize,
    pub inputs: usize,
    pub outputs: usize,
}

impl Shape {
    pub fn new(users: usize, inputs: usize, outputs: usize) -> Result<Self> {
        if users == 0 || users > MAX_USERS || inputs == 0 || outputs == 0 {
            return Err(Error::DimensionMismatch(format!(
                "users={users} inputs={inputs} outputs={outputs}"
            )));
        }
        let shape = Shape {
            users,
            inputs,
            outputs,
        };
        if inputs
            .checked_pow(users as u32)
            .and_then(|t| t.checked_mul(outputs))
            .is_none()
        {
            return Err(Error::DimensionMismatch("channel tensor too large".into()));
        }
        Ok(shape)
    }

    /// Number of input tuples, `|X|^K`.
    pub fn input_tuples(&self) -> usize {
        self.inputs.pow(self.users as u32)
    }

    /// Number of tensor entries.
    pub fn len(&self) -> usize {
        self.input_tuples() * self.outputs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row index of an input tuple.
    pub fn encode(&self, xs: &[usize]) -> usize {
        xs.iter().fold(0, |acc, &x| acc * self.inputs + x)
    }

    /// Input symbols of a row index, user 1 first.
    pub fn decode(&self, mut row: usize, out: &mut [usize]) {
        for slot in out.iter_mut().rev() {
            *slot = row % self.inputs;
            row /= self.inputs;
        }
    }

    fn with_users(&self, users: usize) -> Shape {
        Shape { users, ..*self }
    }
}

/// A discrete memoryless multiple access channel `P(y | x_1, .., x_K)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dmc {
    shape: Shape,
    probs: Vec<f64>,
}

/// Validates raw probabilities laid out row-major by input tuple, then output.
///
/// Rows whose sum is within [`PROB_TOL`] of one are renormalized.
pub fn validate_dmc(raw: Vec<f64>, shape: Shape) -> Result<Dmc> {
    let shape = Shape::new(shape.users, shape.inputs, shape.outputs)?;
    if raw.len() != shape.len() {
        return Err(Error::DimensionMismatch(format!(
            "expected {} entries, got {}",
            shape.len(),
            raw.len()
        )));
    }
    let probs = normalize_rows(raw, shape.outputs)?;
    Ok(Dmc { shape, probs })
}

fn normalize_rows(mut raw: Vec<f64>, width: usize) -> Result<Vec<f64>> {
    for (index, &value) in raw.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::NegativeEntry { index, value });
        }
    }
    for (row, chunk) in raw.chunks_mut(width).enumerate() {
        let sum: f64 = chunk.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::RowSumOutOfTolerance { row, sum });
        }
        if sum != 1.0 {
            chunk.iter_mut().for_each(|p| *p /= sum);
        }
    }
    Ok(raw)
}

impl Dmc {
    /// Builds a channel from a function of `(input tuple, output)`.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize], usize) -> f64) -> Result<Self> {
        let shape = Shape::new(shape.users, shape.inputs, shape.outputs)?;
        let mut xs = vec![0; shape.users];
        let mut raw = Vec::with_capacity(shape.len());
        for row in 0..shape.input_tuples() {
            shape.decode(row, &mut xs);
            for y in 0..shape.outputs {
                raw.push(f(&xs, y));
            }
        }
        validate_dmc(raw, shape)
    }

    /// Single-user binary symmetric channel with crossover `p`.
    pub fn bsc(p: f64) -> Result<Self> {
        validate_dmc(vec![1.0 - p, p, p, 1.0 - p], Shape::new(1, 2, 2)?)
    }

    /// Single-user noiseless channel on `q` symbols.
    pub fn noiseless(q: usize) -> Result<Self> {
        Self::from_fn(Shape::new(1, q, q)?, |xs, y| if xs[0] == y { 1.0 } else { 0.0 })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let w = self.shape.outputs;
        &self.probs[row * w..(row + 1) * w]
    }

    pub fn prob(&self, row: usize, y: usize) -> f64 {
        self.probs[row * self.shape.outputs + y]
    }
}

/// A finite family of channels sharing one shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompoundSet {
    ids: Vec<String>,
    channels: Vec<Dmc>,
}

impl CompoundSet {
    pub fn new(members: Vec<(String, Dmc)>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(Error::DimensionMismatch("compound set is empty".into()));
        };
        let shape = first.1.shape();
        let mut ids = Vec::with_capacity(members.len());
        let mut channels = Vec::with_capacity(members.len());
        for (id, ch) in members {
            if ch.shape() != shape {
                return Err(Error::DimensionMismatch(format!(
                    "channel `{id}` has a different shape"
                )));
            }
            if ids.contains(&id) {
                return Err(Error::DuplicateId(id));
            }
            ids.push(id);
            channels.push(ch);
        }
        Ok(Self { ids, channels })
    }

    pub fn shape(&self) -> Shape {
        self.channels[0].shape()
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn channels(&self) -> &[Dmc] {
        &self.channels
    }

    pub fn channel(&self, index: usize) -> &Dmc {
        &self.channels[index]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.ids
            .iter()
            .position(|i| i == id)
            .ok_or_else(|| Error::UnknownId(id.to_string()))
    }
}

/// Elementwise upper and lower envelopes of a channel class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelClassEnvelope {
    pub class_id: String,
    pub member_ids: Vec<String>,
    shape: Shape,
    pmax: Vec<f64>,
    pmin: Vec<f64>,
}

/// Builds the envelope of the named member channels.
pub fn build_envelope(class_id: &str, members: &[(&str, &Dmc)]) -> Result<ChannelClassEnvelope> {
    let Some((_, first)) = members.first() else {
        return Err(Error::EmptyClass);
    };
    let shape = first.shape();
    let mut pmax = first.probs().to_vec();
    let mut pmin = first.probs().to_vec();
    for (id, ch) in &members[1..] {
        if ch.shape() != shape {
            return Err(Error::DimensionMismatch(format!(
                "class `{class_id}` member `{id}` has a different shape"
            )));
        }
        for (i, &p) in ch.probs().iter().enumerate() {
            pmax[i] = pmax[i].max(p);
            pmin[i] = pmin[i].min(p);
        }
    }
    ChannelClassEnvelope::from_bounds(
        class_id,
        members.iter().map(|(id, _)| id.to_string()).collect(),
        shape,
        pmax,
        pmin,
    )
}

impl ChannelClassEnvelope {
    /// Wraps explicit bounds, checking `0 <= pmin <= pmax <= 1` and that `pmin > 0` wherever `pmax > 0`.
    pub fn from_bounds(
        class_id: &str,
        member_ids: Vec<String>,
        shape: Shape,
        pmax: Vec<f64>,
        pmin: Vec<f64>,
    ) -> Result<Self> {
        if pmax.len() != shape.len() || pmin.len() != shape.len() {
            return Err(Error::DimensionMismatch(format!(
                "class `{class_id}` bounds have the wrong length"
            )));
        }
        for (index, (&hi, &lo)) in pmax.iter().zip(&pmin).enumerate() {
            if !(0.0..=1.0).contains(&lo) {
                return Err(Error::NegativeEntry { index, value: lo });
            }
            if !(lo..=1.0).contains(&hi) {
                return Err(Error::NegativeEntry { index, value: hi });
            }
            if hi > 0.0 && lo == 0.0 {
                return Err(Error::DegenerateEnvelope { index, pmax: hi });
            }
        }
        Ok(Self {
            class_id: class_id.to_string(),
            member_ids,
            shape,
            pmax,
            pmin,
        })
    }

    pub fn singleton(id: &str, channel: &Dmc) -> Result<Self> {
        build_envelope(id, &[(id, channel)])
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn pmax(&self) -> &[f64] {
        &self.pmax
    }

    pub fn pmin(&self) -> &[f64] {
        &self.pmin
    }

    /// Whether `channel` lies between the bounds entrywise.
    pub fn covers(&self, channel: &Dmc) -> bool {
        channel.shape() == self.shape
            && channel
                .probs()
                .iter()
                .zip(self.pmin.iter().zip(&self.pmax))
                .all(|(p, (lo, hi))| lo <= p && p <= hi)
    }
}

/// Per-user ordered rate sets in nats per symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    rates: Vec<Vec<f64>>,
}

impl RateTable {
    pub fn new(rates: Vec<Vec<f64>>) -> Result<Self> {
        let m = rates.first().map(Vec::len).unwrap_or(0);
        if rates.is_empty() || rates.len() > MAX_USERS || m == 0 {
            return Err(Error::DimensionMismatch("rate table needs users and rates".into()));
        }
        for (k, row) in rates.iter().enumerate() {
            if row.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "user {k} has {} rates, expected {m}",
                    row.len()
                )));
            }
            if row.iter().any(|r| !r.is_finite() || *r < 0.0) {
                return Err(Error::ConstraintViolation(format!(
                    "user {k} has a negative or non-finite rate"
                )));
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::ConstraintViolation(format!(
                    "user {k} rates are not strictly increasing"
                )));
            }
        }
        Ok(Self { rates })
    }

    /// One user with the given rates.
    pub fn single(rates: Vec<f64>) -> Result<Self> {
        Self::new(vec![rates])
    }

    pub fn users(&self) -> usize {
        self.rates.len()
    }

    /// Common number of rates per user, `M`.
    pub fn size(&self) -> usize {
        self.rates[0].len()
    }

    pub fn rate(&self, user: usize, index: usize) -> f64 {
        self.rates[user][index]
    }

    pub fn user_rates(&self, user: usize) -> &[f64] {
        &self.rates[user]
    }

    /// Sum of the selected rates over `users`.
    pub fn sum(&self, r: &RateVectorIndex, users: UserSet) -> f64 {
        users.iter().map(|k| self.rate(k, r.get(k))).sum()
    }

    /// All `M^K` rate vectors in lexicographic order.
    pub fn all_vectors(&self) -> Vec<RateVectorIndex> {
        let k = self.users();
        let m = self.size();
        let total = m.pow(k as u32);
        (0..total)
            .map(|mut code| {
                let mut idx = vec![0; k];
                for slot in idx.iter_mut().rev() {
                    *slot = code % m;
                    code /= m;
                }
                RateVectorIndex(idx)
            })
            .collect()
    }

    /// The table restricted to `users`, renumbered in increasing order.
    pub fn restrict(&self, users: UserSet) -> Result<Self> {
        Self::new(users.iter().map(|k| self.rates[k].clone()).collect())
    }

    pub fn check(&self, r: &RateVectorIndex) -> Result<()> {
        if r.len() != self.users() || r.0.iter().any(|&i| i >= self.size()) {
            return Err(Error::DimensionMismatch(format!(
                "rate vector {:?} does not fit the rate table",
                r.0
            )));
        }
        Ok(())
    }
}

/// Input law per `(user, rate index)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputLaws {
    inputs: usize,
    laws: Vec<Vec<Vec<f64>>>,
}

impl InputLaws {
    /// `laws[k][i]` is the law of user `k` at rate index `i`.
    pub fn new(laws: Vec<Vec<Vec<f64>>>, inputs: usize) -> Result<Self> {
        let mut out = Vec::with_capacity(laws.len());
        for (k, per_rate) in laws.into_iter().enumerate() {
            let mut row = Vec::with_capacity(per_rate.len());
            for (i, law) in per_rate.into_iter().enumerate() {
                if law.len() != inputs {
                    return Err(Error::DimensionMismatch(format!(
                        "law of user {k} rate {i} has {} entries, expected {inputs}",
                        law.len()
                    )));
                }
                row.push(normalize_rows(law, inputs)?);
            }
            out.push(row);
        }
        Ok(Self { inputs, laws: out })
    }

    /// The uniform law for every user and rate of `rates`.
    pub fn uniform(rates: &RateTable, inputs: usize) -> Self {
        let u = vec![1.0 / inputs as f64; inputs];
        Self {
            inputs,
            laws: vec![vec![u; rates.size()]; rates.users()],
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn get(&self, user: usize, rate: usize) -> Result<&[f64]> {
        self.laws
            .get(user)
            .and_then(|l| l.get(rate))
            .map(Vec::as_slice)
            .ok_or(Error::MissingLaw { user, rate })
    }

    /// Checks that a law exists for every entry of `rates` and the alphabet matches.
    pub fn check(&self, rates: &RateTable, shape: Shape) -> Result<()> {
        if self.inputs != shape.inputs {
            return Err(Error::DimensionMismatch("law alphabet differs from channel".into()));
        }
        for k in 0..rates.users() {
            for i in 0..rates.size() {
                self.get(k, i)?;
            }
        }
        Ok(())
    }

    /// Laws of `users`, renumbered in increasing order.
    pub fn restrict(&self, users: UserSet) -> Self {
        Self {
            inputs: self.inputs,
            laws: users
                .iter()
                .map(|k| self.laws.get(k).cloned().unwrap_or_default())
                .collect(),
        }
    }

    /// Probability of `xs` under the product law of the users in `users` at rates `r`.
    pub fn product(&self, r: &RateVectorIndex, users: UserSet, xs: &[usize]) -> Result<f64> {
        let mut p = 1.0;
        for k in users.iter() {
            p *= self.get(k, r.get(k))?[xs[k]];
        }
        Ok(p)
    }
}

/// Per-user rate indices (zero-based) into a [`RateTable`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RateVectorIndex(pub Vec<usize>);

impl RateVectorIndex {
    pub fn new(indices: Vec<usize>) -> Self {
        Self(indices)
    }

    pub fn get(&self, user: usize) -> usize {
        self.0[user]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Whether both vectors select the same rates for every user in `users`.
    pub fn agrees_on(&self, other: &Self, users: UserSet) -> bool {
        users.iter().all(|k| self.0[k] == other.0[k])
    }

    /// Components of the users in `users`, in increasing user order.
    pub fn restrict(&self, users: UserSet) -> Self {
        Self(users.iter().map(|k| self.0[k]).collect())
    }
}

/// A set of users encoded as a bitmask.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
pub struct UserSet(pub u32);

impl UserSet {
    pub const EMPTY: UserSet = UserSet(0);

    /// `{0, .., k-1}`.
    pub fn full(k: usize) -> Self {
        UserSet(((1u64 << k) - 1) as u32)
    }

    pub fn from_users(users: &[usize]) -> Self {
        UserSet(users.iter().fold(0, |m, &k| m | (1 << k)))
    }

    pub fn contains(self, k: usize) -> bool {
        self.0 >> k & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn insert(self, k: usize) -> Self {
        UserSet(self.0 | 1 << k)
    }

    /// Complement within `{0, .., k-1}`.
    pub fn complement(self, k: usize) -> Self {
        UserSet(Self::full(k).0 & !self.0)
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&k| self.contains(k))
    }

    /// All proper subsets of `self`, in increasing bitmask order.
    pub fn proper_subsets(self) -> Vec<UserSet> {
        let mut out = Vec::new();
        let mut sub = 0u32;
        loop {
            if sub != self.0 {
                out.push(UserSet(sub));
            }
            if sub == self.0 {
                break;
            }
            sub = (sub.wrapping_sub(self.0)) & self.0;
        }
        out.sort();
        out
    }

    /// Position of each member when the set is renumbered from zero.
    pub fn rank_of(self, k: usize) -> usize {
        (self.0 & ((1u32 << k) - 1)).count_ones() as usize
    }

    /// The set renumbered relative to `within`, which must contain it.
    pub fn relative_to(self, within: UserSet) -> UserSet {
        UserSet::from_users(&self.iter().map(|k| within.rank_of(k)).collect::<Vec<_>>())
    }
}

/// The `|D|`-user channel seen by a receiver that treats users outside `kept` as noise
/// drawn from their input laws at rates `rates`.
pub fn effective_channel(
    p: &Dmc,
    kept: UserSet,
    rates: &RateVectorIndex,
    laws: &InputLaws,
) -> Result<Dmc> {
    let shape = p.shape();
    let k = shape.users;
    if kept.is_empty() || !kept.is_subset_of(UserSet::full(k)) {
        return Err(Error::ConstraintViolation(
            "decoder user set must be a nonempty subset of the users".into(),
        ));
    }
    if rates.len() != k {
        return Err(Error::DimensionMismatch("rate vector length".into()));
    }
    if kept == UserSet::full(k) {
        return Ok(p.clone());
    }
    let dropped = kept.complement(k);
    for u in dropped.iter() {
        laws.get(u, rates.get(u))?;
    }
    let out_shape = shape.with_users(kept.len());
    let mut probs = vec![0.0; out_shape.len()];
    let mut xs = vec![0; k];
    let mut kept_xs = vec![0; kept.len()];
    for row in 0..shape.input_tuples() {
        shape.decode(row, &mut xs);
        let w = laws.product(rates, dropped, &xs)?;
        if w == 0.0 {
            continue;
        }
        for (slot, u) in kept_xs.iter_mut().zip(kept.iter()) {
            *slot = xs[u];
        }
        let base = out_shape.encode(&kept_xs) * shape.outputs;
        for (y, &py) in p.row(row).iter().enumerate() {
            probs[base + y] += w * py;
        }
    }
    for row in probs.chunks_mut(shape.outputs) {
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= sum);
    }
    validate_dmc(probs, out_shape)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor2() -> Dmc {
        Dmc::from_fn(Shape::new(2, 2, 2).unwrap(), |xs, y| {
            f64::from(u8::from((xs[0] ^ xs[1]) == y))
        })
        .unwrap()
    }

    #[test]
    fn identity_and_bsc_validate() {
        assert!(validate_dmc(vec![1.0, 0.0, 0.0, 1.0], Shape::new(1, 2, 2).unwrap()).is_ok());
        assert!(validate_dmc(vec![0.9, 0.1, 0.1, 0.9], Shape::new(1, 2, 2).unwrap()).is_ok());
    }

    #[test]
    fn bad_row_sum_rejected() {
        let err = validate_dmc(vec![0.9, 0.2, 0.1, 0.9], Shape::new(1, 2, 2).unwrap());
        assert!(matches!(err, Err(Error::RowSumOutOfTolerance { row: 0, .. })));
    }

    #[test]
    fn negative_and_wrong_size_rejected() {
        let s = Shape::new(1, 2, 2).unwrap();
        assert!(matches!(
            validate_dmc(vec![1.1, -0.1, 0.0, 1.0], s),
            Err(Error::NegativeEntry { .. })
        ));
        assert!(matches!(
            validate_dmc(vec![1.0, 0.0, 1.0], s),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn near_unit_rows_renormalized() {
        let s = Shape::new(1, 2, 2).unwrap();
        let d = validate_dmc(vec![0.7 + 4e-13, 0.3, 0.5, 0.5], s).unwrap();
        assert_eq!(d.row(0).iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn envelope_extrema() {
        let a = Dmc::bsc(0.1).unwrap();
        let b = Dmc::bsc(0.2).unwrap();
        let env = build_envelope("F", &[("a", &a), ("b", &b)]).unwrap();
        assert_eq!(env.pmax(), &[0.9, 0.2, 0.2, 0.9]);
        assert_eq!(env.pmin(), &[0.8, 0.1, 0.1, 0.8]);
        let single = ChannelClassEnvelope::singleton("a", &a).unwrap();
        assert_eq!(single.pmax(), a.probs());
        assert_eq!(single.pmin(), a.probs());
    }

    #[test]
    fn envelope_errors() {
        let a = Dmc::bsc(0.0).unwrap();
        let b = Dmc::bsc(0.1).unwrap();
        assert!(matches!(
            build_envelope("F", &[("a", &a), ("b", &b)]),
            Err(Error::DegenerateEnvelope { .. })
        ));
        assert_eq!(build_envelope("F", &[]), Err(Error::EmptyClass));
        let c = xor2();
        assert!(matches!(
            build_envelope("F", &[("b", &b), ("c", &c)]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn effective_channel_of_all_users_is_identity_map() {
        let p = xor2();
        let rates = RateTable::new(vec![vec![0.1], vec![0.1]]).unwrap();
        let laws = InputLaws::uniform(&rates, 2);
        let r = RateVectorIndex::new(vec![0, 0]);
        let e = effective_channel(&p, UserSet::full(2), &r, &laws).unwrap();
        assert_eq!(e, p);
    }

    #[test]
    fn xor_with_uniform_interferer_is_useless() {
        let rates = RateTable::new(vec![vec![0.1], vec![0.1]]).unwrap();
        let laws = InputLaws::uniform(&rates, 2);
        let r = RateVectorIndex::new(vec![0, 0]);
        let e = effective_channel(&xor2(), UserSet::from_users(&[0]), &r, &laws).unwrap();
        assert_eq!(e, Dmc::bsc(0.5).unwrap());
    }

    #[test]
    fn xor_with_biased_interferer_is_bsc() {
        let laws = InputLaws::new(
            vec![vec![vec![0.5, 0.5]], vec![vec![0.9, 0.1]]],
            2,
        )
        .unwrap();
        let r = RateVectorIndex::new(vec![0, 0]);
        let e = effective_channel(&xor2(), UserSet::from_users(&[0]), &r, &laws).unwrap();
        let bsc = Dmc::bsc(0.1).unwrap();
        for (a, b) in e.probs().iter().zip(bsc.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn missing_law_reported() {
        let laws = InputLaws::new(vec![vec![vec![0.5, 0.5]; 2], vec![vec![0.5, 0.5]]], 2).unwrap();
        let r = RateVectorIndex::new(vec![0, 1]);
        assert_eq!(
            effective_channel(&xor2(), UserSet::from_users(&[0]), &r, &laws),
            Err(Error::MissingLaw { user: 1, rate: 1 })
        );
    }

    #[test]
    fn rate_table_rules() {
        assert!(RateTable::single(vec![0.2, 0.1]).is_err());
        assert!(RateTable::single(vec![-0.1]).is_err());
        assert!(RateTable::new(vec![vec![0.1], vec![0.1, 0.2]]).is_err());
        let t = RateTable::new(vec![vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap();
        let all = t.all_vectors();
        assert_eq!(all.len(), 4);
        assert_eq!(all[1], RateVectorIndex::new(vec![0, 1]));
    }

    #[test]
    fn user_set_helpers() {
        let d = UserSet::from_users(&[0, 2]);
        assert_eq!(
            d.proper_subsets(),
            vec![UserSet(0), UserSet(1), UserSet(4)]
        );
        assert_eq!(UserSet::full(3).proper_subsets().len(), 7);
        assert_eq!(UserSet::from_users(&[2]).relative_to(d), UserSet(2));
        assert_eq!(d.complement(3), UserSet(2));
    }
}
