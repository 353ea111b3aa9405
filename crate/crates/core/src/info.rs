//! Conditional mutual information under product input laws.

use crate::channel::{Dmc, InputLaws, RateVectorIndex, UserSet};
use crate::error::{Error, Result};

/// Input to the mutual information routines.
#[derive(Debug, Clone, Copy)]
pub struct MiQuery<'a> {
    pub channel: &'a Dmc,
    pub laws: &'a InputLaws,
    pub rates: &'a RateVectorIndex,
    /// The conditioning users `S`.
    pub given: UserSet,
}

impl MiQuery<'_> {
    fn validate(&self) -> Result<()> {
        let k = self.channel.shape().users;
        if self.rates.len() != k || !self.given.is_subset_of(UserSet::full(k)) {
            return Err(Error::DimensionMismatch("query does not match channel".into()));
        }
        for u in 0..k {
            self.laws.get(u, self.rates.get(u))?;
        }
        Ok(())
    }
}

/// `I(X_{S^c}; Y | X_S)` in nats, evaluated from the joint law as
/// `sum p(x, y) ln(P(y|x) / p(y|x_S))`.
pub fn conditional_mi(q: &MiQuery) -> Result<f64> {
    q.validate()?;
    let shape = q.channel.shape();
    let k = shape.users;
    let free = q.given.complement(k);
    if free.is_empty() {
        return Ok(0.0);
    }
    // p(y | x_S) keyed by the row of x with free inputs zeroed.
    let mut xs = vec![0; k];
    let mut cond = vec![0.0; shape.len()];
    for row in 0..shape.input_tuples() {
        shape.decode(row, &mut xs);
        let w = q.laws.product(q.rates, free, &xs)?;
        free.iter().for_each(|u| xs[u] = 0);
        let base = shape.encode(&xs) * shape.outputs;
        for (y, &p) in q.channel.row(row).iter().enumerate() {
            cond[base + y] += w * p;
        }
    }
    let mut total = 0.0;
    for row in 0..shape.input_tuples() {
        shape.decode(row, &mut xs);
        let w = q.laws.product(q.rates, UserSet::full(k), &xs)?;
        free.iter().for_each(|u| xs[u] = 0);
        let base = shape.encode(&xs) * shape.outputs;
        for (y, &p) in q.channel.row(row).iter().enumerate() {
            if w > 0.0 && p > 0.0 {
                total += w * p * (p / cond[base + y]).ln();
            }
        }
    }
    Ok(total.max(0.0))
}

/// The same quantity through the chain rule `I(X; Y) - I(X_S; Y)`, each term computed
/// as an output entropy minus a conditional entropy.
pub fn conditional_mi_chain(q: &MiQuery) -> Result<f64> {
    q.validate()?;
    let k = q.channel.shape().users;
    if q.given == UserSet::full(k) {
        return Ok(0.0);
    }
    let all = information_with(q, UserSet::full(k))?;
    let part = information_with(q, q.given)?;
    Ok((all - part).max(0.0))
}

/// `I(X_A; Y) = H(Y) - H(Y | X_A)`.
fn information_with(q: &MiQuery, a: UserSet) -> Result<f64> {
    let shape = q.channel.shape();
    let k = shape.users;
    let mut xs = vec![0; k];
    let mut py = vec![0.0; shape.outputs];
    // p(x_A, y) keyed by the row of x with users outside A zeroed.
    let mut joint = vec![0.0; shape.len()];
    let mut marginal_a = vec![0.0; shape.input_tuples()];
    for row in 0..shape.input_tuples() {
        shape.decode(row, &mut xs);
        let w = q.laws.product(q.rates, UserSet::full(k), &xs)?;
        a.complement(k).iter().for_each(|u| xs[u] = 0);
        let key = shape.encode(&xs);
        marginal_a[key] += w;
        for (y, &p) in q.channel.row(row).iter().enumerate() {
            py[y] += w * p;
            joint[key * shape.outputs + y] += w * p;
        }
    }
    let h_y = -py.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>();
    let mut h_y_given = 0.0;
    for (key, &pa) in marginal_a.iter().enumerate() {
        if pa == 0.0 {
            continue;
        }
        for &pj in &joint[key * shape.outputs..(key + 1) * shape.outputs] {
            if pj > 0.0 {
                h_y_given -= pj * (pj / pa).ln();
            }
        }
    }
    Ok(h_y - h_y_given)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{RateTable, Shape};

    fn query<'a>(ch: &'a Dmc, laws: &'a InputLaws, r: &'a RateVectorIndex, s: UserSet) -> MiQuery<'a> {
        MiQuery {
            channel: ch,
            laws,
            rates: r,
            given: s,
        }
    }

    #[test]
    fn noiseless_binary_is_ln2() {
        let ch = Dmc::noiseless(2).unwrap();
        let rates = RateTable::single(vec![0.1]).unwrap();
        let laws = InputLaws::uniform(&rates, 2);
        let r = RateVectorIndex::new(vec![0]);
        let q = query(&ch, &laws, &r, UserSet::EMPTY);
        assert!((conditional_mi(&q).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((conditional_mi_chain(&q).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn useless_channel_is_zero() {
        let ch = Dmc::bsc(0.5).unwrap();
        let rates = RateTable::single(vec![0.1]).unwrap();
        let laws = InputLaws::uniform(&rates, 2);
        let r = RateVectorIndex::new(vec![0]);
        assert_eq!(conditional_mi(&query(&ch, &laws, &r, UserSet::EMPTY)).unwrap(), 0.0);
    }

    #[test]
    fn xor_given_first_user() {
        let ch = Dmc::from_fn(Shape::new(2, 2, 2).unwrap(), |xs, y| {
            f64::from(u8::from((xs[0] ^ xs[1]) == y))
        })
        .unwrap();
        let rates = RateTable::new(vec![vec![0.1], vec![0.1]]).unwrap();
        let laws = InputLaws::uniform(&rates, 2);
        let r = RateVectorIndex::new(vec![0, 0]);
        let q = query(&ch, &laws, &r, UserSet::from_users(&[0]));
        assert!((conditional_mi(&q).unwrap() - 2f64.ln()).abs() < 1e-15);
        let full = query(&ch, &laws, &r, UserSet::full(2));
        assert_eq!(conditional_mi(&full).unwrap(), 0.0);
        assert_eq!(conditional_mi_chain(&full).unwrap(), 0.0);
    }
}
