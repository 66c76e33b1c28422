//! Index-tuple combinatorics.
//!
//! Tuples are maps `[n] → ℕ₀`. Three equivalence relations act on them:
//! translation (`∼_θ`), order (`∼_o`) and kernel/symmetric (`∼_π`), each
//! decided through a canonical form. The module also provides the partial
//! shifts `θ_N` and their composites `θ_{N,l⃗}`, enumeration of order
//! classes `O(p)`, pair classes `O_2(p)` and pair partitions `P_2(p)`,
//! crossings, and the counting identities used by the CLT evaluator.
//!
//! Note on `p!!`: this crate follows the convention
//! `p!! = (p−1)(p−3)···3·1` for even `p` and `p!! = 0` for odd `p`, which is
//! the number of pair partitions of `p` points. It is *not* the usual double
//! factorial.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{fmt_indices, Table};

/// Largest `p` for which `O(p)` is materialised.
pub const ORDER_CLASS_CAP: usize = 10;
/// Largest `p` for which `O_2(p)` and `P_2(p)` are materialised.
pub const PAIR_CAP: usize = 12;

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexTuple(pub Vec<usize>);

impl IndexTuple {
    pub fn new(entries: Vec<usize>) -> Self {
        Self(entries)
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_entry(&self) -> Option<usize> {
        self.0.iter().copied().max()
    }

    pub fn distinct_values(&self) -> usize {
        let mut v = self.0.clone();
        v.sort_unstable();
        v.dedup();
        v.len()
    }

    pub fn translated(&self, k: usize) -> IndexTuple {
        IndexTuple(self.0.iter().map(|e| e + k).collect())
    }
}

impl From<Vec<usize>> for IndexTuple {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

impl fmt::Display for IndexTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({})",
            self.0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(",")
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// Translation equivalence `∼_θ`.
    Theta,
    /// Order equivalence `∼_o`.
    Order,
    /// Kernel (symmetric) equivalence `∼_π`.
    Symmetric,
}

/// Canonical representative of the class of `t`.
///
/// `Theta` subtracts the minimum, `Order` replaces each entry by the 0-based
/// rank of its value among the distinct values, `Symmetric` relabels values
/// in order of first occurrence (restricted growth string).
pub fn canon(relation: Relation, t: &IndexTuple) -> IndexTuple {
    let e = t.entries();
    match relation {
        Relation::Theta => match e.iter().min() {
            Some(&m) => IndexTuple(e.iter().map(|x| x - m).collect()),
            None => IndexTuple::default(),
        },
        Relation::Order => {
            let mut values = e.to_vec();
            values.sort_unstable();
            values.dedup();
            IndexTuple(
                e.iter()
                    .map(|x| values.binary_search(x).expect("value present"))
                    .collect(),
            )
        }
        Relation::Symmetric => {
            let mut seen: Vec<usize> = Vec::new();
            IndexTuple(
                e.iter()
                    .map(|x| match seen.iter().position(|s| s == x) {
                        Some(pos) => pos,
                        None => {
                            seen.push(*x);
                            seen.len() - 1
                        }
                    })
                    .collect(),
            )
        }
    }
}

pub fn are_equivalent(relation: Relation, s: &IndexTuple, t: &IndexTuple) -> Result<bool> {
    if s.len() != t.len() {
        return Err(Error::LengthMismatch {
            left: s.len(),
            right: t.len(),
        });
    }
    Ok(canon(relation, s) == canon(relation, t))
}

/// `θ_N(n) = n` for `n < N`, `n + 1` otherwise.
pub fn partial_shift(big_n: usize, n: usize) -> usize {
    if n < big_n {
        n
    } else {
        n + 1
    }
}

/// The ordered composite `θ_{N,l⃗} = θ_0^{l_0} θ_1^{N+l_1} ··· θ_N^{N²+l_N}`,
/// applied right to left (`θ_N^{N²+l_N}` acts first).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ThetaComposite {
    big_n: usize,
    lvec: Vec<usize>,
}

impl ThetaComposite {
    pub fn new(big_n: usize, lvec: Vec<usize>) -> Result<Self> {
        if big_n == 0 {
            return Err(Error::Validation(
                "θ_{N,l} needs N ≥ 1 (l ranges over {0,…,N−1})".into(),
            ));
        }
        if lvec.len() != big_n + 1 {
            return Err(Error::LengthMismatch {
                left: big_n + 1,
                right: lvec.len(),
            });
        }
        if let Some(bad) = lvec.iter().find(|&&l| l >= big_n) {
            return Err(Error::Validation(format!(
                "l-vector entry {bad} outside [0, {}]",
                big_n - 1
            )));
        }
        Ok(Self { big_n, lvec })
    }

    pub fn n(&self) -> usize {
        self.big_n
    }

    pub fn lvec(&self) -> &[usize] {
        &self.lvec
    }

    /// Exponent of `θ_p` in the composite: `p·N + l_p`.
    pub fn exponent(&self, p: usize) -> usize {
        p * self.big_n + self.lvec[p]
    }

    pub fn apply(&self, n: usize) -> usize {
        let mut v = n;
        for p in (0..=self.big_n).rev() {
            // θ_p^k(v) = v + k when v ≥ p, and v otherwise
            if v >= p {
                v += self.exponent(p);
            }
        }
        v
    }

    pub fn apply_tuple(&self, t: &IndexTuple) -> IndexTuple {
        IndexTuple(t.entries().iter().map(|&e| self.apply(e)).collect())
    }

    /// All composites for `l⃗ ∈ {0,…,N−1}^{N+1}`, in lexicographic `l⃗` order.
    pub fn all(big_n: usize) -> Result<Vec<ThetaComposite>> {
        if big_n == 0 {
            return Err(Error::Validation("N must be at least 1".into()));
        }
        let count = big_n.checked_pow(big_n as u32 + 1).ok_or_else(|| Error::Resource {
            what: format!("θ composites for N = {big_n}"),
            size: u128::MAX,
            cap: usize::MAX as u128,
        })?;
        let mut out = Vec::with_capacity(count);
        let mut l = vec![0usize; big_n + 1];
        loop {
            out.push(ThetaComposite { big_n, lvec: l.clone() });
            let mut pos = big_n + 1;
            loop {
                if pos == 0 {
                    return Ok(out);
                }
                pos -= 1;
                l[pos] += 1;
                if l[pos] < big_n {
                    break;
                }
                l[pos] = 0;
            }
        }
    }
}

/// Largest image of an entry `< m` under any `θ_{N,l⃗}`, i.e. the image of
/// `m − 1` under the composite with every `l_p = N − 1`. Returns `None` for
/// `m = 0` or `N = 0`.
pub fn theta_image_bound(big_n: usize, m: usize) -> Option<usize> {
    if m == 0 || big_n == 0 {
        return None;
    }
    let top = ThetaComposite::new(big_n, vec![big_n - 1; big_n + 1]).ok()?;
    Some(top.apply(m - 1))
}

/// An equivalence class, stored through its canonical representative.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct EquivClass {
    pub relation: Relation,
    pub representative: IndexTuple,
    pub distinct_values: usize,
}

impl EquivClass {
    pub fn of(relation: Relation, t: &IndexTuple) -> Self {
        let representative = canon(relation, t);
        let distinct_values = representative.distinct_values();
        Self {
            relation,
            representative,
            distinct_values,
        }
    }
}

fn check_cap(what: &str, p: usize, cap: usize) -> Result<()> {
    if p > cap {
        Err(Error::Resource {
            what: format!("{what} for p = {p}"),
            size: p as u128,
            cap: cap as u128,
        })
    } else {
        Ok(())
    }
}

/// All order classes `O(p)`: surjective tuples `[p] → [k]`, `k = 1..p`, in
/// lexicographic order. `O(0)` is the single empty class.
pub fn enumerate_order_classes(p: usize) -> Result<Vec<EquivClass>> {
    check_cap("order classes", p, ORDER_CLASS_CAP)?;
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(p);
    let mut counts = vec![0usize; p.max(1)];
    order_class_rec(p, &mut current, &mut counts, &mut out);
    Ok(out)
}

fn order_class_rec(p: usize, current: &mut Vec<usize>, counts: &mut [usize], out: &mut Vec<EquivClass>) {
    let used = counts.iter().filter(|&&c| c > 0).count();
    let top = counts.iter().rposition(|&c| c > 0).map_or(0, |t| t + 1);
    let missing = top - used;
    let remaining = p - current.len();
    if missing > remaining {
        return;
    }
    if remaining == 0 {
        out.push(EquivClass {
            relation: Relation::Order,
            representative: IndexTuple(current.clone()),
            distinct_values: used,
        });
        return;
    }
    for e in 0..p {
        counts[e] += 1;
        current.push(e);
        order_class_rec(p, current, counts, out);
        current.pop();
        counts[e] -= 1;
    }
}

/// Pair classes `O_2(p)`: order classes whose value fibres all have size 2,
/// in lexicographic order. Empty for odd `p`.
pub fn enumerate_pair_classes(p: usize) -> Result<Vec<EquivClass>> {
    check_cap("pair classes", p, PAIR_CAP)?;
    if p % 2 == 1 {
        return Ok(Vec::new());
    }
    let k = p / 2;
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(p);
    let mut counts = vec![0usize; k];
    pair_class_rec(p, k, &mut current, &mut counts, &mut out);
    Ok(out)
}

fn pair_class_rec(p: usize, k: usize, current: &mut Vec<usize>, counts: &mut [usize], out: &mut Vec<EquivClass>) {
    if current.len() == p {
        out.push(EquivClass {
            relation: Relation::Order,
            representative: IndexTuple(current.clone()),
            distinct_values: k,
        });
        return;
    }
    for e in 0..k {
        if counts[e] < 2 {
            counts[e] += 1;
            current.push(e);
            pair_class_rec(p, k, current, counts, out);
            current.pop();
            counts[e] -= 1;
        }
    }
}

/// A pairing of `{1,…,p}`; pairs `(a, b)` with `a < b`, sorted by `a`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct PairPartition {
    pairs: Vec<(usize, usize)>,
}

impl PairPartition {
    pub fn new(mut pairs: Vec<(usize, usize)>) -> Result<Self> {
        for pair in pairs.iter_mut() {
            if pair.0 > pair.1 {
                *pair = (pair.1, pair.0);
            }
        }
        pairs.sort_unstable();
        let p = 2 * pairs.len();
        let mut seen = vec![false; p + 1];
        for &(a, b) in &pairs {
            for x in [a, b] {
                if x == 0 || x > p || seen[x] {
                    return Err(Error::Validation(format!("{x} is not a fresh point of {{1,…,{p}}}")));
                }
                seen[x] = true;
            }
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn points(&self) -> usize {
        2 * self.pairs.len()
    }

    /// Number of block pairs `{a<b}, {c<d}` with `a < c < b < d`.
    pub fn crossing_number(&self) -> usize {
        let mut count = 0;
        for (i, &(a, b)) in self.pairs.iter().enumerate() {
            for &(c, d) in &self.pairs[i + 1..] {
                if (a < c && c < b && b < d) || (c < a && a < d && d < b) {
                    count += 1;
                }
            }
        }
        count
    }

    /// The pairing read off a pair-class tuple (positions sharing a value).
    pub fn from_pair_tuple(t: &IndexTuple) -> Result<Self> {
        let mut pairs = Vec::new();
        let e = t.entries();
        for i in 0..e.len() {
            let partners: Vec<usize> = (0..e.len()).filter(|&j| j != i && e[j] == e[i]).collect();
            if partners.len() != 1 {
                return Err(Error::Validation(format!("{t} is not a pair tuple")));
            }
            if partners[0] > i {
                pairs.push((i + 1, partners[0] + 1));
            }
        }
        Self::new(pairs)
    }
}

pub fn crossing_number(pi: &PairPartition) -> usize {
    pi.crossing_number()
}

/// All pair partitions `P_2(p)`, lexicographic in their sorted pair lists.
pub fn enumerate_pair_partitions(p: usize) -> Result<Vec<PairPartition>> {
    check_cap("pair partitions", p, PAIR_CAP)?;
    if p % 2 == 1 {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut free: Vec<usize> = (1..=p).collect();
    let mut pairs = Vec::new();
    pairing_rec(&mut free, &mut pairs, &mut out);
    Ok(out)
}

fn pairing_rec(free: &mut Vec<usize>, pairs: &mut Vec<(usize, usize)>, out: &mut Vec<PairPartition>) {
    if free.is_empty() {
        out.push(PairPartition { pairs: pairs.clone() });
        return;
    }
    let first = free.remove(0);
    for idx in 0..free.len() {
        let partner = free.remove(idx);
        pairs.push((first, partner));
        pairing_rec(free, pairs, out);
        pairs.pop();
        free.insert(idx, partner);
    }
    free.insert(0, first);
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

pub fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// `p!!` in this crate's convention: `(p−1)(p−3)···3·1` for even `p`
/// (`0!! = 1`), and `0` for odd `p`.
pub fn pair_double_factorial(p: usize) -> u128 {
    if p % 2 == 1 {
        return 0;
    }
    (1..p).step_by(2).map(|x| x as u128).product()
}

/// Catalan number `C_n`.
pub fn catalan(n: usize) -> u128 {
    binomial(2 * n, n) / (n as u128 + 1)
}

/// Number of tuples `[p] → {0,…,N−1}` in an order class with `k` distinct
/// values: `binomial(N, k)`.
pub fn count_tuples_in_class(cls: &EquivClass, big_n: usize) -> u128 {
    binomial(big_n, cls.distinct_values)
}

/// One row per class: canonical form, number of distinct values, and the
/// number of tuples with entries below `big_n` in the class.
pub fn class_table(name: &str, classes: &[EquivClass], big_n: usize) -> Table {
    let mut t = Table::new(name, &["canonical_form", "k", "count"]);
    for c in classes {
        t.push(vec![
            fmt_indices(c.representative.entries()),
            c.distinct_values.to_string(),
            count_tuples_in_class(c, big_n).to_string(),
        ]);
    }
    t
}

/// Iterator over all tuples of the given length with entries `< window`, in
/// lexicographic order.
pub fn all_tuples(length: usize, window: usize) -> impl Iterator<Item = IndexTuple> {
    let total = (window as u128).pow(length as u32);
    (0..total).map(move |mut code| {
        let mut v = vec![0usize; length];
        for slot in v.iter_mut().rev() {
            *slot = (code % window as u128) as usize;
            code /= window as u128;
        }
        IndexTuple(v)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[usize]) -> IndexTuple {
        IndexTuple(v.to_vec())
    }

    #[test]
    fn canonical_forms() {
        assert_eq!(canon(Relation::Theta, &t(&[5, 7])), t(&[0, 2]));
        assert_eq!(
            canon(Relation::Order, &t(&[1, 3, 1, 3, 4, 2, 4, 2, 4])),
            t(&[0, 2, 0, 2, 3, 1, 3, 1, 3])
        );
        assert_eq!(canon(Relation::Symmetric, &t(&[3, 1, 3])), t(&[0, 1, 0]));
        assert_eq!(canon(Relation::Order, &t(&[])), t(&[]));
    }

    #[test]
    fn worked_order_pair() {
        let base = t(&[1, 3, 1, 3, 4, 2, 4, 2, 4]);
        for n in 0..6 {
            let shifted = t(&[1, 3, 1, 3, 4 + n, 2 + n, 4 + n, 2 + n, 4 + n]);
            assert_eq!(are_equivalent(Relation::Order, &base, &shifted).unwrap(), n == 0);
        }
        assert!(are_equivalent(Relation::Theta, &t(&[0, 1, 0, 1]), &t(&[2, 3, 2, 3])).unwrap());
        assert!(are_equivalent(Relation::Symmetric, &t(&[0, 1, 0]), &t(&[7, 2, 7])).unwrap());
        assert!(are_equivalent(Relation::Symmetric, &t(&[0]), &t(&[0, 1])).is_err());
    }

    #[test]
    fn partial_shifts() {
        let shifted: Vec<usize> = [0, 1, 2, 3].iter().map(|&n| partial_shift(2, n)).collect();
        assert_eq!(shifted, vec![0, 1, 3, 4]);
        let k = 5;
        let moved: Vec<usize> = [0, 1]
            .iter()
            .map(|&n| (0..k).fold(n, |v, _| partial_shift(0, v)))
            .collect();
        assert_eq!(moved, vec![k, k + 1]);
    }

    #[test]
    fn theta_composite_validation() {
        assert!(ThetaComposite::new(0, vec![0]).is_err());
        assert!(ThetaComposite::new(2, vec![0, 1]).is_err());
        assert!(ThetaComposite::new(2, vec![0, 2, 0]).is_err());
        let single = ThetaComposite::new(1, vec![0, 0]).unwrap();
        // θ_{1,(0,0)} = θ_1
        for n in 0..10 {
            assert_eq!(single.apply(n), partial_shift(1, n));
        }
        assert_eq!(ThetaComposite::all(3).unwrap().len(), 81);
    }

    #[test]
    fn image_bound_matches_enumeration() {
        for big_n in 1..=4 {
            for m in 1..=6 {
                let brute = ThetaComposite::all(big_n)
                    .unwrap()
                    .iter()
                    .flat_map(|c| (0..m).map(move |e| c.apply(e)))
                    .max()
                    .unwrap();
                assert_eq!(theta_image_bound(big_n, m), Some(brute));
            }
        }
    }

    #[test]
    fn class_counts() {
        assert_eq!(enumerate_pair_partitions(4).unwrap().len(), 3);
        assert_eq!(enumerate_pair_classes(4).unwrap().len(), 6);
        let o2: Vec<IndexTuple> = enumerate_order_classes(2)
            .unwrap()
            .into_iter()
            .map(|c| c.representative)
            .collect();
        assert_eq!(o2, vec![t(&[0, 0]), t(&[0, 1]), t(&[1, 0])]);
        // Fubini numbers
        let fubini = [1, 1, 3, 13, 75, 541, 4683];
        for (p, f) in fubini.iter().enumerate() {
            assert_eq!(enumerate_order_classes(p).unwrap().len(), *f);
        }
        assert!(enumerate_pair_classes(5).unwrap().is_empty());
    }

    #[test]
    fn caps_are_errors() {
        assert!(matches!(enumerate_order_classes(11), Err(Error::Resource { .. })));
        assert!(matches!(enumerate_pair_partitions(14), Err(Error::Resource { .. })));
        assert!(matches!(enumerate_pair_classes(14), Err(Error::Resource { .. })));
    }

    #[test]
    fn crossings() {
        let nc = PairPartition::new(vec![(1, 2), (3, 4)]).unwrap();
        assert_eq!(nc.crossing_number(), 0);
        let cr = PairPartition::new(vec![(1, 3), (2, 4)]).unwrap();
        assert_eq!(cr.crossing_number(), 1);
        assert!(PairPartition::new(vec![(1, 2), (2, 3)]).is_err());
        let noncrossing6 = enumerate_pair_partitions(6)
            .unwrap()
            .iter()
            .filter(|p| p.crossing_number() == 0)
            .count();
        assert_eq!(noncrossing6, 5);
    }

    #[test]
    fn tuples_per_class() {
        let c01 = EquivClass::of(Relation::Order, &t(&[0, 1]));
        let c00 = EquivClass::of(Relation::Order, &t(&[0, 0]));
        assert_eq!(count_tuples_in_class(&c01, 3), 3);
        assert_eq!(count_tuples_in_class(&c00, 3), 3);
        let total: u128 = enumerate_order_classes(3)
            .unwrap()
            .iter()
            .map(|c| count_tuples_in_class(c, 4))
            .sum();
        assert_eq!(total, 64);
    }

    #[test]
    fn double_factorial_convention() {
        assert_eq!(pair_double_factorial(0), 1);
        assert_eq!(pair_double_factorial(2), 1);
        assert_eq!(pair_double_factorial(4), 3);
        assert_eq!(pair_double_factorial(6), 15);
        assert_eq!(pair_double_factorial(5), 0);
        assert_eq!(catalan(3), 5);
    }

    #[test]
    fn pair_tuple_to_partition() {
        let pi = PairPartition::from_pair_tuple(&t(&[0, 1, 0, 1])).unwrap();
        assert_eq!(pi.pairs(), &[(1, 3), (2, 4)]);
        assert!(PairPartition::from_pair_tuple(&t(&[0, 0, 0])).is_err());
    }

    #[test]
    fn tuple_iterator_is_lexicographic() {
        let v: Vec<IndexTuple> = all_tuples(2, 2).collect();
        assert_eq!(v, vec![t(&[0, 0]), t(&[0, 1]), t(&[1, 0]), t(&[1, 1])]);
        assert_eq!(all_tuples(0, 3).count(), 1);
    }
}
