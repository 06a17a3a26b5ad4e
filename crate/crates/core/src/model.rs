//! Alphabets, channels, source sets and the conditional output law they induce.
//!
//! Probabilities never leave exact arithmetic here. A channel keeps its rows
//! over a common denominator `d`, so the product channel on length-`n` words
//! has integer weights over `d^n`, and the output law of a source set `A` has
//! integer weights over `|A| * d^n`.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::{self, Rational};

/// Default cap on the number of enumerated output sequences, `2^24`.
pub const DEFAULT_MAX_SPACE: u64 = 1 << 24;

/// Desk-scale caps shared by every enumeration and solver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Limits {
    /// Largest output space `|Y|^n` that may be enumerated.
    pub max_space: u64,
    /// Largest positive support handed to the exact image solver.
    pub exact_cap: usize,
    /// Largest positive support for exhaustive subset oracles.
    pub brute_cap: usize,
    /// Node budget of one exact branch-and-bound run.
    pub node_budget: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_space: DEFAULT_MAX_SPACE,
            exact_cap: 24,
            brute_cap: 16,
            node_budget: 50_000_000,
        }
    }
}

/// An ordered alphabet of single-character symbols.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alphabet {
    symbols: Vec<char>,
}

impl Alphabet {
    pub fn new<S: AsRef<str>>(symbols: &[S]) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::Alphabet("alphabet is empty".into()));
        }
        let mut out = Vec::with_capacity(symbols.len());
        for s in symbols {
            let s = s.as_ref();
            let mut chars = s.chars();
            let c = match (chars.next(), chars.next()) {
                (Some(c), None) => c,
                _ => {
                    return Err(Error::Alphabet(format!(
                        "symbol {s:?} must be exactly one character"
                    )))
                }
            };
            if out.contains(&c) {
                return Err(Error::Alphabet(format!("duplicate symbol {c:?}")));
            }
            out.push(c);
        }
        if out.len() > u16::MAX as usize {
            return Err(Error::Alphabet("alphabet too large".into()));
        }
        Ok(Alphabet { symbols: out })
    }

    /// The alphabet `{'0', '1', ..., }` of the given size (at most 10).
    pub fn digits(size: usize) -> Self {
        assert!((1..=10).contains(&size));
        Alphabet {
            symbols: (0..size).map(|i| char::from(b'0' + i as u8)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn symbol(&self, i: usize) -> char {
        self.symbols[i]
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.symbols.iter().position(|&s| s == c)
    }

    pub fn parse_word(&self, s: &str) -> Result<Vec<u16>> {
        s.chars()
            .map(|c| {
                self.index_of(c).map(|i| i as u16).ok_or_else(|| {
                    Error::AlphabetMismatch(format!("symbol {c:?} of {s:?} is not in the alphabet"))
                })
            })
            .collect()
    }

    pub fn render(&self, word: &[u16]) -> String {
        word.iter().map(|&i| self.symbols[i as usize]).collect()
    }
}

/// A discrete memoryless channel with exact rational transition probabilities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Channel {
    input: Alphabet,
    output: Alphabet,
    rows: Vec<Vec<Rational>>,
    denominator: BigUint,
    numerators: Vec<Vec<BigUint>>,
}

/// Validates a stochastic matrix and builds a [`Channel`].
///
/// Checks run in order: shape, entry range, then exact row sums.
pub fn validate_channel(
    rows: Vec<Vec<Rational>>,
    input: Alphabet,
    output: Alphabet,
) -> Result<Channel> {
    if rows.len() != input.len() {
        return Err(Error::Shape(format!(
            "matrix has {} rows but the input alphabet has {} symbols",
            rows.len(),
            input.len()
        )));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != output.len() {
            return Err(Error::Shape(format!(
                "row {i} has {} entries but the output alphabet has {} symbols",
                row.len(),
                output.len()
            )));
        }
    }
    let zero = Rational::zero();
    let one = Rational::one();
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if v < &zero || v > &one {
                return Err(Error::Range {
                    row: i,
                    col: j,
                    value: exact::fmt_rational(v),
                });
            }
        }
    }
    for (i, row) in rows.iter().enumerate() {
        let sum: Rational = row.iter().sum();
        if sum != one {
            return Err(Error::RowSum {
                row: i,
                sum: exact::fmt_rational(&sum),
            });
        }
    }
    let denominator = rows
        .iter()
        .flatten()
        .fold(BigUint::one(), |acc, v| acc.lcm(v.denom().magnitude()));
    let numerators = rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|v| {
                    let (n, d) = exact::parts(v);
                    n * (&denominator / d)
                })
                .collect()
        })
        .collect();
    Ok(Channel {
        input,
        output,
        rows,
        denominator,
        numerators,
    })
}

impl Channel {
    pub fn new(rows: Vec<Vec<Rational>>, input: Alphabet, output: Alphabet) -> Result<Self> {
        validate_channel(rows, input, output)
    }

    /// Noiseless channel on the given alphabet.
    pub fn identity(alphabet: Alphabet) -> Self {
        let k = alphabet.len();
        let rows = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| Rational::from_integer(((i == j) as u8).into()))
                    .collect()
            })
            .collect();
        validate_channel(rows, alphabet.clone(), alphabet).expect("identity is stochastic")
    }

    /// Binary symmetric channel on `{0, 1}` with crossover probability `p`.
    pub fn bsc(p: Rational) -> Result<Self> {
        let q = Rational::one() - &p;
        validate_channel(
            vec![vec![q.clone(), p.clone()], vec![p, q]],
            Alphabet::digits(2),
            Alphabet::digits(2),
        )
    }

    pub fn input(&self) -> &Alphabet {
        &self.input
    }

    pub fn output(&self) -> &Alphabet {
        &self.output
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.rows
    }

    pub fn prob(&self, x: usize, y: usize) -> &Rational {
        &self.rows[x][y]
    }

    /// Common denominator of every entry.
    pub fn denominator(&self) -> &BigUint {
        &self.denominator
    }

    /// Entry `(x, y)` scaled by [`Channel::denominator`].
    pub fn numerator(&self, x: usize, y: usize) -> &BigUint {
        &self.numerators[x][y]
    }

    /// The same channel with output symbols reordered: new symbol `j` is old symbol `perm[j]`.
    pub fn permute_outputs(&self, perm: &[usize]) -> Result<Self> {
        let symbols: Vec<String> = perm
            .iter()
            .map(|&j| self.output.symbol(j).to_string())
            .collect();
        let rows = self
            .rows
            .iter()
            .map(|row| perm.iter().map(|&j| row[j].clone()).collect())
            .collect();
        validate_channel(rows, self.input.clone(), Alphabet::new(&symbols)?)
    }
}

/// The set of length-`n` words over an output alphabet, indexed lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputSpace {
    alphabet: Alphabet,
    n: usize,
    size: u64,
}

impl OutputSpace {
    pub fn new(alphabet: Alphabet, n: usize, limits: &Limits) -> Result<Self> {
        let base = alphabet.len() as u64;
        let size = (0..n).try_fold(1u64, |acc, _| acc.checked_mul(base));
        match size {
            Some(size) if size <= limits.max_space => Ok(OutputSpace { alphabet, n, size }),
            _ => Err(Error::CapacityExceeded {
                space: format!("{base}^{n}"),
                cap: limits.max_space,
            }),
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> u64 {
        self.size
    }

    pub fn render(&self, mut index: u64) -> String {
        let base = self.alphabet.len() as u64;
        let mut word = vec![0u16; self.n];
        for slot in word.iter_mut().rev() {
            *slot = (index % base) as u16;
            index /= base;
        }
        self.alphabet.render(&word)
    }

    pub fn parse(&self, s: &str) -> Result<u64> {
        let word = self.alphabet.parse_word(s)?;
        if word.len() != self.n {
            return Err(Error::Shape(format!(
                "output word {s:?} has length {}, expected {}",
                word.len(),
                self.n
            )));
        }
        let base = self.alphabet.len() as u64;
        Ok(word.iter().fold(0u64, |acc, &c| acc * base + c as u64))
    }
}

/// A sorted, duplicate-free set of output sequence indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SeqSet(Vec<u64>);

impl SeqSet {
    pub fn new(mut items: Vec<u64>) -> Self {
        items.sort_unstable();
        items.dedup();
        SeqSet(items)
    }

    pub fn empty() -> Self {
        SeqSet(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, idx: u64) -> bool {
        self.0.binary_search(&idx).is_ok()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.0.iter().copied()
    }

    pub fn render(&self, space: &OutputSpace) -> Vec<String> {
        self.0.iter().map(|&i| space.render(i)).collect()
    }
}

impl FromIterator<u64> for SeqSet {
    fn from_iter<I: IntoIterator<Item = u64>>(iter: I) -> Self {
        SeqSet::new(iter.into_iter().collect())
    }
}

/// An explicit set `A` of length-`n` input words, kept in lexicographic order.
///
/// `X^n` is taken to be uniform on the members.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SourceSet {
    alphabet: Alphabet,
    n: usize,
    members: Vec<Vec<u16>>,
}

impl SourceSet {
    pub fn new<S: AsRef<str>>(alphabet: Alphabet, n: usize, words: &[S]) -> Result<Self> {
        let members = words
            .iter()
            .map(|w| alphabet.parse_word(w.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Self::from_words(alphabet, n, members)
    }

    pub fn from_words(alphabet: Alphabet, n: usize, mut members: Vec<Vec<u16>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Source("blocklength must be positive".into()));
        }
        if members.is_empty() {
            return Err(Error::Source("source set is empty".into()));
        }
        if let Some(w) = members.iter().find(|w| w.len() != n) {
            return Err(Error::Source(format!(
                "member {:?} has length {}, expected {n}",
                alphabet.render(w),
                w.len()
            )));
        }
        if let Some(w) = members.iter().find(|w| w.iter().any(|&c| c as usize >= alphabet.len())) {
            return Err(Error::AlphabetMismatch(format!("member {w:?} uses unknown symbols")));
        }
        members.sort_unstable();
        if let Some(w) = members.windows(2).find(|p| p[0] == p[1]) {
            return Err(Error::Source(format!(
                "duplicate member {:?}",
                alphabet.render(&w[0])
            )));
        }
        Ok(SourceSet {
            alphabet,
            n,
            members,
        })
    }

    /// Every word of length `n`.
    pub fn full(alphabet: Alphabet, n: usize, limits: &Limits) -> Result<Self> {
        let space = OutputSpace::new(alphabet.clone(), n, limits)?;
        let members = (0..space.size())
            .map(|i| {
                let base = alphabet.len() as u64;
                let mut idx = i;
                let mut w = vec![0u16; n];
                for slot in w.iter_mut().rev() {
                    *slot = (idx % base) as u16;
                    idx /= base;
                }
                w
            })
            .collect();
        Self::from_words(alphabet, n, members)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Vec<u16>] {
        &self.members
    }

    pub fn contains(&self, word: &[u16]) -> bool {
        self.position(word).is_some()
    }

    pub fn position(&self, word: &[u16]) -> Option<usize> {
        self.members.binary_search_by(|m| m.as_slice().cmp(word)).ok()
    }

    pub fn render(&self) -> Vec<String> {
        self.members.iter().map(|w| self.alphabet.render(w)).collect()
    }

    /// The members at the given positions. Empty selections are rejected.
    pub fn select(&self, positions: &[usize]) -> Result<Self> {
        let words = positions.iter().map(|&i| self.members[i].clone()).collect();
        Self::from_words(self.alphabet.clone(), self.n, words)
    }

    /// Members of `self` that are not in `other`, or `None` if nothing is left.
    pub fn difference(&self, other: &SourceSet) -> Option<Self> {
        let words: Vec<_> = self
            .members
            .iter()
            .filter(|w| !other.contains(w))
            .cloned()
            .collect();
        if words.is_empty() {
            None
        } else {
            Some(SourceSet {
                alphabet: self.alphabet.clone(),
                n: self.n,
                members: words,
            })
        }
    }

    pub fn is_subset_of(&self, other: &SourceSet) -> bool {
        self.members.iter().all(|w| other.contains(w))
    }

    /// `(1/n) log2 |A|`.
    pub fn log_size_rate(&self) -> f64 {
        (self.len() as f64).log2() / self.n as f64
    }

    /// `(1/n) H(X^n | X^n in A)`, summed term by term from the uniform law.
    pub fn entropy_rate(&self) -> f64 {
        let weights = vec![BigUint::one(); self.len()];
        entropy_bits(weights.iter(), &BigUint::from(self.len())) / self.n as f64
    }
}

impl fmt::Display for SourceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.render().join(","))
    }
}

/// `sum -p log2 p` for weights `w` over denominator `total`.
///
/// Equal weights are summed as one group, so a uniform law over `m` points
/// evaluates to exactly `log2 m`.
pub(crate) fn entropy_bits<'a>(weights: impl Iterator<Item = &'a BigUint>, total: &BigUint) -> f64 {
    let mut sorted: Vec<&BigUint> = weights.filter(|w| !w.is_zero()).collect();
    sorted.sort_unstable();
    let log_total = exact::log2_big(total);
    let mut h = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let w = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == w {
            j += 1;
        }
        let group = w * BigUint::from(j - i);
        h += exact::ratio_to_f64(&group, total) * (log_total - exact::log2_big(w));
        i = j;
    }
    h
}

/// Output law `P^n(. | x)` of one input word: sorted `(index, weight)` pairs over `d^n`.
pub type Row = Vec<(u64, BigUint)>;

/// Product-channel rows for every member of a source set.
#[derive(Debug, Clone)]
pub struct ChannelRows {
    source: SourceSet,
    space: OutputSpace,
    denominator: BigUint,
    rows: Vec<Row>,
}

impl ChannelRows {
    pub fn new(source: &SourceSet, channel: &Channel, limits: &Limits) -> Result<Self> {
        if source.alphabet() != channel.input() {
            return Err(Error::AlphabetMismatch(
                "source alphabet differs from the channel input alphabet".into(),
            ));
        }
        let n = source.n();
        let space = OutputSpace::new(channel.output().clone(), n, limits)?;
        let denominator = num_traits::pow::pow(channel.denominator().clone(), n);
        let rows = source
            .members()
            .par_iter()
            .map(|x| product_row(channel, x))
            .collect();
        Ok(ChannelRows {
            source: source.clone(),
            space,
            denominator,
            rows,
        })
    }

    pub fn source(&self) -> &SourceSet {
        &self.source
    }

    pub fn space(&self) -> &OutputSpace {
        &self.space
    }

    /// Denominator `d^n` shared by every row.
    pub fn denominator(&self) -> &BigUint {
        &self.denominator
    }

    pub fn row(&self, i: usize) -> &Row {
        &self.rows[i]
    }

    /// Positions of `subset`'s members inside the root source set.
    pub fn positions(&self, subset: &SourceSet) -> Result<Vec<usize>> {
        subset
            .members()
            .iter()
            .map(|w| {
                self.source.position(w).ok_or_else(|| {
                    Error::Source(format!(
                        "{:?} is not a member of the root source set",
                        subset.alphabet().render(w)
                    ))
                })
            })
            .collect()
    }

    /// Numerator of `P^n(B | x)` over [`ChannelRows::denominator`].
    pub fn row_mass(&self, i: usize, set: &SeqSet) -> BigUint {
        let mut total = BigUint::zero();
        for (idx, w) in &self.rows[i] {
            if set.contains(*idx) {
                total += w;
            }
        }
        total
    }

    /// `P_S` for the members at `positions`.
    pub fn distribution(&self, positions: &[usize]) -> CondOutputDist {
        let mut acc: HashMap<u64, BigUint> = HashMap::new();
        for &i in positions {
            for (idx, w) in &self.rows[i] {
                *acc.entry(*idx).or_insert_with(BigUint::zero) += w;
            }
        }
        let mut support: Vec<(u64, BigUint)> = acc.into_iter().collect();
        support.sort_unstable_by_key(|(idx, _)| *idx);
        let denominator = &self.denominator * BigUint::from(positions.len());
        CondOutputDist::from_parts(self.space.clone(), support, denominator)
    }

    pub fn full_distribution(&self) -> CondOutputDist {
        let all: Vec<usize> = (0..self.rows.len()).collect();
        self.distribution(&all)
    }
}

fn product_row(channel: &Channel, x: &[u16]) -> Row {
    let k = channel.output().len();
    let mut cur: Row = vec![(0, BigUint::one())];
    for &xs in x {
        let mut next = Vec::with_capacity(cur.len() * k);
        for (idx, w) in &cur {
            for y in 0..k {
                let num = channel.numerator(xs as usize, y);
                if !num.is_zero() {
                    next.push((idx * k as u64 + y as u64, w * num));
                }
            }
        }
        cur = next;
    }
    cur
}

/// The conditional output law `P_A(y^n) = Pr{Y^n = y^n | X^n in A}` restricted
/// to its positive-mass sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CondOutputDist {
    space: OutputSpace,
    support: Vec<(u64, BigUint)>,
    denominator: BigUint,
    zero_set_size: u64,
}

impl CondOutputDist {
    /// Builds a law from sorted positive weights summing to `denominator`.
    pub fn from_parts(space: OutputSpace, support: Vec<(u64, BigUint)>, denominator: BigUint) -> Self {
        debug_assert!(support.windows(2).all(|p| p[0].0 < p[1].0));
        debug_assert!(support.iter().all(|(_, w)| !w.is_zero()));
        debug_assert_eq!(
            support.iter().fold(BigUint::zero(), |a, (_, w)| a + w),
            denominator
        );
        let zero_set_size = space.size() - support.len() as u64;
        CondOutputDist {
            space,
            support,
            denominator,
            zero_set_size,
        }
    }

    pub fn n(&self) -> usize {
        self.space.n()
    }

    pub fn space(&self) -> &OutputSpace {
        &self.space
    }

    /// Positive-mass `(index, weight)` pairs in index order.
    pub fn support(&self) -> &[(u64, BigUint)] {
        &self.support
    }

    pub fn support_set(&self) -> SeqSet {
        SeqSet(self.support.iter().map(|(i, _)| *i).collect())
    }

    pub fn denominator(&self) -> &BigUint {
        &self.denominator
    }

    pub fn zero_set_size(&self) -> u64 {
        self.zero_set_size
    }

    pub fn weight(&self, idx: u64) -> BigUint {
        match self.support.binary_search_by_key(&idx, |(i, _)| *i) {
            Ok(p) => self.support[p].1.clone(),
            Err(_) => BigUint::zero(),
        }
    }

    pub fn prob(&self, idx: u64) -> Rational {
        exact::ratio(&self.weight(idx), &self.denominator)
    }

    /// Weight of a set of sequences over [`CondOutputDist::denominator`].
    pub fn mass_weight(&self, set: &SeqSet) -> BigUint {
        self.support
            .iter()
            .filter(|(i, _)| set.contains(*i))
            .fold(BigUint::zero(), |a, (_, w)| a + w)
    }

    pub fn mass(&self, set: &SeqSet) -> Rational {
        exact::ratio(&self.mass_weight(set), &self.denominator)
    }

    /// Exact total mass; always one.
    pub fn total_mass(&self) -> Rational {
        let total = self.support.iter().fold(BigUint::zero(), |a, (_, w)| a + w);
        exact::ratio(&total, &self.denominator)
    }

    /// `(index, probability)` pairs in index order.
    pub fn probabilities(&self) -> Vec<(u64, Rational)> {
        self.support
            .iter()
            .map(|(i, w)| (*i, exact::ratio(w, &self.denominator)))
            .collect()
    }

    pub fn entropy_rate(&self) -> f64 {
        entropy_rate(self)
    }
}

/// Builds `P_A` for a source set over a channel.
pub fn output_distribution(
    source: &SourceSet,
    channel: &Channel,
    limits: &Limits,
) -> Result<CondOutputDist> {
    Ok(ChannelRows::new(source, channel, limits)?.full_distribution())
}

/// `(1/n) H(P_A)` in bits per symbol.
pub fn entropy_rate(dist: &CondOutputDist) -> f64 {
    entropy_bits(dist.support.iter().map(|(_, w)| w), &dist.denominator) / dist.n() as f64
}

/// Number of output sequences for diagnostics; `None` when it overflows `u64`.
pub fn space_size(alphabet_size: usize, n: usize) -> Option<u64> {
    (alphabet_size as u64).checked_pow(n.to_u32()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{parse_rational, rational};

    fn r(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    fn bsc01() -> Channel {
        Channel::bsc(rational(1, 10)).unwrap()
    }

    #[test]
    fn validates_identity_and_bsc() {
        let a = Alphabet::digits(2);
        let id = validate_channel(
            vec![vec![r("1"), r("0")], vec![r("0"), r("1")]],
            a.clone(),
            a.clone(),
        )
        .unwrap();
        assert_eq!(id.denominator(), &BigUint::one());
        let bsc = validate_channel(
            vec![vec![r("9/10"), r("1/10")], vec![r("1/10"), r("9/10")]],
            a.clone(),
            a,
        )
        .unwrap();
        assert_eq!(bsc.denominator(), &BigUint::from(10u32));
        assert_eq!(bsc.numerator(0, 0), &BigUint::from(9u32));
    }

    #[test]
    fn rejects_bad_rows() {
        let a = Alphabet::digits(2);
        let err = validate_channel(
            vec![vec![r("9/10"), r("0")], vec![r("1/10"), r("9/10")]],
            a.clone(),
            a.clone(),
        )
        .unwrap_err();
        assert_eq!(
            err,
            Error::RowSum {
                row: 0,
                sum: "9/10".into()
            }
        );
        let err = validate_channel(
            vec![vec![r("3/2"), r("-1/2")], vec![r("0"), r("1")]],
            a.clone(),
            a.clone(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Range { row: 0, col: 0, .. }));
        let err = validate_channel(vec![vec![r("1"), r("0")]], a.clone(), a).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn rejects_bad_alphabets_and_sources() {
        assert!(Alphabet::new::<&str>(&[]).is_err());
        assert!(Alphabet::new(&["0", "0"]).is_err());
        assert!(Alphabet::new(&["ab"]).is_err());
        let a = Alphabet::digits(2);
        assert!(SourceSet::new::<&str>(a.clone(), 2, &[]).is_err());
        assert!(SourceSet::new(a.clone(), 2, &["0"]).is_err());
        assert!(SourceSet::new(a.clone(), 2, &["01", "01"]).is_err());
        assert!(matches!(
            SourceSet::new(a, 2, &["02"]),
            Err(Error::AlphabetMismatch(_))
        ));
    }

    #[test]
    fn bsc_single_letter_output() {
        let a = SourceSet::new(Alphabet::digits(2), 1, &["0"]).unwrap();
        let d = output_distribution(&a, &bsc01(), &Limits::default()).unwrap();
        assert_eq!(d.prob(0), rational(9, 10));
        assert_eq!(d.prob(1), rational(1, 10));
        assert_eq!(d.total_mass(), Rational::one());
    }

    #[test]
    fn bsc_two_letter_average_of_rows() {
        let a = SourceSet::new(Alphabet::digits(2), 2, &["00", "11"]).unwrap();
        let d = output_distribution(&a, &bsc01(), &Limits::default()).unwrap();
        let probs: Vec<_> = d.probabilities().into_iter().map(|(_, p)| p).collect();
        assert_eq!(
            probs,
            vec![rational(41, 100), rational(9, 100), rational(9, 100), rational(41, 100)]
        );
        // direct summation: -(1/2) sum p log2 p
        assert!((d.entropy_rate() - 0.840_038_522_864_139_8).abs() < 1e-12);
    }

    #[test]
    fn identity_gives_point_mass() {
        let a = SourceSet::new(Alphabet::digits(2), 3, &["101"]).unwrap();
        let id = Channel::identity(Alphabet::digits(2));
        let d = output_distribution(&a, &id, &Limits::default()).unwrap();
        assert_eq!(d.support().len(), 1);
        assert_eq!(d.space().render(d.support()[0].0), "101");
        assert_eq!(d.zero_set_size(), 7);
        assert_eq!(d.entropy_rate(), 0.0);
    }

    #[test]
    fn uniform_over_all_sequences_has_unit_rate() {
        let half = Channel::bsc(rational(1, 2)).unwrap();
        let a = SourceSet::new(Alphabet::digits(2), 3, &["010"]).unwrap();
        let d = output_distribution(&a, &half, &Limits::default()).unwrap();
        assert!((d.entropy_rate() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn capacity_is_enforced() {
        let a = SourceSet::new(Alphabet::digits(2), 5, &["01010"]).unwrap();
        let limits = Limits {
            max_space: 16,
            ..Limits::default()
        };
        assert!(matches!(
            output_distribution(&a, &bsc01(), &limits),
            Err(Error::CapacityExceeded { .. })
        ));
    }

    #[test]
    fn alphabet_mismatch_is_reported() {
        let a = SourceSet::new(Alphabet::digits(3), 1, &["2"]).unwrap();
        assert!(matches!(
            output_distribution(&a, &bsc01(), &Limits::default()),
            Err(Error::AlphabetMismatch(_))
        ));
    }

    #[test]
    fn output_space_round_trips_words() {
        let space = OutputSpace::new(Alphabet::digits(3), 4, &Limits::default()).unwrap();
        for i in 0..space.size() {
            assert_eq!(space.parse(&space.render(i)).unwrap(), i);
        }
        assert_eq!(space.render(5), "0012");
    }
}
