//! The δ-information-spectrum partition of the output space.
//!
//! Every positive-mass sequence `y` falls in exactly one level `B_k`, where
//! `k δ <= i_n(y) < (k+1) δ` for `k < K` and `i_n(y) >= K δ` for the top level,
//! with `i_n(y) = -(1/n) log2 P_A(y)`. Zero-mass sequences form `B_inf`, which is
//! only counted.

use num_bigint::BigUint;
use num_traits::Zero;
use rayon::prelude::*;

use crate::error::Result;
use crate::exact::{self, Rational};
use crate::model::{CondOutputDist, SeqSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpectrumPartition {
    delta: Rational,
    n: usize,
    k_delta: usize,
    levels: Vec<SeqSet>,
    level_weights: Vec<BigUint>,
    denominator: BigUint,
    masses: Vec<Rational>,
    cumulative: Vec<Rational>,
    b_infinity_size: u64,
    space_size: u64,
}

/// `-(1/n) log2 P(y)`, or `+inf` when `y` has no mass.
pub fn spectrum_value(dist: &CondOutputDist, y: u64) -> f64 {
    let w = dist.weight(y);
    if w.is_zero() {
        return f64::INFINITY;
    }
    -exact::log2_ratio(&w, dist.denominator()) / dist.n() as f64
}

/// Classifies every positive-mass sequence of `dist` into its spectrum level.
pub fn build_partition(dist: &CondOutputDist, delta: &Rational) -> Result<SpectrumPartition> {
    let k_delta = exact::k_delta(dist.space().alphabet().len(), delta)?;
    let n = dist.n();
    let den = dist.denominator();
    let assignment: Vec<usize> = dist
        .support()
        .par_iter()
        .map(|(_, w)| exact::level_index(w, den, n, delta, k_delta))
        .collect();

    let mut members: Vec<Vec<u64>> = vec![Vec::new(); k_delta + 1];
    let mut level_weights = vec![BigUint::zero(); k_delta + 1];
    for ((idx, w), &k) in dist.support().iter().zip(&assignment) {
        members[k].push(*idx);
        level_weights[k] += w;
    }
    let masses: Vec<Rational> = level_weights.iter().map(|w| exact::ratio(w, den)).collect();
    let mut cumulative = Vec::with_capacity(masses.len());
    let mut acc = BigUint::zero();
    for w in &level_weights {
        acc += w;
        cumulative.push(exact::ratio(&acc, den));
    }
    Ok(SpectrumPartition {
        delta: delta.clone(),
        n,
        k_delta,
        levels: members.into_iter().map(SeqSet::new).collect(),
        level_weights,
        denominator: den.clone(),
        masses,
        cumulative,
        b_infinity_size: dist.zero_set_size(),
        space_size: dist.space().size(),
    })
}

impl SpectrumPartition {
    pub fn delta(&self) -> &Rational {
        &self.delta
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Index of the top level, `K = ceil(log2|Y| / δ)`.
    pub fn k_delta(&self) -> usize {
        self.k_delta
    }

    pub fn levels(&self) -> &[SeqSet] {
        &self.levels
    }

    pub fn level(&self, k: usize) -> &SeqSet {
        &self.levels[k]
    }

    /// `P_A(B_k)`.
    pub fn mass(&self, k: usize) -> &Rational {
        &self.masses[k]
    }

    pub fn masses(&self) -> &[Rational] {
        &self.masses
    }

    /// `η_k = P_A(B_0 ∪ ... ∪ B_k)`.
    pub fn cumulative(&self, k: usize) -> &Rational {
        &self.cumulative[k]
    }

    pub fn cumulatives(&self) -> &[Rational] {
        &self.cumulative
    }

    /// `η_{k-1}` with the convention `η_{-1} = 0`.
    pub fn cumulative_before(&self, k: usize) -> Rational {
        if k == 0 {
            Rational::zero()
        } else {
            self.cumulative[k - 1].clone()
        }
    }

    /// Numerator of `P_A(B_k)` over [`SpectrumPartition::denominator`].
    pub fn level_weight(&self, k: usize) -> &BigUint {
        &self.level_weights[k]
    }

    pub fn denominator(&self) -> &BigUint {
        &self.denominator
    }

    pub fn b_infinity_size(&self) -> u64 {
        self.b_infinity_size
    }

    pub fn space_size(&self) -> u64 {
        self.space_size
    }

    /// `|B_0 ∪ ... ∪ B_k|`.
    pub fn union_size(&self, k: usize) -> usize {
        self.levels[..=k].iter().map(SeqSet::len).sum()
    }

    pub fn union_up_to(&self, k: usize) -> SeqSet {
        self.levels[..=k].iter().flat_map(SeqSet::iter).collect()
    }

    /// The least `k'` with `η <= η_{k'}`; `None` when `η > 1`.
    pub fn least_level_reaching(&self, eta: &Rational) -> Option<usize> {
        self.cumulative.iter().position(|c| eta <= c)
    }

    /// Levels `k'` with `η_{k'} > η_{k'-1}`, the thresholds where the minimum
    /// quasi-image is unique.
    pub fn level_points(&self) -> Vec<usize> {
        (0..=self.k_delta)
            .filter(|&k| !self.level_weights[k].is_zero())
            .collect()
    }

    /// The smallest index maximising `P_A(B_k)`.
    pub fn heaviest_level(&self) -> usize {
        let mut best = 0;
        for k in 1..=self.k_delta {
            if self.level_weights[k] > self.level_weights[best] {
                best = k;
            }
        }
        best
    }
}

/// One row of [`level_profile`].
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRow {
    pub k: usize,
    pub size: usize,
    /// `(1/n) log2 |B_k|`, `-inf` for an empty level.
    pub log_size_per_n: f64,
    pub mass: Rational,
    pub cumulative_mass: Rational,
}

/// Size and mass of every level, empty levels included.
pub fn level_profile(part: &SpectrumPartition) -> Vec<LevelRow> {
    (0..=part.k_delta)
        .map(|k| {
            let size = part.levels[k].len();
            LevelRow {
                k,
                size,
                log_size_per_n: if size == 0 {
                    f64::NEG_INFINITY
                } else {
                    (size as f64).log2() / part.n as f64
                },
                mass: part.masses[k].clone(),
                cumulative_mass: part.cumulative[k].clone(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rational;
    use crate::model::{output_distribution, Alphabet, Channel, Limits, SourceSet};
    use num_traits::One;

    fn bsc_dist(words: &[&str], n: usize) -> CondOutputDist {
        let ch = Channel::bsc(rational(1, 10)).unwrap();
        let a = SourceSet::new(Alphabet::digits(2), n, words).unwrap();
        output_distribution(&a, &ch, &Limits::default()).unwrap()
    }

    #[test]
    fn spectrum_values() {
        let id = Channel::identity(Alphabet::digits(2));
        let a = SourceSet::new(Alphabet::digits(2), 2, &["01"]).unwrap();
        let d = output_distribution(&a, &id, &Limits::default()).unwrap();
        assert_eq!(spectrum_value(&d, 1), 0.0);
        assert_eq!(spectrum_value(&d, 0), f64::INFINITY);

        let half = Channel::bsc(rational(1, 2)).unwrap();
        let d = output_distribution(&a, &half, &Limits::default()).unwrap();
        assert!((spectrum_value(&d, 3) - 1.0).abs() < 1e-15);

        let d = bsc_dist(&["00"], 2);
        // -(1/2) log2(81/100)
        assert!((spectrum_value(&d, 0) - 0.152_003_093_445_049_95).abs() < 1e-12);
    }

    #[test]
    fn bsc_single_letter_partition() {
        let part = build_partition(&bsc_dist(&["0"], 1), &rational(1, 2)).unwrap();
        assert_eq!(part.k_delta(), 2);
        assert_eq!(part.level(0).as_slice(), &[0]);
        assert!(part.level(1).is_empty());
        assert_eq!(part.level(2).as_slice(), &[1]);
        assert_eq!(
            part.cumulatives(),
            &[rational(9, 10), rational(9, 10), Rational::one()]
        );
        assert_eq!(part.b_infinity_size(), 0);

        let rows = level_profile(&part);
        assert_eq!(rows.len(), 3);
        assert_eq!((rows[0].k, rows[0].size, rows[0].log_size_per_n), (0, 1, 0.0));
        assert_eq!(rows[0].mass, rational(9, 10));
        assert_eq!(rows[1].size, 0);
        assert_eq!(rows[1].log_size_per_n, f64::NEG_INFINITY);
        assert_eq!(rows[1].mass, Rational::zero());
        assert_eq!(rows[1].cumulative_mass, rational(9, 10));
        assert_eq!((rows[2].size, rows[2].log_size_per_n), (1, 0.0));
        assert_eq!(rows[2].mass, rational(1, 10));
        assert_eq!(rows[2].cumulative_mass, Rational::one());
    }

    #[test]
    fn identity_channel_occupies_one_level() {
        let id = Channel::identity(Alphabet::digits(2));
        let a = SourceSet::new(Alphabet::digits(2), 3, &["000", "011", "101", "110"]).unwrap();
        let d = output_distribution(&a, &id, &Limits::default()).unwrap();
        for delta in [rational(1, 4), rational(1, 3), rational(1, 2), rational(2, 3)] {
            let part = build_partition(&d, &delta).unwrap();
            // (1/n) log2 |A| = 2/3
            let expected = (rational(2, 3) / &delta).floor();
            let expected: usize = expected.to_integer().try_into().unwrap();
            let expected = expected.min(part.k_delta());
            let occupied = part.level_points();
            assert_eq!(occupied, vec![expected], "delta = {delta}");
            assert_eq!(part.level(expected).len(), 4);
            assert_eq!(part.b_infinity_size(), 4);
            let profile = level_profile(&part);
            assert_eq!(profile.iter().filter(|r| !r.mass.is_zero()).count(), 1);
        }
    }

    #[test]
    fn partition_accounts_for_every_sequence() {
        let d = bsc_dist(&["000", "011"], 3);
        let part = build_partition(&d, &rational(1, 4)).unwrap();
        let total: usize = part.levels().iter().map(SeqSet::len).sum();
        assert_eq!(total as u64 + part.b_infinity_size(), part.space_size());
        assert_eq!(part.cumulative(part.k_delta()), &Rational::one());
        assert!(part.cumulatives().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_delta_outside_unit_interval() {
        let d = bsc_dist(&["0"], 1);
        assert!(build_partition(&d, &rational(1, 1)).is_err());
        assert!(build_partition(&d, &Rational::zero()).is_err());
    }
}
