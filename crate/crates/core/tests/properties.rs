use std::collections::HashSet;

use proptest::prelude::*;

use imgspec::decompose::{self, CharacterizeConfig};
use imgspec::exact::{rational, Rational};
use imgspec::images::{self, ImageMode};
use imgspec::model::{self, Alphabet, Channel, Limits, SourceSet};
use imgspec::spectrum;

#[derive(Debug, Clone)]
struct Case {
    channel: Channel,
    source: SourceSet,
    full: SourceSet,
}

fn composition(d: u64, parts: usize) -> impl Strategy<Value = Vec<Rational>> {
    prop::collection::vec(0..=d, parts - 1).prop_map(move |mut cuts| {
        cuts.sort_unstable();
        cuts.push(d);
        let mut prev = 0;
        cuts.iter()
            .map(|&c| {
                let r = rational(c - prev, d);
                prev = c;
                r
            })
            .collect()
    })
}

fn case() -> impl Strategy<Value = Case> {
    (2usize..=3, 2usize..=3, 1u64..=8, 1usize..=3)
        .prop_flat_map(|(x, y, d, n)| {
            let rows = prop::collection::vec(composition(d, y), x);
            let space = x.pow(n as u32);
            let mask = prop::collection::vec(any::<bool>(), space);
            (Just((x, y, n)), rows, mask)
        })
        .prop_filter_map("non-empty source", |((x, y, n), rows, mask)| {
            let channel = Channel::new(rows, Alphabet::digits(x), Alphabet::digits(y)).ok()?;
            let full = SourceSet::full(Alphabet::digits(x), n, &Limits::default()).ok()?;
            let picks: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
            let source = full.select(&picks).ok()?;
            Some(Case { channel, source, full })
        })
}

fn eta() -> impl Strategy<Value = Rational> {
    (1u64..=9).prop_map(|k| rational(k, 10))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distribution_is_normalized_and_equivariant(c in case(), rot in 1usize..3) {
        let l = Limits::default();
        let d = model::output_distribution(&c.source, &c.channel, &l).unwrap();
        prop_assert_eq!(d.total_mass(), Rational::from_integer(1.into()));
        let k = c.channel.output().len();
        let perm: Vec<usize> = (0..k).map(|i| (i + rot) % k).collect();
        let p = model::output_distribution(&c.source, &c.channel.permute_outputs(&perm).unwrap(), &l).unwrap();
        let mut inv = vec![0usize; k];
        for (j, &old) in perm.iter().enumerate() {
            inv[old] = j;
        }
        let n = c.source.n();
        let relabel = |mut idx: u64| {
            let mut digits = vec![0usize; n];
            for s in digits.iter_mut().rev() {
                *s = (idx % k as u64) as usize;
                idx /= k as u64;
            }
            digits.iter().fold(0u64, |acc, &s| acc * k as u64 + inv[s] as u64)
        };
        for (y, _) in d.support() {
            prop_assert_eq!(d.prob(*y), p.prob(relabel(*y)));
        }
        prop_assert_eq!(d.support().len(), p.support().len());
    }

    #[test]
    fn spectrum_partitions_the_space(c in case(), quarter in any::<bool>()) {
        let delta = if quarter { rational(1, 4) } else { rational(1, 2) };
        let d = model::output_distribution(&c.source, &c.channel, &Limits::default()).unwrap();
        let a = spectrum::build_partition(&d, &delta).unwrap();
        let b = spectrum::build_partition(&d, &delta).unwrap();
        prop_assert_eq!(&a, &b);
        let total: usize = a.levels().iter().map(|l| l.len()).sum();
        prop_assert_eq!(total as u64 + a.b_infinity_size(), a.space_size());
        let mut seen = HashSet::new();
        for l in a.levels() {
            for y in l.iter() {
                prop_assert!(seen.insert(y));
            }
        }
    }

    #[test]
    fn images_are_monotone(c in case(), e1 in eta(), e2 in eta()) {
        // Output spaces here have at most 27 words.
        let l = Limits { exact_cap: 27, ..Limits::default() };
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let g = |s: &SourceSet, e: &Rational| images::min_image(s, &c.channel, e, ImageMode::Exact, &l).unwrap().size();
        let q = |e: &Rational| images::min_quasi_image(&c.source, &c.channel, e, &l).unwrap().size();
        prop_assert!(g(&c.source, &lo) <= g(&c.source, &hi));
        prop_assert!(q(&lo) <= q(&hi));
        prop_assert!(q(&hi) <= g(&c.source, &hi));
        prop_assert!(g(&c.source, &hi) <= g(&c.full, &hi));
        let greedy = images::min_image(&c.source, &c.channel, &hi, ImageMode::Greedy, &l).unwrap();
        prop_assert!(greedy.achieved >= hi);
        prop_assert!(greedy.size() >= g(&c.source, &hi));
    }

    #[test]
    fn dense_subset_guarantees(c in case(), alpha in eta()) {
        let l = Limits::default();
        let out = decompose::dense_subset(&c.source, &c.channel, &alpha, &l).unwrap();
        let n = c.source.n() as u64;
        let ratio = rational(out.subset.len() as u64, c.source.len() as u64);
        prop_assert!(ratio >= (Rational::from_integer(1.into()) - rational(1, n)) * &alpha);
        let t = images::is_image(&out.quasi_image.set, &out.subset, &c.channel, &(&alpha / Rational::from_integer(n.into())), &l).unwrap();
        prop_assert!(t.is_image);
        prop_assert!(out.subset.is_subset_of(&c.source));
    }

    #[test]
    fn partition_is_a_partition_and_deterministic(c in case(), e in eta()) {
        let l = Limits::default();
        let cfg = CharacterizeConfig::new(e, 0.1, vec![rational(1, 4)]);
        let a = decompose::partition_source(&c.source, &[c.channel.clone()], &cfg, &l).unwrap();
        let b = decompose::partition_source(&c.source, &[c.channel.clone()], &cfg, &l).unwrap();
        prop_assert_eq!(&a, &b);
        let mut seen = HashSet::new();
        for cell in &a.cells {
            prop_assert!(cell.is_subset_of(&c.source));
            for w in cell.members() {
                prop_assert!(seen.insert(w.clone()));
            }
        }
        prop_assert_eq!(seen.len(), c.source.len());
        prop_assert!(a.m() <= a.cell_bound);
        for m in &a.per_cell {
            prop_assert!(m.uniformity_residual().abs() <= 1e-12);
        }
    }

    #[test]
    fn identity_entropy_equals_log_size(c in case()) {
        let id = Channel::identity(c.source.alphabet().clone());
        let d = model::output_distribution(&c.source, &id, &Limits::default()).unwrap();
        let expected = (c.source.len() as f64).log2() / c.source.n() as f64;
        prop_assert!((model::entropy_rate(&d) - expected).abs() <= 1e-12);
    }
}
