//! Hand-checked instances run through the public API. Expected values were
//! computed independently (direct summation and brute force over output subsets).

use imgspec::decompose::{self, CharacterizeConfig, ParamOverrides};
use imgspec::error::Error;
use imgspec::exact::{self, rational, Rational};
use imgspec::images::{self, Certificate, ImageMode};
use imgspec::model::{self, Alphabet, Channel, Limits, SeqSet, SourceSet};
use imgspec::spectrum;
use imgspec::verify::{self, Status};

fn l() -> Limits {
    Limits::default()
}

fn bsc(p: u64, q: u64) -> Channel {
    Channel::bsc(rational(p, q)).unwrap()
}

fn words(n: usize, w: &[&str]) -> SourceSet {
    SourceSet::new(Alphabet::digits(2), n, w).unwrap()
}

fn all(n: usize) -> SourceSet {
    SourceSet::full(Alphabet::digits(2), n, &l()).unwrap()
}

fn r(s: &str) -> Rational {
    exact::parse_rational(s).unwrap()
}

#[test]
fn channel_validation() {
    let rows = |m: &[[&str; 2]; 2]| m.iter().map(|row| row.iter().map(|s| r(s)).collect()).collect();
    let d = || Alphabet::digits(2);
    assert!(Channel::new(rows(&[["1", "0"], ["0", "1"]]), d(), d()).is_ok());
    assert!(Channel::new(rows(&[["9/10", "1/10"], ["1/10", "9/10"]]), d(), d()).is_ok());
    assert!(matches!(
        Channel::new(rows(&[["9/10", "0"], ["1/10", "9/10"]]), d(), d()),
        Err(Error::RowSum { row: 0, .. })
    ));
}

#[test]
fn output_distributions() {
    let d = model::output_distribution(&words(1, &["0"]), &bsc(1, 10), &l()).unwrap();
    assert_eq!(d.probabilities(), vec![(0, r("9/10")), (1, r("1/10"))]);

    let d = model::output_distribution(&words(2, &["00", "11"]), &bsc(1, 10), &l()).unwrap();
    let expect = ["41/100", "9/100", "9/100", "41/100"];
    for (y, p) in expect.iter().enumerate() {
        assert_eq!(d.prob(y as u64), r(p));
    }
    // -(2 * 0.41 log2 0.41 + 2 * 0.09 log2 0.09) / 2
    assert!((d.entropy_rate() - 0.840_038_522_863_745_8).abs() < 1e-12);

    let id = Channel::identity(Alphabet::digits(2));
    let d = model::output_distribution(&words(3, &["101"]), &id, &l()).unwrap();
    assert_eq!(d.probabilities(), vec![(5, r("1"))]);
    assert_eq!(d.entropy_rate(), 0.0);
}

#[test]
fn spectrum_of_bsc_n1() {
    let d = model::output_distribution(&words(1, &["0"]), &bsc(1, 10), &l()).unwrap();
    assert!((spectrum::spectrum_value(&d, 0) - 0.152_003_093_445_049_95).abs() < 1e-12);
    let part = spectrum::build_partition(&d, &rational(1, 2)).unwrap();
    assert_eq!(part.k_delta(), 2);
    let profile = spectrum::level_profile(&part);
    let got: Vec<_> = profile
        .iter()
        .map(|row| (row.k, row.size, row.log_size_per_n, exact::fmt_rational(&row.mass), exact::fmt_rational(&row.cumulative_mass)))
        .collect();
    assert_eq!(
        got,
        vec![
            (0, 1, 0.0, "9/10".to_string(), "9/10".to_string()),
            (1, 0, f64::NEG_INFINITY, "0/1".to_string(), "9/10".to_string()),
            (2, 1, 0.0, "1/10".to_string(), "1/1".to_string()),
        ]
    );
    assert!(verify::check_level_bounds(&part, "bsc n=1").iter().all(|c| c.status == Status::Pass));
}

#[test]
fn identity_spectrum_is_one_level() {
    let id = Channel::identity(Alphabet::digits(2));
    let a = words(3, &["000", "011", "101", "110"]);
    let d = model::output_distribution(&a, &id, &l()).unwrap();
    let part = spectrum::build_partition(&d, &rational(1, 4)).unwrap();
    // (1/3) log2 4 / (1/4) = 2.67 -> level 2
    let occupied: Vec<usize> = (0..=part.k_delta()).filter(|&k| !part.level(k).is_empty()).collect();
    assert_eq!(occupied, vec![2]);
    assert_eq!(part.level(2).len(), 4);
    assert_eq!(part.b_infinity_size(), 4);
}

#[test]
fn image_tests_and_sizes() {
    let a = words(1, &["0", "1"]);
    let zero = SeqSet::new(vec![0]);
    let t = images::is_image(&zero, &a, &bsc(1, 10), &rational(1, 2), &l()).unwrap();
    assert!(!t.is_image && t.is_quasi_image);
    let t = images::is_image(&zero, &a, &bsc(1, 10), &rational(1, 10), &l()).unwrap();
    assert!(t.is_image && t.is_quasi_image);

    let q = images::min_quasi_image(&words(1, &["0"]), &bsc(1, 10), &rational(1, 2), &l()).unwrap();
    assert_eq!(q.set.as_slice(), &[0]);
    let q = images::min_quasi_image(&words(1, &["0"]), &bsc(1, 10), &rational(95, 100), &l()).unwrap();
    assert_eq!(q.size(), 2);

    let g = images::min_image(&a, &bsc(1, 10), &rational(1, 2), ImageMode::Exact, &l()).unwrap();
    assert_eq!(g.size(), 2);
    let g = images::min_image(&a, &bsc(1, 10), &rational(1, 20), ImageMode::Exact, &l()).unwrap();
    assert_eq!(g.set.as_slice(), &[0]);
    assert_ne!(g.certificate, Certificate::GreedyUpperBound);
}

#[test]
fn continuity_scan_bsc_n3() {
    let grid: Vec<Rational> = (1..=9).map(|k| rational(k, 10)).collect();
    let scan = images::continuity_scan(&all(3), &bsc(1, 10), &grid, ImageMode::Exact, &l()).unwrap();
    let g: Vec<usize> = scan.rows.iter().map(|row| row.g).collect();
    assert_eq!(g, vec![4, 4, 8, 8, 8, 8, 8, 8, 8]);
    assert!((scan.max_gap - 1.0 / 3.0).abs() < 1e-12);

    let id = Channel::identity(Alphabet::digits(2));
    let a = words(3, &["000", "111", "010"]);
    let scan = images::continuity_scan(&a, &id, &grid, ImageMode::Exact, &l()).unwrap();
    assert!(scan.rows.iter().all(|row| row.g == 3));
}

#[test]
fn dense_subset_bsc_n2() {
    let out = decompose::dense_subset(&words(2, &["00", "11"]), &bsc(1, 10), &rational(1, 2), &l()).unwrap();
    assert_eq!(out.subset.render(), vec!["00", "11"]);
    assert_eq!(out.quasi_image.set.as_slice(), &[0, 3]);
}

#[test]
fn entropy_dense_on_a_fixed_two_by_two_channel() {
    let ch = Channel::new(
        vec![vec![r("2/3"), r("1/3")], vec![r("1/4"), r("3/4")]],
        Alphabet::digits(2),
        Alphabet::digits(2),
    )
    .unwrap();
    let a = words(4, &["0000", "0011", "0101", "1010", "1110", "1111"]);
    let out = decompose::entropy_dense_subset(&a, &ch, &rational(1, 4), &ParamOverrides::default(), &l()).unwrap();
    assert!(out.subset.is_subset_of(&a));
    // K = 4, so the target density is 1/10.
    assert_eq!(out.diagnostics.density_target, rational(1, 10));
    assert!(rational(out.subset.len() as u64, 6) >= rational(1, 10));
    assert!(out.diagnostics.density_ok());

    let one = words(2, &["01"]);
    let out = decompose::entropy_dense_subset(&one, &bsc(1, 10), &rational(1, 2), &ParamOverrides::default(), &l()).unwrap();
    assert_eq!(out.subset, one);
}

#[test]
fn characterize_bsc_n4_keeps_everything() {
    let cfg = CharacterizeConfig::new(rational(1, 2), 0.1, vec![rational(1, 4)]);
    let rep = decompose::characterize_subset(&all(4), &[bsc(1, 10)], &cfg, &l()).unwrap();
    assert_eq!(rep.subset.len(), 16);
    let c = &rep.metrics.channels[0];
    // Dropping any output y leaves row x = y with 1 - 0.9^4 < 1/2.
    assert_eq!(c.image_size, 16);
    assert!((c.entropy_rate - 1.0).abs() < 1e-12);
    assert!(c.gap < 1e-12);
}

#[test]
fn characterize_two_channels() {
    let cfg = CharacterizeConfig::new(rational(1, 2), 0.1, vec![rational(1, 8), rational(1, 4)]);
    let a = words(3, &["000", "001", "011", "111"]);
    let rep = decompose::characterize_subset(&a, &[bsc(1, 10), bsc(1, 5)], &cfg, &l()).unwrap();
    assert_eq!(rep.nested.len(), 2);
    assert!(rep.nested[1].is_subset_of(&rep.nested[0]));
    assert!(rep.nested[0].is_subset_of(&a));
    assert_eq!(rep.subset.render(), vec!["001", "011"]);
    let expect = [(0.645_997_062_392_854_1, 2, 0.312_663_729_059_520_83), (0.814_618_729_924_908, 2, 0.481_285_396_591_574_7)];
    for (c, (h, g, gap)) in rep.metrics.channels.iter().zip(expect) {
        assert!((c.entropy_rate - h).abs() < 1e-12);
        assert_eq!(c.image_size, g);
        assert!((c.gap - gap).abs() < 1e-12);
    }
}

#[test]
fn partitions() {
    let cfg = CharacterizeConfig::new(rational(1, 2), 0.1, vec![rational(1, 4)]);
    let id = Channel::identity(Alphabet::digits(2));
    let a = words(3, &["000", "011", "110"]);
    let rep = decompose::partition_source(&a, &[id], &cfg, &l()).unwrap();
    assert_eq!(rep.m(), 1);
    assert_eq!(rep.cells[0], a);
    assert_eq!(rep.per_cell[0].channels[0].gap, 0.0);

    let rep = decompose::partition_source(&all(4), &[bsc(1, 10)], &cfg, &l()).unwrap();
    let total: usize = rep.cells.iter().map(|c| c.len()).sum();
    assert_eq!(total, 16);
    assert!(rep.m() <= rep.cell_bound);

    let rep = decompose::partition_source(&words(4, &["0110"]), &[bsc(1, 10)], &cfg, &l()).unwrap();
    assert_eq!(rep.m(), 1);
}

#[test]
fn sandwich_and_cell_checks() {
    let checks = verify::check_quasi_sandwich(&words(2, &["00", "11"]), &bsc(1, 10), &rational(1, 2), &rational(1, 2), &l()).unwrap();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|c| c.status != Status::Fail));

    let id = Channel::identity(Alphabet::digits(2));
    let cfg = CharacterizeConfig::new(rational(1, 2), 0.1, vec![rational(1, 4)]);
    let checks = verify::check_cell(&words(3, &["000", "011", "110"]), &[id], &cfg, &l()).unwrap();
    let cond3: Vec<_> = checks.iter().filter(|c| c.check_id == "thm1.cond3").collect();
    assert!(!cond3.is_empty());
    assert!(cond3.iter().all(|c| c.status == Status::Pass));
    assert!(checks.iter().all(|c| c.status != Status::Fail));
}
