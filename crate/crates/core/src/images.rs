//! Minimum η-quasi-images and minimum η-images.
//!
//! A set `B` of output sequences is an η-image of `A` when every member row
//! puts mass at least η on it, and an η-quasi-image when the averaged law `P_A`
//! does. The smallest quasi-image is a greedy prefix of `P_A`; the smallest
//! image is a covering problem solved here by cardinality-increasing
//! branch-and-bound, with a greedy cover as upper bound and fallback.

use std::fmt;

use num_bigint::BigUint;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{self, Rational, Weight};
use crate::model::{Channel, ChannelRows, CondOutputDist, Limits, OutputSpace, SeqSet, SourceSet};

/// How much an [`ImageResult`] is known to be optimal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certificate {
    /// Minimum size, and no other set of at most that size qualifies.
    ExactUnique,
    /// Minimum size.
    Exact,
    /// Feasible; its size only bounds the minimum from above.
    GreedyUpperBound,
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Certificate::ExactUnique => "exact-unique",
            Certificate::Exact => "exact",
            Certificate::GreedyUpperBound => "greedy-upper-bound",
        })
    }
}

/// Solver selection for [`min_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImageMode {
    Exact,
    Greedy,
    /// Exact when the positive support fits the exact cap and the search stays
    /// within budget, greedy otherwise.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageResult {
    pub set: SeqSet,
    pub space: OutputSpace,
    pub eta: Rational,
    pub certificate: Certificate,
    /// `P_A(B)` for quasi-images, `min_x P^n(B | x)` for images.
    pub achieved: Rational,
}

impl ImageResult {
    pub fn size(&self) -> usize {
        self.set.len()
    }

    /// `(1/n) log2 |B|`.
    pub fn log_size_per_n(&self) -> f64 {
        (self.size() as f64).log2() / self.space.n() as f64
    }
}

/// Whether `B` is an η-image and whether it is an η-quasi-image of the source set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageTest {
    pub is_image: bool,
    pub is_quasi_image: bool,
}

pub(crate) fn check_eta(eta: &Rational) -> Result<()> {
    if exact::in_half_open_unit(eta) {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "eta must lie in (0, 1], got {}",
            exact::fmt_rational(eta)
        )))
    }
}

/// `num / den >= eta`, exactly.
pub(crate) fn reaches(num: &BigUint, den: &BigUint, eta: &Rational) -> bool {
    let (a, b) = exact::parts(eta);
    num * b >= den * a
}

pub fn is_image(
    set: &SeqSet,
    source: &SourceSet,
    channel: &Channel,
    eta: &Rational,
    limits: &Limits,
) -> Result<ImageTest> {
    let rows = ChannelRows::new(source, channel, limits)?;
    let all: Vec<usize> = (0..source.len()).collect();
    is_image_rows(&rows, &all, set, eta)
}

pub fn is_image_rows(
    rows: &ChannelRows,
    positions: &[usize],
    set: &SeqSet,
    eta: &Rational,
) -> Result<ImageTest> {
    check_eta(eta)?;
    if let Some(bad) = set.iter().find(|&i| i >= rows.space().size()) {
        return Err(Error::AlphabetMismatch(format!(
            "sequence index {bad} lies outside the output space"
        )));
    }
    let den = rows.denominator();
    let mut total = BigUint::zero();
    let mut is_image = true;
    for &i in positions {
        let m = rows.row_mass(i, set);
        if !reaches(&m, den, eta) {
            is_image = false;
        }
        total += m;
    }
    let is_quasi_image = reaches(&total, &(den * BigUint::from(positions.len())), eta);
    Ok(ImageTest {
        is_image,
        is_quasi_image,
    })
}

/// `min_x P^n(B | x)` over the members at `positions`.
pub fn min_row_mass(rows: &ChannelRows, positions: &[usize], set: &SeqSet) -> Rational {
    let min = positions
        .iter()
        .map(|&i| rows.row_mass(i, set))
        .min()
        .unwrap_or_else(BigUint::zero);
    exact::ratio(&min, rows.denominator())
}

/// Support of `dist` sorted by decreasing probability, ties in lexicographic order.
pub(crate) fn sorted_support(dist: &CondOutputDist) -> Vec<(u64, &BigUint)> {
    let mut order: Vec<(u64, &BigUint)> = dist.support().iter().map(|(i, w)| (*i, w)).collect();
    order.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(&b.0)));
    order
}

pub fn min_quasi_image(
    source: &SourceSet,
    channel: &Channel,
    eta: &Rational,
    limits: &Limits,
) -> Result<ImageResult> {
    let dist = crate::model::output_distribution(source, channel, limits)?;
    min_quasi_image_dist(&dist, eta)
}

/// Smallest `B` with `P(B) >= η`: the heaviest sequences first, until the mass reaches η.
///
/// The certificate is `exact-unique` when swapping the lightest chosen
/// sequence for the heaviest unchosen one drops the mass below η; that is
/// always the case at the cumulative level masses `η_k` of a spectrum partition.
pub fn min_quasi_image_dist(dist: &CondOutputDist, eta: &Rational) -> Result<ImageResult> {
    check_eta(eta)?;
    let den = dist.denominator();
    let order = sorted_support(dist);
    let mut cum = BigUint::zero();
    let mut taken = 0;
    for (_, w) in &order {
        cum += *w;
        taken += 1;
        if reaches(&cum, den, eta) {
            break;
        }
    }
    debug_assert!(reaches(&cum, den, eta));
    let unique = if taken == order.len() {
        true
    } else {
        let swapped = &cum - order[taken - 1].1 + order[taken].1;
        !reaches(&swapped, den, eta)
    };
    Ok(ImageResult {
        set: order[..taken].iter().map(|(i, _)| *i).collect(),
        space: dist.space().clone(),
        eta: eta.clone(),
        certificate: if unique {
            Certificate::ExactUnique
        } else {
            Certificate::Exact
        },
        achieved: exact::ratio(&cum, den),
    })
}

pub fn min_image(
    source: &SourceSet,
    channel: &Channel,
    eta: &Rational,
    mode: ImageMode,
    limits: &Limits,
) -> Result<ImageResult> {
    let rows = ChannelRows::new(source, channel, limits)?;
    let all: Vec<usize> = (0..source.len()).collect();
    min_image_rows(&rows, &all, eta, mode, limits)
}

/// Minimum η-image of the members at `positions`.
pub fn min_image_rows(
    rows: &ChannelRows,
    positions: &[usize],
    eta: &Rational,
    mode: ImageMode,
    limits: &Limits,
) -> Result<ImageResult> {
    check_eta(eta)?;
    if positions.is_empty() {
        return Err(Error::Source("empty source set".into()));
    }
    let problem = CoverProblem::new(rows, positions, eta);
    let exact = match mode {
        ImageMode::Exact => {
            if problem.candidates.len() > limits.exact_cap {
                return Err(Error::ExactCapExceeded {
                    support: problem.candidates.len(),
                    cap: limits.exact_cap,
                });
            }
            true
        }
        ImageMode::Greedy => false,
        ImageMode::Auto => problem.candidates.len() <= limits.exact_cap,
    };
    let solve = |exact: bool| {
        if problem.fits_u128() {
            problem.solve::<u128>(exact, limits.node_budget)
        } else {
            problem.solve::<BigUint>(exact, limits.node_budget)
        }
    };
    let (chosen, exact) = match solve(exact) {
        Err(Error::SolverBudgetExceeded { .. }) if mode == ImageMode::Auto => (solve(false)?, false),
        other => (other?, exact),
    };
    let set: SeqSet = chosen.iter().map(|&c| problem.candidates[c]).collect();
    let achieved = min_row_mass(rows, positions, &set);
    debug_assert!(&achieved >= eta);
    Ok(ImageResult {
        set,
        space: rows.space().clone(),
        eta: eta.clone(),
        certificate: if exact || problem.rows.len() == 1 {
            // A single distinct row is covered optimally by its heaviest entries,
            // which is exactly what the greedy picks.
            Certificate::Exact
        } else {
            Certificate::GreedyUpperBound
        },
        achieved,
    })
}

/// The covering problem `min |B|` s.t. every row reaches η on `B`, over the
/// positive support only, with rows deduplicated and scaled so that the
/// threshold is an integer target.
struct CoverProblem {
    /// Candidate sequences, heaviest under `P_A` first.
    candidates: Vec<u64>,
    /// Scaled row weights per candidate.
    rows: Vec<Vec<BigUint>>,
    target: BigUint,
}

impl CoverProblem {
    fn new(rows: &ChannelRows, positions: &[usize], eta: &Rational) -> Self {
        let dist = rows.distribution(positions);
        let candidates: Vec<u64> = sorted_support(&dist).into_iter().map(|(i, _)| i).collect();
        let mut by_index: Vec<(u64, usize)> =
            candidates.iter().enumerate().map(|(c, &i)| (i, c)).collect();
        by_index.sort_unstable();
        let (a, b) = exact::parts(eta);
        let mut dense: Vec<Vec<BigUint>> = positions
            .iter()
            .map(|&p| {
                let mut v = vec![BigUint::zero(); candidates.len()];
                for (idx, w) in rows.row(p) {
                    let c = by_index[by_index.binary_search_by_key(idx, |(i, _)| *i).unwrap()].1;
                    v[c] = w * &b;
                }
                v
            })
            .collect();
        dense.sort();
        dense.dedup();
        CoverProblem {
            candidates,
            rows: dense,
            target: rows.denominator() * a,
        }
    }

    fn fits_u128(&self) -> bool {
        let bound = self.rows.iter().flatten().fold(BigUint::zero(), |acc, w| acc + w);
        exact::fits_u128(&(bound + &self.target))
    }

    fn solve<W: Weight>(&self, exact: bool, budget: u64) -> Result<Vec<usize>> {
        let rows: Vec<Vec<W>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|w| W::from_big(w).expect("fits")).collect())
            .collect();
        let target = W::from_big(&self.target).expect("fits");
        let cover = Cover {
            keys: &self.candidates,
            rows,
            target,
        };
        let greedy = cover.greedy()?;
        if !exact {
            return Ok(greedy);
        }
        cover.branch_and_bound(greedy, budget)
    }
}

struct Cover<'a, W> {
    /// Sequence index of each candidate, used for lexicographic tie-breaking.
    keys: &'a [u64],
    rows: Vec<Vec<W>>,
    target: W,
}

impl<W: Weight> Cover<'_, W> {
    /// Repeatedly adds the candidate that helps the most uncovered rows,
    /// then the largest mass on uncovered rows, then the lexicographically
    /// smallest sequence.
    fn greedy(&self) -> Result<Vec<usize>> {
        let cols = self.keys.len();
        let mut acc: Vec<W> = vec![W::zero(); self.rows.len()];
        let mut covered = vec![false; self.rows.len()];
        let mut count = vec![0usize; cols];
        let mut mass: Vec<W> = vec![W::zero(); cols];
        for row in &self.rows {
            for (c, w) in row.iter().enumerate() {
                if !w.is_zero() {
                    count[c] += 1;
                    mass[c] += w;
                }
            }
        }
        let mut chosen = vec![false; cols];
        let mut picked = Vec::new();
        let mut uncovered = self.rows.len();
        while uncovered > 0 {
            let mut best: Option<usize> = None;
            for c in 0..cols {
                if chosen[c] || count[c] == 0 {
                    continue;
                }
                best = match best {
                    None => Some(c),
                    Some(b) => {
                        let better = count[c]
                            .cmp(&count[b])
                            .then_with(|| mass[c].cmp(&mass[b]))
                            .then_with(|| self.keys[b].cmp(&self.keys[c]));
                        Some(if better.is_gt() { c } else { b })
                    }
                };
            }
            let Some(c) = best else {
                return Err(Error::Infeasible(
                    "a row cannot reach the threshold on the whole support".into(),
                ));
            };
            chosen[c] = true;
            picked.push(c);
            for (r, row) in self.rows.iter().enumerate() {
                if covered[r] {
                    continue;
                }
                acc[r] += &row[c];
                if acc[r] >= self.target {
                    covered[r] = true;
                    uncovered -= 1;
                    for (c2, w) in row.iter().enumerate() {
                        if !w.is_zero() {
                            count[c2] -= 1;
                            mass[c2] -= w;
                        }
                    }
                }
            }
        }
        picked.sort_unstable();
        Ok(picked)
    }

    /// Fewest candidates that each row needs on its own.
    fn row_lower_bound(&self) -> usize {
        self.rows
            .iter()
            .map(|row| {
                let mut sorted = row.clone();
                sorted.sort_unstable_by(|a, b| b.cmp(a));
                let mut acc = W::zero();
                let mut k = 0;
                for w in &sorted {
                    if acc >= self.target {
                        break;
                    }
                    acc += w;
                    k += 1;
                }
                k
            })
            .max()
            .unwrap_or(0)
    }

    fn branch_and_bound(&self, incumbent: Vec<usize>, budget: u64) -> Result<Vec<usize>> {
        let lower = self.row_lower_bound();
        if lower >= incumbent.len() {
            return Ok(incumbent);
        }
        let cols = self.keys.len();
        // best[r][s] holds the prefix sums of row r's weights over candidates
        // s.., sorted in decreasing order.
        let best: Vec<Vec<Vec<W>>> = self
            .rows
            .iter()
            .map(|row| {
                (0..=cols)
                    .map(|s| {
                        let mut tail: Vec<W> = row[s..].to_vec();
                        tail.sort_unstable_by(|a, b| b.cmp(a));
                        let mut prefix = Vec::with_capacity(tail.len() + 1);
                        let mut acc = W::zero();
                        prefix.push(acc.clone());
                        for w in tail {
                            acc += &w;
                            prefix.push(acc.clone());
                        }
                        prefix
                    })
                    .collect()
            })
            .collect();
        let mut search = Search {
            cover: self,
            best,
            acc: vec![W::zero(); self.rows.len()],
            chosen: Vec::new(),
            nodes: 0,
            budget,
        };
        for size in lower..incumbent.len() {
            if search.run(0, size)? {
                let mut found = search.chosen.clone();
                found.sort_unstable();
                return Ok(found);
            }
        }
        Ok(incumbent)
    }
}

struct Search<'c, 'a, W> {
    cover: &'c Cover<'a, W>,
    best: Vec<Vec<Vec<W>>>,
    acc: Vec<W>,
    chosen: Vec<usize>,
    nodes: u64,
    budget: u64,
}

impl<W: Weight> Search<'_, '_, W> {
    /// Include/exclude search over candidates `start..` with `slots` picks left.
    fn run(&mut self, start: usize, slots: usize) -> Result<bool> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::SolverBudgetExceeded {
                budget: self.budget,
            });
        }
        let target = &self.cover.target;
        let mut all_covered = true;
        for (r, acc) in self.acc.iter().enumerate() {
            if acc >= target {
                continue;
            }
            all_covered = false;
            let prefix = &self.best[r][start];
            let reach = &prefix[slots.min(prefix.len() - 1)];
            let mut total = acc.clone();
            total += reach;
            if &total < target {
                return Ok(false);
            }
        }
        if all_covered {
            return Ok(true);
        }
        if slots == 0 || start == self.cover.keys.len() {
            return Ok(false);
        }
        for (r, row) in self.cover.rows.iter().enumerate() {
            self.acc[r] += &row[start];
        }
        self.chosen.push(start);
        if self.run(start + 1, slots - 1)? {
            return Ok(true);
        }
        self.chosen.pop();
        for (r, row) in self.cover.rows.iter().enumerate() {
            self.acc[r] -= &row[start];
        }
        self.run(start + 1, slots)
    }
}

/// One row of a [`continuity_scan`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub eta: Rational,
    pub g: usize,
    pub log_g_per_n: f64,
    pub certificate: Certificate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    /// Largest `(1/n) |log2 g(η_{i+1}) - log2 g(η_i)|` between consecutive grid points.
    pub max_gap: f64,
}

/// Minimum image sizes along a grid of thresholds.
pub fn continuity_scan(
    source: &SourceSet,
    channel: &Channel,
    grid: &[Rational],
    mode: ImageMode,
    limits: &Limits,
) -> Result<ScanReport> {
    if grid.is_empty() {
        return Err(Error::Parameter("empty eta grid".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parameter("eta grid must be strictly increasing".into()));
    }
    if let Some(bad) = grid.iter().find(|e| !exact::in_open_unit(e)) {
        return Err(Error::Parameter(format!(
            "grid point {} lies outside (0, 1)",
            exact::fmt_rational(bad)
        )));
    }
    let rows = ChannelRows::new(source, channel, limits)?;
    let all: Vec<usize> = (0..source.len()).collect();
    let mut out = Vec::with_capacity(grid.len());
    for eta in grid {
        let res = min_image_rows(&rows, &all, eta, mode, limits)?;
        out.push(ScanRow {
            eta: eta.clone(),
            g: res.size(),
            log_g_per_n: res.log_size_per_n(),
            certificate: res.certificate,
        });
    }
    let max_gap = out
        .windows(2)
        .map(|w| (w[1].log_g_per_n - w[0].log_g_per_n).abs())
        .fold(0.0, f64::max);
    Ok(ScanReport { rows: out, max_gap })
}
