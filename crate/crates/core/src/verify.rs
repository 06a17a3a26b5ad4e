//! Executable checks. Finite-blocklength statements are decided exactly (or by
//! exhaustive enumeration) and pass or fail; asymptotic statements are
//! evaluated and reported with their slack.
//!
//! Every check is phrased as `lhs <= rhs` (strict where the statement is
//! strict), so `slack = rhs - lhs` is non-negative exactly when it holds.
//!
//! The oracles here recompute probabilities from the channel matrix with
//! `Ratio<i128>` products and brute-force subset enumeration, independently of
//! the big-integer row expansion used by the library.

use std::cmp::Ordering;
use std::collections::HashSet;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decompose::{self, CellMetrics, CharacterizeConfig, EmptyPolicy, ParamOverrides};
use crate::error::{Error, Result};
use crate::exact::{self, Rational};
use crate::images::{self, Certificate, ImageMode};
use crate::model::{Alphabet, Channel, ChannelRows, CondOutputDist, Limits, SeqSet, SourceSet};
use crate::spectrum::{self, SpectrumPartition};

/// Tolerance for the cell uniformity identity `H(X^n)/n = log2 |cell| / n`.
pub const UNIFORMITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    ReportOnly,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::ReportOnly => "report-only",
        })
    }
}

/// A compared quantity.
#[derive(Debug, Clone, PartialEq)]
pub enum Quantity {
    Exact(Rational),
    Decimal(f64),
    Count(i64),
}

impl Quantity {
    pub fn as_f64(&self) -> f64 {
        match self {
            Quantity::Exact(r) => exact::rational_to_f64(r),
            Quantity::Decimal(v) => *v,
            Quantity::Count(c) => *c as f64,
        }
    }

    fn minus(rhs: &Quantity, lhs: &Quantity) -> Option<Quantity> {
        match (rhs, lhs) {
            (Quantity::Exact(a), Quantity::Exact(b)) => Some(Quantity::Exact(a - b)),
            (Quantity::Count(a), Quantity::Count(b)) => Some(Quantity::Count(a - b)),
            _ => {
                let d = rhs.as_f64() - lhs.as_f64();
                (!d.is_nan()).then_some(Quantity::Decimal(d))
            }
        }
    }
}

fn count(c: usize) -> Quantity {
    Quantity::Count(c as i64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub check_id: String,
    pub status: Status,
    pub lhs: Quantity,
    pub rhs: Quantity,
    pub slack: Option<Quantity>,
    /// The hypothesis of the statement did not apply; counted as a pass.
    pub vacuous: bool,
    pub context: String,
}

impl CheckResult {
    pub fn exact(id: &str, holds: bool, lhs: Quantity, rhs: Quantity, context: &str) -> Self {
        let slack = Quantity::minus(&rhs, &lhs);
        CheckResult {
            check_id: id.to_string(),
            status: if holds { Status::Pass } else { Status::Fail },
            lhs,
            rhs,
            slack,
            vacuous: false,
            context: context.to_string(),
        }
    }

    pub fn report(id: &str, lhs: Quantity, rhs: Quantity, context: &str) -> Self {
        let slack = Quantity::minus(&rhs, &lhs);
        CheckResult {
            check_id: id.to_string(),
            status: Status::ReportOnly,
            lhs,
            rhs,
            slack,
            vacuous: false,
            context: context.to_string(),
        }
    }

    pub fn vacuous(id: &str, context: &str) -> Self {
        CheckResult {
            check_id: id.to_string(),
            status: Status::Pass,
            lhs: Quantity::Count(0),
            rhs: Quantity::Count(0),
            slack: None,
            vacuous: true,
            context: context.to_string(),
        }
    }

    /// A library call that should have succeeded raised `err`.
    pub fn error(id: &str, err: &Error, context: &str) -> Self {
        CheckResult {
            check_id: format!("{id}.error"),
            status: Status::Fail,
            lhs: Quantity::Count(0),
            rhs: Quantity::Count(0),
            slack: None,
            vacuous: false,
            context: format!("{context} error={err}"),
        }
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }
}

// ---------------------------------------------------------------------------
// Oracles

type Q = Ratio<i128>;

/// Product-channel probabilities recomputed entry by entry, scaled to integers
/// over a common denominator.
#[derive(Debug, Clone)]
pub struct Oracle {
    n: usize,
    members: usize,
    scale: u128,
    rows: Vec<Vec<u128>>,
    pa: Vec<u128>,
}

impl Oracle {
    /// Needs every product probability to fit `i128`; the verification corpus
    /// stays far below that.
    pub fn new(source: &SourceSet, channel: &Channel) -> Self {
        let n = source.n();
        let k = channel.output().len();
        let space = k.pow(n as u32);
        let entry = |x: usize, y: usize| -> Q {
            let r = channel.prob(x, y);
            Q::new(r.numer().to_i128().unwrap(), r.denom().to_i128().unwrap())
        };
        let probs: Vec<Vec<Q>> = source
            .members()
            .iter()
            .map(|x| {
                (0..space)
                    .map(|mut yi| {
                        let mut p = Q::one();
                        for t in (0..n).rev() {
                            p *= entry(x[t] as usize, yi % k);
                            yi /= k;
                        }
                        p
                    })
                    .collect()
            })
            .collect();
        let scale = probs
            .iter()
            .flatten()
            .fold(1i128, |acc, p| acc.lcm(p.denom()));
        let rows: Vec<Vec<u128>> = probs
            .iter()
            .map(|row| {
                row.iter()
                    .map(|p| (p.numer() * (scale / p.denom())) as u128)
                    .collect()
            })
            .collect();
        let mut pa = vec![0u128; space];
        for row in &rows {
            for (acc, w) in pa.iter_mut().zip(row) {
                *acc += w;
            }
        }
        Oracle {
            n,
            members: rows.len(),
            scale: scale as u128,
            rows,
            pa,
        }
    }

    /// `P_A(y)` numerators over [`Oracle::pa_denominator`].
    pub fn pa(&self) -> &[u128] {
        &self.pa
    }

    pub fn pa_denominator(&self) -> u128 {
        self.scale * self.members as u128
    }

    /// Row numerators over [`Oracle::row_denominator`].
    pub fn row(&self, x: usize) -> &[u128] {
        &self.rows[x]
    }

    pub fn row_denominator(&self) -> u128 {
        self.scale
    }

    pub fn support(&self) -> Vec<u64> {
        (0..self.pa.len() as u64)
            .filter(|&y| self.pa[y as usize] > 0)
            .collect()
    }

    pub fn row_mass(&self, x: usize, set: &SeqSet) -> u128 {
        set.iter().map(|y| self.rows[x][y as usize]).sum()
    }

    fn prob(&self, num: u128, den: u128) -> Rational {
        exact::ratio(&BigUint::from(num), &BigUint::from(den))
    }
}

fn at_least(num: u128, den: u128, eta: &Rational) -> bool {
    let (a, b) = exact::parts(eta);
    BigUint::from(num) * b >= BigUint::from(den) * a
}

fn subset_sums(weights: &[u128]) -> Vec<u128> {
    let mut sums = vec![0u128; 1 << weights.len()];
    for m in 1..sums.len() {
        let low = m.trailing_zeros() as usize;
        sums[m] = sums[m & (m - 1)] + weights[low];
    }
    sums
}

fn mask_of(set: &SeqSet, candidates: &[u64]) -> Option<usize> {
    let mut mask = 0usize;
    for y in set.iter() {
        mask |= 1 << candidates.binary_search(&y).ok()?;
    }
    Some(mask)
}

/// Smallest number of candidates whose `P_A` mass reaches `eta`.
pub fn brute_min_quasi(oracle: &Oracle, candidates: &[u64], eta: &Rational) -> usize {
    let weights: Vec<u128> = candidates.iter().map(|&y| oracle.pa[y as usize]).collect();
    let den = oracle.pa_denominator();
    subset_sums(&weights)
        .iter()
        .enumerate()
        .filter(|(_, &s)| at_least(s, den, eta))
        .map(|(m, _)| m.count_ones() as usize)
        .min()
        .unwrap_or(usize::MAX)
}

/// Smallest number of candidates giving every row mass at least `eta`, for each
/// threshold in `etas`.
pub fn brute_min_image(oracle: &Oracle, candidates: &[u64], etas: &[Rational]) -> Vec<usize> {
    let size = 1usize << candidates.len();
    let mut feasible = vec![vec![true; size]; etas.len()];
    for x in 0..oracle.members {
        let weights: Vec<u128> = candidates
            .iter()
            .map(|&y| oracle.rows[x][y as usize])
            .collect();
        let sums = subset_sums(&weights);
        for (f, eta) in feasible.iter_mut().zip(etas) {
            let (a, b) = exact::parts(eta);
            let need = BigUint::from(oracle.scale) * a;
            for (m, s) in sums.iter().enumerate() {
                if f[m] && BigUint::from(*s) * &b < need {
                    f[m] = false;
                }
            }
        }
    }
    feasible
        .iter()
        .map(|f| {
            (0..size)
                .filter(|&m| f[m])
                .map(|m| m.count_ones() as usize)
                .min()
                .unwrap_or(usize::MAX)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Spectrum and quasi-image checks

/// Both level-size bounds for every level.
pub fn check_level_bounds(part: &SpectrumPartition, context: &str) -> Vec<CheckResult> {
    let n = part.n();
    let delta = part.delta().clone();
    let neg_n_delta = -(delta.clone() * Rational::from_integer(n.into()));
    let mut out = Vec::new();
    for k in 0..=part.k_delta() {
        let ctx = format!("{context} k={k}");
        let size = part.level(k).len();
        if size == 0 {
            out.push(CheckResult::vacuous("lemma1.upper", &ctx));
            out.push(CheckResult::vacuous("lemma1.two-sided", &ctx));
            continue;
        }
        let rate = (size as f64).log2() / n as f64;
        let kk = Rational::from_integer(k.into());
        let upper = &delta * (&kk + Rational::one());
        let holds_upper = exact::cmp_log_rate(size as u64, n, &upper) == Ok(Ordering::Less);
        out.push(CheckResult::exact(
            "lemma1.upper",
            holds_upper,
            Quantity::Decimal(rate),
            Quantity::Exact(upper),
            &ctx,
        ));
        let heavy = exact::cmp_ratio_pow2(part.level_weight(k), part.denominator(), &neg_n_delta)
            == Ok(Ordering::Greater);
        if !heavy {
            out.push(CheckResult::vacuous("lemma1.two-sided", &ctx));
            continue;
        }
        let lower = &delta * (&kk - Rational::one());
        let holds_lower = exact::cmp_log_rate(size as u64, n, &lower) == Ok(Ordering::Greater);
        out.push(CheckResult::exact(
            "lemma1.two-sided",
            holds_upper && holds_lower,
            Quantity::Decimal((rate - exact::rational_to_f64(&(&delta * &kk))).abs()),
            Quantity::Exact(delta.clone()),
            &ctx,
        ));
    }
    out
}

fn log_rate(size: usize, n: usize) -> f64 {
    if size == 0 {
        f64::NEG_INFINITY
    } else {
        (size as f64).log2() / n as f64
    }
}

/// Sandwich and lower bound on `ḡ(A, η)`, plus exhaustive minimality when the
/// positive support is at most the brute-force cap. Returns the checks and `ḡ`.
fn quasi_checks(
    dist: &CondOutputDist,
    part: &SpectrumPartition,
    eta: &Rational,
    brute: Option<(&Oracle, &[u64])>,
    context: &str,
) -> (Vec<CheckResult>, Option<usize>) {
    let mut out = Vec::new();
    let n = dist.n();
    let delta = part.delta();
    let q = match images::min_quasi_image_dist(dist, eta) {
        Ok(q) => q,
        Err(e) => return (vec![CheckResult::error("quasi", &e, context)], None),
    };
    let g = q.size();
    let Some(kp) = part.least_level_reaching(eta) else {
        return (vec![CheckResult::error("lemma2", &Error::Parameter("eta above 1".into()), context)], None);
    };
    let ctx = format!("{context} k'={kp}");
    let lower = if kp == 0 { 0 } else { part.union_size(kp - 1) };
    let upper = part.union_size(kp);
    out.push(CheckResult::exact("lemma2.sandwich-lower", lower <= g, count(lower), count(g), &ctx));
    out.push(CheckResult::exact("lemma2.sandwich-upper", g <= upper, count(g), count(upper), &ctx));

    let neg_n_delta = -(delta.clone() * Rational::from_integer(n.into()));
    let heavy_prev = kp >= 1
        && exact::cmp_ratio_pow2(part.level_weight(kp - 1), part.denominator(), &neg_n_delta)
            == Ok(Ordering::Greater);
    if heavy_prev {
        let prev = part.level(kp - 1).len();
        let bound = delta * (Rational::from_integer(kp.into()) - Rational::from_integer(2.into()));
        let holds = prev <= g && exact::cmp_log_rate(prev as u64, n, &bound) == Ok(Ordering::Greater);
        out.push(CheckResult::exact(
            "lemma2.lower",
            holds,
            Quantity::Exact(bound),
            Quantity::Decimal(log_rate(g, n)),
            &ctx,
        ));
    } else {
        out.push(CheckResult::vacuous("lemma2.lower", &ctx));
    }
    out.push(CheckResult::report(
        "lemma2.upper-rate",
        Quantity::Decimal(log_rate(g, n)),
        Quantity::Exact(delta * Rational::from_integer((kp + 2).into())),
        &ctx,
    ));
    if let Some((oracle, cands)) = brute {
        let b = brute_min_quasi(oracle, cands, eta);
        out.push(CheckResult::exact("quasi.greedy-vs-brute", g == b, count(g), count(b), &ctx));
    }
    (out, Some(g))
}

/// At every level point `η_{k'} > η_{k'-1}`, the union of the first `k'+1`
/// levels is the certified unique minimizer; exhaustively confirmed when
/// `brute` is given.
fn uniqueness_checks(
    dist: &CondOutputDist,
    part: &SpectrumPartition,
    brute: Option<(&Oracle, &[u64])>,
    context: &str,
) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let sums = brute.map(|(oracle, cands)| {
        let w: Vec<u128> = cands.iter().map(|&y| oracle.pa[y as usize]).collect();
        subset_sums(&w)
    });
    for kp in part.level_points() {
        let ctx = format!("{context} k'={kp}");
        let eta = part.cumulative(kp);
        let union = part.union_up_to(kp);
        match images::min_quasi_image_dist(dist, eta) {
            Ok(q) => out.push(CheckResult::exact(
                "lemma2.unique-certificate",
                q.certificate == Certificate::ExactUnique && q.set == union,
                count(q.size()),
                count(union.len()),
                &ctx,
            )),
            Err(e) => out.push(CheckResult::error("lemma2.unique-certificate", &e, &ctx)),
        }
        if let (Some((oracle, cands)), Some(sums)) = (brute, sums.as_ref()) {
            let target = mask_of(&union, cands);
            let den = oracle.pa_denominator();
            let hits: Vec<usize> = sums
                .iter()
                .enumerate()
                .filter(|(m, &s)| m.count_ones() as usize <= union.len() && at_least(s, den, eta))
                .map(|(m, _)| m)
                .collect();
            let holds = hits.len() == 1 && Some(hits[0]) == target;
            out.push(CheckResult::exact("lemma2.unique", holds, count(hits.len()), count(1), &ctx));
        }
    }
    out
}

/// Public form of the quasi-image checks at one threshold.
pub fn check_quasi_sandwich(
    source: &SourceSet,
    channel: &Channel,
    eta: &Rational,
    delta: &Rational,
    limits: &Limits,
) -> Result<Vec<CheckResult>> {
    let dist = crate::model::output_distribution(source, channel, limits)?;
    let part = spectrum::build_partition(&dist, delta)?;
    let support = dist.support().len();
    let oracle = (support <= limits.brute_cap).then(|| Oracle::new(source, channel));
    let cands = oracle.as_ref().map(Oracle::support).unwrap_or_default();
    let brute = oracle.as_ref().map(|o| (o, cands.as_slice()));
    let ctx = format!("eta={}", exact::fmt_rational(eta));
    let (mut out, _) = quasi_checks(&dist, &part, eta, brute, &ctx);
    out.extend(uniqueness_checks(&dist, &part, brute, &ctx));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Image checks

struct ImageOutcome {
    exact: Option<usize>,
}

fn image_checks(
    rows: &ChannelRows,
    oracle: &Oracle,
    eta: &Rational,
    quasi: Option<usize>,
    brute: Option<usize>,
    limits: &Limits,
    context: &str,
) -> (Vec<CheckResult>, ImageOutcome) {
    let mut out = Vec::new();
    let all: Vec<usize> = (0..rows.source().len()).collect();
    let feasible = |set: &SeqSet| {
        (0..all.len()).all(|x| at_least(oracle.row_mass(x, set), oracle.row_denominator(), eta))
    };
    let greedy = match images::min_image_rows(rows, &all, eta, ImageMode::Greedy, limits) {
        Ok(g) => g,
        Err(e) => return (vec![CheckResult::error("image.greedy", &e, context)], ImageOutcome { exact: None }),
    };
    out.push(CheckResult::exact(
        "image.greedy-feasible",
        feasible(&greedy.set),
        Quantity::Exact(eta.clone()),
        Quantity::Exact(greedy.achieved.clone()),
        context,
    ));
    let support = oracle.support().len();
    let exact = if support <= limits.exact_cap {
        match images::min_image_rows(rows, &all, eta, ImageMode::Exact, limits) {
            Ok(e) => {
                out.push(CheckResult::exact(
                    "image.exact-feasible",
                    feasible(&e.set),
                    Quantity::Exact(eta.clone()),
                    Quantity::Exact(e.achieved.clone()),
                    context,
                ));
                out.push(CheckResult::exact(
                    "image.greedy-ge-exact",
                    e.size() <= greedy.size(),
                    count(e.size()),
                    count(greedy.size()),
                    context,
                ));
                if let Some(b) = brute {
                    out.push(CheckResult::exact(
                        "image.bnb-vs-brute",
                        e.size() == b,
                        count(e.size()),
                        count(b),
                        context,
                    ));
                }
                Some(e.size())
            }
            Err(e @ Error::SolverBudgetExceeded { .. }) => {
                out.push(CheckResult::report("image.exact-budget", count(1), count(0), &format!("{context} {e}")));
                None
            }
            Err(e) => {
                out.push(CheckResult::error("image.exact", &e, context));
                None
            }
        }
    } else {
        None
    };
    if let Some(q) = quasi {
        let g = exact.unwrap_or(greedy.size());
        out.push(CheckResult::exact("image.quasi-le-image", q <= g, count(q), count(g), context));
    }
    (out, ImageOutcome { exact })
}

fn monotone_checks(id: &str, values: &[(Rational, Option<usize>)], context: &str) -> Vec<CheckResult> {
    values
        .windows(2)
        .filter_map(|w| match (w[0].1, w[1].1) {
            (Some(a), Some(b)) => Some(CheckResult::exact(
                id,
                a <= b,
                count(a),
                count(b),
                &format!(
                    "{context} eta={}..{}",
                    exact::fmt_rational(&w[0].0),
                    exact::fmt_rational(&w[1].0)
                ),
            )),
            _ => None,
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Extraction checks

fn dense_checks(rows: &ChannelRows, oracle: &Oracle, alpha: &Rational, context: &str) -> Vec<CheckResult> {
    let all: Vec<usize> = (0..rows.source().len()).collect();
    let (kept, quasi) = match decompose::dense_subset_rows(rows, &all, alpha) {
        Ok(v) => v,
        Err(e) => return vec![CheckResult::error("lemma4", &e, context)],
    };
    let n = oracle.n as u64;
    let ratio = exact::rational(kept.len() as u64, all.len() as u64);
    let bound = (Rational::one() - exact::rational(1, n)) * alpha;
    let mut out = vec![CheckResult::exact(
        "lemma4.density",
        bound <= ratio,
        Quantity::Exact(bound),
        Quantity::Exact(ratio),
        context,
    )];
    let threshold = alpha / Rational::from_integer(n.into());
    let den = oracle.row_denominator();
    let expected: Vec<usize> = all
        .iter()
        .copied()
        .filter(|&x| at_least(oracle.row_mass(x, &quasi.set), den, &threshold))
        .collect();
    out.push(CheckResult::exact(
        "lemma4.membership",
        expected == kept,
        count(kept.len()),
        count(expected.len()),
        context,
    ));
    match kept.iter().map(|&x| oracle.row_mass(x, &quasi.set)).min() {
        Some(min) => out.push(CheckResult::exact(
            "lemma4.image",
            at_least(min, den, &threshold),
            Quantity::Exact(threshold),
            Quantity::Exact(oracle.prob(min, den)),
            context,
        )),
        None => out.push(CheckResult::vacuous("lemma4.image", context)),
    }
    out
}

fn entropy_dense_checks(
    rows: &ChannelRows,
    delta: &Rational,
    overrides: &ParamOverrides,
    limits: &Limits,
    context: &str,
) -> Vec<CheckResult> {
    let all: Vec<usize> = (0..rows.source().len()).collect();
    match decompose::entropy_dense_rows(rows, &all, delta, overrides, EmptyPolicy::Strict, limits) {
        Ok((out, _)) => {
            let d = &out.diagnostics;
            let ctx = format!("{context} branch={:?} k'={}", d.branch, d.k_prime);
            vec![
                CheckResult::report(
                    "lemma5.density",
                    Quantity::Exact(d.density_target.clone()),
                    Quantity::Exact(d.density.clone()),
                    &ctx,
                ),
                CheckResult::report(
                    "lemma5.entropy",
                    Quantity::Decimal(d.entropy_bound),
                    Quantity::Decimal(d.entropy_rate),
                    &ctx,
                ),
            ]
        }
        Err(Error::EmptyExtraction(reason)) => vec![CheckResult::report(
            "lemma5.nonempty",
            count(1),
            count(0),
            &format!("{context} {reason}"),
        )],
        Err(e) => vec![CheckResult::error("lemma5", &e, context)],
    }
}

/// True for channels whose rows are distinct point masses.
pub fn is_injective_deterministic(channel: &Channel) -> bool {
    let mut seen = HashSet::new();
    channel.rows().iter().all(|row| {
        let ones: Vec<usize> = (0..row.len()).filter(|&y| row[y].is_one()).collect();
        ones.len() == 1 && seen.insert(ones[0])
    })
}

/// Conditions of the characterization on one cell. `required[i]` makes the
/// condition-3 gap of channel `i` a pass/fail check (zero gap).
pub fn check_cell_metrics(
    metrics: &CellMetrics,
    required: &[bool],
    epsilon: f64,
    context: &str,
) -> Vec<CheckResult> {
    let residual = metrics.uniformity_residual().abs();
    let mut out = vec![CheckResult::exact(
        "thm1.cond2",
        residual <= UNIFORMITY_TOL,
        Quantity::Decimal(residual),
        Quantity::Decimal(UNIFORMITY_TOL),
        context,
    )];
    for (i, ch) in metrics.channels.iter().enumerate() {
        let ctx = format!("{context} channel={i} certificate={}", ch.certificate);
        if required.get(i).copied().unwrap_or(false) {
            out.push(CheckResult::exact(
                "thm1.cond3",
                ch.gap == 0.0,
                Quantity::Decimal(ch.gap),
                Quantity::Decimal(0.0),
                &ctx,
            ));
        } else {
            out.push(CheckResult::report(
                "thm1.cond3",
                Quantity::Decimal(ch.gap),
                Quantity::Decimal(ch.bound_budget),
                &ctx,
            ));
        }
        out.push(CheckResult::report(
            "ck15.2",
            Quantity::Decimal(ch.entropy_rate),
            Quantity::Decimal(ch.image_log_size + epsilon),
            &ctx,
        ));
    }
    out
}

/// Computes the metrics of `cell` and checks them.
pub fn check_cell(
    cell: &SourceSet,
    channels: &[Channel],
    cfg: &CharacterizeConfig,
    limits: &Limits,
) -> Result<Vec<CheckResult>> {
    let metrics = decompose::cell_metrics(cell, channels, cfg, limits)?;
    let required: Vec<bool> = channels.iter().map(is_injective_deterministic).collect();
    Ok(check_cell_metrics(&metrics, &required, cfg.epsilon, &format!("|cell|={}", cell.len())))
}

fn partition_checks(
    source: &SourceSet,
    channels: &[Channel],
    cfg: &CharacterizeConfig,
    identity_suite: bool,
    limits: &Limits,
    context: &str,
) -> Vec<CheckResult> {
    let rep = match decompose::partition_source(source, channels, cfg, limits) {
        Ok(r) => r,
        Err(e) => return vec![CheckResult::error("partition", &e, context)],
    };
    let mut out = Vec::new();
    let total: usize = rep.cells.iter().map(SourceSet::len).sum();
    let distinct: HashSet<&Vec<u16>> = rep.cells.iter().flat_map(|c| c.members()).collect();
    let covers = total == source.len()
        && distinct.len() == total
        && rep.cells.iter().all(|c| c.is_subset_of(source));
    out.push(CheckResult::exact("partition.cover", covers, count(total), count(source.len()), context));
    let ctx = format!(
        "{context} m={} delta_step={} gamma={:.6}",
        rep.m(),
        exact::fmt_rational(&rep.delta_step),
        rep.gamma
    );
    out.push(CheckResult::exact(
        "partition.cell-bound",
        rep.m() <= rep.cell_bound,
        count(rep.m()),
        count(rep.cell_bound),
        &ctx,
    ));
    out.push(CheckResult::report("partition.ceil-n-gamma", count(rep.m()), count(rep.ceil_n_gamma()), &ctx));
    let fallbacks = rep.residual_trace.iter().filter(|s| s.fell_back).count();
    if fallbacks > 0 {
        out.push(CheckResult::report("partition.fallback", count(fallbacks), count(0), &ctx));
    }
    if identity_suite {
        out.push(CheckResult::exact("partition.identity-single-cell", rep.m() == 1, count(rep.m()), count(1), &ctx));
    }
    let first = &rep.cells[0];
    out.push(CheckResult::report(
        "thm1.cond1",
        Quantity::Decimal(source.log_size_rate() - first.log_size_rate()),
        Quantity::Decimal(cfg.epsilon),
        &ctx,
    ));
    let required: Vec<bool> = channels.iter().map(is_injective_deterministic).collect();
    for (i, m) in rep.per_cell.iter().enumerate() {
        out.extend(check_cell_metrics(m, &required, cfg.epsilon, &format!("{ctx} cell={i}")));
    }
    out
}

// ---------------------------------------------------------------------------
// Instances and the corpus

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// Random rational channels.
    Random,
    /// Identity channels, where every asymptotic statement holds with zero gap.
    Identity,
    /// A user-supplied instance.
    Given,
}

impl std::fmt::Display for Suite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Suite::Random => "random",
            Suite::Identity => "identity",
            Suite::Given => "given",
        })
    }
}

#[derive(Debug, Clone)]
pub struct VerifyInstance {
    pub id: usize,
    pub suite: Suite,
    pub source: SourceSet,
    pub channels: Vec<Channel>,
    pub deltas: Vec<Rational>,
    pub etas: Vec<Rational>,
}

impl VerifyInstance {
    pub fn descriptor(&self) -> String {
        let ys: Vec<String> = self.channels.iter().map(|c| c.output().len().to_string()).collect();
        let ds: Vec<String> = self.deltas.iter().map(exact::fmt_rational).collect();
        format!(
            "suite={} instance={} X={} Y={} n={} |A|={} delta={}",
            self.suite,
            self.id,
            self.source.alphabet().len(),
            ys.join(","),
            self.source.n(),
            self.source.len(),
            ds.join(",")
        )
    }
}

/// Settings shared by every instance of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub epsilon: f64,
    pub overrides: ParamOverrides,
    pub limits: Limits,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            epsilon: 0.1,
            overrides: ParamOverrides::default(),
            limits: Limits::default(),
        }
    }
}

/// Runs every check on one instance.
pub fn check_instance(inst: &VerifyInstance, cfg: &VerifyConfig) -> Vec<CheckResult> {
    let base = inst.descriptor();
    let limits = &cfg.limits;
    let mut out = Vec::new();
    let mut etas = inst.etas.clone();
    etas.sort();
    etas.dedup();

    for (ci, (channel, delta)) in inst.channels.iter().zip(&inst.deltas).enumerate() {
        let ctx = if inst.channels.len() > 1 { format!("{base} channel={ci}") } else { base.clone() };
        let rows = match ChannelRows::new(&inst.source, channel, limits) {
            Ok(r) => r,
            Err(e) => {
                out.push(CheckResult::error("model", &e, &ctx));
                continue;
            }
        };
        let dist = rows.full_distribution();
        let oracle = Oracle::new(&inst.source, channel);
        let den = oracle.pa_denominator();
        let matches = oracle.support().len() == dist.support().len()
            && dist.support().iter().all(|(y, w)| {
                w * BigUint::from(den) == BigUint::from(oracle.pa[*y as usize]) * dist.denominator()
            });
        out.push(CheckResult::exact(
            "model.distribution",
            matches,
            count(dist.support().len()),
            count(oracle.support().len()),
            &ctx,
        ));
        let part = match spectrum::build_partition(&dist, delta) {
            Ok(p) => p,
            Err(e) => {
                out.push(CheckResult::error("spectrum", &e, &ctx));
                continue;
            }
        };
        let classified: usize = part.levels().iter().map(SeqSet::len).sum();
        out.push(CheckResult::exact(
            "spectrum.cover",
            classified as u64 + part.b_infinity_size() == part.space_size(),
            Quantity::Count(classified as i64 + part.b_infinity_size() as i64),
            Quantity::Count(part.space_size() as i64),
            &ctx,
        ));
        out.extend(check_level_bounds(&part, &ctx));

        let cands = oracle.support();
        let small = cands.len() <= limits.brute_cap;
        let brute = small.then_some((&oracle, cands.as_slice()));
        out.extend(uniqueness_checks(&dist, &part, brute, &ctx));
        let brute_images = if small { brute_min_image(&oracle, &cands, &etas) } else { Vec::new() };

        let mut quasi_sizes = Vec::new();
        let mut image_sizes = Vec::new();
        for (ei, eta) in etas.iter().enumerate() {
            let ectx = format!("{ctx} eta={}", exact::fmt_rational(eta));
            let (checks, q) = quasi_checks(&dist, &part, eta, brute, &ectx);
            out.extend(checks);
            let (checks, img) = image_checks(&rows, &oracle, eta, q, brute_images.get(ei).copied(), limits, &ectx);
            out.extend(checks);
            out.extend(dense_checks(&rows, &oracle, eta, &ectx));
            quasi_sizes.push((eta.clone(), q));
            image_sizes.push((eta.clone(), img.exact));
        }
        out.extend(monotone_checks("quasi.monotone-eta", &quasi_sizes, &ctx));
        out.extend(monotone_checks("image.monotone-eta", &image_sizes, &ctx));
        out.extend(entropy_dense_checks(&rows, delta, &cfg.overrides, limits, &ctx));
    }

    for eta in &etas {
        let ctx = format!("{base} eta={}", exact::fmt_rational(eta));
        let mut cc = CharacterizeConfig::new(eta.clone(), cfg.epsilon, inst.deltas.clone());
        cc.overrides = cfg.overrides.clone();
        cc.policy = EmptyPolicy::FallbackToDense;
        out.extend(partition_checks(
            &inst.source,
            &inst.channels,
            &cc,
            inst.suite == Suite::Identity,
            limits,
            &ctx,
        ));
    }
    out
}

/// Parameters of the seeded random corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusConfig {
    pub seed: u64,
    /// Instances with random rational channels.
    pub count: usize,
    /// Additional identity-channel instances.
    pub identity_count: usize,
    /// Largest `|A|` drawn.
    pub max_source: usize,
}

impl CorpusConfig {
    /// `count` random instances plus one identity instance per ten.
    pub fn new(seed: u64, count: usize) -> Self {
        CorpusConfig {
            seed,
            count,
            identity_count: count.div_ceil(10),
            max_source: 32,
        }
    }
}

const CORPUS_ETAS: [(u64, u64); 3] = [(1, 4), (1, 2), (3, 4)];
const CORPUS_DELTAS: [(u64, u64); 2] = [(1, 4), (1, 2)];

fn random_channel(rng: &mut ChaCha8Rng, x: usize, y: usize) -> Channel {
    let d: u64 = rng.gen_range(1..=20);
    let rows = (0..x)
        .map(|_| {
            let mut cuts: Vec<u64> = (0..y - 1).map(|_| rng.gen_range(0..=d)).collect();
            cuts.sort_unstable();
            cuts.push(d);
            let mut prev = 0;
            cuts.iter()
                .map(|&c| {
                    let r = exact::rational(c - prev, d);
                    prev = c;
                    r
                })
                .collect()
        })
        .collect();
    Channel::new(rows, Alphabet::digits(x), Alphabet::digits(y)).expect("compositions sum to one")
}

fn random_source(rng: &mut ChaCha8Rng, x: usize, n: usize, max: usize) -> SourceSet {
    let full = SourceSet::full(Alphabet::digits(x), n, &Limits::default()).expect("small space");
    let size = rng.gen_range(1..=full.len().min(max));
    let mut picks = index::sample(rng, full.len(), size).into_vec();
    picks.sort_unstable();
    full.select(&picks).expect("non-empty selection")
}

/// Instance `id` of the corpus; each instance draws from its own stream.
pub fn corpus_instance(cfg: &CorpusConfig, id: usize) -> VerifyInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(id as u64);
    let suite = if id < cfg.count { Suite::Random } else { Suite::Identity };
    let x = rng.gen_range(2..=3);
    let n = rng.gen_range(2..=6);
    let channel = match suite {
        Suite::Identity => Channel::identity(Alphabet::digits(x)),
        _ => {
            let y = rng.gen_range(2..=3);
            random_channel(&mut rng, x, y)
        }
    };
    let source = random_source(&mut rng, x, n, cfg.max_source);
    let (dn, dd) = CORPUS_DELTAS[rng.gen_range(0..CORPUS_DELTAS.len())];
    VerifyInstance {
        id,
        suite,
        source,
        channels: vec![channel],
        deltas: vec![exact::rational(dn, dd)],
        etas: CORPUS_ETAS.iter().map(|&(a, b)| exact::rational(a, b)).collect(),
    }
}

pub fn generate_corpus(cfg: &CorpusConfig) -> Vec<VerifyInstance> {
    (0..cfg.count + cfg.identity_count)
        .map(|id| corpus_instance(cfg, id))
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub pass: usize,
    pub fail: usize,
    pub report_only: usize,
}

impl Summary {
    pub fn of(results: &[CheckResult]) -> Self {
        let mut s = Summary {
            total: results.len(),
            ..Summary::default()
        };
        for r in results {
            match r.status {
                Status::Pass => s.pass += 1,
                Status::Fail => s.fail += 1,
                Status::ReportOnly => s.report_only += 1,
            }
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub seed: Option<u64>,
    pub instances: usize,
    pub results: Vec<CheckResult>,
    pub summary: Summary,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.summary.fail == 0
    }

    pub fn with_id<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a CheckResult> + 'a {
        self.results.iter().filter(move |r| r.check_id == id)
    }
}

/// Checks every instance in parallel and keeps results in instance order.
pub fn run_instances(instances: &[VerifyInstance], cfg: &VerifyConfig, seed: Option<u64>) -> SuiteReport {
    let results: Vec<CheckResult> = instances
        .par_iter()
        .map(|inst| check_instance(inst, cfg))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    SuiteReport {
        seed,
        instances: instances.len(),
        summary: Summary::of(&results),
        results,
    }
}

pub fn run_corpus(corpus: &CorpusConfig, cfg: &VerifyConfig) -> SuiteReport {
    run_instances(&generate_corpus(corpus), cfg, Some(corpus.seed))
}
