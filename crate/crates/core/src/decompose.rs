//! Subset extractions that make image sizes track conditional entropies, and
//! the partition of a source set into cells where the two characterizations agree.
//!
//! The extraction chain is:
//!
//! 1. [`dense_subset`]: keep the members that put at least `α/n` mass on the
//!    minimum α-quasi-image `B`. This retains a `(1 - 1/n) α` fraction of `A`.
//! 2. [`entropy_dense_subset`]: pick the heaviest spectrum level `k'`, run the
//!    dense extraction at `η_{k'}`, and when `k'` is high remove the members that
//!    concentrate on the low levels `B_0 ∪ ... ∪ B_{k''}`.
//! 3. [`characterize_subset`]: apply step 2 once per channel, nesting the results.
//! 4. [`partition_source`]: peel cells off the remainder until nothing is left.
//!
//! Steps 1 and 4 carry guarantees at every blocklength; the entropy bounds of
//! steps 2 and 3 are asymptotic and are reported with their slack.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{self, Rational};
use crate::images::{self, Certificate, ImageMode, ImageResult};
use crate::model::{Channel, ChannelRows, Limits, SourceSet};
use crate::spectrum;

/// Fixed constant in the level-selection threshold `c_n = 4.19 + τ_n / δ`.
pub const LEVEL_OFFSET: f64 = 4.19;
/// Fixed constant in the entropy bound `H/n >= log2 g / n - 7.19 δ - ε_n`.
pub const ENTROPY_SLACK_FACTOR: f64 = 7.19;

/// Vanishing sequences `β_n`, `τ_n`, `ε_n` used by the entropy-dense extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticParams {
    /// Image threshold `β_n` in `(0, 1]`.
    pub beta_n: Rational,
    /// Continuity slack `τ_n >= 0`.
    pub tau_n: f64,
    /// Entropy slack `ε_n >= 0`.
    pub epsilon_n: f64,
}

impl AsymptoticParams {
    /// Defaults: `β_n = max(1/2, 1 - 1/n²)`, `τ_n = log2(n) / n`,
    /// `ε_n = log2(2 (K+1) log2|Y|) / n`.
    pub fn defaults(n: usize, k_delta: usize, output_size: usize) -> Self {
        let nn = n as u64;
        let beta = Rational::one() - exact::rational(1, nn * nn);
        let beta_n = beta.max(exact::rational(1, 2));
        let log_y = (output_size as f64).log2();
        let residual = 2.0 * (k_delta as f64 + 1.0) * log_y;
        AsymptoticParams {
            beta_n,
            tau_n: (n as f64).log2() / n as f64,
            epsilon_n: if residual > 0.0 {
                residual.log2().max(0.0) / n as f64
            } else {
                0.0
            },
        }
    }

    /// `c_n = 4.19 + τ_n / δ`.
    pub fn c_n(&self, delta: &Rational) -> f64 {
        LEVEL_OFFSET + self.tau_n / exact::rational_to_f64(delta)
    }

    pub fn validate(&self) -> Result<()> {
        if !exact::in_half_open_unit(&self.beta_n) {
            return Err(Error::Parameter(format!(
                "beta_n must lie in (0, 1], got {}",
                exact::fmt_rational(&self.beta_n)
            )));
        }
        for (name, v) in [("tau_n", self.tau_n), ("epsilon_n", self.epsilon_n)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Parameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Optional replacements for the default [`AsymptoticParams`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamOverrides {
    pub beta_n: Option<Rational>,
    pub tau_n: Option<f64>,
    pub epsilon_n: Option<f64>,
}

impl ParamOverrides {
    pub fn resolve(&self, n: usize, k_delta: usize, output_size: usize) -> Result<AsymptoticParams> {
        let mut p = AsymptoticParams::defaults(n, k_delta, output_size);
        if let Some(b) = &self.beta_n {
            p.beta_n = b.clone();
        }
        if let Some(t) = self.tau_n {
            p.tau_n = t;
        }
        if let Some(e) = self.epsilon_n {
            p.epsilon_n = e;
        }
        p.validate()?;
        Ok(p)
    }
}

/// What to do when the high-level branch removes every member.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmptyPolicy {
    /// Report [`Error::EmptyExtraction`].
    Strict,
    /// Keep the dense subset `A'` of the first extraction instead.
    #[default]
    FallbackToDense,
}

/// Output of [`dense_subset`].
#[derive(Debug, Clone)]
pub struct DenseSubset {
    /// `A' = {x in A : P^n(B | x) >= α/n}`.
    pub subset: SourceSet,
    /// The minimum α-quasi-image `B` of `A`.
    pub quasi_image: ImageResult,
}

/// Members at `positions` whose row puts at least `α/n` on the minimum
/// α-quasi-image of their average law.
pub fn dense_subset_rows(
    rows: &ChannelRows,
    positions: &[usize],
    alpha: &Rational,
) -> Result<(Vec<usize>, ImageResult)> {
    let dist = rows.distribution(positions);
    let quasi = images::min_quasi_image_dist(&dist, alpha)?;
    let n = BigUint::from(rows.space().n());
    let (a, b) = exact::parts(alpha);
    let need = rows.denominator() * a;
    let kept = positions
        .iter()
        .copied()
        .filter(|&p| rows.row_mass(p, &quasi.set) * &b * &n >= need)
        .collect();
    Ok((kept, quasi))
}

pub fn dense_subset(
    source: &SourceSet,
    channel: &Channel,
    alpha: &Rational,
    limits: &Limits,
) -> Result<DenseSubset> {
    let rows = ChannelRows::new(source, channel, limits)?;
    let all: Vec<usize> = (0..source.len()).collect();
    let (kept, quasi_image) = dense_subset_rows(&rows, &all, alpha)?;
    Ok(DenseSubset {
        subset: source.select(&kept)?,
        quasi_image,
    })
}

/// Which case of the entropy-dense construction produced the result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// `k' <= c_n`: the dense subset is returned as is.
    LowLevel,
    /// `k' > c_n` and `η_{k''} > 1/n`: members dense on the low levels are removed.
    Split,
    /// `k' > c_n` but `η_{k''} <= 1/n`: the low levels are too light to matter.
    LightTail,
}

/// Everything [`entropy_dense_subset`] decided and measured.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyDenseDiagnostics {
    pub branch: Branch,
    /// The split branch emptied the set and the dense subset was kept instead.
    pub fell_back: bool,
    pub delta: Rational,
    pub k_delta: usize,
    pub k_prime: usize,
    pub k_double_prime: Option<usize>,
    pub c_n: f64,
    pub eta_k_prime: Rational,
    pub eta_k_double_prime: Option<Rational>,
    pub source_size: usize,
    pub dense_size: usize,
    pub size: usize,
    /// `|A*| / |A|`.
    pub density: Rational,
    /// `1 / (2 (K + 1))`.
    pub density_target: Rational,
    /// `(1/n) H(Y^n | X^n in A*)`.
    pub entropy_rate: f64,
    /// `(1/n) log2 g(A*, β_n)`.
    pub image_log_size: f64,
    pub image_certificate: Certificate,
    /// `(1/n) log2 g(A*, β_n) - 7.19 δ - ε_n`.
    pub entropy_bound: f64,
    /// `entropy_rate - entropy_bound`; non-negative when the bound holds.
    pub entropy_slack: f64,
    pub params: AsymptoticParams,
}

impl EntropyDenseDiagnostics {
    pub fn density_ok(&self) -> bool {
        self.density >= self.density_target
    }
}

/// Output of [`entropy_dense_subset`].
#[derive(Debug, Clone)]
pub struct EntropyDense {
    pub subset: SourceSet,
    /// The dense subset `A'` of the first extraction.
    pub dense: SourceSet,
    pub diagnostics: EntropyDenseDiagnostics,
}

pub(crate) struct EntropyDenseRows {
    pub subset: Vec<usize>,
    pub diagnostics: EntropyDenseDiagnostics,
}

pub fn entropy_dense_subset(
    source: &SourceSet,
    channel: &Channel,
    delta: &Rational,
    overrides: &ParamOverrides,
    limits: &Limits,
) -> Result<EntropyDense> {
    let rows = ChannelRows::new(source, channel, limits)?;
    let all: Vec<usize> = (0..source.len()).collect();
    let (out, dense) =
        entropy_dense_rows(&rows, &all, delta, overrides, EmptyPolicy::Strict, limits)?;
    Ok(EntropyDense {
        subset: source.select(&out.subset)?,
        dense: source.select(&dense)?,
        diagnostics: out.diagnostics,
    })
}

pub(crate) fn entropy_dense_rows(
    rows: &ChannelRows,
    positions: &[usize],
    delta: &Rational,
    overrides: &ParamOverrides,
    policy: EmptyPolicy,
    limits: &Limits,
) -> Result<(EntropyDenseRows, Vec<usize>)> {
    if positions.is_empty() {
        return Err(Error::Source("empty source set".into()));
    }
    let n = rows.space().n();
    let dist = rows.distribution(positions);
    let part = spectrum::build_partition(&dist, delta)?;
    let k_delta = part.k_delta();
    let params = overrides.resolve(n, k_delta, rows.space().alphabet().len())?;
    let c_n = params.c_n(delta);

    let k_prime = part.heaviest_level();
    let eta_k_prime = part.cumulative(k_prime).clone();
    let (dense, _) = dense_subset_rows(rows, positions, &eta_k_prime)?;

    let mut k_double_prime = None;
    let mut eta_k_double_prime = None;
    let (branch, mut chosen) = if (k_prime as f64) <= c_n {
        (Branch::LowLevel, dense.clone())
    } else {
        let kk = (k_prime as f64 - c_n).floor() as usize;
        let eta_kk = part.cumulative(kk).clone();
        k_double_prime = Some(kk);
        eta_k_double_prime = Some(eta_kk.clone());
        if eta_kk > exact::rational(1, n as u64) {
            let (tail, _) = dense_subset_rows(rows, positions, &eta_kk)?;
            let removed: std::collections::HashSet<usize> = tail.into_iter().collect();
            let kept: Vec<usize> = dense.iter().copied().filter(|p| !removed.contains(p)).collect();
            (Branch::Split, kept)
        } else {
            (Branch::LightTail, dense.clone())
        }
    };
    let mut fell_back = false;
    if chosen.is_empty() {
        match policy {
            EmptyPolicy::Strict => {
                return Err(Error::EmptyExtraction(format!(
                    "k' = {k_prime} > c_n = {c_n:.3} and every dense member also concentrates on \
                     the levels up to k'' = {}; n = {n} is too small for this branch",
                    k_double_prime.unwrap_or(0)
                )))
            }
            EmptyPolicy::FallbackToDense => {
                chosen = dense.clone();
                fell_back = true;
            }
        }
    }

    let sub_dist = rows.distribution(&chosen);
    let entropy_rate = sub_dist.entropy_rate();
    let image = images::min_image_rows(rows, &chosen, &params.beta_n, ImageMode::Auto, limits)?;
    let image_log_size = image.log_size_per_n();
    let entropy_bound = image_log_size
        - ENTROPY_SLACK_FACTOR * exact::rational_to_f64(delta)
        - params.epsilon_n;
    let diagnostics = EntropyDenseDiagnostics {
        branch,
        fell_back,
        delta: delta.clone(),
        k_delta,
        k_prime,
        k_double_prime,
        c_n,
        eta_k_prime,
        eta_k_double_prime,
        source_size: positions.len(),
        dense_size: dense.len(),
        size: chosen.len(),
        density: exact::rational(chosen.len() as u64, positions.len() as u64),
        density_target: exact::rational(1, 2 * (k_delta as u64 + 1)),
        entropy_rate,
        image_log_size,
        image_certificate: image.certificate,
        entropy_bound,
        entropy_slack: entropy_rate - entropy_bound,
        params,
    };
    Ok((
        EntropyDenseRows {
            subset: chosen,
            diagnostics,
        },
        dense,
    ))
}

/// Per-channel figures of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMetrics {
    /// `b_i = (1/n) H(Y_i^n | X^n in cell)`.
    pub entropy_rate: f64,
    /// `g(cell, η)` (or its greedy upper bound, see `certificate`).
    pub image_size: usize,
    /// `(1/n) log2 g(cell, η)`.
    pub image_log_size: f64,
    pub certificate: Certificate,
    /// `|b_i - (1/n) log2 g|`.
    pub gap: f64,
    /// `7.19 δ_i + ε_n + τ_n + log2(2 (K+1)) / n`.
    pub bound_budget: f64,
    pub params: AsymptoticParams,
}

/// Entropy and image-size coordinates of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMetrics {
    pub size: usize,
    /// `a = (1/n) log2 |cell|`.
    pub cell_log_size_per_n: f64,
    /// `(1/n) H(X^n | X^n in cell)`, summed from the uniform law.
    pub source_entropy_rate: f64,
    pub channels: Vec<ChannelMetrics>,
}

impl CellMetrics {
    /// `(1/n) H(X^n | X^n in cell) - (1/n) log2 |cell|`; zero up to round-off.
    pub fn uniformity_residual(&self) -> f64 {
        self.source_entropy_rate - self.cell_log_size_per_n
    }
}

/// Inputs shared by [`characterize_subset`] and [`partition_source`].
#[derive(Debug, Clone, PartialEq)]
pub struct CharacterizeConfig {
    /// Image threshold η in `(0, 1)`.
    pub eta: Rational,
    /// Target accuracy ε of the characterization.
    pub epsilon: f64,
    /// One spectrum resolution per channel.
    pub deltas: Vec<Rational>,
    pub overrides: ParamOverrides,
    pub policy: EmptyPolicy,
    pub image_mode: ImageMode,
}

impl CharacterizeConfig {
    pub fn new(eta: Rational, epsilon: f64, deltas: Vec<Rational>) -> Self {
        CharacterizeConfig {
            eta,
            epsilon,
            deltas,
            overrides: ParamOverrides::default(),
            policy: EmptyPolicy::default(),
            image_mode: ImageMode::Auto,
        }
    }

    fn validate(&self, channels: usize) -> Result<()> {
        if !exact::in_open_unit(&self.eta) {
            return Err(Error::Parameter(format!(
                "eta must lie in (0, 1), got {}",
                exact::fmt_rational(&self.eta)
            )));
        }
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(Error::Parameter(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if channels == 0 {
            return Err(Error::Parameter("at least one channel is required".into()));
        }
        if self.deltas.len() != channels {
            return Err(Error::Parameter(format!(
                "{} deltas given for {channels} channels",
                self.deltas.len()
            )));
        }
        for d in &self.deltas {
            if !exact::in_open_unit(d) {
                return Err(Error::Parameter(format!(
                    "delta must lie in (0, 1), got {}",
                    exact::fmt_rational(d)
                )));
            }
        }
        Ok(())
    }
}

/// Computes [`CellMetrics`] for the members at `positions`.
pub fn cell_metrics_rows(
    rows: &[ChannelRows],
    positions: &[usize],
    cfg: &CharacterizeConfig,
    limits: &Limits,
) -> Result<CellMetrics> {
    let source = rows[0].source();
    let n = source.n();
    let cell = source.select(positions)?;
    let mut channels = Vec::with_capacity(rows.len());
    for (ch_rows, delta) in rows.iter().zip(&cfg.deltas) {
        let y_size = ch_rows.space().alphabet().len();
        let k_delta = exact::k_delta(y_size, delta)?;
        let params = cfg.overrides.resolve(n, k_delta, y_size)?;
        let entropy_rate = ch_rows.distribution(positions).entropy_rate();
        let image = images::min_image_rows(ch_rows, positions, &cfg.eta, cfg.image_mode, limits)?;
        let image_log_size = image.log_size_per_n();
        let bound_budget = ENTROPY_SLACK_FACTOR * exact::rational_to_f64(delta)
            + params.epsilon_n
            + params.tau_n
            + (2.0 * (k_delta as f64 + 1.0)).log2() / n as f64;
        channels.push(ChannelMetrics {
            entropy_rate,
            image_size: image.size(),
            image_log_size,
            certificate: image.certificate,
            gap: (entropy_rate - image_log_size).abs(),
            bound_budget,
            params,
        });
    }
    Ok(CellMetrics {
        size: cell.len(),
        cell_log_size_per_n: cell.log_size_rate(),
        source_entropy_rate: cell.entropy_rate(),
        channels,
    })
}

/// [`CellMetrics`] of an explicit cell.
pub fn cell_metrics(
    cell: &SourceSet,
    channels: &[Channel],
    cfg: &CharacterizeConfig,
    limits: &Limits,
) -> Result<CellMetrics> {
    cfg.validate(channels.len())?;
    let rows = build_rows(cell, channels, limits)?;
    let all: Vec<usize> = (0..cell.len()).collect();
    cell_metrics_rows(&rows, &all, cfg, limits)
}

/// Output of [`characterize_subset`].
#[derive(Debug, Clone)]
pub struct CharacterizeReport {
    /// `A_D ⊆ ... ⊆ A_1 ⊆ A`.
    pub nested: Vec<SourceSet>,
    pub subset: SourceSet,
    pub metrics: CellMetrics,
    pub steps: Vec<EntropyDenseDiagnostics>,
    /// `(1/n) (log2 |A| - log2 |A'|)`.
    pub size_drop: f64,
}

impl CharacterizeReport {
    /// Whether the size drop stays within ε.
    pub fn size_drop_within(&self, epsilon: f64) -> bool {
        self.size_drop <= epsilon
    }
}

pub(crate) struct CharacterizeRows {
    pub nested: Vec<Vec<usize>>,
    pub metrics: CellMetrics,
    pub steps: Vec<EntropyDenseDiagnostics>,
}

pub(crate) fn characterize_rows(
    rows: &[ChannelRows],
    positions: &[usize],
    cfg: &CharacterizeConfig,
    limits: &Limits,
) -> Result<CharacterizeRows> {
    cfg.validate(rows.len())?;
    let mut current = positions.to_vec();
    let mut nested = Vec::with_capacity(rows.len());
    let mut steps = Vec::with_capacity(rows.len());
    for (ch_rows, delta) in rows.iter().zip(&cfg.deltas) {
        let (out, _) =
            entropy_dense_rows(ch_rows, &current, delta, &cfg.overrides, cfg.policy, limits)?;
        current = out.subset;
        nested.push(current.clone());
        steps.push(out.diagnostics);
    }
    let metrics = cell_metrics_rows(rows, &current, cfg, limits)?;
    Ok(CharacterizeRows {
        nested,
        metrics,
        steps,
    })
}

fn build_rows(source: &SourceSet, channels: &[Channel], limits: &Limits) -> Result<Vec<ChannelRows>> {
    channels
        .iter()
        .map(|ch| ChannelRows::new(source, ch, limits))
        .collect()
}

/// Applies the entropy-dense extraction channel by channel.
pub fn characterize_subset(
    source: &SourceSet,
    channels: &[Channel],
    cfg: &CharacterizeConfig,
    limits: &Limits,
) -> Result<CharacterizeReport> {
    cfg.validate(channels.len())?;
    let rows = build_rows(source, channels, limits)?;
    let all: Vec<usize> = (0..source.len()).collect();
    let out = characterize_rows(&rows, &all, cfg, limits)?;
    let nested = out
        .nested
        .iter()
        .map(|p| source.select(p))
        .collect::<Result<Vec<_>>>()?;
    let subset = nested.last().cloned().expect("at least one channel");
    let size_drop = source.log_size_rate() - subset.log_size_rate();
    Ok(CharacterizeReport {
        nested,
        subset,
        metrics: out.metrics,
        steps: out.steps,
        size_drop,
    })
}

/// One extraction of [`partition_source`].
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionStep {
    pub remainder_size: usize,
    pub cell_size: usize,
    /// `ρ_k = |A_k| / |remainder_k|`.
    pub retained: Rational,
    /// The remainder was small enough to become a cell directly.
    pub short_circuit: bool,
    /// Some channel's extraction fell back to its dense subset.
    pub fell_back: bool,
    pub branches: Vec<Branch>,
}

/// Output of [`partition_source`].
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionReport {
    pub n: usize,
    pub input_alphabet_size: usize,
    pub cells: Vec<SourceSet>,
    pub per_cell: Vec<CellMetrics>,
    pub residual_trace: Vec<PartitionStep>,
    /// `δ_step = 1 - min_k ρ_k`.
    pub delta_step: Rational,
    /// `Γ = log2|X| / log2(1/δ_step)`, zero when `δ_step = 0`.
    pub gamma: f64,
    /// Largest cell count compatible with `δ_step`: one more than the largest
    /// `j` with `δ_step^j |X|^n >= 1`.
    pub cell_bound: usize,
    /// `δ` implied by the per-channel density guarantee `Π 1 / (2 (K_i + 1))`.
    pub delta_lemma: Rational,
    /// `Γ` implied by `delta_lemma`.
    pub gamma_lemma: f64,
}

impl PartitionReport {
    pub fn m(&self) -> usize {
        self.cells.len()
    }

    /// `⌈n Γ⌉`.
    pub fn ceil_n_gamma(&self) -> usize {
        (self.n as f64 * self.gamma).ceil() as usize
    }
}

/// Peels cells off `A` with [`characterize_subset`] until nothing remains.
///
/// Remainders of one or two members become a cell directly.
pub fn partition_source(
    source: &SourceSet,
    channels: &[Channel],
    cfg: &CharacterizeConfig,
    limits: &Limits,
) -> Result<PartitionReport> {
    cfg.validate(channels.len())?;
    let rows = build_rows(source, channels, limits)?;
    let mut remainder: Vec<usize> = (0..source.len()).collect();
    let mut cells: Vec<SourceSet> = Vec::new();
    let mut per_cell = Vec::new();
    let mut trace = Vec::new();
    while !remainder.is_empty() {
        let (cell, metrics, step) = if remainder.len() <= 2 {
            let metrics = cell_metrics_rows(&rows, &remainder, cfg, limits)?;
            let step = PartitionStep {
                remainder_size: remainder.len(),
                cell_size: remainder.len(),
                retained: Rational::one(),
                short_circuit: true,
                fell_back: false,
                branches: Vec::new(),
            };
            (remainder.clone(), metrics, step)
        } else {
            let out = match characterize_rows(&rows, &remainder, cfg, limits) {
                Ok(out) => out,
                Err(Error::EmptyExtraction(reason)) => {
                    return Err(Error::NonProgress {
                        cells: cells.len(),
                        reason,
                        partial: cells,
                    })
                }
                Err(e) => return Err(e),
            };
            let cell = out.nested.last().cloned().unwrap_or_default();
            if cell.is_empty() {
                return Err(Error::NonProgress {
                    cells: cells.len(),
                    reason: "an extraction returned no members".into(),
                    partial: cells,
                });
            }
            let step = PartitionStep {
                remainder_size: remainder.len(),
                cell_size: cell.len(),
                retained: exact::rational(cell.len() as u64, remainder.len() as u64),
                short_circuit: false,
                fell_back: out.steps.iter().any(|s| s.fell_back),
                branches: out.steps.iter().map(|s| s.branch).collect(),
            };
            (cell, out.metrics, step)
        };
        let taken: std::collections::HashSet<usize> = cell.iter().copied().collect();
        remainder.retain(|p| !taken.contains(p));
        cells.push(source.select(&cell)?);
        per_cell.push(metrics);
        trace.push(step);
    }

    let min_retained = trace
        .iter()
        .map(|s| s.retained.clone())
        .min()
        .expect("at least one step");
    let delta_step = Rational::one() - min_retained;
    let x_size = source.alphabet().len();
    let n = source.n();
    let gamma = gamma_of(&delta_step, x_size);
    let cell_bound = cell_bound(&delta_step, x_size, n);
    let density: Rational = cfg
        .deltas
        .iter()
        .zip(channels)
        .map(|(d, ch)| {
            let k = exact::k_delta(ch.output().len(), d).expect("validated");
            exact::rational(1, 2 * (k as u64 + 1))
        })
        .product();
    let delta_lemma = Rational::one() - density;
    let gamma_lemma = gamma_of(&delta_lemma, x_size);
    Ok(PartitionReport {
        n,
        input_alphabet_size: x_size,
        cells,
        per_cell,
        residual_trace: trace,
        delta_step,
        gamma,
        cell_bound,
        delta_lemma,
        gamma_lemma,
    })
}

fn gamma_of(delta: &Rational, x_size: usize) -> f64 {
    if delta.is_zero() {
        return 0.0;
    }
    (x_size as f64).log2() / -exact::rational_to_f64(delta).log2()
}

/// One more than the largest `j` with `δ^j |X|^n >= 1`, decided exactly.
pub fn cell_bound(delta: &Rational, x_size: usize, n: usize) -> usize {
    if delta.is_zero() {
        return 1;
    }
    let (num, den) = exact::parts(delta);
    let space = num_traits::pow::pow(BigUint::from(x_size), n);
    let holds = |j: usize| {
        num_traits::pow::pow(num.clone(), j) * &space >= num_traits::pow::pow(den.clone(), j)
    };
    let estimate = (n as f64 * gamma_of(delta, x_size)).floor();
    let mut j = estimate.to_usize().unwrap_or(0);
    while j > 0 && !holds(j) {
        j -= 1;
    }
    while holds(j + 1) {
        j += 1;
    }
    j + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rational;
    use crate::model::Alphabet;

    fn bsc(p: u64, q: u64) -> Channel {
        Channel::bsc(rational(p, q)).unwrap()
    }

    fn binary(words: &[&str], n: usize) -> SourceSet {
        SourceSet::new(Alphabet::digits(2), n, words).unwrap()
    }

    fn limits() -> Limits {
        Limits::default()
    }

    #[test]
    fn default_params() {
        let p = AsymptoticParams::defaults(8, 4, 2);
        assert_eq!(p.beta_n, rational(63, 64));
        assert!((p.tau_n - 3.0 / 8.0).abs() < 1e-15);
        assert!((p.epsilon_n - 10f64.log2() / 8.0).abs() < 1e-15);
        assert!((p.c_n(&rational(1, 4)) - (4.19 + 1.5)).abs() < 1e-12);
        assert_eq!(AsymptoticParams::defaults(1, 2, 2).beta_n, rational(1, 2));
        let bad = ParamOverrides {
            tau_n: Some(-1.0),
            ..Default::default()
        };
        assert!(bad.resolve(4, 4, 2).is_err());
    }

    #[test]
    fn dense_subset_on_two_codewords() {
        let a = binary(&["00", "11"], 2);
        let out = dense_subset(&a, &bsc(1, 10), &rational(1, 2), &limits()).unwrap();
        // P_A = (41, 9, 9, 41)/100: the two heavy corners reach 1/2.
        assert_eq!(out.quasi_image.set.as_slice(), &[0, 3]);
        assert_eq!(out.subset, a);
    }

    #[test]
    fn dense_subset_with_full_threshold_keeps_everything() {
        let a = binary(&["000", "011", "110"], 3);
        let out = dense_subset(&a, &bsc(1, 10), &rational(1, 1), &limits()).unwrap();
        assert_eq!(out.quasi_image.size(), 8);
        assert_eq!(out.subset, a);
    }

    #[test]
    fn dense_subset_of_singleton() {
        let a = binary(&["0110"], 4);
        for alpha in [rational(1, 10), rational(1, 2), rational(9, 10), rational(1, 1)] {
            let out = dense_subset(&a, &bsc(1, 5), &alpha, &limits()).unwrap();
            assert_eq!(out.subset, a);
        }
    }

    #[test]
    fn entropy_dense_keeps_singleton() {
        let a = binary(&["01"], 2);
        let out =
            entropy_dense_subset(&a, &bsc(1, 10), &rational(1, 2), &Default::default(), &limits())
                .unwrap();
        assert_eq!(out.subset, a);
        assert_eq!(out.diagnostics.density, Rational::one());
        assert!(out.diagnostics.density_ok());
    }

    #[test]
    fn entropy_dense_on_identity_channel_keeps_everything() {
        let id = Channel::identity(Alphabet::digits(2));
        let a = binary(&["0000", "0011", "0101", "1001", "1110", "1111"], 4);
        for delta in [rational(1, 8), rational(1, 4), rational(1, 2)] {
            let out = entropy_dense_subset(&a, &id, &delta, &Default::default(), &limits()).unwrap();
            assert_eq!(out.subset, a, "delta = {delta}");
            assert!(!out.diagnostics.fell_back);
        }
    }

    #[test]
    fn strict_policy_reports_empty_split() {
        let ch = Channel::new(
            vec![
                vec![rational(1, 2), rational(1, 8), rational(3, 8)],
                vec![rational(1, 8), rational(1, 8), rational(3, 4)],
            ],
            Alphabet::digits(2),
            Alphabet::digits(3),
        )
        .unwrap();
        let overrides = ParamOverrides {
            tau_n: Some(0.0),
            ..Default::default()
        };
        let a = binary(&["001", "101", "110", "111"], 3);
        let r = entropy_dense_subset(&a, &ch, &rational(1, 8), &overrides, &limits());
        assert!(matches!(r, Err(Error::EmptyExtraction(_))));

        let rows = ChannelRows::new(&a, &ch, &limits()).unwrap();
        let all: Vec<usize> = (0..a.len()).collect();
        let (out, dense) = entropy_dense_rows(
            &rows,
            &all,
            &rational(1, 8),
            &overrides,
            EmptyPolicy::FallbackToDense,
            &limits(),
        )
        .unwrap();
        assert!(out.diagnostics.fell_back);
        assert_eq!(out.diagnostics.branch, Branch::Split);
        assert_eq!(out.subset, dense);
        assert!(!dense.is_empty());
    }

    #[test]
    fn characterize_identity_has_zero_gap() {
        let id = Channel::identity(Alphabet::digits(2));
        let a = binary(&["000", "001", "010", "100", "111"], 3);
        let cfg = CharacterizeConfig::new(rational(1, 2), 0.1, vec![rational(1, 4)]);
        let rep = characterize_subset(&a, &[id], &cfg, &limits()).unwrap();
        assert_eq!(rep.subset, a);
        assert_eq!(rep.metrics.channels[0].gap, 0.0);
        assert_eq!(rep.metrics.uniformity_residual(), 0.0);
        assert_eq!(rep.size_drop, 0.0);
    }

    #[test]
    fn characterize_nests_across_channels() {
        let a = SourceSet::full(Alphabet::digits(2), 3, &limits()).unwrap();
        let cfg = CharacterizeConfig::new(
            rational(1, 2),
            0.5,
            vec![rational(1, 8), rational(1, 4)],
        );
        let rep = characterize_subset(&a, &[bsc(1, 10), bsc(1, 5)], &cfg, &limits()).unwrap();
        assert_eq!(rep.nested.len(), 2);
        assert!(rep.nested[0].is_subset_of(&a));
        assert!(rep.nested[1].is_subset_of(&rep.nested[0]));
        assert_eq!(rep.metrics.channels.len(), 2);
        assert!(rep.metrics.channels.iter().all(|c| c.gap.is_finite()));
    }

    #[test]
    fn partition_of_identity_is_one_cell() {
        let id = Channel::identity(Alphabet::digits(2));
        let a = binary(&["0000", "0110", "1010", "1111"], 4);
        let cfg = CharacterizeConfig::new(rational(1, 2), 0.1, vec![rational(1, 4)]);
        let rep = partition_source(&a, &[id], &cfg, &limits()).unwrap();
        assert_eq!(rep.m(), 1);
        assert_eq!(rep.cells[0], a);
        assert_eq!(rep.per_cell[0].channels[0].gap, 0.0);
        assert_eq!(rep.delta_step, Rational::zero());
        assert_eq!(rep.cell_bound, 1);
    }

    #[test]
    fn partition_covers_the_source() {
        let a = SourceSet::full(Alphabet::digits(2), 4, &limits()).unwrap();
        let cfg = CharacterizeConfig::new(rational(1, 2), 0.1, vec![rational(1, 4)]);
        let rep = partition_source(&a, &[bsc(1, 10)], &cfg, &limits()).unwrap();
        let total: usize = rep.cells.iter().map(SourceSet::len).sum();
        assert_eq!(total, a.len());
        for (i, c) in rep.cells.iter().enumerate() {
            assert!(c.is_subset_of(&a));
            for d in &rep.cells[i + 1..] {
                assert!(c.members().iter().all(|w| !d.contains(w)));
            }
        }
        assert!(rep.m() <= rep.cell_bound);
    }

    #[test]
    fn partition_of_singleton() {
        let a = binary(&["101"], 3);
        let cfg = CharacterizeConfig::new(rational(1, 2), 0.1, vec![rational(1, 4)]);
        let rep = partition_source(&a, &[bsc(1, 10)], &cfg, &limits()).unwrap();
        assert_eq!(rep.m(), 1);
        assert!(rep.residual_trace[0].short_circuit);
    }

    #[test]
    fn cell_bound_is_exact() {
        // δ = 1/2, |X|^n = 16: 2^-4 * 16 = 1 holds, 2^-5 * 16 does not.
        assert_eq!(cell_bound(&rational(1, 2), 2, 4), 5);
        assert_eq!(cell_bound(&Rational::zero(), 2, 4), 1);
        // δ = 3/4, 3^2 = 9: (3/4)^7 * 9 = 1.20, (3/4)^8 * 9 = 0.90.
        assert_eq!(cell_bound(&rational(3, 4), 3, 2), 8);
    }

    #[test]
    fn rejects_bad_config() {
        let a = binary(&["0"], 1);
        let cfg = CharacterizeConfig::new(rational(1, 1), 0.1, vec![rational(1, 4)]);
        assert!(characterize_subset(&a, &[bsc(1, 10)], &cfg, &limits()).is_err());
        let cfg = CharacterizeConfig::new(rational(1, 2), 0.1, vec![]);
        assert!(characterize_subset(&a, &[bsc(1, 10)], &cfg, &limits()).is_err());
    }
}
