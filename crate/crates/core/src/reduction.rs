//! The reduction engine: first-round retention of the variables among the
//! `top_m` most significant in at least `fibre_vote_round1` of their fibres,
//! second-round retention by significance at level `alpha` in at least half
//! the fibres, alternating subsamples, rerandomisation voting and stability
//! diagnostics. The final retained set is the comprehensive model.
//!
//! Arrangements are always uniformly random. A systematic second-round
//! placement that forces correlated variables into shared fibres would slot
//! in at the `Arrangement::randomise` call sites.

use crate::dist::{normal_two_sided_pvalue, student_t_two_sided_pvalue};
use crate::error::{Error, Result};
use crate::hypercube::{choose_shape, pair_collinear_on, unpair, Arrangement, PairingGroups};
use crate::linalg::is_centred;
use crate::rng::derive_seed;
use crate::stats::{wald, SigmaMode};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Tuning of the full reduction pipeline. Every field has a default.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReductionConfig {
    /// Array dimension of the first round (cube).
    pub dims_round1: usize,
    /// Array dimension of later rounds (square).
    pub dims_round2: usize,
    /// Side override for round 1; the smallest side that fits otherwise.
    pub side_round1: Option<usize>,
    /// Side override for round 2.
    pub side_round2: Option<usize>,
    /// Second-round significance level.
    pub alpha: f64,
    /// Error-scale handling in the fibre regressions.
    pub sigma: SigmaMode,
    /// Absolute correlation at or above which columns are paired.
    pub pair_threshold: f64,
    /// Fraction of observations in the first-round/assessment part.
    pub subsample_fraction: f64,
    /// Number of rerandomisation runs B.
    pub rerandomisations: usize,
    /// Fraction of runs a variable must appear in to enter the final set.
    pub vote_fraction: f64,
    /// Master seed; all stage streams derive from it.
    pub seed: u64,
    /// "Among the top_m most significant" in round 1.
    pub top_m: usize,
    /// Fibres (out of `dims_round1`) in which the round-1 event must occur.
    pub fibre_vote_round1: usize,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        ReductionConfig {
            dims_round1: 3,
            dims_round2: 2,
            side_round1: None,
            side_round2: None,
            alpha: 0.01,
            sigma: SigmaMode::Estimate,
            pair_threshold: 0.97,
            subsample_fraction: 0.35,
            rerandomisations: 1,
            vote_fraction: 0.5,
            seed: 0,
            top_m: 2,
            fibre_vote_round1: 2,
        }
    }
}

impl ReductionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("alpha must lie in (0, 1)"));
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction < 1.0) {
            return Err(Error::invalid("subsample fraction must lie in (0, 1)"));
        }
        if self.rerandomisations < 1 {
            return Err(Error::invalid("need at least one run"));
        }
        if self.top_m < 1 {
            return Err(Error::invalid("top_m must be at least 1"));
        }
        if !(self.vote_fraction > 0.0 && self.vote_fraction <= 1.0) {
            return Err(Error::invalid("vote fraction must lie in (0, 1]"));
        }
        if !(self.pair_threshold > 0.0 && self.pair_threshold < 1.0) {
            return Err(Error::invalid("pair threshold must lie in (0, 1)"));
        }
        if self.dims_round1 < 2 || self.dims_round2 < 2 {
            return Err(Error::invalid("array dimensions must be at least 2"));
        }
        if self.fibre_vote_round1 < 1 || self.fibre_vote_round1 > self.dims_round1 {
            return Err(Error::invalid(
                "fibre_vote_round1 must lie in 1..=dims_round1",
            ));
        }
        if let SigmaMode::Known(s) = self.sigma {
            if s <= 0.0 {
                return Err(Error::invalid("known sigma must be positive"));
            }
        }
        Ok(())
    }

    /// Runs needed for a variable to enter the final set.
    pub fn votes_needed(&self) -> usize {
        (self.vote_fraction * self.rerandomisations as f64).ceil() as usize
    }
}

/// Trace of one rerandomisation run.
#[derive(Debug, Clone, Serialize)]
pub struct RunTrace {
    pub run: usize,
    pub arrangement_seeds: Vec<u64>,
    pub round1_survivors: BTreeSet<usize>,
    /// Retained set of this run after unpairing.
    pub retained: BTreeSet<usize>,
    pub rounds_run: usize,
    pub skipped_fibres: usize,
}

/// Full outcome of the reduction pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct ReductionOutcome {
    /// The comprehensive model: indices present in enough runs, unpaired.
    pub comprehensive: BTreeSet<usize>,
    pub runs: Vec<RunTrace>,
    pub votes: BTreeMap<usize, usize>,
    pub groups: PairingGroups,
    /// First-round / assessment rows, then the complementary rows.
    pub subsample: (Vec<usize>, Vec<usize>),
    pub n: usize,
    pub p: usize,
    pub config: ReductionConfig,
}

/// Deterministic split of `0..n` into a part of size `round(fraction * n)`
/// and its complement. Both parts must keep at least two observations.
pub fn split_sample(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid("fraction must lie in (0, 1)"));
    }
    let take = (fraction * n as f64).round() as usize;
    let rest = n - take.min(n);
    if take < 2 || rest < 2 {
        return Err(Error::TooSmall {
            part_a: take,
            part_b: rest,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = crate::rng::rng_from(seed);
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut part: Vec<usize> = order[..take].to_vec();
    let mut complement: Vec<usize> = order[take..].to_vec();
    part.sort_unstable();
    complement.sort_unstable();
    Ok((part, complement))
}

fn recentre(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows() as f64;
    let mut out = m.clone();
    for j in 0..m.ncols() {
        let mean = m.column(j).sum() / n;
        out.column_mut(j).add_scalar_mut(-mean);
    }
    out
}

fn recentre_vec(v: &DVector<f64>) -> DVector<f64> {
    let mean = v.sum() / v.nrows() as f64;
    v.map(|x| x - mean)
}

enum FibreOutcome {
    /// Events for these members.
    Events(Vec<usize>),
    /// Fit failed; no event for anyone, recorded.
    Skipped,
}

fn fit_fibre<F>(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    members: &[usize],
    sigma: SigmaMode,
    event_rule: F,
) -> Result<FibreOutcome>
where
    F: Fn(&crate::stats::WaldVector) -> Vec<usize>,
{
    let cols = x.select_columns(members);
    match wald(y, &cols, sigma, members) {
        Ok(w) => Ok(FibreOutcome::Events(event_rule(&w))),
        Err(Error::RankDeficient { .. }) | Err(Error::DegenerateResidual { .. }) => {
            Ok(FibreOutcome::Skipped)
        }
        Err(e) => Err(e),
    }
}

/// First-round sweep over the fibres of `arrangement`, on already-sliced
/// (and re-centred) subsample data. A variable is retained when its absolute
/// Wald entry ranks among the `top_m` largest (ties inclusive) in at least
/// `fibre_vote_round1` of the fibres containing it; single-member fibres
/// count as automatic events.
pub fn round1(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    arrangement: &Arrangement,
    cfg: &ReductionConfig,
) -> Result<(BTreeSet<usize>, usize)> {
    let top_m = cfg.top_m;
    let fibres = arrangement.fibres();
    let outcomes: Vec<FibreOutcome> = fibres
        .par_iter()
        .map(|f| {
            if f.members.len() == 1 {
                return Ok(FibreOutcome::Events(f.members.clone()));
            }
            fit_fibre(y, x, &f.members, cfg.sigma, |w| {
                let mut abs: Vec<f64> = w.values.iter().map(|v| v.abs()).collect();
                abs.sort_by(|a, b| b.partial_cmp(a).unwrap());
                let threshold = abs[top_m.min(abs.len()) - 1];
                w.index_map
                    .iter()
                    .zip(w.values.iter())
                    .filter(|(_, v)| v.abs() >= threshold)
                    .map(|(i, _)| *i)
                    .collect()
            })
        })
        .collect::<Result<_>>()?;

    let mut events: BTreeMap<usize, usize> = BTreeMap::new();
    let mut skipped = 0usize;
    for outcome in outcomes {
        match outcome {
            FibreOutcome::Events(who) => {
                for idx in who {
                    *events.entry(idx).or_insert(0) += 1;
                }
            }
            FibreOutcome::Skipped => skipped += 1,
        }
    }
    let retained = events
        .into_iter()
        .filter(|(_, c)| *c >= cfg.fibre_vote_round1)
        .map(|(i, _)| i)
        .collect();
    Ok((retained, skipped))
}

/// Later-round sweep: a variable is retained when its Wald entry is
/// significant at level `alpha` in at least half (rounded up) of the fibres
/// containing it. The reference is the standard normal under known sigma and
/// Student-t with `n - k` degrees of freedom under estimated sigma.
pub fn round2(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    arrangement: &Arrangement,
    cfg: &ReductionConfig,
) -> Result<(BTreeSet<usize>, usize)> {
    let n = y.nrows();
    let votes_needed = arrangement.dims().div_ceil(2);
    let fibres = arrangement.fibres();
    let outcomes: Vec<FibreOutcome> = fibres
        .par_iter()
        .map(|f| {
            fit_fibre(y, x, &f.members, cfg.sigma, |w| {
                let df = (n - f.members.len()) as f64;
                w.index_map
                    .iter()
                    .zip(w.values.iter())
                    .filter(|(_, t)| {
                        let p = match cfg.sigma {
                            SigmaMode::Known(_) => normal_two_sided_pvalue(**t),
                            SigmaMode::Estimate => student_t_two_sided_pvalue(df, **t),
                        };
                        p <= cfg.alpha
                    })
                    .map(|(i, _)| *i)
                    .collect()
            })
        })
        .collect::<Result<_>>()?;

    let mut events: BTreeMap<usize, usize> = BTreeMap::new();
    let mut skipped = 0usize;
    for outcome in outcomes {
        match outcome {
            FibreOutcome::Events(who) => {
                for idx in who {
                    *events.entry(idx).or_insert(0) += 1;
                }
            }
            FibreOutcome::Skipped => skipped += 1,
        }
    }
    let retained = events
        .into_iter()
        .filter(|(_, c)| *c >= votes_needed)
        .map(|(i, _)| i)
        .collect();
    Ok((retained, skipped))
}

/// The full pipeline on centred data, over the eligible column indices:
/// pairing, sample split, B rerandomised two-round (or more) sweeps,
/// majority vote, unpairing. An empty comprehensive model is a valid outcome.
pub fn cox_reduce_eligible(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    eligible: &[usize],
    cfg: &ReductionConfig,
) -> Result<ReductionOutcome> {
    cfg.validate()?;
    let (n, p) = (x.nrows(), x.ncols());
    if y.nrows() != n {
        return Err(Error::invalid("response and covariate row counts differ"));
    }
    if eligible.len() < 2 {
        return Err(Error::invalid("need at least two eligible variables"));
    }
    if eligible.iter().any(|&j| j >= p) {
        return Err(Error::invalid("eligible index out of range"));
    }
    if !is_centred(x, 1e-8) || y.sum().abs() / n as f64 > 1e-8 * (1.0 + y.norm()) {
        return Err(Error::invalid("data must be centred at ingestion"));
    }

    let groups = pair_collinear_on(x, eligible, cfg.pair_threshold);
    let representatives = groups.representatives();

    let (part_i, part_c) =
        split_sample(n, cfg.subsample_fraction, derive_seed(cfg.seed, 0, "split"))?;
    let k1 = match cfg.side_round1 {
        Some(k) => k,
        None => choose_shape(representatives.len(), cfg.dims_round1).1,
    };
    // configuration errors surface before any fitting
    if k1.pow(cfg.dims_round1 as u32) < representatives.len() {
        return Err(Error::Overflow {
            indices: representatives.len(),
            cells: k1.pow(cfg.dims_round1 as u32),
        });
    }
    if part_i.len() <= k1 {
        return Err(Error::invalid(format!(
            "first-round part has {} observations; fibres of up to {} variables need more",
            part_i.len(),
            k1
        )));
    }

    let y_i = recentre_vec(&y.select_rows(&part_i));
    let x_i = recentre(&x.select_rows(&part_i));
    let y_c = recentre_vec(&y.select_rows(&part_c));
    let x_c = recentre(&x.select_rows(&part_c));

    let runs: Vec<RunTrace> = (0..cfg.rerandomisations)
        .into_par_iter()
        .map(|b| -> Result<RunTrace> {
            let mut seeds = Vec::new();
            let seed1 = derive_seed(cfg.seed, b as u64, "round1-arrangement");
            seeds.push(seed1);
            let arr1 = Arrangement::randomise(&representatives, cfg.dims_round1, k1, seed1)?;
            let (surv1, mut skipped) = round1(&y_i, &x_i, &arr1, cfg)?;

            let mut current = surv1.clone();
            let mut rounds_run = 1usize;
            let mut round_idx = 2usize;
            while !current.is_empty() {
                // alternate parts: odd rounds on I, even rounds on its complement
                let on_i = round_idx % 2 == 1;
                let (py, px, pn) = if on_i {
                    (&y_i, &x_i, part_i.len())
                } else {
                    (&y_c, &x_c, part_c.len())
                };
                let members: Vec<usize> = current.iter().copied().collect();
                let k_r = if round_idx == 2 {
                    cfg.side_round2
                        .unwrap_or_else(|| choose_shape(members.len(), cfg.dims_round2).1)
                } else {
                    choose_shape(members.len(), cfg.dims_round2).1
                };
                if pn <= k_r {
                    return Err(Error::invalid(format!(
                        "round {round_idx} part has {pn} observations for side {k_r}"
                    )));
                }
                let seed_r =
                    derive_seed(cfg.seed, b as u64, &format!("round{round_idx}-arrangement"));
                seeds.push(seed_r);
                let arr = Arrangement::randomise(&members, cfg.dims_round2, k_r, seed_r)?;
                let (next, skip) = round2(py, px, &arr, cfg)?;
                skipped += skip;
                rounds_run += 1;
                current = next;
                if current.len() < pn {
                    break;
                }
                if rounds_run >= 3 {
                    return Err(Error::TooManySurvivors {
                        rounds: rounds_run,
                        survivors: current.len(),
                        sample: pn,
                    });
                }
                round_idx += 1;
            }

            Ok(RunTrace {
                run: b,
                arrangement_seeds: seeds,
                round1_survivors: surv1,
                retained: unpair(&current, &groups),
                rounds_run,
                skipped_fibres: skipped,
            })
        })
        .collect::<Result<_>>()?;

    let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
    for run in &runs {
        for &idx in &run.retained {
            *votes.entry(idx).or_insert(0) += 1;
        }
    }
    let needed = cfg.votes_needed();
    let comprehensive: BTreeSet<usize> = votes
        .iter()
        .filter(|(_, c)| **c >= needed)
        .map(|(i, _)| *i)
        .collect();

    Ok(ReductionOutcome {
        comprehensive,
        runs,
        votes,
        groups,
        subsample: (part_i, part_c),
        n,
        p,
        config: cfg.clone(),
    })
}

/// [`cox_reduce_eligible`] over all columns.
pub fn cox_reduce(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    cfg: &ReductionConfig,
) -> Result<ReductionOutcome> {
    let all: Vec<usize> = (0..x.ncols()).collect();
    cox_reduce_eligible(y, x, &all, cfg)
}

/// Stability diagnostics over the per-run retained sets.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    /// False when fewer than two runs were made.
    pub applicable: bool,
    pub mean_jaccard: f64,
    /// Upper-triangle pairwise Jaccard similarities (run_a, run_b, value).
    pub pairwise: Vec<(usize, usize, f64)>,
    /// Fraction of runs each variable was retained in.
    pub retention_frequency: BTreeMap<usize, f64>,
    /// Raised when the mean Jaccard similarity falls below one half.
    pub fragile: bool,
}

fn jaccard(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count() as f64;
    let union = a.union(b).count() as f64;
    inter / union
}

pub fn stability_report(outcome: &ReductionOutcome) -> StabilityReport {
    let b = outcome.runs.len();
    let mut retention_frequency = BTreeMap::new();
    for (idx, count) in &outcome.votes {
        retention_frequency.insert(*idx, *count as f64 / b as f64);
    }
    if b < 2 {
        return StabilityReport {
            applicable: false,
            mean_jaccard: f64::NAN,
            pairwise: Vec::new(),
            retention_frequency,
            fragile: false,
        };
    }
    let mut pairwise = Vec::new();
    let mut sum = 0.0;
    for i in 0..b {
        for j in (i + 1)..b {
            let v = jaccard(&outcome.runs[i].retained, &outcome.runs[j].retained);
            pairwise.push((i, j, v));
            sum += v;
        }
    }
    let mean_jaccard = sum / pairwise.len() as f64;
    StabilityReport {
        applicable: true,
        mean_jaccard,
        pairwise,
        retention_frequency,
        fragile: mean_jaccard < 0.5,
    }
}
