//! Sample-average statistics over per-scenario split costs.
//!
//! [`estimate_costs`] turns a batch cost vector into a mean, sample
//! variance, standard error, and 95% confidence interval, excluding and
//! counting infeasible scenarios. Summation is Neumaier-compensated so a
//! pooled estimate built from stored partial sums matches a direct pass
//! over the concatenated costs to well under 1e-12, and exactly in
//! integer-cost mode.
//!
//! On top of the estimator sit three study drivers: out-of-sample
//! evaluation with seed-provenance checks, prefix-based convergence
//! diagnostics, and a train-size bias experiment that re-optimizes a tour
//! per (m, replicate) cell and scores every incumbent on one shared
//! held-out test set.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cost::Cost;
use crate::instance::{CvrpInstance, GiantTour};
use crate::scenario::{DemandModel, ScenarioError, ScenarioSet};
use crate::search::{self, SearchConfig, SearchError};
use crate::split::{split_batch, SplitError, SplitMode, SplitOptions};

#[derive(Debug, Error)]
pub enum SaaError {
    #[error("cannot estimate from an empty cost vector")]
    EmptyCosts,
    #[error("all {m} scenarios are infeasible")]
    AllInfeasible { m: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Search(#[from] SearchError),
}

/// Neumaier-compensated sum: the running compensation absorbs the
/// rounding error of each add, whichever operand dominates.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Mean, spread, and feasibility counts of one scenario batch.
///
/// `cost_sum` and `m2` (the sum of squared deviations from the mean) are
/// retained so estimates can be pooled without revisiting the costs.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SaaEstimate {
    pub m: usize,
    pub infeasible_count: usize,
    pub mean: f64,
    pub variance: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    pub cost_sum: f64,
    pub m2: f64,
}

impl SaaEstimate {
    pub fn feasible_count(&self) -> usize {
        self.m - self.infeasible_count
    }

    /// Combines two estimates as if their cost vectors were concatenated.
    /// The pooled mean comes from the stored sums; the pooled m2 uses the
    /// parallel-variance combination.
    pub fn pooled(a: &SaaEstimate, b: &SaaEstimate) -> SaaEstimate {
        let fa = a.feasible_count() as f64;
        let fb = b.feasible_count() as f64;
        let f = fa + fb;
        let cost_sum = a.cost_sum + b.cost_sum;
        let mean = cost_sum / f;
        let delta = b.mean - a.mean;
        let m2 = a.m2 + b.m2 + delta * delta * fa * fb / f;
        finish_estimate(
            a.m + b.m,
            a.infeasible_count + b.infeasible_count,
            cost_sum,
            mean,
            m2,
        )
    }
}

fn finish_estimate(
    m: usize,
    infeasible_count: usize,
    cost_sum: f64,
    mean: f64,
    m2: f64,
) -> SaaEstimate {
    let f = m - infeasible_count;
    let variance = if f >= 2 { m2 / (f - 1) as f64 } else { 0.0 };
    let stderr = (variance / f as f64).sqrt();
    SaaEstimate {
        m,
        infeasible_count,
        mean,
        variance,
        stderr,
        ci95: (mean - 1.96 * stderr, mean + 1.96 * stderr),
        cost_sum,
        m2,
    }
}

/// Estimates from an already-computed batch cost vector. Infeasible
/// entries are excluded from the statistics and counted.
pub fn estimate_costs<C: Cost>(costs: &[C]) -> Result<SaaEstimate, SaaError> {
    if costs.is_empty() {
        return Err(SaaError::EmptyCosts);
    }
    let m = costs.len();
    let feasible = || costs.iter().filter(|c| !c.is_infeasible());
    let f = feasible().count();
    if f == 0 {
        return Err(SaaError::AllInfeasible { m });
    }
    let cost_sum = compensated_sum(feasible().map(|c| c.to_f64()));
    let mean = cost_sum / f as f64;
    let m2 = compensated_sum(feasible().map(|c| {
        let d = c.to_f64() - mean;
        d * d
    }));
    Ok(finish_estimate(m, m - f, cost_sum, mean, m2))
}

/// Splits the tour against every scenario and estimates the expected
/// cost.
pub fn estimate<C: Cost>(
    instance: &CvrpInstance<C>,
    tour: &GiantTour<C>,
    set: &ScenarioSet,
    mode: SplitMode<C>,
) -> Result<SaaEstimate, SaaError> {
    let res = split_batch(instance, tour, set, mode, &SplitOptions::default())?;
    estimate_costs(&res.costs)
}

#[derive(Clone, Debug)]
pub struct OosEval {
    pub estimate: SaaEstimate,
    /// Set when the test set's seed also appears among the training
    /// seeds, which would make the evaluation in-sample.
    pub provenance_warning: Option<String>,
}

/// Evaluates a tour on a held-out test set, flagging seed overlap with
/// the training seeds instead of silently reporting a biased number.
pub fn out_of_sample_eval<C: Cost>(
    instance: &CvrpInstance<C>,
    tour: &GiantTour<C>,
    test: &ScenarioSet,
    mode: SplitMode<C>,
    train_seeds: &[u64],
) -> Result<OosEval, SaaError> {
    let provenance_warning = train_seeds.contains(&test.seed()).then(|| {
        format!(
            "test seed {} also generated a training set; this evaluation is not out-of-sample",
            test.seed()
        )
    });
    Ok(OosEval {
        estimate: estimate(instance, tour, test, mode)?,
        provenance_warning,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConvergenceRow {
    pub m: usize,
    pub mean: f64,
    pub stderr: f64,
    pub infeasible_count: usize,
}

/// Estimates the tour on nested prefixes of one sampled stream, so the
/// rows differ only in sample size, never in which scenarios they saw.
pub fn convergence_diagnostics<C: Cost>(
    instance: &CvrpInstance<C>,
    tour: &GiantTour<C>,
    model: &DemandModel,
    m_grid: &[usize],
    mode: SplitMode<C>,
) -> Result<Vec<ConvergenceRow>, SaaError> {
    require_ascending(m_grid, "m_grid")?;
    let full = model.sample(*m_grid.last().expect("m_grid checked non-empty"))?;
    m_grid
        .iter()
        .map(|&m| {
            let est = estimate(instance, tour, &full.prefix(m), mode)?;
            Ok(ConvergenceRow {
                m,
                mean: est.mean,
                stderr: est.stderr,
                infeasible_count: est.infeasible_count,
            })
        })
        .collect()
}

/// True when stderr shrinks like 1/sqrt(m) across the rows: every
/// stderr*sqrt(m) product stays within `tol` (relative) of their median.
/// Rows from a deterministic model (all products zero) pass.
pub fn stderr_scaling_consistent(rows: &[ConvergenceRow], tol: f64) -> bool {
    let mut products: Vec<f64> = rows
        .iter()
        .map(|r| r.stderr * (r.m as f64).sqrt())
        .collect();
    products.sort_by(f64::total_cmp);
    let median = products[products.len() / 2];
    if median == 0.0 {
        return products.iter().all(|&p| p == 0.0);
    }
    products
        .iter()
        .all(|&p| (p / median - 1.0).abs() <= tol)
}

fn require_ascending(list: &[usize], name: &str) -> Result<(), SaaError> {
    if list.is_empty() || list[0] == 0 || !list.windows(2).all(|w| w[0] < w[1]) {
        return Err(SaaError::InvalidParameter(format!(
            "{name} must be non-empty, positive, and strictly ascending, got {list:?}"
        )));
    }
    Ok(())
}

/// One optimize-then-test cell of the bias experiment.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BiasRow {
    pub m: usize,
    pub replicate: usize,
    pub train_seed: u64,
    pub search_seed: u64,
    pub in_sample_mean: f64,
    pub oos_mean: f64,
    pub oos_stderr: f64,
}

/// Per-m summary across replicates. `stderr_oos` is the standard error
/// of the replicate means.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BiasAggregate {
    pub m: usize,
    pub replicates: usize,
    pub mean_in_sample: f64,
    pub mean_oos: f64,
    pub stderr_oos: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BiasReport {
    pub rows: Vec<BiasRow>,
    pub aggregates: Vec<BiasAggregate>,
    pub base_seed: u64,
    pub test_seed: u64,
    pub test_m: usize,
}

impl BiasReport {
    /// Writes the per-cell table with the columns
    /// `m,replicate,train_seed,in_sample_mean,oos_mean,oos_stderr`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "m",
            "replicate",
            "train_seed",
            "in_sample_mean",
            "oos_mean",
            "oos_stderr",
        ])?;
        for r in &self.rows {
            out.write_record(&[
                r.m.to_string(),
                r.replicate.to_string(),
                r.train_seed.to_string(),
                r.in_sample_mean.to_string(),
                r.oos_mean.to_string(),
                r.oos_stderr.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// SplitMix64-style mixer for deriving independent stream seeds from a
/// base seed and two indices.
pub(crate) fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(base
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(mix(a))
        .wrapping_add(mix(b).rotate_left(32)))
}

/// For each train-set size in `m_list` and each replicate, samples a
/// fresh training set, optimizes a tour on it, and evaluates that tour
/// both in-sample (the search's own penalized fitness) and on one shared
/// held-out test set under the same penalized objective. Training and
/// test seeds are derived disjointly from `model.seed`.
pub fn bias_experiment<C: Cost>(
    instance: &CvrpInstance<C>,
    model: &DemandModel,
    m_list: &[usize],
    replicates: usize,
    test_m: usize,
    search_template: &SearchConfig<C>,
) -> Result<BiasReport, SaaError> {
    require_ascending(m_list, "m_list")?;
    if replicates == 0 {
        return Err(SaaError::InvalidParameter("replicates must be >= 1".into()));
    }
    if test_m == 0 {
        return Err(SaaError::InvalidParameter("test_m must be >= 1".into()));
    }
    let test_seed = derive_seed(model.seed, u64::MAX, u64::MAX);
    let test_model = DemandModel { seed: test_seed, ..model.clone() };
    let test_set = test_model.sample(test_m)?;

    let cells: Vec<(usize, usize)> = m_list
        .iter()
        .flat_map(|&m| (0..replicates).map(move |rep| (m, rep)))
        .collect();
    let mut rows = cells
        .par_iter()
        .map(|&(m, rep)| {
            let train_seed = derive_seed(model.seed, m as u64, rep as u64);
            let search_seed = derive_seed(train_seed, 0x5eed, rep as u64);
            debug_assert_ne!(train_seed, test_seed);
            let train_model = DemandModel { seed: train_seed, ..model.clone() };
            let train = train_model.sample(m)?;
            let mut config = search_template.clone();
            config.seed = search_seed;
            let out = search::solve(instance, &train, &config)?;
            let oos = estimate(
                instance,
                &out.best.tour,
                &test_set,
                SplitMode::Penalized { lambda: out.lambda },
            )?;
            Ok(BiasRow {
                m,
                replicate: rep,
                train_seed,
                search_seed,
                in_sample_mean: out.best.fitness,
                oos_mean: oos.mean,
                oos_stderr: oos.stderr,
            })
        })
        .collect::<Result<Vec<BiasRow>, SaaError>>()?;
    rows.sort_by_key(|r| (r.m, r.replicate));

    let aggregates = m_list
        .iter()
        .map(|&m| {
            let cell: Vec<&BiasRow> = rows.iter().filter(|r| r.m == m).collect();
            let k = cell.len() as f64;
            let mean_in_sample =
                compensated_sum(cell.iter().map(|r| r.in_sample_mean)) / k;
            let mean_oos = compensated_sum(cell.iter().map(|r| r.oos_mean)) / k;
            let var = if cell.len() >= 2 {
                compensated_sum(cell.iter().map(|r| {
                    let d = r.oos_mean - mean_oos;
                    d * d
                })) / (k - 1.0)
            } else {
                0.0
            };
            BiasAggregate {
                m,
                replicates: cell.len(),
                mean_in_sample,
                mean_oos,
                stderr_oos: (var / k).sqrt(),
            }
        })
        .collect();

    Ok(BiasReport {
        rows,
        aggregates,
        base_seed: model.seed,
        test_seed,
        test_m,
    })
}

/// One-sided sign test: probability of at least `wins` successes in
/// `trials` fair coin flips. Ties must be dropped by the caller before
/// counting. Exact for `trials <= 63`.
pub fn sign_test_p_value(wins: u64, trials: u64) -> f64 {
    assert!(trials <= 63, "exact sign test supports at most 63 trials");
    assert!(wins <= trials);
    let mut favorable: u128 = 0;
    for k in wins..=trials {
        favorable += binomial(trials, k);
    }
    favorable as f64 / (1u128 << trials) as f64
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut num: u128 = 1;
    for i in 0..k {
        num = num * (n - i) as u128 / (i + 1) as u128;
    }
    num
}
