//! Split kernels: scalar, masked, batched, and a brute-force oracle.
//!
//! Splitting a giant tour under one demand scenario is a shortest-path DP
//! over tour positions: state `i` is "the first `i` tour positions are
//! routed", and a transition from `p` to `i` means one vehicle serves the
//! contiguous segment of positions `p + 1 ..= i`. With `D` the intra-tour
//! arc-cost prefix (`dist_prefix`), the transition costs
//! `c(0, sigma[p+1]) + (D[i] - D[p+1]) + c(sigma[i], return)`, which the
//! kernel refactors into a scenario-independent part per `p` plus a part
//! per `i`, so every candidate is one add away.
//!
//! Three evaluation paths share the same per-candidate arithmetic and
//! therefore produce bit-identical costs and predecessors:
//!
//! - [`split_scalar`]: one scenario, checking segment loads directly;
//! - [`split_masked`]: one scenario, using a precomputed earliest-feasible
//!   split point per state ([`compute_masks`]) so the inner loop carries no
//!   feasibility branching;
//! - [`split_batch`]: many scenarios, scenario-major, processed in tiles
//!   with a bounded memory footprint and rayon parallelism across
//!   scenarios. Results are independent of tile size and worker count.
//!
//! [`brute_force_split`] enumerates all contiguous partitions directly from
//! the cost matrix. It shares no arithmetic with the DP paths, which makes
//! it a genuine cross-check for small instances.
//!
//! Strict mode marks a scenario infeasible (sentinel cost) when any single
//! demand exceeds capacity; penalized mode instead charges `lambda` per
//! unit of capacity overload and always produces finite costs.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::Cost;
use crate::instance::{CvrpInstance, GiantTour};
use crate::scenario::{permute_row_into, prefix_row_into, PrefixSums, ScenarioSet};

/// Mask entry marking a state whose single-customer route already exceeds
/// capacity.
pub const MASK_INFEASIBLE: u32 = u32::MAX;
/// Predecessor entry for state 0 and for infeasible states.
pub const PRED_NONE: u32 = u32::MAX;
/// Largest instance the brute-force oracle accepts.
pub const BRUTE_FORCE_MAX_N: usize = 20;

/// Scenarios per rayon work item inside a tile.
const PAR_CHUNK_ROWS: usize = 512;

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("scenario set has {got} customers but the tour has {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error(
        "allocation of {bytes} bytes failed; lower tile_rows (currently {tile_rows}) \
         or disable predecessor recording"
    )]
    Allocation { bytes: u64, tile_rows: usize },
    #[error("predecessor chain corrupt at state {state}")]
    CorruptPredecessors { state: usize },
    #[error("cannot recover routes from an infeasible split")]
    InfeasibleSplit,
    #[error("brute-force oracle supports at most {max} customers, got {n}")]
    OracleTooLarge { n: usize, max: usize },
}

/// Capacity handling of the split DP.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SplitMode<C> {
    /// Segments over capacity are forbidden; a scenario with any single
    /// demand above capacity gets the infeasible sentinel cost.
    Strict,
    /// Every segment is allowed at `lambda` cost per unit of overload.
    Penalized { lambda: C },
}

/// Tuning knobs for [`split_batch`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplitOptions {
    /// Scenarios per tile; bounds the working-set memory of a batch call.
    pub tile_rows: usize,
    /// Record the full predecessor matrix for route recovery
    /// (`m x (n + 1)` u32 values; significant memory for large batches).
    pub record_pred: bool,
}

pub const DEFAULT_TILE_ROWS: usize = 65_536;

impl Default for SplitOptions {
    fn default() -> Self {
        SplitOptions { tile_rows: DEFAULT_TILE_ROWS, record_pred: false }
    }
}

/// Earliest feasible split point per scenario and DP state.
///
/// `row(omega)[i - 1]` is the smallest `p` such that the segment of tour
/// positions `p + 1 ..= i` fits in capacity, or [`MASK_INFEASIBLE`] when
/// position `i`'s demand alone exceeds it.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskMatrix {
    m: usize,
    n: usize,
    data: Vec<u32>,
}

impl MaskMatrix {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, omega: usize) -> &[u32] {
        &self.data[omega * self.n..(omega + 1) * self.n]
    }
}

/// Predecessor matrix of a batched split: row `omega` holds, per DP state,
/// the split point chosen by the recursion (ties toward the largest
/// predecessor), or [`PRED_NONE`].
#[derive(Clone, Debug, PartialEq)]
pub struct PredMatrix {
    m: usize,
    n: usize,
    data: Vec<u32>,
}

impl PredMatrix {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn row(&self, omega: usize) -> &[u32] {
        &self.data[omega * (self.n + 1)..(omega + 1) * (self.n + 1)]
    }
}

/// Timing and shape of one batched split call. Timing fields are
/// informational and excluded from determinism guarantees.
#[derive(Clone, Debug)]
pub struct SplitStats {
    pub wall: Duration,
    pub tiles: usize,
    pub tile_rows: usize,
    pub workers: usize,
}

/// Result of a batched split: per-scenario costs, optional predecessors,
/// and call stats.
#[derive(Debug)]
pub struct SplitBatchResult<C> {
    pub costs: Vec<C>,
    pub pred: Option<PredMatrix>,
    pub stats: SplitStats,
}

/// Result of a single-scenario split: final cost plus the predecessor
/// vector over states `0..=n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarSplit<C> {
    pub cost: C,
    pub pred: Vec<u32>,
}

/// Per-tour precomputation shared by every scenario: `g[p]` folds the
/// depot-out cost and the prefix subtraction for split point `p`, `base[k]`
/// folds the prefix and depot-return cost for state `k + 1`. A transition
/// then costs `f[p] + g[p] (+ penalty) + base[i - 1]`.
struct TourKernel<C> {
    n: usize,
    capacity: u64,
    g: Vec<C>,
    base: Vec<C>,
}

impl<C: Cost> TourKernel<C> {
    fn new(instance: &CvrpInstance<C>, tour: &GiantTour<C>) -> Self {
        let n = tour.n();
        let ret = instance.return_depot();
        let d = tour.dist_prefix();
        let order = tour.order();
        let g = (0..n)
            .map(|p| instance.cost(0, order[p] as usize).sub(d[p]))
            .collect();
        let base = (0..n)
            .map(|k| d[k].add(instance.cost(order[k] as usize, ret)))
            .collect();
        TourKernel { n, capacity: instance.capacity(), g, base }
    }
}

/// The one expression every evaluation path uses for a strict candidate.
/// Keeping it a single function pins the floating-point operation order,
/// which is what makes scalar, masked, and batched results bit-identical.
#[inline]
fn candidate<C: Cost>(f_p: C, g_p: C) -> C {
    f_p.add(g_p)
}

/// Penalized-candidate counterpart of [`candidate`].
#[inline]
fn candidate_pen<C: Cost>(f_p: C, g_p: C, lambda: C, overload: u64) -> C {
    f_p.add(g_p).add(lambda.mul_units(overload))
}

/// Splits one scenario with direct segment-load checks (no masks). The
/// inner loop walks split points from `i - 1` downward, accumulating the
/// segment load, and stops at the first capacity violation; in strict mode
/// that prunes exactly the infeasible candidates.
pub fn split_scalar<C: Cost>(
    instance: &CvrpInstance<C>,
    tour: &GiantTour<C>,
    demands: &[u16],
    mode: SplitMode<C>,
) -> ScalarSplit<C> {
    let n = tour.n();
    assert_eq!(demands.len(), n, "demands row length");
    let kern = TourKernel::new(instance, tour);
    let mut f = vec![C::ZERO; n + 1];
    let mut pred = vec![PRED_NONE; n + 1];
    for i in 1..=n {
        let mut best = C::INFEASIBLE;
        let mut bp = PRED_NONE;
        let mut load = 0u64;
        match mode {
            SplitMode::Strict => {
                for p in (0..i).rev() {
                    load += demands[p] as u64;
                    if load > kern.capacity {
                        break;
                    }
                    let cand = candidate(f[p], kern.g[p]);
                    if cand < best {
                        best = cand;
                        bp = p as u32;
                    }
                }
            }
            SplitMode::Penalized { lambda } => {
                for p in (0..i).rev() {
                    load += demands[p] as u64;
                    let over = load.saturating_sub(kern.capacity);
                    let cand = candidate_pen(f[p], kern.g[p], lambda, over);
                    if cand < best {
                        best = cand;
                        bp = p as u32;
                    }
                }
            }
        }
        let fi = best.add(kern.base[i - 1]);
        f[i] = fi;
        pred[i] = if fi.is_infeasible() { PRED_NONE } else { bp };
    }
    ScalarSplit { cost: f[n], pred }
}

/// Fills one mask row from a demand prefix row via a two-pointer sweep:
/// the earliest feasible split point never moves left as the state grows.
#[inline]
pub(crate) fn mask_row_into(s: &[u64], capacity: u64, out: &mut [u32]) {
    let n = out.len();
    let mut lo = 0usize;
    for i in 1..=n {
        while s[i] - s[lo] > capacity {
            lo += 1;
        }
        out[i - 1] = if lo == i { MASK_INFEASIBLE } else { lo as u32 };
    }
}

/// Computes the earliest-feasible-split-point matrix for a whole prefix-sum
/// matrix.
pub fn compute_masks(prefix: &PrefixSums, capacity: u64) -> MaskMatrix {
    let (m, n) = (prefix.m(), prefix.n());
    let mut data = vec![0u32; m * n];
    data.par_chunks_mut(n)
        .enumerate()
        .for_each(|(omega, out)| mask_row_into(prefix.row(omega), capacity, out));
    MaskMatrix { m, n, data }
}

/// The masked DP over one scenario row. In strict mode the window
/// `[mask[i], i - 1]` already encodes feasibility, so the inner loop is a
/// pure min-plus reduction; in penalized mode the window is `[0, i - 1]`
/// and each candidate carries its overload penalty. Ties go to the largest
/// predecessor. Returns `f[n]`.
#[allow(clippy::needless_range_loop)]
fn dp_row<C: Cost>(
    kern: &TourKernel<C>,
    mode: SplitMode<C>,
    s: &[u64],
    mask: &[u32],
    f: &mut [C],
    mut pred: Option<&mut [u32]>,
) -> C {
    let n = kern.n;
    f[0] = C::ZERO;
    if let Some(pr) = pred.as_deref_mut() {
        pr[0] = PRED_NONE;
    }
    for i in 1..=n {
        let mut best = C::INFEASIBLE;
        let mut bp = PRED_NONE;
        match mode {
            SplitMode::Strict => {
                let lo = mask[i - 1];
                if lo != MASK_INFEASIBLE {
                    for p in lo as usize..i {
                        let cand = candidate(f[p], kern.g[p]);
                        if cand <= best {
                            best = cand;
                            bp = p as u32;
                        }
                    }
                }
            }
            SplitMode::Penalized { lambda } => {
                let si = s[i];
                for p in 0..i {
                    let over = (si - s[p]).saturating_sub(kern.capacity);
                    let cand = candidate_pen(f[p], kern.g[p], lambda, over);
                    if cand <= best {
                        best = cand;
                        bp = p as u32;
                    }
                }
            }
        }
        let fi = best.add(kern.base[i - 1]);
        f[i] = fi;
        if let Some(pr) = pred.as_deref_mut() {
            pr[i] = if fi.is_infeasible() { PRED_NONE } else { bp };
        }
    }
    f[n]
}

/// Splits one scenario using a precomputed mask row (strict mode) or the
/// full transition window (penalized mode). Produces bit-identical results
/// to [`split_scalar`] on consistent inputs.
pub fn split_masked<C: Cost>(
    instance: &CvrpInstance<C>,
    tour: &GiantTour<C>,
    demands: &[u16],
    mask_row: &[u32],
    mode: SplitMode<C>,
) -> ScalarSplit<C> {
    let n = tour.n();
    assert_eq!(demands.len(), n, "demands row length");
    assert_eq!(mask_row.len(), n, "mask row length");
    let kern = TourKernel::new(instance, tour);
    let mut s = vec![0u64; n + 1];
    prefix_row_into(demands, &mut s);
    let mut f = vec![C::ZERO; n + 1];
    let mut pred = vec![PRED_NONE; n + 1];
    let cost = dp_row(&kern, mode, &s, mask_row, &mut f, Some(&mut pred));
    ScalarSplit { cost, pred }
}

fn alloc_exact<T: Clone + Default>(
    len: usize,
    elem_bytes: usize,
    tile_rows: usize,
) -> Result<Vec<T>, SplitError> {
    let mut v: Vec<T> = Vec::new();
    v.try_reserve_exact(len).map_err(|_| SplitError::Allocation {
        bytes: (len as u64) * (elem_bytes as u64),
        tile_rows,
    })?;
    v.resize(len, T::default());
    Ok(v)
}

/// Evaluates one scenario inside a tile: permute the demand row to tour
/// order, prefix-sum it, mask it (strict mode), then run the DP row.
#[inline]
#[allow(clippy::too_many_arguments)]
fn eval_one<C: Cost>(
    kern: &TourKernel<C>,
    mode: SplitMode<C>,
    order: &[u32],
    src_row: &[u16],
    dem: &mut [u16],
    pre: &mut [u64],
    msk: &mut [u32],
    f: &mut [C],
    pred: Option<&mut [u32]>,
) -> C {
    permute_row_into(src_row, order, dem);
    prefix_row_into(dem, pre);
    if matches!(mode, SplitMode::Strict) {
        mask_row_into(pre, kern.capacity, msk);
    }
    dp_row(kern, mode, pre, msk, f, pred)
}

#[allow(clippy::too_many_arguments)]
fn process_chunk<C: Cost>(
    kern: &TourKernel<C>,
    mode: SplitMode<C>,
    order: &[u32],
    costs: &mut [C],
    src: &[u16],
    dem: &mut [u16],
    pre: &mut [u64],
    msk: &mut [u32],
    mut pred: Option<&mut [u32]>,
) {
    let n = kern.n;
    let mut f = vec![C::ZERO; n + 1];
    for (k, c) in costs.iter_mut().enumerate() {
        let pred_row = pred
            .as_deref_mut()
            .map(|p| &mut p[k * (n + 1)..(k + 1) * (n + 1)]);
        *c = eval_one(
            kern,
            mode,
            order,
            &src[k * n..(k + 1) * n],
            &mut dem[k * n..(k + 1) * n],
            &mut pre[k * (n + 1)..(k + 1) * (n + 1)],
            &mut msk[k * n..(k + 1) * n],
            &mut f,
            pred_row,
        );
    }
}

/// Splits every scenario of a set against one giant tour.
///
/// Scenarios are processed in tiles of `options.tile_rows` rows; working
/// buffers are allocated once per call and reused across tiles, so peak
/// memory scales with the tile, not the batch. Within a tile scenarios are
/// evaluated in parallel. Costs and predecessors are bit-identical across
/// any tile size or worker count because each scenario's evaluation is a
/// pure function of the scenario row and the tour.
pub fn split_batch<C: Cost>(
    instance: &CvrpInstance<C>,
    tour: &GiantTour<C>,
    set: &ScenarioSet,
    mode: SplitMode<C>,
    options: &SplitOptions,
) -> Result<SplitBatchResult<C>, SplitError> {
    let n = tour.n();
    if set.n() != n {
        return Err(SplitError::DimensionMismatch { got: set.n(), expected: n });
    }
    let m = set.m();
    let start = Instant::now();
    let kern = TourKernel::new(instance, tour);
    let order = tour.order();
    let tile_rows = options.tile_rows.max(1).min(m);

    let mut costs: Vec<C> = Vec::new();
    costs
        .try_reserve_exact(m)
        .map_err(|_| SplitError::Allocation {
            bytes: (m * std::mem::size_of::<C>()) as u64,
            tile_rows,
        })?;
    costs.resize(m, C::ZERO);
    let mut pred: Option<PredMatrix> = if options.record_pred {
        let data = alloc_exact::<u32>(m * (n + 1), 4, tile_rows)?;
        Some(PredMatrix { m, n, data })
    } else {
        None
    };

    let mut dem_buf = alloc_exact::<u16>(tile_rows * n, 2, tile_rows)?;
    let mut pre_buf = alloc_exact::<u64>(tile_rows * (n + 1), 8, tile_rows)?;
    let mut msk_buf = alloc_exact::<u32>(tile_rows * n, 4, tile_rows)?;

    let mut tiles = 0usize;
    let mut t0 = 0usize;
    while t0 < m {
        let t1 = (t0 + tile_rows).min(m);
        let rows = t1 - t0;
        tiles += 1;
        let src = &set.demands()[t0 * n..t1 * n];
        let cost_slice = &mut costs[t0..t1];
        let dem = &mut dem_buf[..rows * n];
        let pre = &mut pre_buf[..rows * (n + 1)];
        let msk = &mut msk_buf[..rows * n];
        match pred.as_mut() {
            Some(pm) => {
                let pred_slice = &mut pm.data[t0 * (n + 1)..t1 * (n + 1)];
                cost_slice
                    .par_chunks_mut(PAR_CHUNK_ROWS)
                    .zip(src.par_chunks(PAR_CHUNK_ROWS * n))
                    .zip(dem.par_chunks_mut(PAR_CHUNK_ROWS * n))
                    .zip(pre.par_chunks_mut(PAR_CHUNK_ROWS * (n + 1)))
                    .zip(msk.par_chunks_mut(PAR_CHUNK_ROWS * n))
                    .zip(pred_slice.par_chunks_mut(PAR_CHUNK_ROWS * (n + 1)))
                    .for_each(|(((((c, s), d), pr), mk), pd)| {
                        process_chunk(&kern, mode, order, c, s, d, pr, mk, Some(pd));
                    });
            }
            None => {
                cost_slice
                    .par_chunks_mut(PAR_CHUNK_ROWS)
                    .zip(src.par_chunks(PAR_CHUNK_ROWS * n))
                    .zip(dem.par_chunks_mut(PAR_CHUNK_ROWS * n))
                    .zip(pre.par_chunks_mut(PAR_CHUNK_ROWS * (n + 1)))
                    .zip(msk.par_chunks_mut(PAR_CHUNK_ROWS * n))
                    .for_each(|((((c, s), d), pr), mk)| {
                        process_chunk(&kern, mode, order, c, s, d, pr, mk, None);
                    });
            }
        }
        t0 = t1;
    }

    let stats = SplitStats {
        wall: start.elapsed(),
        tiles,
        tile_rows,
        workers: rayon::current_num_threads(),
    };
    Ok(SplitBatchResult { costs, pred, stats })
}

/// Walks a predecessor row back from the final state and returns the
/// routes in visiting order, each a list of customer ids.
pub fn recover_routes<C: Cost>(
    tour: &GiantTour<C>,
    pred_row: &[u32],
) -> Result<Vec<Vec<u32>>, SplitError> {
    let n = tour.n();
    assert_eq!(pred_row.len(), n + 1, "predecessor row length");
    if pred_row[n] == PRED_NONE {
        return Err(SplitError::InfeasibleSplit);
    }
    let mut routes = Vec::new();
    let mut i = n;
    while i > 0 {
        let p = pred_row[i];
        if p == PRED_NONE || p as usize >= i {
            return Err(SplitError::CorruptPredecessors { state: i });
        }
        routes.push(tour.order()[p as usize..i].to_vec());
        i = p as usize;
    }
    routes.reverse();
    Ok(routes)
}

/// Brute-force split oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct BruteForceSplit<C> {
    pub cost: C,
    /// Optimal routes, empty when no feasible partition exists. Ties are
    /// broken exactly like the DP: among equal-cost partitions the one
    /// whose cut positions, read from the tour's end, are lexicographically
    /// largest.
    pub routes: Vec<Vec<u32>>,
}

/// Enumerates every contiguous partition of the tour (there are
/// `2^(n-1)`), pricing routes arc by arc straight from the cost matrix.
/// Intentionally shares no code with the DP paths; limited to
/// [`BRUTE_FORCE_MAX_N`] customers.
pub fn brute_force_split<C: Cost>(
    instance: &CvrpInstance<C>,
    tour: &GiantTour<C>,
    demands: &[u16],
    mode: SplitMode<C>,
) -> Result<BruteForceSplit<C>, SplitError> {
    let n = tour.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(SplitError::OracleTooLarge { n, max: BRUTE_FORCE_MAX_N });
    }
    assert_eq!(demands.len(), n, "demands row length");
    let order = tour.order();
    let ret = instance.return_depot();
    let capacity = instance.capacity();

    let mut best: Option<(C, Vec<usize>)> = None;
    for bits in 0u32..(1u32 << (n - 1)) {
        let mut cost = C::ZERO;
        let mut cuts: Vec<usize> = Vec::new();
        let mut feasible = true;
        let mut s = 0usize;
        for p in 0..n {
            let route_ends = p == n - 1 || bits & (1 << p) != 0;
            if !route_ends {
                continue;
            }
            let load: u64 = demands[s..=p].iter().map(|&q| q as u64).sum();
            if matches!(mode, SplitMode::Strict) && load > capacity {
                feasible = false;
                break;
            }
            let mut rc = instance.cost(0, order[s] as usize);
            for k in s..p {
                rc = rc.add(instance.cost(order[k] as usize, order[k + 1] as usize));
            }
            rc = rc.add(instance.cost(order[p] as usize, ret));
            if let SplitMode::Penalized { lambda } = mode {
                rc = rc.add(lambda.mul_units(load.saturating_sub(capacity)));
            }
            cost = cost.add(rc);
            if p < n - 1 {
                cuts.push(p + 1);
            }
            s = p + 1;
        }
        if !feasible {
            continue;
        }
        let better = match &best {
            None => true,
            Some((bc, bcuts)) => {
                cost < *bc || (cost == *bc && cuts.iter().rev().gt(bcuts.iter().rev()))
            }
        };
        if better {
            best = Some((cost, cuts));
        }
    }

    Ok(match best {
        None => BruteForceSplit { cost: C::INFEASIBLE, routes: Vec::new() },
        Some((cost, cuts)) => {
            let mut bounds = Vec::with_capacity(cuts.len() + 2);
            bounds.push(0);
            bounds.extend(cuts);
            bounds.push(n);
            let routes = bounds
                .windows(2)
                .map(|w| order[w[0]..w[1]].to_vec())
                .collect();
            BruteForceSplit { cost, routes }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{demand_prefix_sums, permute_to_tour_order, DemandKind, DemandModel};
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn line_instance(n: usize, capacity: u64) -> CvrpInstance<f64> {
        let mut coords = vec![[0.0, 0.0]];
        coords.extend((1..=n).map(|i| [i as f64, 0.0]));
        CvrpInstance::from_coords("line", &coords, capacity).unwrap()
    }

    /// Five customers at unit spacing on a line; the declared geometry for
    /// reproducing the two published example scenarios.
    fn example_instance() -> CvrpInstance<f64> {
        line_instance(5, 17)
    }

    fn fixed_rows_set(rows: &[&[u16]], n: usize) -> ScenarioSet {
        let demands: Vec<u16> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        ScenarioSet::from_raw(
            rows.len(),
            n,
            demands,
            DemandModel::new(DemandKind::Fixed, vec![0; n], 0),
        )
    }

    #[test]
    fn example_scenario_1_splits_into_three_routes() {
        let inst = example_instance();
        let tour = GiantTour::new(&inst, &[1, 2, 4, 3, 5]).unwrap();
        // demands listed in tour-visit order
        let res = split_scalar(&inst, &tour, &[14, 15, 8, 1, 8], SplitMode::Strict);
        let routes = recover_routes(&tour, &res.pred).unwrap();
        assert_eq!(routes, vec![vec![1], vec![2], vec![4, 3, 5]]);
        assert_eq!(res.cost, 18.0);
    }

    #[test]
    fn example_scenario_m_splits_into_two_routes() {
        let inst = example_instance();
        let tour = GiantTour::new(&inst, &[1, 2, 4, 3, 5]).unwrap();
        let res = split_scalar(&inst, &tour, &[8, 1, 5, 7, 2], SplitMode::Strict);
        let routes = recover_routes(&tour, &res.pred).unwrap();
        assert_eq!(routes, vec![vec![1], vec![2, 4, 3, 5]]);
        assert_eq!(res.cost, 14.0);
    }

    #[test]
    fn example_pair_as_batch_recovers_both_partitions() {
        let inst = example_instance();
        let tour = GiantTour::new(&inst, &[1, 2, 4, 3, 5]).unwrap();
        // rows stored by customer id; the tour permutation recovers the
        // visit-order vectors [14,15,8,1,8] and [8,1,5,7,2]
        let set = fixed_rows_set(&[&[14, 15, 1, 8, 8], &[8, 1, 7, 5, 2]], 5);
        let opts = SplitOptions { record_pred: true, ..Default::default() };
        let res = split_batch(&inst, &tour, &set, SplitMode::Strict, &opts).unwrap();
        let pred = res.pred.unwrap();
        assert_eq!(
            recover_routes(&tour, pred.row(0)).unwrap(),
            vec![vec![1], vec![2], vec![4, 3, 5]]
        );
        assert_eq!(
            recover_routes(&tour, pred.row(1)).unwrap(),
            vec![vec![1], vec![2, 4, 3, 5]]
        );
        assert_eq!(res.costs, vec![18.0, 14.0]);
    }

    #[test]
    fn worked_example_mask_vectors() {
        let mut s = [0u64; 6];
        let mut out = [0u32; 5];
        prefix_row_into(&[14, 15, 8, 1, 8], &mut s);
        mask_row_into(&s, 17, &mut out);
        assert_eq!(out, [0, 1, 2, 2, 2]);

        prefix_row_into(&[8, 1, 5, 7, 2], &mut s);
        mask_row_into(&s, 17, &mut out);
        assert_eq!(out, [0, 0, 0, 1, 1]);
    }

    #[test]
    fn oversized_single_demand_marks_mask_infeasible() {
        let mut s = [0u64; 4];
        let mut out = [0u32; 3];
        prefix_row_into(&[5, 30, 5], &mut s);
        mask_row_into(&s, 17, &mut out);
        assert_eq!(out, [0, MASK_INFEASIBLE, 2]);
    }

    #[test]
    fn collinear_split_prefers_single_detour() {
        let inst = line_instance(3, 10);
        let tour = GiantTour::identity(&inst);
        let res = split_scalar(&inst, &tour, &[4, 5, 4], SplitMode::Strict);
        assert_eq!(res.cost, 8.0);
        let routes = recover_routes(&tour, &res.pred).unwrap();
        assert_eq!(routes, vec![vec![1], vec![2, 3]]);

        let oracle = brute_force_split(&inst, &tour, &[4, 5, 4], SplitMode::Strict).unwrap();
        assert_eq!(oracle.cost, 8.0);
        assert_eq!(oracle.routes, routes);
    }

    #[test]
    fn strict_sentinel_when_any_demand_exceeds_capacity() {
        let inst = line_instance(3, 10);
        let tour = GiantTour::identity(&inst);
        let res = split_scalar(&inst, &tour, &[4, 11, 4], SplitMode::Strict);
        assert!(res.cost.is_infeasible());
        assert!(matches!(
            recover_routes(&tour, &res.pred),
            Err(SplitError::InfeasibleSplit)
        ));
        let oracle = brute_force_split(&inst, &tour, &[4, 11, 4], SplitMode::Strict).unwrap();
        assert!(oracle.cost.is_infeasible());
        assert!(oracle.routes.is_empty());
    }

    #[test]
    fn penalized_with_zero_lambda_matches_strict_when_capacity_never_binds() {
        let inst = line_instance(4, 20);
        let tour = GiantTour::identity(&inst);
        let demands = [3, 4, 2, 5];
        let strict = split_scalar(&inst, &tour, &demands, SplitMode::Strict);
        let pen = split_scalar(&inst, &tour, &demands, SplitMode::Penalized { lambda: 0.0 });
        assert_eq!(pen.cost, strict.cost);
        assert_eq!(pen.pred, strict.pred);
    }

    #[test]
    fn penalized_overload_is_charged_per_unit() {
        let inst = line_instance(1, 3);
        let tour = GiantTour::identity(&inst);
        let res = split_scalar(&inst, &tour, &[8], SplitMode::Penalized { lambda: 2.5 });
        assert_eq!(res.cost, 2.0 + 2.5 * 5.0);
    }

    #[test]
    fn huge_lambda_reproduces_strict_routes() {
        let inst = line_instance(6, 7);
        let tour = GiantTour::new(&inst, &[3, 1, 6, 2, 5, 4]).unwrap();
        let demands = [2, 3, 1, 4, 2, 3];
        let strict = split_scalar(&inst, &tour, &demands, SplitMode::Strict);
        let pen = split_scalar(
            &inst,
            &tour,
            &demands,
            SplitMode::Penalized { lambda: 1.0e6 },
        );
        assert_eq!(pen.cost, strict.cost);
        assert_eq!(pen.pred, strict.pred);
    }

    #[test]
    fn ties_break_toward_largest_predecessor() {
        let coords = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0]];
        let inst = CvrpInstance::<f64>::from_coords("co-located", &coords, 3).unwrap();
        let tour = GiantTour::identity(&inst);
        let res = split_scalar(&inst, &tour, &[1, 1, 1, 1], SplitMode::Strict);
        assert_eq!(res.cost, 4.0);
        assert_eq!(res.pred[4], 3);
        let routes = recover_routes(&tour, &res.pred).unwrap();
        assert_eq!(routes, vec![vec![1, 2, 3], vec![4]]);

        let oracle = brute_force_split(&inst, &tour, &[1, 1, 1, 1], SplitMode::Strict).unwrap();
        assert_eq!(oracle.routes, routes);
    }

    #[test]
    fn corrupt_predecessor_rows_are_rejected() {
        let inst = line_instance(3, 10);
        let tour = GiantTour::identity(&inst);
        let err = recover_routes(&tour, &[PRED_NONE, 0, 3, 2]).unwrap_err();
        assert!(matches!(err, SplitError::CorruptPredecessors { state: 2 }));
    }

    #[test]
    fn oracle_refuses_large_instances() {
        let inst = line_instance(21, 100);
        let tour = GiantTour::identity(&inst);
        let err = brute_force_split(&inst, &tour, &[1; 21], SplitMode::Strict).unwrap_err();
        assert!(matches!(err, SplitError::OracleTooLarge { n: 21, max: 20 }));
    }

    #[test]
    fn allocation_error_advises_smaller_tiles() {
        let e = SplitError::Allocation { bytes: 1 << 40, tile_rows: 65_536 };
        assert!(e.to_string().contains("tile_rows"));
    }

    #[test]
    fn batch_dimension_mismatch_is_reported() {
        let inst = line_instance(4, 10);
        let tour = GiantTour::identity(&inst);
        let set = DemandModel::new(DemandKind::Fixed, vec![1, 2, 3], 0)
            .sample(2)
            .unwrap();
        assert!(matches!(
            split_batch(&inst, &tour, &set, SplitMode::Strict, &SplitOptions::default()),
            Err(SplitError::DimensionMismatch { got: 3, expected: 4 })
        ));
    }

    fn random_geometry(
        rng: &mut ChaCha8Rng,
        n: usize,
    ) -> (CvrpInstance<f64>, CvrpInstance<i64>) {
        let coords: Vec<[f64; 2]> = (0..=n)
            .map(|_| [rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)])
            .collect();
        let capacity = rng.random_range(8..40);
        (
            CvrpInstance::from_coords("rf", &coords, capacity).unwrap(),
            CvrpInstance::from_coords("ri", &coords, capacity).unwrap(),
        )
    }

    fn random_order(rng: &mut ChaCha8Rng, n: usize) -> Vec<u32> {
        let mut order: Vec<u32> = (1..=n as u32).collect();
        order.shuffle(rng);
        order
    }

    #[test]
    fn all_paths_agree_on_random_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for case in 0..120 {
            let n = rng.random_range(2..=10);
            let (inst_f, inst_i) = random_geometry(&mut rng, n);
            let order = random_order(&mut rng, n);
            let demands: Vec<u16> = (0..n).map(|_| rng.random_range(0..25)).collect();
            let mode_f = if case % 3 == 0 {
                SplitMode::Penalized { lambda: 3.5 }
            } else {
                SplitMode::Strict
            };

            let tour_f = GiantTour::new(&inst_f, &order).unwrap();
            let scal = split_scalar(&inst_f, &tour_f, &demands, mode_f);
            let mut s = vec![0u64; n + 1];
            prefix_row_into(&demands, &mut s);
            let mut mask = vec![0u32; n];
            mask_row_into(&s, inst_f.capacity(), &mut mask);
            let mskd = split_masked(&inst_f, &tour_f, &demands, &mask, mode_f);
            assert_eq!(scal, mskd, "case {case}: scalar vs masked");

            let oracle = brute_force_split(&inst_f, &tour_f, &demands, mode_f).unwrap();
            if oracle.cost.is_infeasible() {
                assert!(scal.cost.is_infeasible(), "case {case}");
            } else {
                let rel = (scal.cost - oracle.cost).abs() / oracle.cost.max(1.0);
                assert!(rel <= 1e-9, "case {case}: {} vs {}", scal.cost, oracle.cost);
                assert_eq!(
                    recover_routes(&tour_f, &scal.pred).unwrap(),
                    oracle.routes,
                    "case {case}"
                );
            }

            let tour_i = GiantTour::new(&inst_i, &order).unwrap();
            let mode_i = match mode_f {
                SplitMode::Strict => SplitMode::Strict,
                SplitMode::Penalized { .. } => SplitMode::Penalized { lambda: 4i64 },
            };
            let scal_i = split_scalar(&inst_i, &tour_i, &demands, mode_i);
            let oracle_i = brute_force_split(&inst_i, &tour_i, &demands, mode_i).unwrap();
            assert_eq!(scal_i.cost, oracle_i.cost, "case {case}: integer cost");
            if !oracle_i.cost.is_infeasible() {
                assert_eq!(
                    recover_routes(&tour_i, &scal_i.pred).unwrap(),
                    oracle_i.routes,
                    "case {case}: integer routes"
                );
            }
        }
    }

    #[test]
    fn batch_matches_scalar_and_is_tile_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 12;
        let (inst, _) = random_geometry(&mut rng, n);
        let tour = GiantTour::new(&inst, &random_order(&mut rng, n)).unwrap();
        let model = DemandModel::new(
            DemandKind::UniformInteger { lo_frac: 0.0, hi_frac: 2.0 },
            vec![6; n],
            99,
        );
        let set = model.sample(257).unwrap();

        let opts = SplitOptions { record_pred: true, tile_rows: DEFAULT_TILE_ROWS };
        let base = split_batch(&inst, &tour, &set, SplitMode::Strict, &opts).unwrap();
        assert_eq!(base.stats.tiles, 1);

        for omega in [0usize, 17, 256] {
            let scal = split_scalar(&inst, &tour, tour_row(&set, &tour, omega), SplitMode::Strict);
            assert_eq!(base.costs[omega], scal.cost);
            assert_eq!(base.pred.as_ref().unwrap().row(omega), &scal.pred[..]);
        }

        for tile_rows in [1usize, 7, 64] {
            let opts = SplitOptions { record_pred: true, tile_rows };
            let res = split_batch(&inst, &tour, &set, SplitMode::Strict, &opts).unwrap();
            assert_eq!(res.costs, base.costs, "tile_rows {tile_rows}");
            assert_eq!(res.pred.unwrap(), *base.pred.as_ref().unwrap());
            assert_eq!(res.stats.tiles, 257usize.div_ceil(tile_rows));
        }
    }

    /// Tour-ordered demand row for one scenario, leaked into a slice for
    /// test convenience.
    fn tour_row<'a>(set: &ScenarioSet, tour: &GiantTour<f64>, omega: usize) -> &'a [u16] {
        let mut dem = vec![0u16; set.n()];
        permute_row_into(set.row(omega), tour.order(), &mut dem);
        Box::leak(dem.into_boxed_slice())
    }

    #[test]
    fn batch_is_worker_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 9;
        let (inst, _) = random_geometry(&mut rng, n);
        let tour = GiantTour::identity(&inst);
        let model = DemandModel::new(
            DemandKind::TruncatedNormal { cv: 0.4 },
            vec![9; n],
            7,
        );
        let set = model.sample(1000).unwrap();
        let run = |workers: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .unwrap();
            pool.install(|| {
                split_batch(&inst, &tour, &set, SplitMode::Strict, &SplitOptions::default())
                    .unwrap()
                    .costs
            })
        };
        let one = run(1);
        assert_eq!(one, run(2));
        assert_eq!(one, run(4));
    }

    #[test]
    fn compute_masks_matches_row_kernel() {
        let inst = line_instance(6, 14);
        let tour = GiantTour::identity(&inst);
        let model = DemandModel::new(
            DemandKind::UniformInteger { lo_frac: 0.0, hi_frac: 3.0 },
            vec![5; 6],
            21,
        );
        let set = model.sample(50).unwrap();
        let ordered = permute_to_tour_order(&set, &tour).unwrap();
        let prefix = demand_prefix_sums(&ordered);
        let masks = compute_masks(&prefix, inst.capacity());
        assert_eq!((masks.m(), masks.n()), (50, 6));
        let mut row = vec![0u32; 6];
        for omega in 0..50 {
            mask_row_into(prefix.row(omega), inst.capacity(), &mut row);
            assert_eq!(masks.row(omega), &row[..]);
        }
    }

    proptest! {
        #[test]
        fn masks_match_definition_and_are_monotone(
            demands in proptest::collection::vec(0u16..40, 1..30),
            capacity in 1u64..60,
        ) {
            let n = demands.len();
            let mut s = vec![0u64; n + 1];
            prefix_row_into(&demands, &mut s);
            let mut mask = vec![0u32; n];
            mask_row_into(&s, capacity, &mut mask);
            let mut prev_finite = 0u32;
            for i in 1..=n {
                let direct = (0..i)
                    .find(|&p| s[i] - s[p] <= capacity)
                    .map(|p| p as u32)
                    .unwrap_or(MASK_INFEASIBLE);
                prop_assert_eq!(mask[i - 1], direct);
                if mask[i - 1] != MASK_INFEASIBLE {
                    prop_assert!(mask[i - 1] <= (i - 1) as u32);
                    prop_assert!(mask[i - 1] >= prev_finite);
                    prev_finite = mask[i - 1];
                }
            }
        }

        #[test]
        fn penalized_cost_is_monotone_in_lambda(
            demands in proptest::collection::vec(0u16..30, 4..10),
            (l1, l2) in (0.0f64..5.0, 0.0f64..5.0),
        ) {
            let n = demands.len();
            let inst = line_instance(n, 12);
            let tour = GiantTour::identity(&inst);
            let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
            let a = split_scalar(&inst, &tour, &demands, SplitMode::Penalized { lambda: lo });
            let b = split_scalar(&inst, &tour, &demands, SplitMode::Penalized { lambda: hi });
            prop_assert!(a.cost <= b.cost + 1e-9);
        }

        #[test]
        fn routes_partition_the_tour(
            demands in proptest::collection::vec(0u16..12, 2..12),
            seed in 0u64..300,
        ) {
            let n = demands.len();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (inst, _) = random_geometry(&mut rng, n);
            let tour = GiantTour::new(&inst, &random_order(&mut rng, n)).unwrap();
            let res = split_scalar(&inst, &tour, &demands, SplitMode::Strict);
            if !res.cost.is_infeasible() {
                let routes = recover_routes(&tour, &res.pred).unwrap();
                let flat: Vec<u32> = routes.iter().flatten().copied().collect();
                prop_assert_eq!(flat, tour.order().to_vec());
                let mut pos = 0usize;
                for route in &routes {
                    let load: u64 = route
                        .iter()
                        .map(|_| { let q = demands[pos] as u64; pos += 1; q })
                        .sum();
                    prop_assert!(load <= inst.capacity());
                }
            }
        }
    }
}
