//! Seeded evolutionary search over giant tours.
//!
//! A compact population-based search in permutation space: tournament
//! parent selection, order crossover, optional mutation, a local-search
//! education step, and truncation survival with an elite band. Fitness is
//! the penalized mean split cost over the training scenarios, evaluated by
//! the batched kernel, so one fitness call amortizes the whole train set.
//!
//! Determinism: all randomness flows from a single ChaCha stream seeded by
//! `SearchConfig::seed`, and fitness evaluation is parallelism-invariant,
//! so a generation-budgeted run is reproducible end to end. Wall-clock
//! budgets keep the same decision sequence but naturally cut it at a
//! machine-dependent point.
//!
//! Local search screens moves on a fixed scenario subsample for speed;
//! every individual entering the population is re-evaluated on the full
//! train set, so stored fitness always reflects the real objective.

use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cost::Cost;
use crate::instance::{CvrpInstance, GiantTour, TourError};
use crate::saa::estimate_costs;
use crate::scenario::ScenarioSet;
use crate::split::{split_batch, SplitError, SplitMode, SplitOptions};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Tour(#[from] TourError),
}

/// Budget of one [`solve`] call. Generation budgets give bit-reproducible
/// runs; wall-clock budgets give anytime behavior for timing studies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SearchBudget {
    Generations(u32),
    WallClock(Duration),
}

#[derive(Clone, Debug)]
pub struct SearchConfig<C> {
    pub population_size: usize,
    pub offspring_per_generation: usize,
    /// Fraction of the population kept unconditionally each generation;
    /// the rest of the survivor slots skip duplicate tours.
    pub elite_fraction: f64,
    /// Probability that an offspring receives one random relocate or swap
    /// before education.
    pub mutation_prob: f64,
    /// Penalty per unit of capacity overload; `None` derives
    /// 10x the mean arc cost of the instance.
    pub lambda: Option<C>,
    /// Scenario count for local-search screening (the first scenarios of
    /// the train set); 0 or anything >= m uses the full set.
    pub ls_subsample: usize,
    /// Local-search accepted-move cap, in multiples of n.
    pub ls_move_cap_factor: usize,
    pub budget: SearchBudget,
    pub seed: u64,
}

impl<C> Default for SearchConfig<C> {
    fn default() -> Self {
        SearchConfig {
            population_size: 25,
            offspring_per_generation: 40,
            elite_fraction: 0.4,
            mutation_prob: 0.3,
            lambda: None,
            ls_subsample: 1024,
            ls_move_cap_factor: 10,
            budget: SearchBudget::Generations(50),
            seed: 0,
        }
    }
}

impl<C: Cost> SearchConfig<C> {
    fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: String| Err(SearchError::InvalidConfig(m));
        if self.population_size < 2 {
            return bad(format!("population_size {} < 2", self.population_size));
        }
        if self.offspring_per_generation == 0 {
            return bad("offspring_per_generation is 0".into());
        }
        for (name, p) in [
            ("elite_fraction", self.elite_fraction),
            ("mutation_prob", self.mutation_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} {p} outside [0, 1]"));
            }
        }
        if let Some(l) = self.lambda {
            if l < C::ZERO {
                return bad(format!("lambda {l} is negative"));
            }
        }
        Ok(())
    }
}

/// A population member: tour, full-train penalized fitness, and the
/// scenario count behind that fitness.
#[derive(Clone, Debug)]
pub struct Individual<C> {
    pub tour: GiantTour<C>,
    pub fitness: f64,
    pub eval_m: usize,
}

/// One anytime-trace entry, logged whenever the best fitness improves.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct TracePoint {
    pub elapsed_ms: u64,
    pub evaluations: u64,
    pub best_penalized_cost: f64,
    pub best_strict_cost: f64,
}

#[derive(Clone, Debug, Default)]
pub struct SearchTrace {
    pub points: Vec<TracePoint>,
}

impl SearchTrace {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        for p in &self.points {
            out.serialize(p)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug)]
pub struct SearchOutcome<C> {
    pub best: Individual<C>,
    pub trace: SearchTrace,
    /// Penalized fitness evaluations performed (full-set and subset).
    pub evaluations: u64,
    pub generations: u32,
    /// The penalty actually used (resolved from the config default).
    pub lambda: C,
}

/// 10x the mean arc cost of the instance, the default overload penalty.
pub fn default_lambda<C: Cost>(instance: &CvrpInstance<C>) -> C {
    let dim = instance.cost_matrix().dim();
    let mut sum = 0.0;
    let mut count = 0u64;
    for a in 0..dim {
        for b in 0..dim {
            if a != b {
                sum += instance.cost(a, b).to_f64();
                count += 1;
            }
        }
    }
    C::from_distance(10.0 * sum / count as f64)
}

/// Penalized mean split cost of one tour over a scenario set.
fn penalized_mean<C: Cost>(
    instance: &CvrpInstance<C>,
    tour: &GiantTour<C>,
    set: &ScenarioSet,
    lambda: C,
) -> Result<f64, SearchError> {
    let res = split_batch(
        instance,
        tour,
        set,
        SplitMode::Penalized { lambda },
        &SplitOptions::default(),
    )?;
    Ok(estimate_costs(&res.costs)
        .expect("penalized costs are finite")
        .mean)
}

/// Order crossover with an explicit slice `[i, j]` (0-based, inclusive):
/// the child keeps `a[i..=j]` in place and fills the remaining positions
/// with the other customers in the cyclic order they appear in `b`,
/// starting after the slice.
pub fn crossover_ox_with_slice(a: &[u32], b: &[u32], i: usize, j: usize) -> Vec<u32> {
    let n = a.len();
    debug_assert_eq!(b.len(), n);
    debug_assert!(i <= j && j < n);
    let mut child = vec![0u32; n];
    let mut taken = vec![false; n + 1];
    for k in i..=j {
        child[k] = a[k];
        taken[a[k] as usize] = true;
    }
    let mut write = (j + 1) % n;
    for k in 0..n {
        let v = b[(j + 1 + k) % n];
        if !taken[v as usize] {
            child[write] = v;
            write = (write + 1) % n;
        }
    }
    child
}

/// Order crossover with a random slice.
pub fn crossover_ox<R: Rng>(a: &[u32], b: &[u32], rng: &mut R) -> Vec<u32> {
    let n = a.len();
    let x = rng.random_range(0..n);
    let y = rng.random_range(0..n);
    crossover_ox_with_slice(a, b, x.min(y), x.max(y))
}

#[derive(Clone, Copy, Debug)]
enum Move {
    /// Remove the customer at the first position and reinsert it at the
    /// second.
    Relocate(usize, usize),
    Swap(usize, usize),
    /// Reverse the segment between the two positions, inclusive.
    TwoOpt(usize, usize),
}

fn apply_move(order: &mut Vec<u32>, mv: Move) {
    match mv {
        Move::Relocate(from, to) => {
            let v = order.remove(from);
            order.insert(to, v);
        }
        Move::Swap(x, y) => order.swap(x, y),
        Move::TwoOpt(x, y) => order[x..=y].reverse(),
    }
}

fn all_moves(n: usize) -> Vec<Move> {
    let mut moves = Vec::new();
    for x in 0..n {
        for y in 0..n {
            if x != y {
                moves.push(Move::Relocate(x, y));
            }
            if x < y {
                moves.push(Move::Swap(x, y));
                if y > x + 1 {
                    moves.push(Move::TwoOpt(x, y));
                }
            }
        }
    }
    moves
}

/// First-improvement local search over relocate/swap/2-opt on the giant
/// tour, screening candidates on `subset`. The candidate order is
/// reshuffled after every accepted move; the sweep stops at a local
/// optimum (no candidate improves) or after `move_cap` accepted moves.
/// Returns the improved tour, its subset fitness, and the number of
/// fitness evaluations spent.
pub fn local_search<C: Cost, R: Rng>(
    instance: &CvrpInstance<C>,
    tour: &GiantTour<C>,
    subset: &ScenarioSet,
    lambda: C,
    rng: &mut R,
    move_cap: usize,
) -> Result<(GiantTour<C>, f64, u64), SearchError> {
    let n = tour.n();
    let mut current = tour.order().to_vec();
    let mut fit = penalized_mean(instance, tour, subset, lambda)?;
    let mut evals = 1u64;
    if move_cap == 0 || n < 2 {
        return Ok((tour.clone(), fit, evals));
    }
    let mut moves = all_moves(n);
    let mut accepted = 0usize;
    'sweeps: loop {
        moves.shuffle(rng);
        for &mv in &moves {
            let mut cand = current.clone();
            apply_move(&mut cand, mv);
            let cand_tour = GiantTour::new(instance, &cand)?;
            let cand_fit = penalized_mean(instance, &cand_tour, subset, lambda)?;
            evals += 1;
            if cand_fit < fit {
                current = cand;
                fit = cand_fit;
                accepted += 1;
                if accepted >= move_cap {
                    break 'sweeps;
                }
                continue 'sweeps;
            }
        }
        break;
    }
    Ok((GiantTour::new(instance, &current)?, fit, evals))
}

struct SearchState<'a, C: Cost> {
    instance: &'a CvrpInstance<C>,
    train: &'a ScenarioSet,
    subset: ScenarioSet,
    lambda: C,
    start: Instant,
    evaluations: u64,
    best: Option<Individual<C>>,
    trace: SearchTrace,
}

impl<'a, C: Cost> SearchState<'a, C> {
    /// Full-train evaluation; updates the incumbent and the anytime trace.
    fn admit(&mut self, tour: GiantTour<C>) -> Result<Individual<C>, SearchError> {
        let fitness = penalized_mean(self.instance, &tour, self.train, self.lambda)?;
        self.evaluations += 1;
        let ind = Individual { tour, fitness, eval_m: self.train.m() };
        let improved = match &self.best {
            None => true,
            Some(b) => ind.fitness < b.fitness,
        };
        if improved {
            let strict = split_batch(
                self.instance,
                &ind.tour,
                self.train,
                SplitMode::Strict,
                &SplitOptions::default(),
            )?;
            let best_strict_cost = estimate_costs(&strict.costs)
                .map(|e| e.mean)
                .unwrap_or(f64::INFINITY);
            self.best = Some(ind.clone());
            self.trace.points.push(TracePoint {
                elapsed_ms: self.start.elapsed().as_millis() as u64,
                evaluations: self.evaluations,
                best_penalized_cost: ind.fitness,
                best_strict_cost,
            });
        }
        Ok(ind)
    }

    fn out_of_time(&self, budget: SearchBudget) -> bool {
        match budget {
            SearchBudget::Generations(_) => false,
            SearchBudget::WallClock(d) => self.start.elapsed() >= d,
        }
    }
}

fn tournament<'p, C: Cost, R: Rng>(pop: &'p [Individual<C>], rng: &mut R) -> &'p Individual<C> {
    let i = rng.random_range(0..pop.len());
    let j = rng.random_range(0..pop.len());
    if pop[i].fitness <= pop[j].fitness {
        &pop[i]
    } else {
        &pop[j]
    }
}

/// Sorts by fitness and truncates to the population size. The best
/// `elite_fraction` share survives unconditionally; the remaining slots
/// skip tours already kept, then backfill with duplicates if the
/// population would otherwise shrink below size.
fn select_survivors<C: Cost>(
    pop: &mut Vec<Individual<C>>,
    population_size: usize,
    elite_fraction: f64,
) {
    pop.sort_by(|a, b| a.fitness.total_cmp(&b.fitness));
    let elite = ((elite_fraction * population_size as f64).ceil() as usize)
        .clamp(1, population_size);
    let mut kept: Vec<Individual<C>> = Vec::with_capacity(population_size);
    let mut passed_over: Vec<Individual<C>> = Vec::new();
    for ind in pop.drain(..) {
        if kept.len() >= population_size {
            break;
        }
        let duplicate = kept.iter().any(|k| k.tour.order() == ind.tour.order());
        if kept.len() < elite || !duplicate {
            kept.push(ind);
        } else {
            passed_over.push(ind);
        }
    }
    for ind in passed_over {
        if kept.len() >= population_size {
            break;
        }
        kept.push(ind);
    }
    kept.sort_by(|a, b| a.fitness.total_cmp(&b.fitness));
    *pop = kept;
}

/// Runs the evolutionary search and returns the best individual found,
/// the anytime trace, and evaluation counters.
///
/// The initial population is the identity tour plus random permutations,
/// each educated by local search and evaluated on the full train set; the
/// budget is checked only after the first evaluation, so even an
/// exhausted wall-clock budget returns a valid best-of-initialization.
pub fn solve<C: Cost>(
    instance: &CvrpInstance<C>,
    train: &ScenarioSet,
    config: &SearchConfig<C>,
) -> Result<SearchOutcome<C>, SearchError> {
    config.validate()?;
    let n = instance.n();
    if train.n() != n {
        return Err(SearchError::Split(SplitError::DimensionMismatch {
            got: train.n(),
            expected: n,
        }));
    }
    if let SearchBudget::WallClock(d) = config.budget {
        if d.is_zero() {
            return Err(SearchError::InvalidConfig("wall-clock budget is zero".into()));
        }
    }
    let lambda = config.lambda.unwrap_or_else(|| default_lambda(instance));
    let subset = if config.ls_subsample > 0 && config.ls_subsample < train.m() {
        train.prefix(config.ls_subsample)
    } else {
        train.clone()
    };
    let move_cap = config.ls_move_cap_factor.saturating_mul(n);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut st = SearchState {
        instance,
        train,
        subset,
        lambda,
        start: Instant::now(),
        evaluations: 0,
        best: None,
        trace: SearchTrace::default(),
    };

    let mut population: Vec<Individual<C>> = Vec::with_capacity(config.population_size);
    let mut generations = 0u32;
    'run: {
        for k in 0..config.population_size {
            let order: Vec<u32> = if k == 0 {
                (1..=n as u32).collect()
            } else {
                let mut o: Vec<u32> = (1..=n as u32).collect();
                o.shuffle(&mut rng);
                o
            };
            let tour = GiantTour::new(instance, &order)?;
            let (tour, _, ls_evals) =
                local_search(instance, &tour, &st.subset, lambda, &mut rng, move_cap)?;
            st.evaluations += ls_evals;
            let ind = st.admit(tour)?;
            population.push(ind);
            if st.out_of_time(config.budget) {
                break 'run;
            }
        }

        loop {
            match config.budget {
                SearchBudget::Generations(g) => {
                    if generations >= g {
                        break;
                    }
                }
                SearchBudget::WallClock(_) => {
                    if st.out_of_time(config.budget) {
                        break;
                    }
                }
            }
            for _ in 0..config.offspring_per_generation {
                let pa = tournament(&population, &mut rng).tour.order().to_vec();
                let pb = tournament(&population, &mut rng).tour.order().to_vec();
                let mut child = crossover_ox(&pa, &pb, &mut rng);
                if n >= 2 && rng.random::<f64>() < config.mutation_prob {
                    let mv = random_mutation(n, &mut rng);
                    apply_move(&mut child, mv);
                }
                let tour = GiantTour::new(instance, &child)?;
                let (tour, _, ls_evals) =
                    local_search(instance, &tour, &st.subset, lambda, &mut rng, move_cap)?;
                st.evaluations += ls_evals;
                let ind = st.admit(tour)?;
                population.push(ind);
                if st.out_of_time(config.budget) {
                    break 'run;
                }
            }
            select_survivors(&mut population, config.population_size, config.elite_fraction);
            generations += 1;
        }
    }

    let best = st.best.take().expect("population initialization evaluated at least one tour");
    Ok(SearchOutcome {
        best,
        trace: st.trace,
        evaluations: st.evaluations,
        generations,
        lambda,
    })
}

fn random_mutation<R: Rng>(n: usize, rng: &mut R) -> Move {
    let x = rng.random_range(0..n);
    let mut y = rng.random_range(0..n - 1);
    if y >= x {
        y += 1;
    }
    if rng.random::<bool>() {
        Move::Relocate(x, y)
    } else {
        Move::Swap(x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{DemandKind, DemandModel};
    use crate::split::{brute_force_split, SplitMode};

    fn line_instance(n: usize, capacity: u64) -> CvrpInstance<f64> {
        let mut coords = vec![[0.0, 0.0]];
        coords.extend((1..=n).map(|i| [i as f64, 0.0]));
        CvrpInstance::from_coords("line", &coords, capacity).unwrap()
    }

    fn fixed_set(demands: Vec<u16>, m: usize) -> ScenarioSet {
        DemandModel::new(DemandKind::Fixed, demands, 0).sample(m).unwrap()
    }

    #[test]
    fn ox_hand_trace() {
        let child = crossover_ox_with_slice(&[1, 2, 3, 4], &[4, 3, 2, 1], 1, 2);
        assert_eq!(child, vec![4, 2, 3, 1]);
    }

    #[test]
    fn ox_identical_parents_and_full_slice() {
        let a = [3u32, 1, 4, 2, 5];
        assert_eq!(crossover_ox_with_slice(&a, &a, 1, 3), a.to_vec());
        let b = [5u32, 4, 3, 2, 1];
        assert_eq!(crossover_ox_with_slice(&a, &b, 0, 4), a.to_vec());
    }

    #[test]
    fn ox_children_are_permutations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 9usize;
        for _ in 0..200 {
            let mut a: Vec<u32> = (1..=n as u32).collect();
            let mut b: Vec<u32> = (1..=n as u32).collect();
            a.shuffle(&mut rng);
            b.shuffle(&mut rng);
            let mut child = crossover_ox(&a, &b, &mut rng);
            child.sort_unstable();
            assert_eq!(child, (1..=n as u32).collect::<Vec<_>>());
        }
    }

    #[test]
    fn local_search_repairs_a_swapped_pair() {
        let inst = line_instance(3, 100);
        let subset = fixed_set(vec![1, 1, 1], 4);
        let tour = GiantTour::new(&inst, &[2, 1, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let before = 8.0;
        let (improved, fit, _) =
            local_search(&inst, &tour, &subset, 100.0, &mut rng, 30).unwrap();
        assert!(fit < before);
        assert_eq!(fit, 6.0);
        let cost = brute_force_split(&inst, &improved, &[1, 1, 1], SplitMode::Strict)
            .unwrap()
            .cost;
        assert_eq!(cost, 6.0);
    }

    #[test]
    fn local_search_with_zero_cap_returns_input() {
        let inst = line_instance(4, 100);
        let subset = fixed_set(vec![1; 4], 2);
        let tour = GiantTour::new(&inst, &[3, 1, 2, 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (out, _, _) = local_search(&inst, &tour, &subset, 10.0, &mut rng, 0).unwrap();
        assert_eq!(out.order(), tour.order());
    }

    #[test]
    fn local_search_leaves_local_optimum_unchanged() {
        let inst = line_instance(4, 100);
        let subset = fixed_set(vec![1; 4], 2);
        let tour = GiantTour::identity(&inst);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (out, fit, _) = local_search(&inst, &tour, &subset, 10.0, &mut rng, 40).unwrap();
        assert_eq!(fit, 8.0);
        let single_route_cost = 8.0;
        assert!(fit <= single_route_cost);
        let direct = brute_force_split(&inst, &out, &[1, 1, 1, 1], SplitMode::Strict)
            .unwrap()
            .cost;
        assert_eq!(direct, 8.0);
    }

    #[test]
    fn solve_finds_the_line_optimum() {
        let inst = line_instance(4, 100);
        let train = fixed_set(vec![2, 2, 2, 2], 8);
        let config = SearchConfig {
            population_size: 8,
            offspring_per_generation: 10,
            budget: SearchBudget::Generations(5),
            seed: 42,
            ..SearchConfig::default()
        };
        let out = solve(&inst, &train, &config).unwrap();
        assert_eq!(out.best.fitness, 8.0);
        assert_eq!(out.best.eval_m, 8);
    }

    #[test]
    fn solve_is_deterministic_in_generation_mode() {
        let inst = line_instance(6, 8);
        let model = DemandModel::new(
            DemandKind::UniformInteger { lo_frac: 0.4, hi_frac: 1.6 },
            vec![3; 6],
            9,
        );
        let train = model.sample(64).unwrap();
        let config = SearchConfig {
            population_size: 6,
            offspring_per_generation: 8,
            budget: SearchBudget::Generations(4),
            seed: 7,
            ..SearchConfig::default()
        };
        let a = solve(&inst, &train, &config).unwrap();
        let b = solve(&inst, &train, &config).unwrap();
        assert_eq!(a.best.tour.order(), b.best.tour.order());
        assert_eq!(a.best.fitness, b.best.fitness);
        assert_eq!(a.evaluations, b.evaluations);
        let decisions =
            |t: &SearchTrace| -> Vec<(u64, f64, f64)> {
                t.points
                    .iter()
                    .map(|p| (p.evaluations, p.best_penalized_cost, p.best_strict_cost))
                    .collect()
            };
        assert_eq!(decisions(&a.trace), decisions(&b.trace));
    }

    #[test]
    fn trace_best_cost_is_nonincreasing() {
        let inst = line_instance(7, 6);
        let model = DemandModel::new(
            DemandKind::TruncatedNormal { cv: 0.4 },
            vec![3; 7],
            4,
        );
        let train = model.sample(128).unwrap();
        let config = SearchConfig {
            population_size: 6,
            offspring_per_generation: 8,
            budget: SearchBudget::Generations(4),
            seed: 1,
            ..SearchConfig::default()
        };
        let out = solve(&inst, &train, &config).unwrap();
        assert!(!out.trace.points.is_empty());
        assert!(out
            .trace
            .points
            .windows(2)
            .all(|w| w[1].best_penalized_cost < w[0].best_penalized_cost));
        assert!(out
            .trace
            .points
            .windows(2)
            .all(|w| w[1].elapsed_ms >= w[0].elapsed_ms));
    }

    #[test]
    fn fitness_cache_is_coherent() {
        let inst = line_instance(5, 7);
        let model = DemandModel::new(
            DemandKind::UniformInteger { lo_frac: 0.5, hi_frac: 1.5 },
            vec![4; 5],
            3,
        );
        let train = model.sample(100).unwrap();
        let config = SearchConfig {
            population_size: 5,
            offspring_per_generation: 6,
            budget: SearchBudget::Generations(3),
            seed: 2,
            ..SearchConfig::default()
        };
        let out = solve(&inst, &train, &config).unwrap();
        let again = penalized_mean(&inst, &out.best.tour, &train, out.lambda).unwrap();
        assert_eq!(out.best.fitness, again);
    }

    #[test]
    fn tiny_wall_clock_budget_still_returns_a_best() {
        let inst = line_instance(6, 10);
        let train = fixed_set(vec![2; 6], 16);
        let config = SearchConfig {
            budget: SearchBudget::WallClock(Duration::from_nanos(1)),
            seed: 3,
            ..SearchConfig::default()
        };
        let out = solve(&inst, &train, &config).unwrap();
        assert!(out.best.fitness.is_finite());
        assert!(!out.trace.points.is_empty());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let inst = line_instance(3, 10);
        let train = fixed_set(vec![1; 3], 2);
        for config in [
            SearchConfig::<f64> { population_size: 1, ..Default::default() },
            SearchConfig { mutation_prob: 1.5, ..Default::default() },
            SearchConfig { elite_fraction: -0.1, ..Default::default() },
            SearchConfig { lambda: Some(-1.0), ..Default::default() },
            SearchConfig { budget: SearchBudget::WallClock(Duration::ZERO), ..Default::default() },
        ] {
            assert!(matches!(
                solve(&inst, &train, &config),
                Err(SearchError::InvalidConfig(_))
            ));
        }
    }

    /// Exhaustive optimum over all permutations via the brute-force
    /// oracle, for small n.
    fn exhaustive_best_strict(inst: &CvrpInstance<f64>, demands: &[u16]) -> f64 {
        let n = inst.n();
        let mut order: Vec<u32> = (1..=n as u32).collect();
        let mut best = f64::INFINITY;
        permute(&mut order, 0, &mut |o| {
            let tour = GiantTour::new(inst, o).unwrap();
            let c = brute_force_split(inst, &tour, demands, SplitMode::Strict)
                .unwrap()
                .cost;
            if c < best {
                best = c;
            }
        });
        best
    }

    fn permute(arr: &mut Vec<u32>, k: usize, visit: &mut impl FnMut(&[u32])) {
        if k == arr.len() {
            visit(arr);
            return;
        }
        for i in k..arr.len() {
            arr.swap(k, i);
            permute(arr, k + 1, visit);
            arr.swap(k, i);
        }
    }

    #[test]
    fn solve_matches_exhaustive_optimum_on_most_seeds() {
        let coords = vec![
            [0.0, 0.0],
            [4.0, 1.0],
            [1.0, 3.0],
            [5.0, 4.0],
            [2.0, 2.0],
            [6.0, 0.0],
        ];
        let inst = CvrpInstance::<f64>::from_coords("mini", &coords, 6).unwrap();
        let demands = [3u16, 3, 3, 3, 3];
        let train = fixed_set(demands.to_vec(), 4);
        let optimum = exhaustive_best_strict(&inst, &demands);
        let mut hits = 0;
        for seed in 0..10 {
            let config = SearchConfig {
                population_size: 10,
                offspring_per_generation: 12,
                lambda: Some(1.0e6),
                budget: SearchBudget::Generations(6),
                seed,
                ..SearchConfig::default()
            };
            let out = solve(&inst, &train, &config).unwrap();
            let strict = brute_force_split(&inst, &out.best.tour, &demands, SplitMode::Strict)
                .unwrap()
                .cost;
            if (strict - optimum).abs() <= 1e-9 {
                hits += 1;
            }
        }
        assert!(hits >= 9, "only {hits}/10 seeds reached the optimum {optimum}");
    }
}
