//! The six subcommands: scenario generation, batch evaluation, tour
//! search, and the three benchmark/experiment drivers.

use std::fs;
use std::path::PathBuf;

use batchsplit::cost::Cost;
use batchsplit::instance::{parse_tour, CvrpInstance, GiantTour, InstanceFile};
use batchsplit::saa::{bias_experiment, estimate_costs, SaaError};
use batchsplit::scenario::{DemandModel, ScenarioSet};
use batchsplit::search::{solve, SearchBudget, SearchConfig, SearchOutcome};
use batchsplit::split::{brute_force_split, split_batch, SplitMode, SplitOptions};
use clap::Args;
use serde_json::json;

use crate::opts::{
    data_err, emit_json, median, parse_grid, resolve, resolve_model, run_in_pool, sha256_file,
    usage, CliError, CommonOpts, ModelSpec, Provenance, Resolved, Rounding,
};

/// Where the instance comes from: a file, or a synthetic ring of
/// customers around a central depot.
#[derive(Args, Clone, Debug)]
pub struct SourceOpts {
    /// Instance file (TSPLIB-style text).
    #[arg(long, value_name = "FILE")]
    pub instance: Option<PathBuf>,
    /// Build a synthetic ring instance with this many customers.
    #[arg(long, conflicts_with = "instance")]
    pub n: Option<usize>,
    /// Vehicle capacity of the synthetic instance.
    #[arg(long, default_value_t = 30)]
    pub capacity: u64,
    /// Per-customer nominal demand of the synthetic instance.
    #[arg(long, default_value_t = 10)]
    pub nominal: u16,
}

struct SourceData {
    name: String,
    coords: Vec<[f64; 2]>,
    capacity: u64,
    nominal: Vec<u16>,
    origin: String,
}

fn load_source(src: &SourceOpts) -> Result<SourceData, CliError> {
    match (&src.instance, src.n) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| data_err(format!("cannot read {}: {e}", path.display())))?;
            let file = InstanceFile::parse(&text)?;
            Ok(SourceData {
                name: file.name.clone(),
                coords: file.depot_first_coords(),
                capacity: file.capacity,
                nominal: file.nominal_demands(),
                origin: path.display().to_string(),
            })
        }
        (None, Some(n)) => {
            if n == 0 {
                return Err(usage("--n must be >= 1"));
            }
            let mut coords = vec![[0.0, 0.0]];
            coords.extend((0..n).map(|i| {
                let theta = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                [100.0 * theta.cos(), 100.0 * theta.sin()]
            }));
            Ok(SourceData {
                name: format!("ring-{n}"),
                coords,
                capacity: src.capacity,
                nominal: vec![src.nominal; n],
                origin: format!("synthetic ring, capacity {}, nominal {}", src.capacity, src.nominal),
            })
        }
        (None, None) => Err(usage("provide --instance FILE or --n COUNT")),
    }
}

fn build_instance<C: Cost>(data: &SourceData) -> Result<CvrpInstance<C>, CliError> {
    Ok(CvrpInstance::from_coords(&data.name, &data.coords, data.capacity)?)
}

fn load_tour<C: Cost>(inst: &CvrpInstance<C>, spec: &str) -> Result<GiantTour<C>, CliError> {
    if spec == "identity" {
        return Ok(GiantTour::identity(inst));
    }
    let text = fs::read_to_string(spec)
        .map_err(|e| data_err(format!("cannot read tour {spec}: {e}")))?;
    Ok(GiantTour::new(inst, &parse_tour(&text)?)?)
}

fn load_or_sample(
    scenarios: &Option<PathBuf>,
    model: &Option<ModelSpec>,
    m: Option<usize>,
    nominal: &[u16],
    r: &Resolved,
) -> Result<(ScenarioSet, String), CliError> {
    match scenarios {
        Some(path) => Ok((ScenarioSet::load(path)?, format!("file:{}", path.display()))),
        None => {
            let spec = resolve_model(model, r)?;
            let m = m.ok_or_else(|| usage("missing --m (or --scenarios FILE)"))?;
            if m == 0 {
                return Err(usage("--m must be >= 1"));
            }
            let set = DemandModel::new(spec.kind, nominal.to_vec(), r.seed).sample(m)?;
            Ok((set, spec.raw))
        }
    }
}

fn mode_of<C: Cost>(lambda: Option<f64>) -> SplitMode<C> {
    match lambda {
        None => SplitMode::Strict,
        Some(l) => SplitMode::Penalized { lambda: C::from_distance(l) },
    }
}

fn mode_label(lambda: Option<f64>) -> serde_json::Value {
    match lambda {
        None => json!("strict"),
        Some(l) => json!({ "penalized": { "lambda": l } }),
    }
}

/// Search knobs shared by `solve`, `experiment-trainsize`, and
/// `bench-budget`. Unset knobs keep the library defaults.
#[derive(Args, Clone, Debug)]
pub struct SearchOpts {
    /// Population size.
    #[arg(long)]
    pub population: Option<usize>,
    /// Offspring per generation.
    #[arg(long)]
    pub offspring: Option<usize>,
    /// Fraction of the population kept unconditionally.
    #[arg(long)]
    pub elite: Option<f64>,
    /// Mutation probability.
    #[arg(long)]
    pub mutation: Option<f64>,
    /// Overload penalty per capacity unit; omitted = 10x mean arc cost.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Local-search screening subsample size.
    #[arg(long)]
    pub ls_subsample: Option<usize>,
}

fn build_search_config<C: Cost>(
    opts: &SearchOpts,
    budget: SearchBudget,
    seed: u64,
) -> SearchConfig<C> {
    let mut c = SearchConfig::default();
    if let Some(v) = opts.population {
        c.population_size = v;
    }
    if let Some(v) = opts.offspring {
        c.offspring_per_generation = v;
    }
    if let Some(v) = opts.elite {
        c.elite_fraction = v;
    }
    if let Some(v) = opts.mutation {
        c.mutation_prob = v;
    }
    if let Some(v) = opts.ls_subsample {
        c.ls_subsample = v;
    }
    c.lambda = opts.lambda.map(C::from_distance);
    c.budget = budget;
    c.seed = seed;
    c
}

fn search_opts_json(opts: &SearchOpts) -> serde_json::Value {
    json!({
        "population": opts.population,
        "offspring": opts.offspring,
        "elite": opts.elite,
        "mutation": opts.mutation,
        "lambda": opts.lambda,
        "ls_subsample": opts.ls_subsample,
    })
}

// ---------------------------------------------------------------------
// gen-scenarios

#[derive(Args, Debug)]
pub struct GenArgs {
    #[command(flatten)]
    pub common: CommonOpts,
    #[command(flatten)]
    pub source: SourceOpts,
    /// Demand model: fixed | uniform:LO,HI | normal:CV | common:CV,RHO.
    #[arg(long)]
    pub model: Option<ModelSpec>,
    /// Number of scenarios to draw.
    #[arg(long)]
    pub m: usize,
    /// Output scenario file.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn gen_scenarios(args: &GenArgs) -> Result<(), CliError> {
    if args.m == 0 {
        return Err(usage("--m must be >= 1"));
    }
    let r = resolve(&args.common)?;
    let data = load_source(&args.source)?;
    let spec = resolve_model(&args.model, &r)?;
    let model = DemandModel::new(spec.kind, data.nominal.clone(), r.seed);
    let set = model.sample(args.m)?;
    set.save(&args.out)?;
    let digest = sha256_file(&args.out)?;
    let bytes = ScenarioSet::file_size(set.m() as u64, set.n() as u64);
    let prov = Provenance::new(
        "gen-scenarios",
        json!({
            "instance": data.origin,
            "model": spec.raw,
            "m": args.m,
            "n": set.n(),
            "seed": r.seed,
            "workers": r.workers,
            "tile_size": r.tile_size,
            "out": args.out.display().to_string(),
        }),
    );
    let meta_path = PathBuf::from(format!("{}.meta.json", args.out.display()));
    fs::write(
        &meta_path,
        serde_json::to_string_pretty(&json!({
            "provenance": prov,
            "sha256": digest,
            "bytes": bytes,
        }))? + "\n",
    )?;
    println!("wrote {} ({bytes} bytes)", args.out.display());
    println!("sha256: {digest}");
    Ok(())
}

// ---------------------------------------------------------------------
// eval

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonOpts,
    #[command(flatten)]
    pub source: SourceOpts,
    /// Giant tour: a file of customer ids, or "identity".
    #[arg(long, default_value = "identity")]
    pub tour: String,
    /// Scenario file to evaluate against (instead of sampling in memory).
    #[arg(long, value_name = "FILE", conflicts_with_all = ["model", "m"])]
    pub scenarios: Option<PathBuf>,
    /// Demand model for in-memory sampling.
    #[arg(long)]
    pub model: Option<ModelSpec>,
    /// Scenario count for in-memory sampling.
    #[arg(long)]
    pub m: Option<usize>,
    /// Overload penalty per capacity unit; omitted = strict capacities.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Cross-check per-scenario costs against the exhaustive oracle
    /// (requires n <= 12; checks up to 4096 scenarios).
    #[arg(long)]
    pub oracle_check: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

const ORACLE_SCENARIO_CAP: usize = 4096;

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let r = resolve(&args.common)?;
    match r.rounding {
        Rounding::Exact => eval_impl::<f64>(args, &r),
        Rounding::Integer => eval_impl::<i64>(args, &r),
    }
}

fn eval_impl<C: Cost>(args: &EvalArgs, r: &Resolved) -> Result<(), CliError> {
    let data = load_source(&args.source)?;
    let inst = build_instance::<C>(&data)?;
    let (set, scenario_desc) =
        load_or_sample(&args.scenarios, &args.model, args.m, &data.nominal, r)?;
    let tour = load_tour(&inst, &args.tour)?;
    let mode = mode_of::<C>(args.lambda);
    let split_opts = SplitOptions { tile_rows: r.tile_size, record_pred: false };
    let res = run_in_pool(r.workers, || split_batch(&inst, &tour, &set, mode, &split_opts))??;

    let oracle = if args.oracle_check {
        Some(oracle_check(&inst, &tour, &set, mode, &res.costs)?)
    } else {
        None
    };

    let est = estimate_costs(&res.costs).map_err(|e| match e {
        SaaError::AllInfeasible { m } => {
            data_err(format!("all {m} scenarios are infeasible under strict capacities"))
        }
        other => other.into(),
    })?;
    let wall_ms = res.stats.wall.as_secs_f64() * 1e3;
    let report = json!({
        "provenance": Provenance::new("eval", json!({
            "instance": data.origin,
            "tour": args.tour,
            "scenarios": scenario_desc,
            "m": set.m(),
            "n": set.n(),
            "mode": mode_label(args.lambda),
            "rounding": r.rounding,
            "seed": set.seed(),
            "workers": r.workers,
            "tile_size": r.tile_size,
        })),
        "estimate": est,
        "timing": {
            "wall_ms": wall_ms,
            "scenarios_per_sec": set.m() as f64 / res.stats.wall.as_secs_f64().max(1e-9),
        },
        "oracle": oracle,
    });
    emit_json(&args.out, &report)?;
    if let Some(checked) = oracle {
        println!("oracle: PASS ({checked} scenarios)");
    }
    Ok(())
}

/// Re-splits up to [`ORACLE_SCENARIO_CAP`] scenarios with the exhaustive
/// enumerator and compares costs: exact in integer mode, 1e-9 relative in
/// float mode. Returns the number of scenarios checked.
fn oracle_check<C: Cost>(
    inst: &CvrpInstance<C>,
    tour: &GiantTour<C>,
    set: &ScenarioSet,
    mode: SplitMode<C>,
    costs: &[C],
) -> Result<usize, CliError> {
    let n = tour.n();
    if n > 12 {
        return Err(usage(format!("--oracle-check requires n <= 12, instance has {n}")));
    }
    let checked = set.m().min(ORACLE_SCENARIO_CAP);
    let order = tour.order();
    let mut row = vec![0u16; n];
    for (omega, &got) in costs.iter().enumerate().take(checked) {
        let src = set.row(omega);
        for (k, &c) in order.iter().enumerate() {
            row[k] = src[c as usize - 1];
        }
        let reference = brute_force_split(inst, tour, &row, mode)?.cost;
        let ok = if reference.is_infeasible() || got.is_infeasible() {
            reference.is_infeasible() && got.is_infeasible()
        } else {
            let (a, b) = (reference.to_f64(), got.to_f64());
            (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
        };
        if !ok {
            return Err(data_err(format!(
                "oracle: FAIL at scenario {omega}: batch cost {got}, exhaustive cost {reference}"
            )));
        }
    }
    Ok(checked)
}

// ---------------------------------------------------------------------
// solve

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonOpts,
    #[command(flatten)]
    pub source: SourceOpts,
    /// Demand model for training scenarios.
    #[arg(long)]
    pub model: Option<ModelSpec>,
    /// Training scenario count.
    #[arg(long, default_value_t = 1000)]
    pub m: usize,
    /// Train on a scenario file instead of sampling.
    #[arg(long, value_name = "FILE", conflicts_with = "model")]
    pub scenarios: Option<PathBuf>,
    #[command(flatten)]
    pub search: SearchOpts,
    /// Generation budget (default 50 when no budget flag is given).
    #[arg(long, conflicts_with = "time_budget_ms")]
    pub generations: Option<u32>,
    /// Wall-clock budget in milliseconds.
    #[arg(long)]
    pub time_budget_ms: Option<u64>,
    /// Write the JSON summary here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the anytime trace CSV here.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    /// Write the best tour (customer ids, one line) here.
    #[arg(long)]
    pub tour_out: Option<PathBuf>,
}

pub fn solve_cmd(args: &SolveArgs) -> Result<(), CliError> {
    let r = resolve(&args.common)?;
    match r.rounding {
        Rounding::Exact => solve_impl::<f64>(args, &r),
        Rounding::Integer => solve_impl::<i64>(args, &r),
    }
}

fn solve_impl<C: Cost>(args: &SolveArgs, r: &Resolved) -> Result<(), CliError> {
    let data = load_source(&args.source)?;
    let inst = build_instance::<C>(&data)?;
    let (train, scenario_desc) =
        load_or_sample(&args.scenarios, &args.model, Some(args.m), &data.nominal, r)?;
    let budget = match (args.generations, args.time_budget_ms) {
        (Some(g), _) => SearchBudget::Generations(g),
        (None, Some(ms)) => SearchBudget::WallClock(std::time::Duration::from_millis(ms)),
        (None, None) => SearchBudget::Generations(50),
    };
    let config = build_search_config::<C>(&args.search, budget, r.seed);
    let outcome = run_in_pool(r.workers, || solve(&inst, &train, &config))??;
    let strict_mean = strict_train_mean(&inst, &outcome, &train, r);
    let prov = Provenance::new(
        "solve",
        json!({
            "instance": data.origin,
            "scenarios": scenario_desc,
            "m": train.m(),
            "budget": budget_label(budget),
            "search": search_opts_json(&args.search),
            "rounding": r.rounding,
            "seed": r.seed,
            "workers": r.workers,
            "tile_size": r.tile_size,
        }),
    );
    if let Some(path) = &args.trace_out {
        let mut file = fs::File::create(path)?;
        prov.write_csv_preamble(&mut file)?;
        outcome.trace.write_csv(&mut file)?;
        eprintln!("wrote {}", path.display());
    }
    if let Some(path) = &args.tour_out {
        let ids: Vec<String> = outcome.best.tour.order().iter().map(u32::to_string).collect();
        fs::write(
            path,
            format!(
                "# produced by batchsplit {} (penalized fitness {})\n{}\n",
                crate::opts::VERSION,
                outcome.best.fitness,
                ids.join(" ")
            ),
        )?;
        eprintln!("wrote {}", path.display());
    }
    let report = json!({
        "provenance": prov,
        "best": {
            "order": outcome.best.tour.order(),
            "penalized_fitness": outcome.best.fitness,
            "eval_m": outcome.best.eval_m,
        },
        "strict_train_mean": strict_mean,
        "lambda": outcome.lambda.to_f64(),
        "evaluations": outcome.evaluations,
        "generations": outcome.generations,
        "trace_points": outcome.trace.points.len(),
    });
    emit_json(&args.out, &report)
}

fn budget_label(budget: SearchBudget) -> serde_json::Value {
    match budget {
        SearchBudget::Generations(g) => json!({ "generations": g }),
        SearchBudget::WallClock(d) => json!({ "wall_clock_ms": d.as_millis() as u64 }),
    }
}

/// Strict-mode train mean of the best tour, or null when every scenario
/// is infeasible without the penalty.
fn strict_train_mean<C: Cost>(
    inst: &CvrpInstance<C>,
    outcome: &SearchOutcome<C>,
    train: &ScenarioSet,
    r: &Resolved,
) -> Option<f64> {
    let split_opts = SplitOptions { tile_rows: r.tile_size, record_pred: false };
    let res = run_in_pool(r.workers, || {
        split_batch(inst, &outcome.best.tour, train, SplitMode::Strict, &split_opts)
    })
    .ok()?
    .ok()?;
    estimate_costs(&res.costs).ok().map(|e| e.mean)
}

// ---------------------------------------------------------------------
// bench-scaling

#[derive(Args, Debug)]
pub struct BenchScalingArgs {
    #[command(flatten)]
    pub common: CommonOpts,
    #[command(flatten)]
    pub source: SourceOpts,
    /// Demand model for the benchmark scenarios.
    #[arg(long)]
    pub model: Option<ModelSpec>,
    /// Comma-separated ascending scenario counts.
    #[arg(long, default_value = "10000,100000,1000000")]
    pub m_grid: String,
    /// Timed repetitions per configuration (one warm-up is discarded).
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn bench_scaling(args: &BenchScalingArgs) -> Result<(), CliError> {
    let r = resolve(&args.common)?;
    match r.rounding {
        Rounding::Exact => bench_scaling_impl::<f64>(args, &r),
        Rounding::Integer => bench_scaling_impl::<i64>(args, &r),
    }
}

fn bench_scaling_impl<C: Cost>(args: &BenchScalingArgs, r: &Resolved) -> Result<(), CliError> {
    if args.reps == 0 {
        return Err(usage("--reps must be >= 1"));
    }
    let grid = parse_grid(&args.m_grid, "--m-grid")?;
    let data = load_source(&args.source)?;
    let inst = build_instance::<C>(&data)?;
    let tour = GiantTour::identity(&inst);
    let spec = resolve_model(&args.model, r)?;
    let split_opts = SplitOptions { tile_rows: r.tile_size, record_pred: false };
    let mut worker_counts = vec![1usize, r.workers];
    worker_counts.sort_unstable();
    worker_counts.dedup();

    let mut rows: Vec<(usize, usize, String, f64, f64)> = Vec::new();
    for &m in &grid {
        let set =
            DemandModel::new(spec.kind, data.nominal.clone(), r.seed).sample(m)?;
        for &w in &worker_counts {
            let walls: Vec<f64> = run_in_pool(w, || -> Result<Vec<f64>, CliError> {
                let mut walls = Vec::with_capacity(args.reps);
                for rep in 0..=args.reps {
                    let res = split_batch(&inst, &tour, &set, SplitMode::Strict, &split_opts)?;
                    if rep > 0 {
                        walls.push(res.stats.wall.as_secs_f64() * 1e3);
                    }
                }
                Ok(walls)
            })??;
            for (rep, &wall) in walls.iter().enumerate() {
                rows.push((m, w, rep.to_string(), wall, m as f64 / (wall / 1e3)));
            }
            let med = median(&mut walls.clone());
            rows.push((m, w, "median".into(), med, m as f64 / (med / 1e3)));
            println!("m={m} workers={w} median_wall_ms={med:.3}");
        }
    }

    let prov = Provenance::new(
        "bench-scaling",
        json!({
            "instance": data.origin,
            "model": spec.raw,
            "m_grid": grid,
            "reps": args.reps,
            "worker_counts": worker_counts,
            "rounding": r.rounding,
            "seed": r.seed,
            "tile_size": r.tile_size,
        }),
    );
    let mut file = fs::File::create(&args.out)?;
    prov.write_csv_preamble(&mut file)?;
    let mut csv_out = csv::Writer::from_writer(file);
    csv_out.write_record(["m", "workers", "rep", "wall_ms", "scenarios_per_sec"])?;
    for (m, w, rep, wall, sps) in &rows {
        csv_out.write_record(&[
            m.to_string(),
            w.to_string(),
            rep.clone(),
            wall.to_string(),
            sps.to_string(),
        ])?;
    }
    csv_out.flush().map_err(data_err)?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------
// experiment-trainsize

#[derive(Args, Debug)]
pub struct TrainsizeArgs {
    #[command(flatten)]
    pub common: CommonOpts,
    #[command(flatten)]
    pub source: SourceOpts,
    /// Demand model for training and test scenarios.
    #[arg(long)]
    pub model: Option<ModelSpec>,
    /// Comma-separated ascending train-set sizes.
    #[arg(long, default_value = "1,100,1000")]
    pub m_list: String,
    /// Replicates per train-set size.
    #[arg(long, default_value_t = 10)]
    pub replicates: usize,
    /// Held-out test scenario count.
    #[arg(long, default_value_t = 100_000)]
    pub test_m: usize,
    /// Search generations per replicate.
    #[arg(long, default_value_t = 10)]
    pub generations: u32,
    #[command(flatten)]
    pub search: SearchOpts,
    /// Output per-cell CSV.
    #[arg(long)]
    pub out_csv: PathBuf,
    /// Optional full JSON report.
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}

pub fn experiment_trainsize(args: &TrainsizeArgs) -> Result<(), CliError> {
    let r = resolve(&args.common)?;
    match r.rounding {
        Rounding::Exact => trainsize_impl::<f64>(args, &r),
        Rounding::Integer => trainsize_impl::<i64>(args, &r),
    }
}

fn trainsize_impl<C: Cost>(args: &TrainsizeArgs, r: &Resolved) -> Result<(), CliError> {
    let m_list = parse_grid(&args.m_list, "--m-list")?;
    let data = load_source(&args.source)?;
    let inst = build_instance::<C>(&data)?;
    let spec = resolve_model(&args.model, r)?;
    let model = DemandModel::new(spec.kind, data.nominal.clone(), r.seed);
    let template = build_search_config::<C>(
        &args.search,
        SearchBudget::Generations(args.generations),
        r.seed,
    );
    let report = run_in_pool(r.workers, || {
        bias_experiment(&inst, &model, &m_list, args.replicates, args.test_m, &template)
    })??;

    let prov = Provenance::new(
        "experiment-trainsize",
        json!({
            "instance": data.origin,
            "model": spec.raw,
            "m_list": m_list,
            "replicates": args.replicates,
            "test_m": args.test_m,
            "generations": args.generations,
            "search": search_opts_json(&args.search),
            "rounding": r.rounding,
            "base_seed": report.base_seed,
            "test_seed": report.test_seed,
            "train_seeds": report.rows.iter().map(|row| row.train_seed).collect::<Vec<_>>(),
            "workers": r.workers,
            "tile_size": r.tile_size,
        }),
    );
    let mut file = fs::File::create(&args.out_csv)?;
    prov.write_csv_preamble(&mut file)?;
    report.write_csv(&mut file)?;
    eprintln!("wrote {}", args.out_csv.display());
    if args.out_json.is_some() {
        emit_json(&args.out_json, &json!({ "provenance": prov, "report": report }))?;
    }
    for agg in &report.aggregates {
        println!(
            "m={} replicates={} mean_oos={:.6} stderr_oos={:.6}",
            agg.m, agg.replicates, agg.mean_oos, agg.stderr_oos
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------
// bench-budget

#[derive(Args, Debug)]
pub struct BenchBudgetArgs {
    #[command(flatten)]
    pub common: CommonOpts,
    #[command(flatten)]
    pub source: SourceOpts,
    /// Demand model for training scenarios.
    #[arg(long)]
    pub model: Option<ModelSpec>,
    /// Training scenario count.
    #[arg(long, default_value_t = 10_000)]
    pub m: usize,
    /// Wall-clock budget per run, in milliseconds.
    #[arg(long, default_value_t = 10_000)]
    pub budget_ms: u64,
    /// Number of search seeds (base seed, base seed + 1, ...).
    #[arg(long, default_value_t = 5)]
    pub seeds: usize,
    #[command(flatten)]
    pub search: SearchOpts,
    /// Directory for per-configuration trace CSVs and the summary.
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn bench_budget(args: &BenchBudgetArgs) -> Result<(), CliError> {
    let r = resolve(&args.common)?;
    match r.rounding {
        Rounding::Exact => bench_budget_impl::<f64>(args, &r),
        Rounding::Integer => bench_budget_impl::<i64>(args, &r),
    }
}

fn bench_budget_impl<C: Cost>(args: &BenchBudgetArgs, r: &Resolved) -> Result<(), CliError> {
    if args.seeds == 0 {
        return Err(usage("--seeds must be >= 1"));
    }
    if args.m == 0 {
        return Err(usage("--m must be >= 1"));
    }
    let data = load_source(&args.source)?;
    let inst = build_instance::<C>(&data)?;
    let spec = resolve_model(&args.model, r)?;
    let train =
        DemandModel::new(spec.kind, data.nominal.clone(), r.seed).sample(args.m)?;
    fs::create_dir_all(&args.out_dir)?;
    let mut worker_counts = vec![1usize, r.workers];
    worker_counts.sort_unstable();
    worker_counts.dedup();

    let mut summary: Vec<(usize, u64, f64, Option<f64>, u64, usize)> = Vec::new();
    for &w in &worker_counts {
        for s in 0..args.seeds {
            let search_seed = r.seed.wrapping_add(s as u64);
            let config = build_search_config::<C>(
                &args.search,
                SearchBudget::WallClock(std::time::Duration::from_millis(args.budget_ms)),
                search_seed,
            );
            let outcome = run_in_pool(w, || solve(&inst, &train, &config))??;
            let strict = strict_train_mean(&inst, &outcome, &train, r);
            let prov = Provenance::new(
                "bench-budget",
                json!({
                    "instance": data.origin,
                    "model": spec.raw,
                    "m": args.m,
                    "budget_ms": args.budget_ms,
                    "search": search_opts_json(&args.search),
                    "rounding": r.rounding,
                    "train_seed": r.seed,
                    "search_seed": search_seed,
                    "workers": w,
                    "tile_size": r.tile_size,
                }),
            );
            let path = args.out_dir.join(format!("trace_w{w}_seed{search_seed}.csv"));
            let mut file = fs::File::create(&path)?;
            prov.write_csv_preamble(&mut file)?;
            outcome.trace.write_csv(&mut file)?;
            println!(
                "workers={w} seed={search_seed} best_penalized={:.6} evaluations={}",
                outcome.best.fitness, outcome.evaluations
            );
            summary.push((
                w,
                search_seed,
                outcome.best.fitness,
                strict,
                outcome.evaluations,
                outcome.trace.points.len(),
            ));
        }
    }

    let prov = Provenance::new(
        "bench-budget",
        json!({
            "instance": data.origin,
            "model": spec.raw,
            "m": args.m,
            "budget_ms": args.budget_ms,
            "seeds": args.seeds,
            "worker_counts": worker_counts,
            "search": search_opts_json(&args.search),
            "rounding": r.rounding,
            "train_seed": r.seed,
            "workers": r.workers,
            "tile_size": r.tile_size,
        }),
    );
    let summary_path = args.out_dir.join("summary.csv");
    let mut file = fs::File::create(&summary_path)?;
    prov.write_csv_preamble(&mut file)?;
    let mut csv_out = csv::Writer::from_writer(file);
    csv_out.write_record([
        "workers",
        "search_seed",
        "best_penalized",
        "strict_train_mean",
        "evaluations",
        "trace_points",
    ])?;
    for (w, seed, best, strict, evals, points) in &summary {
        csv_out.write_record(&[
            w.to_string(),
            seed.to_string(),
            best.to_string(),
            strict.map(|v| v.to_string()).unwrap_or_else(|| "inf".into()),
            evals.to_string(),
            points.to_string(),
        ])?;
    }
    csv_out.flush().map_err(data_err)?;
    eprintln!("wrote {}", summary_path.display());
    Ok(())
}
