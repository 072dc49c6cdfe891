//! Sweep orchestration for every subcommand.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::mpsc;

use ethdyn::engine::EngineConfig;
use ethdyn::estimator::{
    equipartition_prediction, estimate_abar_curve, estimate_eth, fit_power_law, CurvePoint, EthReport,
    ScalingFit, ScalingPoint, TypicalityContext,
};
use ethdyn::model::{build_geometry, build_model, sample_disorder, Geometry, ModelSpec};
use ethdyn::moddyn::{
    displacement_fraction, epsilon_bound, relaxation_trace, ModPreparer, RelaxationTrace,
};
use ethdyn::oracle::{check_size_cap, dense_model, exact_diagonalize, exact_eth_params, DEFAULT_SIZE_CAP};
use ethdyn::stats::{fit_line, mean_stderr, Estimate};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{hash_json, RunConfig};
use crate::records::{Manifest, Output, OutputDir, Provenance, RecordKind, ResultRecord, Status, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Estimate,
    Equipartition,
    Relax,
    Scaling,
    Oracle,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Estimate => "estimate",
            Command::Equipartition => "equipartition",
            Command::Relax => "relax",
            Command::Scaling => "scaling",
            Command::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub written: usize,
    pub resumed: usize,
    pub failed: usize,
    pub manifest: Manifest,
}

/// One independent unit of work.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "job", rename_all = "snake_case")]
enum Job {
    Eth { model: ModelSpec },
    Curve { model: ModelSpec },
    Trace { model: ModelSpec, sign: i8, sample: u64 },
    Epsilon { model: ModelSpec, sign: i8 },
    Oracle { model: ModelSpec },
}

impl Job {
    fn model(&self) -> &ModelSpec {
        match self {
            Job::Eth { model }
            | Job::Curve { model }
            | Job::Trace { model, .. }
            | Job::Epsilon { model, .. }
            | Job::Oracle { model } => model,
        }
    }

    fn kind(&self) -> RecordKind {
        match self {
            Job::Eth { .. } | Job::Oracle { .. } => RecordKind::EthReport,
            Job::Curve { .. } => RecordKind::EquipartitionCurve,
            Job::Trace { .. } => RecordKind::Trace,
            Job::Epsilon { .. } => RecordKind::EpsilonBound,
        }
    }

    fn id(&self) -> String {
        let base = model_label(self.model(), true);
        let sign = |s: i8| if s > 0 { "plus" } else { "minus" };
        match self {
            Job::Eth { .. } => format!("eth-{base}"),
            Job::Curve { .. } => format!("curve-{base}"),
            Job::Trace { sign: s, sample, .. } => format!("trace-{base}-{}-k{sample}", sign(*s)),
            Job::Epsilon { sign: s, .. } => format!("epsilon-{base}-{}", sign(*s)),
            Job::Oracle { .. } => format!("oracle-{base}"),
        }
    }

    fn sample_indices(&self, cfg: &RunConfig) -> Vec<u64> {
        match self {
            Job::Trace { sample, .. } => vec![*sample],
            Job::Oracle { .. } => vec![],
            _ => (0..cfg.estimator.n_samples as u64).collect(),
        }
    }
}

/// Stable label of a model, optionally including its disorder seed.
pub fn model_label(m: &ModelSpec, with_seed: bool) -> String {
    let mut s = format!(
        "{}_NL{}_NR{}_D{}_JC{}_W{}",
        m.geometry.as_str(),
        m.n_left,
        m.resolved_n_right(),
        m.delta,
        m.j_c,
        m.w
    );
    if m.j != 1.0 {
        s.push_str(&format!("_J{}", m.j));
    }
    if with_seed && m.w != 0.0 {
        s.push_str(&format!("_S{}", m.disorder_seed));
    }
    s
}

fn realizations(cfg: &RunConfig, spec: &ModelSpec) -> Vec<ModelSpec> {
    cfg.realization_seeds(spec)
        .into_iter()
        .map(|seed| {
            let mut s = spec.clone();
            s.disorder_seed = seed;
            s
        })
        .collect()
}

fn plan(command: Command, cfg: &RunConfig) -> Vec<Job> {
    let mut jobs = Vec::new();
    for point in cfg.model_points() {
        for model in realizations(cfg, &point) {
            match command {
                Command::Estimate | Command::Scaling => jobs.push(Job::Eth { model }),
                Command::Equipartition => jobs.push(Job::Curve { model }),
                Command::Oracle => jobs.push(Job::Oracle { model }),
                Command::Relax => {
                    for sign in [1i8, -1] {
                        jobs.push(Job::Epsilon { model: model.clone(), sign });
                        for sample in 0..cfg.sweep.mod_seeds as u64 {
                            jobs.push(Job::Trace { model: model.clone(), sign, sample });
                        }
                    }
                }
            }
        }
    }
    jobs
}

/// The configuration sections a job's result depends on.
fn point_hash(job: &Job, cfg: &RunConfig) -> String {
    let mut v = serde_json::json!({
        "job": job,
        "engine": cfg.engine,
        "filter": cfg.filter,
    });
    match job {
        Job::Eth { .. } => v["estimator"] = serde_json::to_value(cfg.estimator).unwrap(),
        Job::Curve { .. } => {
            v["n_samples"] = cfg.estimator.n_samples.into();
            v["e_centers"] = serde_json::to_value(&cfg.sweep.e_centers).unwrap();
        }
        Job::Trace { .. } => v["mod"] = serde_json::to_value(cfg.mod_cfg).unwrap(),
        Job::Epsilon { .. } => {
            v["mod"] = serde_json::to_value(cfg.mod_cfg).unwrap();
            v["n_samples"] = cfg.estimator.n_samples.into();
        }
        Job::Oracle { .. } => {}
    }
    hash_json(&v)
}

fn provenance(command: Command, cfg: &RunConfig, job: &Job, config_hash: &str) -> Provenance {
    let m = job.model();
    Provenance {
        command: command.as_str().into(),
        config_hash: config_hash.into(),
        point_hash: point_hash(job, cfg),
        model: Some(m.clone()),
        master_seed: cfg.engine.master_seed,
        disorder_seed: (m.w != 0.0).then_some(m.disorder_seed),
        sample_indices: job.sample_indices(cfg),
        code_version: env!("CARGO_PKG_VERSION").into(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EthPayload {
    pub spins: usize,
    pub report: EthReport,
    /// Block-resolved `Σ²` of the oracle; absent for typicality estimates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2_block: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvePayload {
    pub sigma: f64,
    pub points: Vec<CurvePoint>,
    /// `(N_L − N_R)/(N_L + N_R − 2)` for chain geometries.
    pub prediction_coefficient: Option<f64>,
    /// Least-squares slope of `Ā(Ē)` over the curve.
    pub fitted_slope: f64,
    /// `|fitted_slope|·σ`.
    pub slope_width: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TracePayload {
    pub sign: i8,
    pub d0_target: f64,
    pub energy_mean: f64,
    pub energy_variance: f64,
    pub displacement_missed: bool,
    pub trace: RelaxationTrace,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsilonPayload {
    pub sign: i8,
    pub d0_target: f64,
    pub epsilon_bound: Estimate,
}

fn compute(job: &Job, cfg: &RunConfig) -> anyhow::Result<(serde_json::Value, Option<Table>)> {
    let model = job.model();
    let engine: EngineConfig = cfg.engine.clone();
    let window = cfg.filter.window();
    match job {
        Job::Oracle { model } => {
            let graph = build_geometry(model)?;
            check_size_cap(graph.n_sites, DEFAULT_SIZE_CAP)?;
            let dense = dense_model(&graph, &sample_disorder(model));
            let ed = exact_diagonalize(&dense.h)?;
            let exact = exact_eth_params(&ed, &dense.d, window);
            let payload = EthPayload {
                spins: graph.n_sites,
                report: exact.report,
                sigma2_block: Some(exact.sigma2_block),
            };
            return Ok((serde_json::to_value(payload)?, None));
        }
        _ => {}
    }
    let (graph, _, ops) = build_model(model)?;
    let ctx = TypicalityContext::new(&ops.h, &ops.d, &engine, cfg.filter.cheb_tol);
    match job {
        Job::Eth { .. } => {
            let report = estimate_eth(&ctx, window, &cfg.estimator)?;
            let payload = EthPayload { spins: graph.n_sites, report, sigma2_block: None };
            Ok((serde_json::to_value(payload)?, None))
        }
        Job::Curve { model } => {
            let points = estimate_abar_curve(&ctx, &cfg.sweep.e_centers, window.sigma, cfg.estimator.n_samples)?;
            let coefficient = (model.geometry != Geometry::Lattice2d)
                .then(|| equipartition_prediction(model.left_sites(), model.right_sites(), 1.0));
            let mut table = Table::new(&["e_center", "d_eff", "d_eff_stderr", "a_bar", "a_bar_stderr", "prediction"]);
            for p in &points {
                table.rows.push(vec![
                    p.e_center,
                    p.d_eff.value,
                    p.d_eff.stderr,
                    p.a_bar.value,
                    p.a_bar.stderr,
                    coefficient.map_or(f64::NAN, |c| c * p.e_center),
                ]);
            }
            let fitted_slope = if points.len() >= 2 {
                let x: Vec<f64> = points.iter().map(|p| p.e_center).collect();
                let y: Vec<f64> = points.iter().map(|p| p.a_bar.value).collect();
                fit_line(&x, &y).slope
            } else {
                f64::NAN
            };
            let payload = CurvePayload {
                sigma: window.sigma,
                points,
                prediction_coefficient: coefficient,
                fitted_slope,
                slope_width: fitted_slope.abs() * window.sigma,
            };
            Ok((serde_json::to_value(payload)?, Some(table)))
        }
        Job::Trace { model, sign, sample } => {
            let d0 = if *sign > 0 { cfg.mod_cfg.d0 } else { cfg.mod_cfg.d0.flipped() };
            let mut mod_cfg = cfg.mod_cfg;
            mod_cfg.d0 = d0;
            let spec = mod_cfg.spec(window, model.n_left);
            let d_bounds = engine.bounds_for(&ops.d);
            let prep = ModPreparer::new(ctx, d_bounds, spec)?;
            let state = prep.prepare(*sample)?;
            let trace = relaxation_trace(&prep, &state, &cfg.mod_cfg.grid(), cfg.mod_cfg.tail_fraction)?;
            let mut table = Table::new(&["t", "d_t", "r_t"]);
            for i in 0..trace.times.len() {
                table.rows.push(vec![trace.times[i], trace.d_t[i], trace.r_t[i]]);
            }
            let payload = TracePayload {
                sign: *sign,
                d0_target: spec.d0,
                energy_mean: state.energy_mean,
                energy_variance: state.energy_variance,
                displacement_missed: state.displacement_missed,
                trace,
            };
            Ok((serde_json::to_value(payload)?, Some(table)))
        }
        Job::Epsilon { model, sign } => {
            let d0 = if *sign > 0 { cfg.mod_cfg.d0 } else { cfg.mod_cfg.d0.flipped() };
            let mut mod_cfg = cfg.mod_cfg;
            mod_cfg.d0 = d0;
            let spec = mod_cfg.spec(window, model.n_left);
            let prep = ModPreparer::new(ctx, engine.bounds_for(&ops.d), spec)?;
            let eps = epsilon_bound(&prep, cfg.estimator.n_samples)?;
            let payload = EpsilonPayload { sign: *sign, d0_target: spec.d0, epsilon_bound: eps };
            Ok((serde_json::to_value(payload)?, None))
        }
        Job::Oracle { .. } => unreachable!("handled above"),
    }
}

fn run_job(command: Command, cfg: &RunConfig, job: &Job, config_hash: &str) -> Output {
    let prov = provenance(command, cfg, job, config_hash);
    let id = job.id();
    match compute(job, cfg) {
        Ok((payload, table)) => Output {
            record: ResultRecord {
                schema: crate::records::SCHEMA_VERSION.into(),
                kind: job.kind(),
                id,
                status: Status::Ok,
                payload,
                provenance: prov,
            },
            table,
        },
        Err(e) => {
            warn!("{id} failed: {e:#}");
            Output { record: ResultRecord::failed(job.kind(), id, &format!("{e:#}"), prov), table: None }
        }
    }
}

/// Runs a subcommand over the sweep, writing records under `out`.
pub fn run(command: Command, cfg: &RunConfig, out: &Path, threads: usize) -> anyhow::Result<RunSummary> {
    let mut dir = OutputDir::create(out, cfg)?;
    let config_hash = cfg.hash();
    let jobs = plan(command, cfg);
    let mut done: BTreeMap<String, ResultRecord> = BTreeMap::new();
    let mut pending = Vec::new();
    for job in jobs {
        let hash = point_hash(&job, cfg);
        match dir.completed(&job.id(), &hash) {
            Some(rec) => {
                done.insert(rec.id.clone(), rec);
            }
            None => pending.push(job),
        }
    }
    let resumed = done.len();
    info!("{}: {} jobs, {} already complete", command.as_str(), resumed + pending.len(), resumed);

    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?;
    let (tx, rx) = mpsc::channel::<Output>();
    let mut written = 0;
    let mut failed = 0;
    std::thread::scope(|s| -> anyhow::Result<()> {
        let config_hash = &config_hash;
        let pending = &pending;
        s.spawn(move || {
            pool.install(|| {
                pending.par_iter().for_each_with(tx, |tx, job| {
                    let _ = tx.send(run_job(command, cfg, job, config_hash));
                })
            })
        });
        for output in rx {
            dir.write(&output)?;
            written += 1;
            if output.record.status == Status::Failed {
                failed += 1;
            }
            done.insert(output.record.id.clone(), output.record);
        }
        Ok(())
    })?;

    for output in aggregates(command, cfg, &done, &config_hash) {
        if output.record.status == Status::Failed {
            failed += 1;
        }
        dir.write(&output)?;
        written += 1;
    }
    let manifest = dir.finish(command.as_str(), cfg)?;
    Ok(RunSummary { written, resumed, failed, manifest })
}

/// Mean over realizations with the two error sources kept apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averaged {
    pub mean: f64,
    /// Standard error of the mean across realizations.
    pub realization_spread: f64,
    /// Typicality standard errors combined over realizations.
    pub typicality_stderr: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DisorderAverage {
    pub realizations: usize,
    pub failed_realizations: usize,
    pub disorder_seeds: Vec<u64>,
    pub quantities: BTreeMap<String, Averaged>,
}

fn average(reports: &[EthReport]) -> BTreeMap<String, Averaged> {
    let fields: [(&str, fn(&EthReport) -> Estimate); 7] = [
        ("d_eff", |r| r.d_eff),
        ("a_bar", |r| r.a_bar),
        ("sigma2", |r| r.sigma2),
        ("slope", |r| r.slope),
        ("sigma_prime", |r| r.sigma_prime),
        ("delta2", |r| r.delta2),
        ("v", |r| r.v),
    ];
    let n = reports.len() as f64;
    fields
        .iter()
        .map(|(name, get)| {
            let values: Vec<f64> = reports.iter().map(|r| get(r).value).collect();
            let m = mean_stderr(&values);
            let typ = reports.iter().map(|r| get(r).stderr.powi(2)).sum::<f64>().sqrt() / n;
            (
                name.to_string(),
                Averaged { mean: m.value, realization_spread: m.stderr, typicality_stderr: typ },
            )
        })
        .collect()
}

fn ok_payload<T: for<'de> Deserialize<'de>>(rec: &ResultRecord) -> Option<T> {
    if rec.status != Status::Ok {
        return None;
    }
    serde_json::from_value(rec.payload.clone()).ok()
}

fn aggregate_provenance(command: Command, cfg: &RunConfig, model: Option<ModelSpec>, inputs: &[String], config_hash: &str) -> Provenance {
    Provenance {
        command: command.as_str().into(),
        config_hash: config_hash.into(),
        point_hash: hash_json(&serde_json::json!({ "inputs": inputs })),
        model,
        master_seed: cfg.engine.master_seed,
        disorder_seed: None,
        sample_indices: vec![],
        code_version: env!("CARGO_PKG_VERSION").into(),
    }
}

/// Per-point typicality report, averaged over disorder when there is any.
struct PointResult {
    model: ModelSpec,
    spins: usize,
    d_eff: f64,
    sigma_prime: f64,
    sigma_prime_stderr: f64,
    v: f64,
}

fn eth_points(cfg: &RunConfig, done: &BTreeMap<String, ResultRecord>) -> (Vec<PointResult>, Vec<(ModelSpec, DisorderAverage, Vec<String>)>) {
    let mut points = Vec::new();
    let mut averages = Vec::new();
    for point in cfg.model_points() {
        let reals = realizations(cfg, &point);
        let ids: Vec<String> = reals.iter().map(|m| Job::Eth { model: m.clone() }.id()).collect();
        let payloads: Vec<EthPayload> = ids.iter().filter_map(|id| done.get(id)).filter_map(ok_payload).collect();
        if payloads.is_empty() {
            continue;
        }
        let reports: Vec<EthReport> = payloads.iter().map(|p| p.report.clone()).collect();
        if point.w != 0.0 {
            let q = average(&reports);
            let combined = |a: &Averaged| a.realization_spread.hypot(a.typicality_stderr);
            points.push(PointResult {
                model: point.clone(),
                spins: payloads[0].spins,
                d_eff: q["d_eff"].mean,
                sigma_prime: q["sigma_prime"].mean,
                sigma_prime_stderr: combined(&q["sigma_prime"]),
                v: q["v"].mean,
            });
            averages.push((
                point.clone(),
                DisorderAverage {
                    realizations: reports.len(),
                    failed_realizations: reals.len() - reports.len(),
                    disorder_seeds: reals.iter().map(|m| m.disorder_seed).collect(),
                    quantities: q,
                },
                ids,
            ));
        } else {
            let r = &reports[0];
            points.push(PointResult {
                model: point.clone(),
                spins: payloads[0].spins,
                d_eff: r.d_eff.value,
                sigma_prime: r.sigma_prime.value,
                sigma_prime_stderr: r.sigma_prime.stderr,
                v: r.v.value,
            });
        }
    }
    (points, averages)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingEntry {
    pub n_left: usize,
    pub spins: usize,
    pub point: ScalingPoint,
    pub v: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingPayload {
    pub points: Vec<ScalingEntry>,
    pub fit: Option<ScalingFit>,
    pub fit_error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignSummary {
    pub sign: i8,
    pub d0_target: f64,
    pub traces: usize,
    pub d0_measured: Estimate,
    /// Tail mean of `r(t)` over traces.
    pub long_time_value: Estimate,
    /// Tail mean of `d(t)` over traces.
    pub long_time_d: Estimate,
    pub tail_mean_abs_r: Estimate,
    pub displacement_fraction: f64,
    pub epsilon_bound: Option<Estimate>,
    /// Trace-averaged `r(t)`.
    pub mean_r_t: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelaxationSummary {
    pub times: Vec<f64>,
    pub signs: Vec<SignSummary>,
    /// `max_t |r₊(t) − r₋(t)|` of the trace-averaged curves.
    pub max_sign_deviation: Option<f64>,
}

fn summarize_sign(
    cfg: &RunConfig,
    model: &ModelSpec,
    sign: i8,
    done: &BTreeMap<String, ResultRecord>,
) -> Option<(SignSummary, Vec<f64>, Vec<String>)> {
    let mut ids = Vec::new();
    let mut payloads: Vec<TracePayload> = Vec::new();
    for sample in 0..cfg.sweep.mod_seeds as u64 {
        let id = Job::Trace { model: model.clone(), sign, sample }.id();
        if let Some(p) = done.get(&id).and_then(ok_payload::<TracePayload>) {
            payloads.push(p);
        }
        ids.push(id);
    }
    if payloads.is_empty() {
        return None;
    }
    let eps_id = Job::Epsilon { model: model.clone(), sign }.id();
    let eps = done.get(&eps_id).and_then(ok_payload::<EpsilonPayload>).map(|p| p.epsilon_bound);
    ids.push(eps_id);
    let est = |f: &dyn Fn(&RelaxationTrace) -> f64| {
        let v: Vec<f64> = payloads.iter().map(|p| f(&p.trace)).collect();
        if v.len() == 1 {
            Estimate { value: v[0], stderr: f64::NAN }
        } else {
            mean_stderr(&v)
        }
    };
    let d0m = est(&|t| t.d0_measured);
    let lt_d = est(&|t| t.long_time_d);
    let n = payloads[0].trace.times.len();
    let mean_r: Vec<f64> = (0..n)
        .map(|i| payloads.iter().map(|p| p.trace.r_t[i]).sum::<f64>() / payloads.len() as f64)
        .collect();
    let summary = SignSummary {
        sign,
        d0_target: payloads[0].d0_target,
        traces: payloads.len(),
        d0_measured: d0m,
        long_time_value: est(&|t| t.long_time_value),
        long_time_d: lt_d,
        tail_mean_abs_r: est(&|t| t.tail_mean_abs_r),
        displacement_fraction: displacement_fraction(d0m.value, model.n_left, lt_d.value),
        epsilon_bound: eps,
        mean_r_t: mean_r.clone(),
    };
    Some((summary, payloads[0].trace.times.clone(), ids))
}

fn aggregates(command: Command, cfg: &RunConfig, done: &BTreeMap<String, ResultRecord>, config_hash: &str) -> Vec<Output> {
    let mut out = Vec::new();
    match command {
        Command::Estimate | Command::Scaling => {
            let (points, averages) = eth_points(cfg, done);
            for (model, avg, ids) in averages {
                let prov = aggregate_provenance(command, cfg, Some(model.clone()), &ids, config_hash);
                let id = format!("eth-{}-average", model_label(&model, false));
                out.push(Output { record: ResultRecord::ok(RecordKind::EthReport, id, &avg, prov), table: None });
            }
            if command == Command::Scaling {
                out.extend(scaling_records(cfg, &points, config_hash));
            }
        }
        Command::Relax => {
            for point in cfg.model_points() {
                for model in realizations(cfg, &point) {
                    let mut signs = Vec::new();
                    let mut ids = Vec::new();
                    let mut times = Vec::new();
                    for sign in [1i8, -1] {
                        if let Some((s, t, i)) = summarize_sign(cfg, &model, sign, done) {
                            signs.push(s);
                            times = t;
                            ids.extend(i);
                        }
                    }
                    if signs.is_empty() {
                        continue;
                    }
                    let max_sign_deviation = (signs.len() == 2).then(|| {
                        signs[0]
                            .mean_r_t
                            .iter()
                            .zip(&signs[1].mean_r_t)
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0, f64::max)
                    });
                    let summary = RelaxationSummary { times, signs, max_sign_deviation };
                    let prov = aggregate_provenance(command, cfg, Some(model.clone()), &ids, config_hash);
                    let id = format!("relax-{}", model_label(&model, true));
                    out.push(Output {
                        record: ResultRecord::ok(RecordKind::RelaxationSummary, id, &summary, prov),
                        table: None,
                    });
                }
            }
        }
        Command::Equipartition | Command::Oracle => {}
    }
    out
}

fn scaling_records(cfg: &RunConfig, points: &[PointResult], config_hash: &str) -> Vec<Output> {
    // group sizes that share every other parameter
    let mut groups: BTreeMap<String, Vec<&PointResult>> = BTreeMap::new();
    for p in points {
        let mut key_model = p.model.clone();
        key_model.n_left = 0;
        key_model.n_right = None;
        groups.entry(model_label(&key_model, false).replace("_NL0_NR0", "")).or_default().push(p);
    }
    groups
        .into_iter()
        .map(|(key, mut members)| {
            members.sort_by_key(|p| p.model.n_left);
            let entries: Vec<ScalingEntry> = members
                .iter()
                .map(|p| ScalingEntry {
                    n_left: p.model.n_left,
                    spins: p.spins,
                    point: ScalingPoint { d_eff: p.d_eff, sigma_prime: p.sigma_prime, stderr: p.sigma_prime_stderr },
                    v: p.v,
                })
                .collect();
            let pts: Vec<ScalingPoint> = entries.iter().map(|e| e.point).collect();
            let (fit, fit_error) = match fit_power_law(&pts) {
                Ok(f) => (Some(f), None),
                Err(e) => {
                    warn!("scaling fit for {key} refused: {e}");
                    (None, Some(e.to_string()))
                }
            };
            let ids: Vec<String> = members.iter().map(|p| model_label(&p.model, false)).collect();
            let prov = aggregate_provenance(Command::Scaling, cfg, None, &ids, config_hash);
            let payload = ScalingPayload { points: entries, fit, fit_error };
            Output {
                record: ResultRecord::ok(RecordKind::ScalingFit, format!("scaling-{key}"), &payload, prov),
                table: None,
            }
        })
        .collect()
}
