//! Seeded trials, per-trial records and summaries.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{Context, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use sparse_recovery::combinatorial::{
    certify_disjunct, kautz_singleton, random_list_disjunct, verify_disjunct, verify_list_disjunct,
    DEFAULT_VERIFY_BUDGET,
};
use sparse_recovery::design::{NoisePolicy, Placement};
use sparse_recovery::heavy_hitters::{HhConfig, HhSketch, StreamUpdate};
use sparse_recovery::l2_weak::{WeakParams, WeakSystem};
use sparse_recovery::noise_tolerant::{NoisyDesign, NoisyParams, SplitDesign, VotingParams, VotingReduction};
use sparse_recovery::pipelines::{ExactPipeline, ForEachDesign, ForEachParams, ListPipeline, PipelineParams};
use sparse_recovery::rng;
use sparse_recovery::util::norm_without_top;

use crate::config::{Consts, ExperimentConfig, PlacementKind, Scheme};
use crate::stream_io::read_stream;
use crate::workload::{generate_stream, random_support, replay, spikes_gaussian_tail, DEFAULT_SKEW};

/// Bumped whenever the CSV columns change.
pub const CSV_SCHEMA: u32 = 1;

pub const CSV_HEADER: &str = "schema,trial,seed,success,superset,bound_ok,check_ok,accuracy_ok,precision_ok,\
list_size,candidates,support_size,rows,inserts,tests_read,work,metric,wall_us";

/// Universes up to this size get their disjunct design certified in `gt-exact`.
pub const CERTIFY_MAX_N: u64 = 1 << 10;

mod tags {
    pub const TRIAL: u64 = 0x1000;
    pub const DESIGN: u64 = 0x1001;
    pub const SUPPORT: u64 = 0x1002;
    pub const NOISE: u64 = 0x1003;
    pub const RACE: u64 = 0x1004;
    pub const WORKLOAD: u64 = 0x1005;
}

/// Seed of trial `t` under a master seed.
pub fn trial_seed(master: u64, t: u64) -> u64 {
    rng::derive(master, tags::TRIAL, t)
}

/// One trial. Check columns are `None` where they do not apply to the scheme.
///
/// * `superset`: every true item is in the output (recall for hh).
/// * `bound_ok`: output size within the scheme's bound.
/// * `check_ok`: deterministic side checks (oracle agreement, certified design,
///   conservation and work bound, estimate lower bound, race, zero residual).
/// * `accuracy_ok`: exact equality, estimate upper slack, or residual bound.
/// * `precision_ok`: no light item survives (hh-est).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub success: bool,
    pub superset: Option<bool>,
    pub bound_ok: Option<bool>,
    pub check_ok: Option<bool>,
    pub accuracy_ok: Option<bool>,
    pub precision_ok: Option<bool>,
    pub list_size: u64,
    /// Size of the intermediate candidate list, where there is one.
    pub candidates: u64,
    pub support_size: u64,
    pub rows: u64,
    pub inserts: u64,
    pub tests_read: u64,
    /// Decoder inserts, or worst per-update flush steps for hh.
    pub work: u64,
    pub metric: Option<f64>,
    pub wall_us: Option<u64>,
}

impl TrialRecord {
    fn new(trial: u64, seed: u64) -> Self {
        Self {
            trial,
            seed,
            success: false,
            superset: None,
            bound_ok: None,
            check_ok: None,
            accuracy_ok: None,
            precision_ok: None,
            list_size: 0,
            candidates: 0,
            support_size: 0,
            rows: 0,
            inserts: 0,
            tests_read: 0,
            work: 0,
            metric: None,
            wall_us: None,
        }
    }

    fn flags(&self) -> [Option<bool>; 5] {
        [self.superset, self.bound_ok, self.check_ok, self.accuracy_ok, self.precision_ok]
    }

    pub fn csv_line(&self) -> String {
        let b = |v: Option<bool>| v.map_or(String::new(), |x| (x as u8).to_string());
        format!(
            "{CSV_SCHEMA},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.trial,
            self.seed,
            self.success as u8,
            b(self.superset),
            b(self.bound_ok),
            b(self.check_ok),
            b(self.accuracy_ok),
            b(self.precision_ok),
            self.list_size,
            self.candidates,
            self.support_size,
            self.rows,
            self.inserts,
            self.tests_read,
            self.work,
            self.metric.map_or(String::new(), |m| m.to_string()),
            self.wall_us.map_or(String::new(), |w| w.to_string()),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantiles {
    pub min: u64,
    pub p50: u64,
    pub p90: u64,
    pub p99: u64,
    pub max: u64,
}

/// Nearest-rank quantile of sorted data.
fn rank(sorted: &[u64], q: f64) -> u64 {
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

impl Quantiles {
    pub fn of(values: impl IntoIterator<Item = u64>) -> Self {
        let mut v: Vec<u64> = values.into_iter().collect();
        v.sort_unstable();
        if v.is_empty() {
            return Self { min: 0, p50: 0, p90: 0, p99: 0, max: 0 };
        }
        Self { min: v[0], p50: rank(&v, 0.5), p90: rank(&v, 0.9), p99: rank(&v, 0.99), max: v[v.len() - 1] }
    }
}

/// Fraction of trials where a check held, over the trials where it applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rates {
    pub superset: Option<f64>,
    pub bound_ok: Option<f64>,
    pub check_ok: Option<f64>,
    pub accuracy_ok: Option<f64>,
    pub precision_ok: Option<f64>,
}

fn rate(records: &[TrialRecord], pick: impl Fn(&TrialRecord) -> Option<bool>) -> Option<f64> {
    let seen: Vec<bool> = records.iter().filter_map(pick).collect();
    (!seen.is_empty()).then(|| seen.iter().filter(|&&b| b).count() as f64 / seen.len() as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub csv_schema: u32,
    pub config: ExperimentConfig,
    pub e0: u64,
    pub e1: u64,
    pub success_rate: f64,
    pub rates: Rates,
    pub list_size: Quantiles,
    pub median_inserts: u64,
    pub median_tests_read: u64,
    pub median_rows: u64,
    pub max_work: u64,
    pub median_wall_us: Option<u64>,
}

impl Summary {
    fn of(config: &ExperimentConfig, records: &[TrialRecord]) -> Self {
        let median = |f: fn(&TrialRecord) -> u64| Quantiles::of(records.iter().map(f)).p50;
        Self {
            csv_schema: CSV_SCHEMA,
            config: config.clone(),
            e0: config.e0_or_default(),
            e1: config.e1_or_default(),
            success_rate: records.iter().filter(|r| r.success).count() as f64 / records.len().max(1) as f64,
            rates: Rates {
                superset: rate(records, |r| r.superset),
                bound_ok: rate(records, |r| r.bound_ok),
                check_ok: rate(records, |r| r.check_ok),
                accuracy_ok: rate(records, |r| r.accuracy_ok),
                precision_ok: rate(records, |r| r.precision_ok),
            },
            list_size: Quantiles::of(records.iter().map(|r| r.list_size)),
            median_inserts: median(|r| r.inserts),
            median_tests_read: median(|r| r.tests_read),
            median_rows: median(|r| r.rows),
            max_work: records.iter().map(|r| r.work).max().unwrap_or(0),
            median_wall_us: config.timing.then(|| median(|r| r.wall_us.unwrap_or(0))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub summary: Summary,
    pub records: Vec<TrialRecord>,
}

impl Report {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.records {
            writeln!(w, "{}", r.csv_line())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is ascii")
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }
}

/// Scheme constants resolved once, before any trial runs.
enum Prepared {
    List(PipelineParams),
    Exact { params: PipelineParams, ks: bool },
    Noisy { params: NoisyParams, race: bool },
    Voting(VotingParams),
    Foreach(ForEachParams),
    Hh { config: HhConfig, skew: f64, probes: u64, stream: Option<Arc<(Vec<StreamUpdate>, Vec<f64>)>> },
    Weak { params: WeakParams, tail: f64 },
    Verify { c1: u64, ks: bool, list: u64 },
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let c = Consts::new(&cfg.consts);
    Ok(match cfg.scheme {
        Scheme::GtList => Prepared::List(c.pipeline()?),
        Scheme::GtExact => Prepared::Exact { params: c.pipeline()?, ks: c.flag("ks", false)? },
        Scheme::GtNoisyFp => Prepared::Noisy { params: c.noisy()?, race: c.flag("race", true)? },
        Scheme::GtVotingFn => Prepared::Voting(c.voting()?),
        Scheme::GtForeach => Prepared::Foreach(c.foreach()?),
        Scheme::Hh | Scheme::HhEst => {
            let stream = match &cfg.stream_file {
                Some(path) => {
                    let updates = read_stream(path)?;
                    let x = replay(cfg.n, &updates)
                        .with_context(|| format!("stream {}", path.display()))?
                        .with_context(|| format!("stream {} drives some coordinate negative", path.display()))?;
                    Some(Arc::new((updates, x)))
                }
                None => None,
            };
            Prepared::Hh {
                config: c.hh(cfg.scheme == Scheme::HhEst)?,
                skew: c.f64("skew", DEFAULT_SKEW)?,
                probes: c.u64("probes", 32)?,
                stream,
            }
        }
        Scheme::L2Weak => Prepared::Weak { params: c.weak()?, tail: c.f64("tail", 1.0)? },
        Scheme::Verify => Prepared::Verify {
            c1: c.u64("c1", sparse_recovery::combinatorial::DEFAULT_C1)?,
            ks: c.flag("ks", false)?,
            list: c.u64("list", 2 * cfg.k)?,
        },
    })
}

/// Runs every trial (in parallel when a pool is available) and summarizes.
/// Output depends only on the configuration: trial seeds are split from the
/// master seed up front and records are kept in trial order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let prepared = prepare(cfg)?;
    let run = || -> Result<Vec<TrialRecord>> {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let seed = trial_seed(cfg.seed, t);
                let start = Instant::now();
                let mut rec = run_trial(cfg, &prepared, TrialRecord::new(t, seed))
                    .with_context(|| format!("trial {t} (seed {seed})"))?;
                if cfg.timing {
                    rec.wall_us = Some(start.elapsed().as_micros() as u64);
                }
                Ok(rec)
            })
            .collect()
    };
    let records = match cfg.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?.install(run)?,
        None => run()?,
    };
    Ok(Report { summary: Summary::of(cfg, &records), records })
}

fn contains_all(list: &[u64], items: &[u64]) -> bool {
    items.iter().all(|i| list.binary_search(i).is_ok())
}

fn placement(cfg: &ExperimentConfig, support: &[u64]) -> Placement {
    match cfg.placement {
        PlacementKind::Uniform => Placement::Uniform,
        PlacementKind::Adversarial => Placement::AdversarialNearDefectives(support.to_vec()),
    }
}

/// `4k·log2(n/k) + k`.
pub fn ident_list_bound(k: u64, n: u64) -> u64 {
    4 * k * (n / k).trailing_zeros() as u64 + k
}

fn run_trial(cfg: &ExperimentConfig, prepared: &Prepared, mut rec: TrialRecord) -> Result<TrialRecord> {
    let (k, n) = (cfg.k, cfg.n);
    let design_seed = rng::derive(rec.seed, tags::DESIGN, 0);
    let noise_seed = rng::derive(rec.seed, tags::NOISE, 0);
    let support = random_support(n, k, &mut rng::stream(rec.seed, tags::SUPPORT, 0));
    rec.support_size = support.len() as u64;

    match prepared {
        Prepared::List(params) => {
            let p = ListPipeline::build(k, n, design_seed, params)?;
            let mut y = p.measure(&support)?;
            let e0 = cfg.e0_or_default() as usize;
            if e0 > 0 {
                let policy = NoisePolicy { fp_per_level: e0, fn_total: 0, placement: placement(cfg, &support), seed: noise_seed };
                y.ident = p.ident.inject_noise(&y.ident, &policy)?;
            }
            let ident_list = p.ident.identify(&y.ident)?;
            let (out, stats) = p.decode_list_with_stats(&y)?;
            let naive = p.filter.naive_decode(&y.filter)?;
            let oracle: Vec<u64> = ident_list.iter().copied().filter(|i| naive.binary_search(i).is_ok()).collect();
            rec.superset = Some(contains_all(&ident_list, &support) && contains_all(&out, &support));
            rec.bound_ok = Some(ident_list.len() as u64 <= ident_list_bound(k, n));
            rec.check_ok = Some(out == oracle);
            rec.list_size = out.len() as u64;
            rec.candidates = ident_list.len() as u64;
            rec.rows = p.rows() as u64;
            rec.inserts = stats.prefixes_inserted;
            rec.tests_read = stats.tests_read;
        }
        Prepared::Exact { params, ks } => {
            let p = if *ks {
                ExactPipeline::with_disjunct(ListPipeline::build(k, n, design_seed, params)?, kautz_singleton(k, n)?)?
            } else {
                ExactPipeline::build(k, n, design_seed, params)?
            };
            let (out, stats) = p.decode_exact_with_stats(&p.measure(&support)?)?;
            rec.superset = Some(contains_all(&out, &support));
            rec.bound_ok = Some(out.len() as u64 <= k);
            rec.check_ok = (n <= CERTIFY_MAX_N).then(|| certify_disjunct(&p.disjunct, k));
            rec.accuracy_ok = Some(out == support);
            rec.list_size = out.len() as u64;
            rec.rows = p.rows() as u64;
            rec.inserts = stats.prefixes_inserted;
            rec.tests_read = stats.tests_read;
        }
        Prepared::Noisy { params, race } => {
            let e0 = cfg.e0_or_default();
            let d = NoisyDesign::with_params(k, n, cfg.alpha, design_seed, params)?;
            let y = d.inject_noise(&d.measure(&support)?, e0 as usize, 0, &placement(cfg, &support), noise_seed)?;
            let (list, stats) = d.identify_with_stats(&y)?;
            rec.superset = Some(contains_all(&list, &support));
            rec.bound_ok = Some(list.len() as u64 <= d.list_bound());
            if *race {
                // All noise is dumped into the first copy, aimed at the defectives.
                let sd = SplitDesign::with_params(k, n, e0, cfg.alpha, rng::derive(rec.seed, tags::RACE, 0), params)?;
                let mut ys = sd.measure(&support)?;
                let adversary = Placement::AdversarialNearDefectives(support.clone());
                ys[0] = sd.copies()[0].inject_noise(&ys[0], e0 as usize, 0, &adversary, noise_seed)?;
                rec.check_ok = Some(match sd.decode_race(&ys) {
                    Ok(r) => contains_all(&r.list, &support) && r.list.len() as u64 <= sd.copies()[r.winner].list_bound(),
                    Err(sparse_recovery::Error::RaceExhausted { .. }) => false,
                    Err(e) => return Err(e.into()),
                });
            }
            rec.list_size = list.len() as u64;
            rec.rows = d.rows() as u64;
            rec.inserts = stats.prefixes_inserted;
            rec.tests_read = stats.tests_read;
        }
        Prepared::Voting(params) => {
            let e1 = cfg.e1_or_default();
            let v = VotingReduction::with_params(k, n, e1, design_seed, params)?;
            let y = v.inject_false_negatives(&v.measure(&support)?, e1 as usize, noise_seed)?;
            let out = v.decode_voting(&y)?;
            rec.superset = Some(contains_all(&out, &support));
            rec.bound_ok = Some(out.len() as u64 <= k);
            rec.accuracy_ok = Some(out == support);
            rec.list_size = out.len() as u64;
            rec.candidates = v.vote(&y)?.len() as u64;
            rec.rows = v.rows() as u64;
        }
        Prepared::Foreach(params) => {
            let d = ForEachDesign::build(k, n, design_seed, params)?;
            let (out, stats) = d.decode_foreach_with_stats(&d.measure(&support)?)?;
            rec.superset = Some(contains_all(&out, &support));
            rec.bound_ok = Some(out.len() as u64 <= k);
            rec.accuracy_ok = Some(out == support);
            rec.list_size = out.len() as u64;
            rec.rows = d.rows() as u64;
            rec.inserts = stats.prefixes_inserted;
            rec.tests_read = stats.tests_read;
        }
        Prepared::Hh { config, skew, probes, stream } => {
            let generated;
            let (updates, x) = match stream {
                Some(shared) => (&shared.0, &shared.1),
                None => {
                    let mut r = rng::stream(rec.seed, tags::WORKLOAD, 0);
                    generated = generate_stream(n, k, cfg.dist, *skew, &mut r)?;
                    (&generated.0, &generated.1)
                }
            };
            hh_trial(cfg, config, *probes, updates, x, design_seed, &mut rec)?;
        }
        Prepared::Weak { params, tail } => {
            let sys = WeakSystem::with_params(k, n, cfg.eps, cfg.delta, design_seed, params)?;
            let mut r = rng::stream(rec.seed, tags::WORKLOAD, 0);
            let (x, spikes, spike_support) = spikes_gaussian_tail(n, k, *tail, &mut r);
            rec.support_size = spike_support.len() as u64;
            let m = sys.measure(&x)?;
            let (candidates, stats) = sys.design.identify_with_stats(&m.ident)?;
            let out = sys.recover(&m)?;
            let resid = residual(&x, &out);
            let base = norm_without_top(&x, k as usize);
            let err = norm_without_top(&resid, (k / 2) as usize);
            rec.accuracy_ok = Some(err <= (1.0 + cfg.eps) * base);
            rec.bound_ok = Some(out.len() as u64 <= 2 * k);
            rec.metric = Some(if base > 0.0 { err / base } else { err });
            if sys.collision_free(&spike_support)? {
                let exact = sys.recover(&sys.measure(&spikes)?)?;
                rec.check_ok = Some(exact.len() as u64 <= 2 * k && norm_without_top(&residual(&spikes, &exact), 0) == 0.0);
            }
            rec.list_size = out.len() as u64;
            rec.candidates = candidates.len() as u64;
            rec.rows = sys.rows() as u64;
            rec.inserts = stats.prefixes_inserted;
            rec.tests_read = stats.tests_read;
        }
        Prepared::Verify { c1, ks, list } => {
            let (design, verdict) = if *ks {
                let d = kautz_singleton(k, n)?;
                let v = verify_disjunct(&d, k, DEFAULT_VERIFY_BUDGET)?;
                (d, v)
            } else {
                let d = random_list_disjunct(k, n, *c1, design_seed)?;
                let v = verify_list_disjunct(&d, k, *list, DEFAULT_VERIFY_BUDGET)?;
                (d, v)
            };
            rec.support_size = 0;
            rec.check_ok = Some(verdict);
            rec.rows = design.rows() as u64;
            rec.list_size = design.max_column_sparsity() as u64;
        }
    }
    if !matches!(prepared, Prepared::Hh { .. }) {
        rec.work = rec.inserts;
    }
    rec.success = match cfg.scheme {
        Scheme::GtExact | Scheme::GtVotingFn | Scheme::GtForeach => rec.accuracy_ok == Some(true),
        _ => rec.flags().iter().all(|f| f.unwrap_or(true)),
    };
    Ok(rec)
}

fn residual(x: &[f64], out: &[(u64, f64)]) -> Vec<f64> {
    let mut r = x.to_vec();
    for &(i, v) in out {
        r[i as usize] -= v;
    }
    r
}

fn hh_trial(
    cfg: &ExperimentConfig,
    config: &HhConfig,
    probes: u64,
    updates: &[StreamUpdate],
    x: &[f64],
    seed: u64,
    rec: &mut TrialRecord,
) -> Result<()> {
    let k = cfg.k;
    let mut sk = HhSketch::new(k, cfg.n, seed, *config)?;
    for &u in updates {
        sk.apply(u)?;
    }
    let candidates = sk.query();
    let norm: f64 = x.iter().sum();
    let heavy: Vec<u64> = (0..cfg.n).filter(|&i| x[i as usize] > 0.0 && x[i as usize] >= norm / k as f64).collect();

    let width = sk.filter_width() as usize;
    let conserved = sk.norm() == norm
        && sk.ident_counters().iter().all(|level| level.iter().sum::<f64>() == norm)
        && sk.filter_counters().chunks(width).all(|band| band.iter().sum::<f64>() == norm);
    let work_ok = sk.stats().max_steps_per_update <= sk.steps_per_update();
    let mut check = conserved && work_ok;

    let list: Vec<u64> = if config.estimates {
        let pairs = sk.query_with_estimates()?;
        let slack = norm / (8 * k) as f64;
        let light = norm / (2 * k) as f64;
        check &= pairs.iter().all(|&(i, e)| e >= x[i as usize]);
        let mut r = rng::stream(rec.seed, tags::WORKLOAD, 1);
        for _ in 0..probes {
            let i = r.gen_range(0..cfg.n);
            check &= sk.point_estimate(i)? >= x[i as usize];
        }
        rec.accuracy_ok = Some(pairs.iter().all(|&(i, e)| e <= x[i as usize] + slack));
        rec.precision_ok = Some(pairs.iter().all(|&(i, _)| x[i as usize] > light));
        let excess = pairs.iter().map(|&(i, e)| (e - x[i as usize]) / (norm / k as f64)).fold(0.0, f64::max);
        rec.metric = Some(excess);
        pairs.into_iter().map(|(i, _)| i).collect()
    } else {
        candidates.clone()
    };
    rec.superset = Some(contains_all(&list, &heavy));
    rec.bound_ok = Some(list.len() as u64 <= 4 * k);
    rec.check_ok = Some(check);
    rec.list_size = list.len() as u64;
    rec.candidates = candidates.len() as u64;
    rec.support_size = heavy.len() as u64;
    let est = sk.estimate_counters().map_or(0, <[f64]>::len);
    rec.rows = (sk.ident_counters().iter().map(Vec::len).sum::<usize>() + sk.filter_counters().len() + est + 1) as u64;
    rec.work = sk.stats().max_steps_per_update;
    Ok(())
}
