//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if
//! any criterion fails. Every run is seeded, so the numbers are reproducible.

use std::process::ExitCode;
use std::time::Instant;

use sparse_recovery_cli::experiment::ident_list_bound;
use sparse_recovery_cli::{run_experiment, Distribution, ExperimentConfig, Report, Scheme, TrialRecord};

struct Suite {
    /// Every configuration run so far with its CSV, rechecked by the determinism criterion.
    runs: Vec<(String, ExperimentConfig, String)>,
    failed: Vec<u32>,
}

/// `count/total >= percent/100`, exactly.
fn at_least(count: usize, total: usize, percent: usize) -> bool {
    total > 0 && count * 100 >= percent * total
}

fn count(records: &[TrialRecord], pick: impl Fn(&TrialRecord) -> Option<bool>) -> (usize, usize) {
    let seen: Vec<bool> = records.iter().filter_map(pick).collect();
    (seen.iter().filter(|&&b| b).count(), seen.len())
}

impl Suite {
    fn run(&mut self, label: &str, cfg: ExperimentConfig) -> Report {
        let report = run_experiment(&cfg).unwrap_or_else(|e| panic!("{label}: {e:#}"));
        self.runs.push((label.to_string(), cfg, report.csv()));
        report
    }

    fn verdict(&mut self, id: u32, name: &str, ok: bool, detail: String, started: Instant) {
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("{tag} criterion {id:>2} {name}: {detail} [{:.1}s]", started.elapsed().as_secs_f64());
        if !ok {
            self.failed.push(id);
        }
    }
}

fn cfg(scheme: Scheme, n: u64, k: u64, trials: u64, seed: u64) -> ExperimentConfig {
    ExperimentConfig::new(scheme, n, k).expect("valid sizes").trials(trials).seed(seed)
}

fn superset_and_size(s: &mut Suite) {
    let t = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    for k in [4u64, 8, 16] {
        let n = 1u64 << 14;
        for noisy in [false, true] {
            let mut c = cfg(Scheme::GtList, n, k, 500, 100 + k).with_const("c", 16.0);
            let percent = if noisy {
                c.e0 = Some(2 * k);
                97
            } else {
                99
            };
            let r = s.run(&format!("c1 k={k} noisy={noisy}"), c);
            let (sup, total) = count(&r.records, |x| x.superset);
            let (size, _) = count(&r.records, |x| x.bound_ok);
            let pass = if noisy { at_least(sup, total, percent) } else { sup == total } && at_least(size, total, percent);
            ok &= pass;
            let worst = r.records.iter().map(|x| x.candidates).max().unwrap_or(0);
            detail.push(format!(
                "k={k}{} superset {sup}/{total} size<= {} {size}/{total} (max {worst})",
                if noisy { " +2k fp/level" } else { "" },
                ident_list_bound(k, n)
            ));
        }
    }
    s.verdict(1, "superset and list size", ok, detail.join("; "), t);
}

fn oracle_equivalence(s: &mut Suite) {
    let t = Instant::now();
    let list = s.run("c2 list", cfg(Scheme::GtList, 1 << 10, 4, 200, 200));
    let (agree, total) = count(&list.records, |x| x.check_ok);
    let exact = s.run("c2 exact", cfg(Scheme::GtExact, 1 << 10, 4, 200, 201));
    let verified: Vec<&TrialRecord> = exact.records.iter().filter(|x| x.check_ok == Some(true)).collect();
    let exact_ok = verified.iter().filter(|x| x.accuracy_ok == Some(true)).count();
    let ok = agree == total && !verified.is_empty() && exact_ok == verified.len();
    let detail = format!(
        "decode_list == identify ∩ naive(filter) {agree}/{total}; decode_exact == support {exact_ok}/{} verified designs ({} of {} trials verified)",
        verified.len(),
        verified.len(),
        exact.records.len()
    );
    s.verdict(2, "oracle equivalence", ok, detail, t);
}

fn brute_force_disjunctness(s: &mut Suite) {
    let t = Instant::now();
    let ks = s.run("c3 ks", cfg(Scheme::Verify, 64, 2, 1, 300).with_const("ks", 1.0));
    let ks_ok = ks.records[0].check_ok == Some(true);
    let random = s.run("c3 list", cfg(Scheme::Verify, 32, 2, 100, 301).with_const("c1", 12.0).with_const("list", 4.0));
    let (passed, total) = count(&random.records, |x| x.check_ok);
    let ok = ks_ok && passed >= 95;
    let detail = format!(
        "kautz_singleton(2, 64) 2-disjunct: {ks_ok}; random_list_disjunct(2, 32, c1=12) (2,4)-list-disjunct {passed}/{total}"
    );
    s.verdict(3, "brute-force disjunctness", ok, detail, t);
}

fn decode_work_scaling(s: &mut Suite) {
    let t = Instant::now();
    let medians: Vec<u64> = [8u64, 16, 32]
        .iter()
        .map(|&k| s.run(&format!("c4 k={k}"), cfg(Scheme::GtList, 1 << 16, k, 100, 400 + k)).summary.median_inserts)
        .collect();
    let ratios: Vec<f64> = medians.windows(2).map(|w| w[1] as f64 / w[0] as f64).collect();
    let ok = ratios.iter().all(|&r| (1.5..=3.0).contains(&r));
    let detail = format!("median inserts k=8,16,32: {medians:?}; ratios {:.3}, {:.3}", ratios[0], ratios[1]);
    s.verdict(4, "decode-work scaling", ok, detail, t);
}

fn noise_tolerance(s: &mut Suite) {
    let t = Instant::now();
    let mut c = cfg(Scheme::GtNoisyFp, 1 << 12, 8, 300, 500);
    c.alpha = 0.5;
    c.e0 = Some(8 * 3);
    let r = s.run("c5", c);
    let (sup, total) = count(&r.records, |x| x.superset);
    let (size, _) = count(&r.records, |x| x.bound_ok);
    let (race, race_total) = count(&r.records[..100], |x| x.check_ok);
    let ok = sup == total && at_least(size, total, 97) && race == race_total && race_total == 100;
    let detail = format!(
        "k·log2 k = 24 fp/level: superset {sup}/{total}, size bound {size}/{total}; split race certified {race}/{race_total}"
    );
    s.verdict(5, "false-positive tolerance", ok, detail, t);
}

fn false_negatives(s: &mut Suite) {
    let t = Instant::now();
    let mut c = cfg(Scheme::GtVotingFn, 1 << 10, 16, 200, 600);
    c.e1 = Some(16 * 2);
    let r = s.run("c6", c);
    let (exact, total) = count(&r.records, |x| x.accuracy_ok);
    let ok = at_least(exact, total, 95);
    s.verdict(6, "false-negative voting", ok, format!("k·e1 = 32 false negatives: exact {exact}/{total}"), t);
}

fn for_each(s: &mut Suite) {
    let t = Instant::now();
    let r = s.run("c7", cfg(Scheme::GtForeach, 1 << 14, 16, 500, 700));
    let (exact, total) = count(&r.records, |x| x.accuracy_ok);
    let ok = at_least(exact, total, 98);
    s.verdict(7, "for-each recovery", ok, format!("exact {exact}/{total}"), t);
}

fn heavy_hitters(s: &mut Suite) {
    let t = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    for (dist, seed) in [(Distribution::SpikesFlat, 800), (Distribution::Zipf, 801)] {
        let mut c = cfg(Scheme::Hh, 1 << 14, 8, 200, seed);
        c.dist = dist;
        let r = s.run(&format!("c8 {dist:?}"), c);
        let (recall, total) = count(&r.records, |x| x.superset);
        let (size, _) = count(&r.records, |x| x.bound_ok);
        let (checks, _) = count(&r.records, |x| x.check_ok);
        ok &= recall == total && size == total && checks == total;
        detail.push(format!(
            "{dist:?}: recall {recall}/{total}, |list|<=4k {size}/{total}, conservation+work {checks}/{total} (max steps/update {})",
            r.summary.max_work
        ));
    }
    s.verdict(8, "heavy hitters", ok, detail.join("; "), t);
}

fn estimates(s: &mut Suite) {
    let t = Instant::now();
    let mut records = Vec::new();
    for (dist, seed) in [(Distribution::SpikesFlat, 900), (Distribution::Zipf, 901)] {
        let mut c = cfg(Scheme::HhEst, 1 << 14, 8, 100, seed);
        c.dist = dist;
        records.extend(s.run(&format!("c9 {dist:?}"), c).records);
    }
    let (lower, total) = count(&records, |x| x.check_ok);
    let (upper, _) = count(&records, |x| x.accuracy_ok);
    let (precise, _) = count(&records, |x| x.precision_ok);
    let ok = lower == total && at_least(upper, total, 99) && at_least(precise, total, 99);
    let detail = format!(
        "x_i <= est (with conservation, work) {lower}/{total}; est <= x_i + norm/8k {upper}/{total}; no survivor <= norm/2k {precise}/{total}"
    );
    s.verdict(9, "heavy hitters with estimates", ok, detail, t);
}

fn l2_weak(s: &mut Suite) {
    let t = Instant::now();
    let mut c = cfg(Scheme::L2Weak, 1 << 14, 8, 200, 1000);
    c.eps = 0.5;
    c.delta = 0.1;
    let r = s.run("c10", c);
    let (good, total) = count(&r.records, |x| x.accuracy_ok);
    let (sparse, _) = count(&r.records, |x| x.bound_ok);
    let (zero, free) = count(&r.records, |x| x.check_ok);
    let ok = at_least(good, total, 85) && sparse == total && zero == free;
    let worst = r.records.iter().filter_map(|x| x.metric).fold(0.0, f64::max);
    let detail = format!(
        "residual <= 1.5·tail {good}/{total} (worst ratio {worst:.4}); <= 2k-sparse {sparse}/{total}; exact-sparse zero residual {zero}/{free} collision-free trials"
    );
    s.verdict(10, "l2/l2 weak system", ok, detail, t);
}

fn determinism(s: &mut Suite) {
    let t = Instant::now();
    let mut mismatches = Vec::new();
    let runs = std::mem::take(&mut s.runs);
    for (i, (label, cfg, csv)) in runs.iter().enumerate() {
        let mut again = cfg.clone();
        // Alternate pool sizes so parallel scheduling is covered as well.
        again.jobs = Some(1 + i % 3);
        let rerun = run_experiment(&again).expect("rerun").csv();
        if &rerun != csv {
            mismatches.push(label.clone());
        }
    }
    let ok = mismatches.is_empty();
    let detail = format!("{} suites rerun, byte-identical CSV for {}; mismatches {mismatches:?}", runs.len(), runs.len() - mismatches.len());
    s.verdict(11, "determinism", ok, detail, t);
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags; a name filter that matches nothing skips the suite.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return ExitCode::SUCCESS;
    }
    let mut s = Suite { runs: Vec::new(), failed: Vec::new() };
    superset_and_size(&mut s);
    oracle_equivalence(&mut s);
    brute_force_disjunctness(&mut s);
    decode_work_scaling(&mut s);
    noise_tolerance(&mut s);
    false_negatives(&mut s);
    for_each(&mut s);
    heavy_hitters(&mut s);
    estimates(&mut s);
    l2_weak(&mut s);
    determinism(&mut s);
    if s.failed.is_empty() {
        println!("acceptance: all 11 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {:?}", s.failed);
        ExitCode::FAILURE
    }
}
