//! Acceptance report: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::fs;
use std::time::{Duration, Instant};

use alarm_pipeline::metrics::{f_beta, weighted_bce, LossParams};
use alarm_pipeline::synth::{generate_corpus, SynthCorpusSpec, SynthSpec};
use alarm_pipeline::temporal::{extract_alarms, gate_filter, match_alarms};
use alarm_pipeline::{
    evaluate_corpus, AlarmCounts, BinaryLabel, Corpus, FilterConfig, FilterWidth, FrameInterval,
    StackConfig,
};
use alarm_pipeline_cli::{cmd_evaluate, cmd_tune, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

type Criterion = (&'static str, fn() -> Verdict);

enum Verdict {
    Pass(String),
    Fail(String),
    NotApplicable(String),
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn read_json(path: &std::path::Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).expect("output written")).expect("valid json")
}

const TABLE_COUNTS: [(&str, u64, u64, u64); 3] = [
    ("URFD", 29, 5, 1),
    ("FDD", 90, 7, 9),
    ("Multicam", 142, 21, 58),
];
// F_0.5, F_2, p_a, se_a in percent
const TABLE_PRINTED: [(&str, [f64; 4]); 4] = [
    ("URFD", [87.4, 94.2, 85.3, 96.7]),
    ("FDD", [92.4, 91.3, 92.8, 90.9]),
    ("Multicam", [83.3, 73.7, 87.1, 71.0]),
    ("Avg.", [87.7, 86.4, 88.4, 86.2]),
];
const COLUMNS: [&str; 4] = ["F_0.5", "F_2", "p_a", "se_a"];

fn counts_only_evaluation() -> Value {
    let tmp = TempDir::new().unwrap();
    let counts = tmp.path().join("counts.csv");
    let mut body = String::from("database_id,TP_a,FP_a,FN_a\n");
    for (db, tp, fp, fneg) in TABLE_COUNTS {
        body.push_str(&format!("{db},{tp},{fp},{fneg}\n"));
    }
    fs::write(&counts, body).unwrap();
    let cfg = RunConfig {
        counts_only: Some(counts),
        out: tmp.path().join("out"),
        ..RunConfig::default()
    };
    cmd_evaluate(&cfg).expect("counts-only evaluation");
    read_json(&cfg.out.join("evaluation.json"))
}

fn report_cells(report: &Value) -> [f64; 4] {
    let f = |beta: f64| {
        report["f_beta"]
            .as_array()
            .unwrap()
            .iter()
            .find(|e| e["beta"].as_f64() == Some(beta))
            .and_then(|e| e["value"].as_f64())
            .unwrap()
    };
    [
        f(0.5),
        f(2.0),
        report["p_a"].as_f64().unwrap(),
        report["se_a"].as_f64().unwrap(),
    ]
    .map(|v| v * 100.0)
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let eval = counts_only_evaluation();
    let elapsed = start.elapsed();
    let mut rows: Vec<[f64; 4]> = eval["per_database"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| report_cells(&r["report"]))
        .collect();
    rows.push(report_cells(&eval["macro_average"]));

    let mut misses = Vec::new();
    let mut worst: f64 = 0.0;
    for ((name, printed), got) in TABLE_PRINTED.iter().zip(&rows) {
        for ((col, want), have) in COLUMNS.iter().zip(printed).zip(got) {
            let delta = (have - want).abs();
            worst = worst.max(delta);
            if delta > 0.05 {
                misses.push(format!(
                    "{name} {col}: {have:.4} vs {want} (|d| = {delta:.4} pp)"
                ));
            }
        }
    }

    // Diagnostic only: F from p_a and se_a already rounded to 0.1%.
    let mut rounded_worst: f64 = 0.0;
    for ((_, printed), (_, tp, fp, fneg)) in TABLE_PRINTED.iter().zip(TABLE_COUNTS) {
        let r = |x: f64| (x * 1000.0).round() / 1000.0;
        let p = r(tp as f64 / (tp + fp) as f64);
        let se = r(tp as f64 / (tp + fneg) as f64);
        for (i, beta) in [0.5, 2.0].into_iter().enumerate() {
            rounded_worst =
                rounded_worst.max((f_beta(p, se, beta).unwrap() * 100.0 - printed[i]).abs());
        }
    }

    let fast = elapsed < Duration::from_secs(1);
    let detail = format!(
        "{}/16 cells within 0.05 pp, max |d| = {worst:.4} pp, {:.0} ms{}{} [diagnostic: F from 0.1%-rounded p_a/se_a, max |d| = {rounded_worst:.4} pp]",
        16 - misses.len(),
        elapsed.as_secs_f64() * 1e3,
        if misses.is_empty() { String::new() } else { format!("; off: {}", misses.join(", ")) },
        if fast { "" } else { "; too slow" },
    );
    verdict(misses.is_empty() && fast, detail)
}

fn criterion_2() -> Verdict {
    let eval = counts_only_evaluation();
    let p_avg = eval["macro_average"]["p_a"].as_f64().unwrap() * 100.0;
    let false_share = 100.0 - p_avg;
    verdict(
        (false_share - 11.6).abs() <= 0.05,
        format!("100 - p_a(avg) = {false_share:.4}% (printed 11.6%)"),
    )
}

fn criterion_3() -> Verdict {
    let mut spec = SynthCorpusSpec::three_databases(303);
    for (db, n) in spec.databases.iter_mut().zip([334, 333, 333]) {
        db.video_count = n;
        db.frames_per_video = 900;
        db.fall_rate = 1.3;
        db.score_noise = 0.15;
        db.near_fall_fp_rate = 0.5;
        db.far_fp_rate = 1.0;
    }
    let generated = generate_corpus(&spec).unwrap();
    let planted: u64 = generated
        .ledger
        .videos
        .iter()
        .map(|v| v.falls.len() as u64)
        .sum();
    let videos = generated.ledger.videos.len();
    let planted_per_video: std::collections::HashMap<&str, u64> = generated
        .ledger
        .videos
        .iter()
        .map(|v| (v.video_id.as_str(), v.falls.len() as u64))
        .collect();
    let corpus = Corpus::pair(generated.annotations, generated.streams).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut configs = vec![FilterConfig::identity(0.5)];
    for _ in 0..8 {
        let w = rng.random_range(1..=40) as f64 * 0.05;
        let t = rng.random_range(1..=9) as f64 * 0.1;
        configs.push(FilterConfig::new(FilterWidth::Seconds(w), t).unwrap());
    }
    let mut mismatches = 0;
    for cfg in &configs {
        let eval = evaluate_corpus(&corpus, cfg, &StackConfig::default(), &[0.5]).unwrap();
        for video in &eval.videos {
            let c = video.report.alarm_counts;
            if c.tp_a + c.fn_a != planted_per_video[video.video_id.as_str()] {
                mismatches += 1;
            }
        }
        for db in &eval.per_database {
            let c = db.report.alarm_counts;
            if c.tp_a + c.fn_a != generated.ledger.planted_falls(&db.database_id) as u64 {
                mismatches += 1;
            }
        }
    }
    verdict(
        mismatches == 0 && videos == 1000,
        format!(
            "{videos} videos, {planted} planted falls, {} filter configs, {mismatches} mismatches",
            configs.len()
        ),
    )
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut harmonic, mut fixed): (f64, f64) = (0.0, 0.0);
    let mut monotone_violations = 0;
    for _ in 0..10_000 {
        let p = rng.random_range(1e-6..=1.0);
        let se = rng.random_range(1e-6..=1.0);
        harmonic = harmonic.max((f_beta(p, se, 1.0).unwrap() - 2.0 * p * se / (p + se)).abs());

        let beta = rng.random_range(0.1..5.0);
        let base = f_beta(p, se, beta).unwrap();
        let dp = rng.random_range(0.0..=1.0 - p);
        let ds = rng.random_range(0.0..=1.0 - se);
        if f_beta(p + dp, se, beta).unwrap() < base - 1e-12
            || f_beta(p, se + ds, beta).unwrap() < base - 1e-12
        {
            monotone_violations += 1;
        }
        fixed = fixed.max((f_beta(p, p, beta).unwrap() - p).abs());
    }
    verdict(
        harmonic < 1e-12 && fixed < 1e-12 && monotone_violations == 0,
        format!(
            "10^4 pairs: max |F_1 - harmonic| = {harmonic:.1e}, max |F(x,x) - x| = {fixed:.1e}, {monotone_violations} monotonicity violations"
        ),
    )
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut identity_ok = true;
    let mut bounds_violations = 0;
    let mut linearity: f64 = 0.0;
    for _ in 0..10_000 {
        let n = rng.random_range(1..200);
        let width = rng.random_range(1..60);
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        identity_ok &= gate_filter(&x, 1) == x;

        let fx = gate_filter(&x, width);
        for (i, v) in fx.iter().enumerate() {
            let window = &x[(i + 1).saturating_sub(width)..=i];
            let lo = window.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if *v < lo || *v > hi {
                bounds_violations += 1;
            }
        }

        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let mixed: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let fy = gate_filter(&y, width);
        for (got, (px, py)) in gate_filter(&mixed, width).iter().zip(fx.iter().zip(&fy)) {
            linearity = linearity.max((got - (a * px + b * py)).abs());
        }
    }

    let third = 1.0 / 3.0;
    let cases: [(&[f64], usize, Vec<f64>); 4] = [
        (
            &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0],
            3,
            vec![0.0, 0.0, 0.0, third, 2.0 / 3.0, 1.0, 1.0],
        ),
        (&[1.0, 1.0, 0.0, 0.0, 0.0], 2, vec![1.0, 1.0, 0.5, 0.0, 0.0]),
        (
            &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
            3,
            vec![0.0, 0.0, third, third, third, 0.0],
        ),
        (&[0.0, 1.0, 2.0, 3.0], 4, vec![0.0, 0.5, 1.0, 1.5]),
    ];
    let steps_exact = cases
        .iter()
        .filter(|(x, w, want)| gate_filter(x, *w) == *want)
        .count();

    verdict(
        identity_ok && bounds_violations == 0 && linearity < 1e-9 && steps_exact == cases.len(),
        format!(
            "identity exact: {identity_ok}; 10^4 streams: {bounds_violations} bound violations, max linearity |d| = {linearity:.1e}; {steps_exact}/{} step responses exact",
            cases.len()
        ),
    )
}

fn naive_runs(labels: &[bool], anchors: &[u64]) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    let mut open: Option<u64> = None;
    for (i, &fall) in labels.iter().enumerate() {
        match (fall, open) {
            (true, None) => open = Some(anchors[i]),
            (false, Some(s)) => {
                out.push((s, anchors[i - 1]));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        out.push((s, *anchors.last().unwrap()));
    }
    out
}

/// Frame-set overlap per (alarm, fall) pair.
fn brute_counts(
    runs: &[(u64, u64)],
    falls: &[(u64, u64)],
    l: u64,
) -> (AlarmCounts, Vec<Option<u64>>) {
    let mut detected = vec![false; falls.len()];
    let mut fp = 0;
    let mut offsets = Vec::new();
    for &(s, e) in runs {
        let span: Vec<u64> = (s.saturating_sub(l - 1)..=e).collect();
        let mut hit = false;
        for (k, &(fs, fe)) in falls.iter().enumerate() {
            if span.iter().any(|f| *f >= fs && *f <= fe) {
                detected[k] = true;
                hit = true;
            }
        }
        if !hit {
            fp += 1;
            offsets.push(
                falls
                    .iter()
                    .flat_map(|&(fs, fe)| {
                        (fs..=fe).flat_map(|g| span.iter().map(move |f| f.abs_diff(g)))
                    })
                    .min(),
            );
        }
    }
    let tp = detected.iter().filter(|d| **d).count() as u64;
    (AlarmCounts::new(tp, fp, falls.len() as u64 - tp), offsets)
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut discrepancies = 0;
    for _ in 0..10_000 {
        let frames = rng.random_range(1..=50u64);
        let l = rng.random_range(1..=6u64).min(frames);
        let anchors: Vec<u64> = ((l - 1)..frames).collect();
        let density = rng.random_range(0.05..0.7);
        let raw: Vec<bool> = anchors.iter().map(|_| rng.random_bool(density)).collect();
        let labels: Vec<BinaryLabel> = raw
            .iter()
            .map(|&f| {
                if f {
                    BinaryLabel::Fall
                } else {
                    BinaryLabel::NoFall
                }
            })
            .collect();

        let mut falls: Vec<(u64, u64)> = Vec::new();
        for _ in 0..rng.random_range(0..=3) {
            let s = rng.random_range(0..frames);
            let e = rng.random_range(s..frames.min(s + 15));
            if falls.iter().all(|&(fs, fe)| e < fs || s > fe) {
                falls.push((s, e));
            }
        }
        falls.sort_unstable();

        let runs = extract_alarms(&labels, &anchors);
        let expect = naive_runs(&raw, &anchors);
        let truth: Vec<FrameInterval> = falls
            .iter()
            .map(|&(s, e)| FrameInterval::new(s, e).unwrap())
            .collect();
        let got = match_alarms("v", &runs, &truth, l as usize);
        let (counts, offsets) = brute_counts(&expect, &falls, l);
        let got_runs: Vec<(u64, u64)> = runs.iter().map(|r| (r.start, r.end)).collect();
        let got_offsets: Vec<Option<u64>> =
            got.fp_offsets.iter().map(|r| r.offset_frames).collect();
        if got_runs != expect || got.counts != counts || got_offsets != offsets {
            discrepancies += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        discrepancies == 0 && elapsed < Duration::from_secs(10),
        format!(
            "10^4 instances, {discrepancies} discrepancies, {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_7() -> Verdict {
    let tmp = TempDir::new().unwrap();
    let seed = 7;
    let cfg = |dir: &str| RunConfig {
        seed,
        out: tmp.path().join(dir),
        ..RunConfig::default()
    };
    let first = cmd_tune(&cfg("a")).expect("tune runs");
    let second = cmd_tune(&cfg("b")).expect("tune runs");
    let bytes = |dir: &str| -> Vec<Vec<u8>> {
        ["sweep.csv", "tuning.json", "manifest.json"]
            .iter()
            .map(|f| fs::read(tmp.path().join(dir).join(f)).unwrap())
            .collect()
    };
    let deterministic = (first.exit_code, &first.summary) == (second.exit_code, &second.summary)
        && bytes("a") == bytes("b");

    let tuning = read_json(&tmp.path().join("a/tuning.json"));
    let feasible = first.exit_code == 0 && tuning["feasibility"]["feasible"] == Value::Bool(true);
    if !feasible {
        return Verdict::Fail(format!("tuning infeasible: {}", first.summary.trim()));
    }
    let w = tuning["final"]["W"].as_f64().unwrap();
    let t = tuning["final"]["T_pred"].as_f64().unwrap();

    let spec: SynthCorpusSpec = cfg("a").synth_spec();
    let generated = generate_corpus(&spec).unwrap();
    let fps_of = |db: &str| {
        spec.databases
            .iter()
            .find(|s: &&SynthSpec| s.database_id == db)
            .unwrap()
            .fps
    };
    let longest_pulse = generated
        .ledger
        .videos
        .iter()
        .flat_map(|v| {
            v.dips
                .iter()
                .map(move |d| d.duration_stacks as f64 / fps_of(&v.database_id))
        })
        .fold(0.0, f64::max);
    let shortest_fall = generated
        .ledger
        .videos
        .iter()
        .flat_map(|v| {
            v.falls
                .iter()
                .map(move |f| f.len() as f64 / fps_of(&v.database_id))
        })
        .fold(f64::INFINITY, f64::min);
    let pulses: usize = spec
        .databases
        .iter()
        .map(|d| generated.ledger.planted_dips(&d.database_id))
        .sum();

    let corpus = Corpus::pair(generated.annotations, generated.streams).unwrap();
    let stack = StackConfig::default();
    let baseline = evaluate_corpus(&corpus, &FilterConfig::identity(0.5), &stack, &[0.5]).unwrap();
    let tuned = evaluate_corpus(
        &corpus,
        &FilterConfig::new(FilterWidth::Seconds(w), t).unwrap(),
        &stack,
        &[0.5],
    )
    .unwrap();
    let mut fp_left = 0;
    let mut constraint_misses = Vec::new();
    for (db, base) in tuned.per_database.iter().zip(&baseline.per_database) {
        fp_left += db.report.alarm_counts.fp_a;
        let p_a = db.report.p_a.unwrap_or(0.0);
        let drop = (base.report.se_a.unwrap_or(0.0) - db.report.se_a.unwrap_or(0.0)) * 100.0;
        if p_a < 0.8 || drop > 10.0 {
            constraint_misses.push(format!(
                "{} p_a {p_a:.3} se_a drop {drop:.1}",
                db.database_id
            ));
        }
    }
    verdict(
        deterministic && fp_left == 0 && constraint_misses.is_empty() && longest_pulse <= 0.3 + 1e-9 && shortest_fall >= 0.8 - 1e-9,
        format!(
            "seed {seed}: W* = {w:.4} s, T* = {t}; {pulses} planted pulses (max {longest_pulse:.3} s), falls >= {shortest_fall:.3} s; FP_a left = {fp_left}; constraints {}; deterministic: {deterministic}",
            if constraint_misses.is_empty() { "met".to_owned() } else { constraint_misses.join(", ") }
        ),
    )
}

fn criterion_8() -> Verdict {
    Verdict::NotApplicable(
        "training results, stack-level baselines, offset population shares and the published W = 0.87 s / T_pred = 0.4 depend on unavailable CNN outputs; not reproduction targets, procedures covered by 3-7".into(),
    )
}

fn criterion_9() -> Verdict {
    let unit = LossParams { w0: 1.0, w1: 1.0 };
    let ln2 = std::f64::consts::LN_2;
    let at_half = [BinaryLabel::Fall, BinaryLabel::NoFall]
        .map(|t| (weighted_bce(0.5, t, &unit) - ln2).abs())
        .into_iter()
        .fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut scaling: f64 = 0.0;
    for _ in 0..10_000 {
        let p = rng.random_range(0.001..0.999);
        let (w0, w1, c) = (
            rng.random_range(0.1..5.0),
            rng.random_range(0.1..5.0),
            rng.random_range(0.1..10.0),
        );
        let base = LossParams { w0, w1 };
        let scaled = LossParams {
            w0: c * w0,
            w1: c * w1,
        };
        for t in [BinaryLabel::Fall, BinaryLabel::NoFall] {
            let want = c * weighted_bce(p, t, &base);
            scaling = scaling.max((weighted_bce(p, t, &scaled) - want).abs() / want.abs().max(1.0));
        }
    }
    verdict(
        at_half < 1e-12 && scaling < 1e-12,
        format!("|L(0.5) - ln 2| = {at_half:.1e}; max class-weight scaling |d| = {scaling:.1e} over 10^4 draws"),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("alarm table arithmetic from counts", criterion_1),
        ("macro-average false-alarm share", criterion_2),
        ("fall count conservation", criterion_3),
        ("F_beta properties", criterion_4),
        ("gate filter properties", criterion_5),
        ("brute-force oracle equivalence", criterion_6),
        ("tuning recovery", criterion_7),
        ("desk-scale non-reproducible targets", criterion_8),
        ("weighted BCE", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (tag, detail) = match run() {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::NotApplicable(d) => ("N/A ", d),
        };
        println!("{tag} [{}] {name}: {detail}", i + 1);
    }
    println!("acceptance: {} failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
