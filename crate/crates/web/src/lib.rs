//! WebAssembly bindings for the demo page in `www/`.
//!
//! Each export returns a JSON string; the plain functions underneath are usable
//! (and tested) natively.

use alarm_pipeline::metrics::{alarm_precision, alarm_sensitivity, f_beta};
use alarm_pipeline::synth::{generate, generate_corpus, SynthCorpusSpec};
use alarm_pipeline::temporal::{gate_filter, threshold_labels};
use alarm_pipeline::tuning::{sweep, tune, GridSpec, TuningConstraints};
use alarm_pipeline::{
    evaluate, AlarmCounts, AlarmKind, BinaryLabel, Corpus, FilterConfig, FilterWidth, Result,
    StackConfig,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Alarm {
    pub start: u64,
    pub end: u64,
    pub true_alarm: bool,
}

#[derive(Debug, Serialize)]
pub struct FilterDemo {
    pub fps: f64,
    pub width_frames: usize,
    pub threshold: f64,
    pub anchors: Vec<u64>,
    pub raw: Vec<f64>,
    pub filtered: Vec<f64>,
    pub fall_labels: Vec<bool>,
    pub falls: Vec<(u64, u64)>,
    pub alarms: Vec<Alarm>,
    pub counts: AlarmCounts,
    pub p_a: Option<f64>,
    pub se_a: Option<f64>,
}

/// One synthetic video from the tuning benchmark, filtered at `(width_seconds,
/// threshold)`.
pub fn filter_demo(seed: u64, width_seconds: f64, threshold: f64) -> Result<FilterDemo> {
    let mut spec = SynthCorpusSpec::tuning_benchmark(seed).databases.remove(0);
    spec.video_count = 1;
    spec.fall_rate = 2.0;
    spec.near_fall_fp_rate = 1.0;
    spec.far_fp_rate = 3.0;
    let out = generate(&spec)?;
    let (annotation, stream) = (&out.annotations[0], &out.streams[0]);
    let cfg = FilterConfig::new(FilterWidth::Seconds(width_seconds), threshold)?;
    let eval = evaluate(stream, annotation, &cfg, &spec.stack, &[])?;

    let raw = stream.values();
    let filtered = gate_filter(&raw, eval.width_frames);
    let fall_labels = threshold_labels(&filtered, threshold)
        .into_iter()
        .map(|l| l == BinaryLabel::Fall)
        .collect();
    Ok(FilterDemo {
        fps: annotation.fps,
        width_frames: eval.width_frames,
        threshold,
        anchors: stream.anchors(),
        raw,
        filtered,
        fall_labels,
        falls: annotation
            .fall_intervals
            .iter()
            .map(|f| (f.start, f.end))
            .collect(),
        alarms: eval
            .alarms
            .iter()
            .map(|a| Alarm {
                start: a.start_frame,
                end: a.end_frame,
                true_alarm: a.kind == AlarmKind::TruePositive,
            })
            .collect(),
        counts: eval.report.alarm_counts,
        p_a: eval.report.p_a,
        se_a: eval.report.se_a,
    })
}

#[derive(Debug, Serialize)]
pub struct CountsSummary {
    pub p_a: Option<f64>,
    pub se_a: Option<f64>,
    pub f_beta: Option<f64>,
}

pub fn counts_summary(tp_a: u64, fp_a: u64, fn_a: u64, beta: f64) -> CountsSummary {
    let counts = AlarmCounts::new(tp_a, fp_a, fn_a);
    let p_a = alarm_precision(&counts);
    let se_a = alarm_sensitivity(&counts);
    let f = match (p_a, se_a) {
        (Some(p), Some(se)) => f_beta(p, se, beta),
        _ => None,
    };
    CountsSummary {
        p_a,
        se_a,
        f_beta: f,
    }
}

#[derive(Debug, Serialize)]
pub struct Curve {
    pub database_id: String,
    pub threshold: f64,
    /// `(W seconds, F_beta)`; undefined cells are left out.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Serialize)]
pub struct SweepCurves {
    pub beta: f64,
    pub curves: Vec<Curve>,
    pub final_width: Option<f64>,
    pub final_threshold: Option<f64>,
}

/// F_beta against W for every threshold on a small benchmark corpus, plus the
/// constrained optimum.
pub fn sweep_curves(seed: u64, beta: f64) -> Result<SweepCurves> {
    let mut spec = SynthCorpusSpec::tuning_benchmark(seed);
    for db in &mut spec.databases {
        db.video_count = 8;
    }
    let out = generate_corpus(&spec)?;
    let corpus = Corpus::pair(out.annotations, out.streams)?;
    let stack = StackConfig::default();
    let grid = sweep(&corpus, &GridSpec::default(), &[beta], &stack)?;
    let constraints = TuningConstraints::new(0.8, 10.0)?.with_baseline(&corpus, &stack)?;
    let tuned = tune(&grid, beta, &constraints);

    let mut curves = Vec::new();
    for db in grid.database_ids() {
        for &t in &grid.grid.thresholds {
            let points = grid
                .cells
                .iter()
                .filter(|c| c.database_id == db && c.threshold == t)
                .filter_map(|c| c.report.f_beta_for(beta).map(|f| (c.width_seconds, f)))
                .collect();
            curves.push(Curve {
                database_id: db.to_string(),
                threshold: t,
                points,
            });
        }
    }
    Ok(SweepCurves {
        beta,
        curves,
        final_width: tuned.final_config.as_ref().map(|f| f.width_seconds),
        final_threshold: tuned.final_config.as_ref().map(|f| f.threshold),
    })
}

fn to_js<T: Serialize>(value: Result<T>) -> std::result::Result<String, JsError> {
    let value = value.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = filterDemo)]
pub fn filter_demo_js(
    seed: u32,
    width_seconds: f64,
    threshold: f64,
) -> std::result::Result<String, JsError> {
    to_js(filter_demo(seed.into(), width_seconds, threshold))
}

#[wasm_bindgen(js_name = countsSummary)]
pub fn counts_summary_js(
    tp_a: u32,
    fp_a: u32,
    fn_a: u32,
    beta: f64,
) -> std::result::Result<String, JsError> {
    to_js(Ok(counts_summary(
        tp_a.into(),
        fp_a.into(),
        fn_a.into(),
        beta,
    )))
}

#[wasm_bindgen(js_name = sweepCurves)]
pub fn sweep_curves_js(seed: u32, beta: f64) -> std::result::Result<String, JsError> {
    to_js(sweep_curves(seed.into(), beta))
}
