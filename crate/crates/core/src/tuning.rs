//! Conjoint search over gate width and threshold.
//!
//! [`sweep`] evaluates every `(W, T_pred)` cell per database, [`per_database_argmax`]
//! picks the best constraint-satisfying cell per database, and [`average_optima`]
//! averages those picks into one deployable configuration.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, StackConfig};
use crate::error::{Error, Result};
use crate::metrics::{AlarmCounts, ConfusionCounts, MetricReport};
use crate::par;
use crate::temporal::{evaluate_corpus, gate_filter, FilterConfig, FilterWidth, PreparedVideo};

/// `start, start + step, ...` up to and including `stop`, rounded to 1e-9 so that
/// 0.1-steps land on their decimal values.
pub fn stepped_range(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && start.is_finite() && stop.is_finite() && stop >= start) {
        return Err(Error::InvalidInput(format!(
            "bad range {start}:{stop}:{step}"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub widths: Vec<FilterWidth>,
    pub thresholds: Vec<f64>,
}

impl Default for GridSpec {
    /// `W` from 0.05 s to 2.0 s in 0.05 s steps, `T_pred` from 0.1 to 0.9 in 0.1 steps.
    fn default() -> Self {
        Self::from_ranges((0.05, 2.0, 0.05), (0.1, 0.9, 0.1)).expect("static ranges")
    }
}

impl GridSpec {
    pub fn from_ranges(w: (f64, f64, f64), t: (f64, f64, f64)) -> Result<Self> {
        let grid = Self {
            widths: stepped_range(w.0, w.1, w.2)?
                .into_iter()
                .map(FilterWidth::Seconds)
                .collect(),
            thresholds: stepped_range(t.0, t.1, t.2)?,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.thresholds.is_empty() {
            return Err(Error::InvalidInput("grid has no cells".into()));
        }
        for &w in &self.widths {
            for &t in &self.thresholds {
                FilterConfig::new(w, t)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub database_id: String,
    pub width: FilterWidth,
    pub width_seconds: f64,
    pub threshold: f64,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub grid: GridSpec,
    pub betas: Vec<f64>,
    /// Ordered by database, then width, then threshold.
    pub cells: Vec<SweepCell>,
    /// Databases without videos, left out of the sweep.
    pub skipped: Vec<String>,
}

impl SweepGrid {
    pub fn database_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.cells.iter().map(|c| c.database_id.as_str()).collect();
        ids.dedup();
        ids
    }

    pub fn cell(
        &self,
        database_id: &str,
        width: FilterWidth,
        threshold: f64,
    ) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.database_id == database_id && c.width == width && c.threshold == threshold)
    }

    /// Restricts the grid to the given widths and thresholds.
    pub fn subset(&self, widths: &[FilterWidth], thresholds: &[f64]) -> SweepGrid {
        SweepGrid {
            grid: GridSpec {
                widths: widths.to_vec(),
                thresholds: thresholds.to_vec(),
            },
            betas: self.betas.clone(),
            cells: self
                .cells
                .iter()
                .filter(|c| widths.contains(&c.width) && thresholds.contains(&c.threshold))
                .cloned()
                .collect(),
            skipped: self.skipped.clone(),
        }
    }
}

/// Evaluates every grid cell on every database. Each video is filtered once per
/// width and thresholded once per `T_pred`; counts are pooled per database.
pub fn sweep(
    corpus: &Corpus,
    grid: &GridSpec,
    betas: &[f64],
    stack_cfg: &StackConfig,
) -> Result<SweepGrid> {
    grid.validate()?;
    let mut skipped = Vec::new();
    let mut prepared: Vec<(&str, f64, Vec<PreparedVideo<'_>>)> = Vec::new();
    for (database_id, videos) in &corpus.databases {
        if videos.is_empty() {
            skipped.push(database_id.clone());
            continue;
        }
        let fps = videos[0].annotation.fps;
        let vids = videos
            .iter()
            .map(|v| PreparedVideo::new(&v.stream, &v.annotation, stack_cfg))
            .collect::<Result<Vec<_>>>()?;
        prepared.push((database_id, fps, vids));
    }
    if prepared.is_empty() {
        return Err(Error::InvalidInput("corpus has no videos".into()));
    }

    let jobs: Vec<(usize, FilterWidth)> = (0..prepared.len())
        .flat_map(|d| grid.widths.iter().map(move |&w| (d, w)))
        .collect();
    let cells = par::map(&jobs, |&(d, width)| {
        let (database_id, fps, videos) = &prepared[d];
        let mut totals =
            vec![(ConfusionCounts::default(), AlarmCounts::default()); grid.thresholds.len()];
        for video in videos {
            let filtered = gate_filter(&video.values, width.frames(video.annotation.fps));
            for (t, total) in grid.thresholds.iter().zip(totals.iter_mut()) {
                let (counts, matched) = video.score(&filtered, *t, stack_cfg.stack_length);
                total.0 += counts;
                total.1 += matched.counts;
            }
        }
        grid.thresholds
            .iter()
            .zip(totals)
            .map(|(&threshold, (counts, alarms))| SweepCell {
                database_id: database_id.to_string(),
                width,
                width_seconds: width.seconds(*fps),
                threshold,
                report: MetricReport::from_counts(counts, alarms, betas),
            })
            .collect::<Vec<_>>()
    });
    Ok(SweepGrid {
        grid: grid.clone(),
        betas: betas.to_vec(),
        cells: cells.into_iter().flatten().collect(),
        skipped,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per `(database, beta, W, T_pred)`; undefined metrics are left empty.
pub fn write_sweep_csv<W: Write>(mut writer: W, grid: &SweepGrid) -> Result<()> {
    writeln!(
        writer,
        "database_id,beta,W_seconds,T_pred,f_beta,p_a,se_a,TP_a,FP_a,FN_a"
    )?;
    for database_id in grid.database_ids() {
        for &beta in &grid.betas {
            for c in grid.cells.iter().filter(|c| c.database_id == database_id) {
                let a = c.report.alarm_counts;
                writeln!(
                    writer,
                    "{},{},{},{},{},{},{},{},{},{}",
                    database_id,
                    beta,
                    c.width_seconds,
                    c.threshold,
                    opt(c.report.f_beta_for(beta)),
                    opt(c.report.p_a),
                    opt(c.report.se_a),
                    a.tp_a,
                    a.fp_a,
                    a.fn_a
                )?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningConstraints {
    pub min_alarm_precision: f64,
    /// Allowed fall of `se_a` below the baseline, in percentage points.
    pub max_sensitivity_drop: f64,
    /// Per-database `se_a` at the one-frame filter and `T_pred = 0.5`.
    pub baseline: BTreeMap<String, Option<f64>>,
}

pub const BASELINE_THRESHOLD: f64 = 0.5;

impl TuningConstraints {
    pub fn new(min_alarm_precision: f64, max_sensitivity_drop: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&min_alarm_precision) {
            return Err(Error::InvalidInput(format!(
                "min_alarm_precision must lie in [0, 1), got {min_alarm_precision}"
            )));
        }
        if max_sensitivity_drop.is_nan() || max_sensitivity_drop < 0.0 {
            return Err(Error::InvalidInput(format!(
                "max_sensitivity_drop must be >= 0, got {max_sensitivity_drop}"
            )));
        }
        Ok(Self {
            min_alarm_precision,
            max_sensitivity_drop,
            baseline: BTreeMap::new(),
        })
    }

    /// No constraint at all: every cell with a defined `F_beta` is admissible.
    pub fn unconstrained() -> Self {
        Self {
            min_alarm_precision: 0.0,
            max_sensitivity_drop: f64::INFINITY,
            baseline: BTreeMap::new(),
        }
    }

    /// Fills `baseline` from the identity filter at `T_pred = 0.5` on `corpus`.
    pub fn with_baseline(mut self, corpus: &Corpus, stack_cfg: &StackConfig) -> Result<Self> {
        let eval = evaluate_corpus(
            corpus,
            &FilterConfig::identity(BASELINE_THRESHOLD),
            stack_cfg,
            &[],
        )?;
        self.baseline = eval
            .per_database
            .into_iter()
            .map(|d| (d.database_id, d.report.se_a))
            .collect();
        Ok(self)
    }

    pub fn admits(&self, database_id: &str, report: &MetricReport) -> bool {
        let Some(p_a) = report.p_a else { return false };
        if p_a + 1e-12 < self.min_alarm_precision {
            return false;
        }
        match self.baseline.get(database_id).copied().flatten() {
            Some(base) => report
                .se_a
                .is_some_and(|se| (base - se) * 100.0 <= self.max_sensitivity_drop + 1e-9),
            None => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DatabaseOptimum {
    Feasible {
        database_id: String,
        width: FilterWidth,
        width_seconds: f64,
        threshold: f64,
        f_beta: f64,
        p_a: Option<f64>,
        se_a: Option<f64>,
        alarm_counts: AlarmCounts,
    },
    Infeasible {
        database_id: String,
        reason: String,
    },
}

impl DatabaseOptimum {
    pub fn database_id(&self) -> &str {
        match self {
            DatabaseOptimum::Feasible { database_id, .. }
            | DatabaseOptimum::Infeasible { database_id, .. } => database_id,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, DatabaseOptimum::Feasible { .. })
    }

    /// `(W seconds, T_pred)` of a feasible optimum.
    pub fn point(&self) -> Option<(f64, f64)> {
        match self {
            DatabaseOptimum::Feasible {
                width_seconds,
                threshold,
                ..
            } => Some((*width_seconds, *threshold)),
            DatabaseOptimum::Infeasible { .. } => None,
        }
    }
}

/// Best admissible cell per database for `F_beta`; ties go to the smaller width,
/// then the smaller threshold.
pub fn per_database_argmax(
    grid: &SweepGrid,
    beta: f64,
    constraints: &TuningConstraints,
) -> Vec<DatabaseOptimum> {
    grid.database_ids()
        .into_iter()
        .map(|database_id| {
            let mut best: Option<(&SweepCell, f64)> = None;
            for cell in grid.cells.iter().filter(|c| c.database_id == database_id) {
                let Some(f) = cell.report.f_beta_for(beta) else {
                    continue;
                };
                if !constraints.admits(database_id, &cell.report) {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((b, bf)) => {
                        f > bf
                            || (f == bf
                                && (cell.width_seconds, cell.threshold)
                                    < (b.width_seconds, b.threshold))
                    }
                };
                if better {
                    best = Some((cell, f));
                }
            }
            match best {
                Some((c, f)) => DatabaseOptimum::Feasible {
                    database_id: database_id.to_owned(),
                    width: c.width,
                    width_seconds: c.width_seconds,
                    threshold: c.threshold,
                    f_beta: f,
                    p_a: c.report.p_a,
                    se_a: c.report.se_a,
                    alarm_counts: c.report.alarm_counts,
                },
                None => DatabaseOptimum::Infeasible {
                    database_id: database_id.to_owned(),
                    reason: format!(
                        "no cell with defined F_{beta} meets p_a >= {} and se_a drop <= {} points",
                        constraints.min_alarm_precision, constraints.max_sensitivity_drop
                    ),
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalConfig {
    #[serde(rename = "W")]
    pub width_seconds: f64,
    #[serde(rename = "T_pred")]
    pub threshold: f64,
}

impl FinalConfig {
    pub fn filter(&self) -> FilterConfig {
        FilterConfig {
            width: FilterWidth::Seconds(self.width_seconds),
            threshold: self.threshold,
        }
    }
}

/// Mean `W` and mean `T_pred` over the feasible optima, with `T_pred` snapped to
/// the nearest value of `thresholds` (lower value on a tie). An empty
/// `thresholds` leaves the mean unsnapped.
pub fn average_optima(optima: &[DatabaseOptimum], thresholds: &[f64]) -> Result<FinalConfig> {
    let points: Vec<(f64, f64)> = optima.iter().filter_map(DatabaseOptimum::point).collect();
    if points.is_empty() {
        return Err(Error::Infeasible(
            "no database has a feasible optimum".into(),
        ));
    }
    let n = points.len() as f64;
    let w = points.iter().map(|p| p.0).sum::<f64>() / n;
    let t = points.iter().map(|p| p.1).sum::<f64>() / n;
    let snapped = thresholds
        .iter()
        .copied()
        .min_by(|a, b| (a - t).abs().total_cmp(&(b - t).abs()).then(a.total_cmp(b)))
        .unwrap_or(t);
    Ok(FinalConfig {
        width_seconds: w,
        threshold: snapped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub beta: f64,
    pub per_database: Vec<DatabaseOptimum>,
    #[serde(rename = "final")]
    pub final_config: Option<FinalConfig>,
    pub constraints: TuningConstraints,
    pub feasibility: Feasibility,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub infeasible_databases: Vec<String>,
}

/// Constrained argmax per database followed by averaging.
pub fn tune(grid: &SweepGrid, beta: f64, constraints: &TuningConstraints) -> TuningResult {
    let per_database = per_database_argmax(grid, beta, constraints);
    let final_config = average_optima(&per_database, &grid.grid.thresholds).ok();
    let infeasible_databases = per_database
        .iter()
        .filter(|o| !o.is_feasible())
        .map(|o| o.database_id().to_owned())
        .collect();
    TuningResult {
        beta,
        feasibility: Feasibility {
            feasible: final_config.is_some(),
            infeasible_databases,
        },
        per_database,
        final_config,
        constraints: constraints.clone(),
    }
}
