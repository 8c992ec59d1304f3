use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use alarm_pipeline::corpus::{
    load_annotations, load_predictions, save_annotations, save_predictions,
};
use alarm_pipeline::synth::generate_corpus;
use alarm_pipeline::temporal::write_offsets_csv;
use alarm_pipeline::tuning::write_sweep_csv;
use alarm_pipeline::{
    assign_folds, evaluate_corpus, macro_average, offset_histogram, sweep, tune, AlarmCounts,
    Corpus, DatabaseOptimum, Error, GroupedVideo, MetricReport, Result,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::manifest::{digest_file, InputDigest, Manifest};
use crate::table;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

/// Result of a subcommand that ran to completion.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    /// Human-readable summary for stdout.
    pub summary: String,
    pub outputs: Vec<PathBuf>,
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_infeasible() {
        EXIT_INFEASIBLE
    } else {
        EXIT_INPUT
    }
}

struct OutDir<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl<'a> OutDir<'a> {
    fn create(dir: &'a Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir,
            written: Vec::new(),
        })
    }

    fn write_with(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut dyn Write) -> Result<()>,
    ) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(fs::File::create(&path)?);
        f(&mut w)?;
        w.flush()?;
        self.written.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)
                .map_err(|e| Error::InvalidInput(e.to_string()))?;
            w.write_all(b"\n")?;
            Ok(())
        })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        self.write_with(name, |w| Ok(w.write_all(body.as_bytes())?))
    }

    fn finish(
        mut self,
        command: &str,
        cfg: &RunConfig,
        inputs: Vec<InputDigest>,
    ) -> Result<Vec<PathBuf>> {
        let mut names: Vec<String> = self
            .written
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect();
        names.push("manifest.json".into());
        let manifest = Manifest::new(command, cfg, inputs, names);
        self.json("manifest.json", &manifest)?;
        Ok(self.written)
    }
}

fn require<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a PathBuf> {
    path.as_ref().ok_or_else(|| {
        Error::InvalidInput(format!(
            "missing {what} path (set it in --config or with --{what})"
        ))
    })
}

fn load_corpus(cfg: &RunConfig) -> Result<(Corpus, Vec<InputDigest>)> {
    let ann = require(&cfg.annotations, "annotations")?;
    let pred = require(&cfg.predictions, "predictions")?;
    let corpus = Corpus::pair(load_annotations(ann)?, load_predictions(pred)?)?;
    if corpus.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} holds no videos",
            ann.display()
        )));
    }
    Ok((corpus, vec![digest_file(ann)?, digest_file(pred)?]))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CountsRow {
    database_id: String,
    report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CountsEvaluation {
    mode: &'static str,
    betas: Vec<f64>,
    per_database: Vec<CountsRow>,
    macro_average: MetricReport,
}

/// Reads `database_id,TP_a,FP_a,FN_a` rows.
pub fn parse_counts(path: &Path) -> Result<Vec<(String, AlarmCounts)>> {
    let name = path.display().to_string();
    let parse_err = |line: u64, message: String| Error::Parse {
        source_name: name.clone(),
        line,
        message,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| parse_err(0, e.to_string()))?;
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if headers
        .iter()
        .map(str::trim)
        .ne(["database_id", "TP_a", "FP_a", "FN_a"])
    {
        return Err(parse_err(
            1,
            "expected header `database_id,TP_a,FP_a,FN_a`".into(),
        ));
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record =
            record.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let count = |i: usize| -> Result<u64> {
            record[i]
                .trim()
                .parse()
                .map_err(|e| parse_err(line, format!("{}: {e}", &headers[i])))
        };
        rows.push((
            record[0].trim().to_owned(),
            AlarmCounts::new(count(1)?, count(2)?, count(3)?),
        ));
    }
    if rows.is_empty() {
        return Err(parse_err(1, "no count rows".into()));
    }
    Ok(rows)
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let betas = cfg.report_betas();
    if let Some(counts_path) = &cfg.counts_only {
        let rows = parse_counts(counts_path)?;
        let per_database: Vec<CountsRow> = rows
            .into_iter()
            .map(|(database_id, counts)| CountsRow {
                database_id,
                report: MetricReport::from_counts(Default::default(), counts, &betas),
            })
            .collect();
        let reports: Vec<MetricReport> = per_database.iter().map(|r| r.report.clone()).collect();
        let average = macro_average(&reports)?;
        let table_rows: Vec<(&str, &MetricReport)> = per_database
            .iter()
            .map(|r| (r.database_id.as_str(), &r.report))
            .collect();
        let rendered = table::render(&table_rows, &average, &betas);

        let mut out = OutDir::create(&cfg.out)?;
        out.json(
            "evaluation.json",
            &CountsEvaluation {
                mode: "counts_only",
                betas: betas.clone(),
                per_database: per_database.clone(),
                macro_average: average,
            },
        )?;
        out.text("table.txt", &rendered)?;
        let outputs = out.finish("evaluate", cfg, vec![digest_file(counts_path)?])?;
        return Ok(Outcome {
            exit_code: EXIT_OK,
            summary: rendered,
            outputs,
        });
    }

    let (corpus, inputs) = load_corpus(cfg)?;
    let eval = evaluate_corpus(&corpus, &cfg.filter, &cfg.stack, &betas)?;
    let table_rows: Vec<(&str, &MetricReport)> = eval
        .per_database
        .iter()
        .map(|d| (d.database_id.as_str(), &d.report))
        .collect();
    let rendered = table::render(&table_rows, &eval.macro_average, &betas);
    let mut out = OutDir::create(&cfg.out)?;
    out.json("evaluation.json", &eval)?;
    out.text("table.txt", &rendered)?;
    let outputs = out.finish("evaluate", cfg, inputs)?;
    Ok(Outcome {
        exit_code: EXIT_OK,
        summary: rendered,
        outputs,
    })
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let (corpus, inputs) = load_corpus(cfg)?;
    let grid = sweep(&corpus, &cfg.grid()?, &cfg.report_betas(), &cfg.stack)?;
    let mut summary = String::new();
    for db in &grid.skipped {
        eprintln!("warning: database {db} has no videos, skipped");
    }
    let mut out = OutDir::create(&cfg.out)?;
    out.write_with("sweep.csv", |w| write_sweep_csv(w, &grid))?;
    summary.push_str(&format!(
        "{} cells x {} betas over {} databases\n",
        grid.cells.len(),
        grid.betas.len(),
        grid.database_ids().len()
    ));
    let outputs = out.finish("sweep", cfg, inputs)?;
    Ok(Outcome {
        exit_code: EXIT_OK,
        summary,
        outputs,
    })
}

/// Tunes on the configured corpus, or on the synthetic benchmark when no
/// annotation file is given.
pub fn cmd_tune(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let (corpus, inputs) = if cfg.annotations.is_some() {
        load_corpus(cfg)?
    } else {
        let out = generate_corpus(&cfg.synth_spec())?;
        (Corpus::pair(out.annotations, out.streams)?, Vec::new())
    };
    let grid = sweep(&corpus, &cfg.grid()?, &cfg.report_betas(), &cfg.stack)?;
    for db in &grid.skipped {
        eprintln!("warning: database {db} has no videos, skipped");
    }
    let constraints = cfg
        .constraints
        .build()?
        .with_baseline(&corpus, &cfg.stack)?;
    let result = tune(&grid, cfg.tuning_beta, &constraints);

    let mut summary = String::new();
    for o in &result.per_database {
        match o {
            DatabaseOptimum::Feasible {
                database_id,
                width_seconds,
                threshold,
                f_beta,
                p_a,
                se_a,
                ..
            } => {
                summary.push_str(&format!(
                    "{database_id}: W* = {width_seconds:.2} s, T* = {threshold}, F_{} = {f_beta:.4}, p_a = {}, se_a = {}\n",
                    cfg.tuning_beta,
                    p_a.map_or("n/a".into(), |v| format!("{v:.4}")),
                    se_a.map_or("n/a".into(), |v| format!("{v:.4}")),
                ));
            }
            DatabaseOptimum::Infeasible {
                database_id,
                reason,
            } => {
                summary.push_str(&format!("{database_id}: infeasible ({reason})\n"));
            }
        }
    }
    match &result.final_config {
        Some(f) => summary.push_str(&format!(
            "final: W = {:.4} s, T_pred = {}\n",
            f.width_seconds, f.threshold
        )),
        None => summary.push_str("final: infeasible\n"),
    }

    let mut out = OutDir::create(&cfg.out)?;
    out.write_with("sweep.csv", |w| write_sweep_csv(w, &grid))?;
    out.json("tuning.json", &result)?;
    let outputs = out.finish("tune", cfg, inputs)?;
    let exit_code = if result.feasibility.feasible {
        EXIT_OK
    } else {
        EXIT_INFEASIBLE
    };
    Ok(Outcome {
        exit_code,
        summary,
        outputs,
    })
}

pub fn cmd_offsets(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let (corpus, inputs) = load_corpus(cfg)?;
    let eval = evaluate_corpus(&corpus, &cfg.filter, &cfg.stack, &cfg.report_betas())?;
    let records = eval.fp_offsets();
    let summary_data = offset_histogram(&records);
    let frac = |v: Option<f64>| v.map_or("undefined".into(), |x| format!("{:.1}%", x * 100.0));
    let summary = format!(
        "{} false alarms; offset < {} frames: {}; duration < {} frames: {}\n",
        summary_data.count,
        summary_data.near_offset_limit,
        frac(summary_data.near_fraction),
        summary_data.short_duration_limit,
        frac(summary_data.short_fraction),
    );
    let mut out = OutDir::create(&cfg.out)?;
    out.write_with("offsets.csv", |w| write_offsets_csv(w, &records))?;
    out.json("offsets.json", &summary_data)?;
    let outputs = out.finish("offsets", cfg, inputs)?;
    Ok(Outcome {
        exit_code: EXIT_OK,
        summary,
        outputs,
    })
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<Outcome> {
    let spec = cfg.synth_spec();
    let generated = generate_corpus(&spec)?;
    let mut out = OutDir::create(&cfg.out)?;
    let ann_path = cfg.out.join("annotations.jsonl");
    let pred_path = cfg.out.join("predictions.csv");
    save_annotations(&ann_path, &generated.annotations)?;
    save_predictions(&pred_path, &generated.streams)?;
    out.written.push(ann_path);
    out.written.push(pred_path);
    out.json("ledger.json", &generated.ledger)?;
    let mut summary = String::new();
    for db in &spec.databases {
        summary.push_str(&format!(
            "{}: {} videos, {} falls, {} planted false dips (seed {})\n",
            db.database_id,
            db.video_count,
            generated.ledger.planted_falls(&db.database_id),
            generated.ledger.planted_dips(&db.database_id),
            db.seed
        ));
    }
    let outputs = out.finish("synth", cfg, Vec::new())?;
    Ok(Outcome {
        exit_code: EXIT_OK,
        summary,
        outputs,
    })
}

pub fn cmd_folds(cfg: &RunConfig) -> Result<Outcome> {
    let ann = require(&cfg.annotations, "annotations")?;
    let annotations = load_annotations(ann)?;
    if annotations.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} holds no videos",
            ann.display()
        )));
    }
    let videos: Vec<GroupedVideo> = annotations
        .iter()
        .map(|a| GroupedVideo {
            video_id: a.video_id.clone(),
            group_id: a.group().to_owned(),
        })
        .collect();
    let assignment = assign_folds(&videos, cfg.folds, cfg.seed)?;
    let mut summary = String::new();
    for fold in 0..assignment.k {
        summary.push_str(&format!(
            "fold {fold}: {} videos\n",
            assignment.members(fold).len()
        ));
    }
    let mut out = OutDir::create(&cfg.out)?;
    out.json("folds.json", &assignment)?;
    let outputs = out.finish("folds", cfg, vec![digest_file(ann)?])?;
    Ok(Outcome {
        exit_code: EXIT_OK,
        summary,
        outputs,
    })
}
