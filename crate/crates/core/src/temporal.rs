//! From scores to alarms: trailing gate filter, strict thresholding, maximal
//! Fall runs, and matching of those runs against annotated falls.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    label_stack, BinaryLabel, Corpus, FrameInterval, LabeledVideo, PredictionStream, StackConfig,
    StackLabel, VideoAnnotation,
};
use crate::error::{Error, Result};
use crate::metrics::{macro_average, AlarmCounts, ConfusionCounts, MetricReport};
use crate::par;

/// Gate filter width, either absolute in frames or in seconds (converted per video
/// with its frame rate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterWidth {
    Seconds(f64),
    Frames(usize),
}

impl FilterWidth {
    pub fn frames(&self, fps: f64) -> usize {
        match *self {
            FilterWidth::Seconds(w) => width_to_frames(w, fps),
            FilterWidth::Frames(n) => n.max(1),
        }
    }

    pub fn seconds(&self, fps: f64) -> f64 {
        match *self {
            FilterWidth::Seconds(w) => w,
            FilterWidth::Frames(n) => n as f64 / fps,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            FilterWidth::Seconds(w) => w.is_finite() && w > 0.0,
            FilterWidth::Frames(n) => n >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "filter width must be positive, got {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub width: FilterWidth,
    /// Filtered scores strictly below this are labeled Fall.
    pub threshold: f64,
}

impl FilterConfig {
    pub fn new(width: FilterWidth, threshold: f64) -> Result<Self> {
        let cfg = Self { width, threshold };
        cfg.validate()?;
        Ok(cfg)
    }

    /// One-frame filter: thresholding of the raw scores.
    pub fn identity(threshold: f64) -> Self {
        Self {
            width: FilterWidth::Frames(1),
            threshold,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.width.validate()?;
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidInput(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// `round(W * fps)`, at least one frame.
pub fn width_to_frames(width_seconds: f64, fps: f64) -> usize {
    let frames = (width_seconds * fps).round();
    if frames >= 1.0 {
        frames as usize
    } else {
        1
    }
}

/// Trailing box filter: element `i` is the mean of `scores[i + 1 - width ..= i]`,
/// with the window clipped at the start of the stream.
pub fn gate_filter(scores: &[f64], width: usize) -> Vec<f64> {
    let width = width.max(1);
    if width == 1 {
        return scores.to_vec();
    }
    (0..scores.len())
        .map(|i| {
            let window = &scores[(i + 1).saturating_sub(width)..=i];
            let (mut sum, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
            for &x in window {
                sum += x;
                lo = lo.min(x);
                hi = hi.max(x);
            }
            // Rounding noise can put a mean that is exactly a short decimal
            // (0.5) on either side of it depending on summation order. Pull
            // such means back onto the 1e-12 grid; leave others untouched.
            let n = window.len() as f64;
            let mean = sum / n;
            let grid = (mean * 1e12).round() / 1e12;
            let noise = n * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0);
            let mean = if (mean - grid).abs() <= noise {
                grid
            } else {
                mean
            };
            mean.clamp(lo, hi)
        })
        .collect()
}

pub fn threshold_labels(filtered: &[f64], threshold: f64) -> Vec<BinaryLabel> {
    filtered
        .iter()
        .map(|&x| {
            if x < threshold {
                BinaryLabel::Fall
            } else {
                BinaryLabel::NoFall
            }
        })
        .collect()
}

/// Maximal run of Fall-labeled stacks, as inclusive anchor-frame bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlarmRun {
    pub start: u64,
    pub end: u64,
}

impl AlarmRun {
    /// Frames seen by the run's stacks: the first stack reaches `L - 1` frames back.
    pub fn frame_span(&self, stack_length: usize) -> FrameInterval {
        FrameInterval {
            start: self
                .start
                .saturating_sub(stack_length.saturating_sub(1) as u64),
            end: self.end,
        }
    }

    pub fn duration(&self) -> u64 {
        self.end - self.start + 1
    }
}

/// # Panics
///
/// Panics when `labels` and `anchors` differ in length.
pub fn extract_alarms(labels: &[BinaryLabel], anchors: &[u64]) -> Vec<AlarmRun> {
    assert_eq!(labels.len(), anchors.len(), "labels and anchors must align");
    let mut runs = Vec::new();
    let mut open: Option<AlarmRun> = None;
    for (&label, &anchor) in labels.iter().zip(anchors) {
        match (label, open.as_mut()) {
            (BinaryLabel::Fall, Some(run)) => run.end = anchor,
            (BinaryLabel::Fall, None) => {
                open = Some(AlarmRun {
                    start: anchor,
                    end: anchor,
                })
            }
            (BinaryLabel::NoFall, _) => runs.extend(open.take()),
        }
    }
    runs.extend(open);
    runs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlarmKind {
    #[serde(rename = "TP_a")]
    TruePositive,
    #[serde(rename = "FP_a")]
    FalsePositive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlarmEvent {
    pub video_id: String,
    pub start_frame: u64,
    pub end_frame: u64,
    pub kind: AlarmKind,
    /// Frames between a false alarm and the nearest fall; `None` for true alarms
    /// and for false alarms in videos without any fall.
    pub offset_frames: Option<u64>,
}

/// Duration and distance-to-fall of one false alarm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FpOffsetRecord {
    pub duration_frames: u64,
    /// `None` stands for an infinite offset (no fall in the video).
    pub offset_frames: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AlarmMatch {
    pub counts: AlarmCounts,
    pub alarms: Vec<AlarmEvent>,
    pub fp_offsets: Vec<FpOffsetRecord>,
}

/// Classifies alarm runs against sorted, disjoint fall intervals.
///
/// A fall is detected when the frame span of at least one run overlaps it. Extra
/// runs on an already detected fall add nothing, and a run touching two falls
/// detects both. Runs touching no fall are false alarms.
pub fn match_alarms(
    video_id: &str,
    alarms: &[AlarmRun],
    truth: &[FrameInterval],
    stack_length: usize,
) -> AlarmMatch {
    let mut detected = vec![false; truth.len()];
    let mut out = AlarmMatch::default();
    for run in alarms {
        let span = run.frame_span(stack_length);
        let first = truth.partition_point(|f| f.end < span.start);
        let mut hit = false;
        for (i, fall) in truth.iter().enumerate().skip(first) {
            if fall.start > span.end {
                break;
            }
            detected[i] = true;
            hit = true;
        }
        let (kind, offset) = if hit {
            (AlarmKind::TruePositive, None)
        } else {
            let before = first.checked_sub(1).map(|i| span.distance(&truth[i]));
            let after = truth.get(first).map(|f| span.distance(f));
            let offset = match (before, after) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
            out.counts.fp_a += 1;
            out.fp_offsets.push(FpOffsetRecord {
                duration_frames: run.duration(),
                offset_frames: offset,
            });
            (AlarmKind::FalsePositive, offset)
        };
        out.alarms.push(AlarmEvent {
            video_id: video_id.to_owned(),
            start_frame: run.start,
            end_frame: run.end,
            kind,
            offset_frames: offset,
        });
    }
    out.counts.tp_a = detected.iter().filter(|&&d| d).count() as u64;
    out.counts.fn_a = truth.len() as u64 - out.counts.tp_a;
    out
}

pub const NEAR_OFFSET_FRAMES: u64 = 5;
pub const SHORT_DURATION_FRAMES: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetSummary {
    pub count: usize,
    pub near_offset_limit: u64,
    pub short_duration_limit: u64,
    /// Share of false alarms with offset below `near_offset_limit`.
    pub near_fraction: Option<f64>,
    /// Share of false alarms shorter than `short_duration_limit`.
    pub short_fraction: Option<f64>,
    pub points: Vec<FpOffsetRecord>,
}

/// Summarizes false alarms with the default limits (offset < 5, duration < 10).
pub fn offset_histogram(records: &[FpOffsetRecord]) -> OffsetSummary {
    offset_histogram_with(records, NEAR_OFFSET_FRAMES, SHORT_DURATION_FRAMES)
}

pub fn offset_histogram_with(
    records: &[FpOffsetRecord],
    near_offset_limit: u64,
    short_duration_limit: u64,
) -> OffsetSummary {
    let n = records.len();
    let share = |count: usize| (n > 0).then(|| count as f64 / n as f64);
    let near = records
        .iter()
        .filter(|r| r.offset_frames.is_some_and(|o| o < near_offset_limit))
        .count();
    let short = records
        .iter()
        .filter(|r| r.duration_frames < short_duration_limit)
        .count();
    OffsetSummary {
        count: n,
        near_offset_limit,
        short_duration_limit,
        near_fraction: share(near),
        short_fraction: share(short),
        points: records.to_vec(),
    }
}

/// Writes `duration_frames,offset_frames` rows; infinite offsets are written as `inf`.
pub fn write_offsets_csv<W: Write>(mut writer: W, records: &[FpOffsetRecord]) -> Result<()> {
    writeln!(writer, "duration_frames,offset_frames")?;
    for r in records {
        match r.offset_frames {
            Some(o) => writeln!(writer, "{},{}", r.duration_frames, o)?,
            None => writeln!(writer, "{},inf", r.duration_frames)?,
        }
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoEvaluation {
    pub video_id: String,
    pub database_id: String,
    pub filter: FilterConfig,
    pub width_frames: usize,
    pub report: MetricReport,
    pub alarms: Vec<AlarmEvent>,
    pub fp_offsets: Vec<FpOffsetRecord>,
}

/// A video with its ground-truth stack labels computed once, reused across
/// filter configurations.
#[derive(Debug, Clone)]
pub(crate) struct PreparedVideo<'a> {
    pub annotation: &'a VideoAnnotation,
    pub anchors: Vec<u64>,
    pub values: Vec<f64>,
    pub truth: Vec<StackLabel>,
}

impl<'a> PreparedVideo<'a> {
    pub fn new(
        stream: &PredictionStream,
        annotation: &'a VideoAnnotation,
        stack_cfg: &StackConfig,
    ) -> Result<Self> {
        if stream.video_id != annotation.video_id {
            return Err(Error::InvalidInput(format!(
                "stream for {} paired with annotation for {}",
                stream.video_id, annotation.video_id
            )));
        }
        stack_cfg.validate()?;
        let anchors = stream.anchors();
        let truth = anchors
            .iter()
            .map(|&a| label_stack(annotation, a, stack_cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            annotation,
            anchors,
            values: stream.values(),
            truth,
        })
    }

    /// Stack and alarm counts for already-filtered scores at `threshold`.
    pub fn score(
        &self,
        filtered: &[f64],
        threshold: f64,
        stack_length: usize,
    ) -> (ConfusionCounts, AlarmMatch) {
        let labels = threshold_labels(filtered, threshold);
        let mut counts = ConfusionCounts::default();
        for (&truth, &pred) in self.truth.iter().zip(&labels) {
            counts.record(truth, pred);
        }
        let runs = extract_alarms(&labels, &self.anchors);
        let matched = match_alarms(
            &self.annotation.video_id,
            &runs,
            &self.annotation.fall_intervals,
            stack_length,
        );
        (counts, matched)
    }
}

/// Filter, threshold, extract and match one video. Transition stacks are left out
/// of the stack-level counts but still go through the alarm path.
pub fn evaluate(
    stream: &PredictionStream,
    annotation: &VideoAnnotation,
    cfg: &FilterConfig,
    stack_cfg: &StackConfig,
    betas: &[f64],
) -> Result<VideoEvaluation> {
    cfg.validate()?;
    let prepared = PreparedVideo::new(stream, annotation, stack_cfg)?;
    let width_frames = cfg.width.frames(annotation.fps);
    let filtered = gate_filter(&prepared.values, width_frames);
    let (counts, matched) = prepared.score(&filtered, cfg.threshold, stack_cfg.stack_length);
    Ok(VideoEvaluation {
        video_id: annotation.video_id.clone(),
        database_id: annotation.database_id.clone(),
        filter: *cfg,
        width_frames,
        report: MetricReport::from_counts(counts, matched.counts, betas),
        alarms: matched.alarms,
        fp_offsets: matched.fp_offsets,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatabaseReport {
    pub database_id: String,
    pub videos: usize,
    pub falls: usize,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEvaluation {
    pub filter: FilterConfig,
    pub stack: StackConfig,
    pub betas: Vec<f64>,
    pub per_database: Vec<DatabaseReport>,
    pub macro_average: MetricReport,
    pub videos: Vec<VideoEvaluation>,
}

impl CorpusEvaluation {
    pub fn fp_offsets(&self) -> Vec<FpOffsetRecord> {
        self.videos
            .iter()
            .flat_map(|v| v.fp_offsets.iter().copied())
            .collect()
    }
}

/// Evaluates every video, pools counts per database and macro-averages the
/// per-database reports.
pub fn evaluate_corpus(
    corpus: &Corpus,
    cfg: &FilterConfig,
    stack_cfg: &StackConfig,
    betas: &[f64],
) -> Result<CorpusEvaluation> {
    if corpus.is_empty() {
        return Err(Error::InvalidInput("corpus has no videos".into()));
    }
    let all: Vec<&LabeledVideo> = corpus.databases.values().flatten().collect();
    let videos = par::map(&all, |v| {
        evaluate(&v.stream, &v.annotation, cfg, stack_cfg, betas)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut per_database = Vec::new();
    for (database_id, members) in &corpus.databases {
        if members.is_empty() {
            continue;
        }
        let (mut counts, mut alarms) = (ConfusionCounts::default(), AlarmCounts::default());
        for v in videos.iter().filter(|v| &v.database_id == database_id) {
            counts += v.report.counts;
            alarms += v.report.alarm_counts;
        }
        per_database.push(DatabaseReport {
            database_id: database_id.clone(),
            videos: members.len(),
            falls: corpus.fall_count(database_id),
            report: MetricReport::from_counts(counts, alarms, betas),
        });
    }
    let reports: Vec<MetricReport> = per_database.iter().map(|d| d.report.clone()).collect();
    Ok(CorpusEvaluation {
        filter: *cfg,
        stack: *stack_cfg,
        betas: betas.to_vec(),
        macro_average: macro_average(&reports)?,
        per_database,
        videos,
    })
}
