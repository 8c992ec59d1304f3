//! Fall-alarm post-processing and evaluation for per-stack classifier scores.
//!
//! A detector emits, for every stack of `L` consecutive optical-flow pairs, the
//! probability that the stack is *not* a fall. This crate turns those score
//! streams into alarms with a trailing gate (box) filter and a threshold,
//! scores the alarms against annotated fall intervals, and searches the
//! `(W, T_pred)` plane for the configuration that maximizes `F_beta` under
//! alarm-precision and sensitivity constraints.
//!
//! The modules mirror that pipeline:
//!
//! * [`corpus`]: annotations, score streams, stack labels, grouped folds, file IO
//! * [`metrics`]: stack and alarm confusion ratios, `F_beta`, weighted BCE
//! * [`temporal`]: gate filter, thresholding, alarm runs and ground-truth matching
//! * [`tuning`]: grid sweep, constrained argmax and cross-database averaging
//! * [`synth`]: seeded synthetic corpora with planted falls and false dips

pub mod corpus;
pub mod error;
pub mod metrics;
mod par;
pub mod synth;
pub mod temporal;
pub mod tuning;

pub use corpus::{
    assign_folds, label_stack, BinaryLabel, Corpus, FoldAssignment, FrameInterval, GroupedVideo,
    LabeledVideo, PredictionStream, StackConfig, StackLabel, StackScore, VideoAnnotation,
};
pub use error::{Error, Result};
pub use metrics::{
    alarm_precision, alarm_sensitivity, f_beta, macro_average, precision, sensitivity, specificity,
    weighted_bce, AlarmCounts, ConfusionCounts, FBetaValue, LossParams, MetricReport,
};
pub use temporal::{
    evaluate, evaluate_corpus, extract_alarms, gate_filter, match_alarms, offset_histogram,
    threshold_labels, width_to_frames, AlarmEvent, AlarmKind, AlarmMatch, AlarmRun,
    CorpusEvaluation, FilterConfig, FilterWidth, FpOffsetRecord, OffsetSummary, VideoEvaluation,
};
pub use tuning::{
    average_optima, per_database_argmax, sweep, tune, DatabaseOptimum, FinalConfig, GridSpec,
    SweepCell, SweepGrid, TuningConstraints, TuningResult,
};
