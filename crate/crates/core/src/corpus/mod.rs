//! Ground-truth data model: annotated videos, score streams, stack labels and
//! video-grouped fold assignment.

mod folds;
mod io;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use folds::{assign_folds, FoldAssignment, GroupedVideo};
pub use io::{
    load_annotations, load_predictions, parse_annotations, parse_predictions, save_annotations,
    save_predictions, write_annotations, write_predictions,
};

/// Inclusive `[start, end]` frame range, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u64; 2]", into = "[u64; 2]")]
pub struct FrameInterval {
    pub start: u64,
    pub end: u64,
}

impl FrameInterval {
    pub fn new(start: u64, end: u64) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidInput(format!(
                "interval [{start}, {end}] has start after end"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn len(&self) -> u64 {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn overlaps(&self, other: &FrameInterval) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    /// Number of frames shared with `other`.
    pub fn intersection_len(&self, other: &FrameInterval) -> u64 {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        if lo > hi {
            0
        } else {
            hi - lo + 1
        }
    }

    /// Gap in frames between two disjoint intervals; adjacent intervals are 1 apart,
    /// overlapping ones 0.
    pub fn distance(&self, other: &FrameInterval) -> u64 {
        other
            .start
            .saturating_sub(self.end)
            .max(self.start.saturating_sub(other.end))
    }
}

impl TryFrom<[u64; 2]> for FrameInterval {
    type Error = String;

    fn try_from([start, end]: [u64; 2]) -> std::result::Result<Self, Self::Error> {
        if start > end {
            Err(format!("interval [{start}, {end}] has start after end"))
        } else {
            Ok(Self { start, end })
        }
    }
}

impl From<FrameInterval> for [u64; 2] {
    fn from(iv: FrameInterval) -> Self {
        [iv.start, iv.end]
    }
}

/// Ground truth for one video. An empty `fall_intervals` list marks a daily-life video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoAnnotation {
    pub video_id: String,
    pub database_id: String,
    pub fps: f64,
    pub frame_count: u64,
    pub fall_intervals: Vec<FrameInterval>,
    /// Parent video this sequence was derived from; defaults to `video_id`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_id: Option<String>,
}

impl VideoAnnotation {
    pub fn validate(&self) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::InvalidInput(format!(
                "video {}: fps must be positive, got {}",
                self.video_id, self.fps
            )));
        }
        let mut prev: Option<&FrameInterval> = None;
        for iv in &self.fall_intervals {
            if iv.start > iv.end {
                return Err(Error::InvalidInput(format!(
                    "video {}: interval [{}, {}] has start after end",
                    self.video_id, iv.start, iv.end
                )));
            }
            if iv.end >= self.frame_count {
                return Err(Error::InvalidInput(format!(
                    "video {}: interval [{}, {}] exceeds frame_count {}",
                    self.video_id, iv.start, iv.end, self.frame_count
                )));
            }
            if let Some(p) = prev {
                if iv.start <= p.end {
                    return Err(Error::InvalidInput(format!(
                        "video {}: intervals [{}, {}] and [{}, {}] overlap or are unsorted",
                        self.video_id, p.start, p.end, iv.start, iv.end
                    )));
                }
            }
            prev = Some(iv);
        }
        Ok(())
    }

    pub fn group(&self) -> &str {
        self.group_id.as_deref().unwrap_or(&self.video_id)
    }

    /// Frames before the first fall (`pre-fall`), empty for non-fall videos.
    pub fn pre_fall(&self) -> Option<FrameInterval> {
        match self.fall_intervals.first() {
            Some(first) if first.start > 0 => Some(FrameInterval {
                start: 0,
                end: first.start - 1,
            }),
            _ => None,
        }
    }

    /// Frames after the last fall (`post-fall`).
    pub fn post_fall(&self) -> Option<FrameInterval> {
        match self.fall_intervals.last() {
            Some(last) if last.end + 1 < self.frame_count => Some(FrameInterval {
                start: last.end + 1,
                end: self.frame_count - 1,
            }),
            _ => None,
        }
    }

    /// Frames of `span` covered by some fall interval.
    pub fn fall_coverage(&self, span: &FrameInterval) -> u64 {
        self.fall_intervals
            .iter()
            .map(|iv| iv.intersection_len(span))
            .sum()
    }
}

/// Geometry of a classifier input: `stack_length` consecutive optical-flow pairs,
/// one stack every `stride` frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackConfig {
    pub stack_length: usize,
    pub stride: usize,
}

impl Default for StackConfig {
    fn default() -> Self {
        Self {
            stack_length: 10,
            stride: 1,
        }
    }
}

impl StackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stack_length == 0 || self.stride == 0 {
            return Err(Error::InvalidInput(format!(
                "stack_length and stride must be >= 1, got {} and {}",
                self.stack_length, self.stride
            )));
        }
        Ok(())
    }

    /// Frames `[anchor - (L - 1), anchor]` seen by the stack anchored at `anchor`,
    /// or `None` when the span starts before frame 0.
    pub fn span(&self, anchor: u64) -> Option<FrameInterval> {
        let back = self.stack_length as u64 - 1;
        anchor
            .checked_sub(back)
            .map(|start| FrameInterval { start, end: anchor })
    }

    /// Anchors whose span fits in a video of `frame_count` frames.
    pub fn anchors(&self, frame_count: u64) -> impl Iterator<Item = u64> {
        let first = self.stack_length as u64 - 1;
        (first..frame_count).step_by(self.stride)
    }
}

/// Ground-truth class of a stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StackLabel {
    Fall,
    NoFall,
    Transition,
}

/// Decision for a single stack after thresholding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinaryLabel {
    Fall,
    NoFall,
}

/// Label of the stack anchored at `anchor_frame`: `Fall` when every frame of its
/// span is inside a fall, `NoFall` when none is, `Transition` otherwise.
pub fn label_stack(
    annotation: &VideoAnnotation,
    anchor_frame: u64,
    config: &StackConfig,
) -> Result<StackLabel> {
    let span = config
        .span(anchor_frame)
        .filter(|_| anchor_frame < annotation.frame_count)
        .ok_or(Error::Range {
            anchor: anchor_frame,
            stack_length: config.stack_length,
            frame_count: annotation.frame_count,
        })?;
    let covered = annotation.fall_coverage(&span);
    Ok(if covered == span.len() {
        StackLabel::Fall
    } else if covered == 0 {
        StackLabel::NoFall
    } else {
        StackLabel::Transition
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StackScore {
    pub anchor_frame: u64,
    /// No-Fall probability emitted by the classifier.
    pub score: f64,
}

/// Classifier output for one video, ordered by anchor frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionStream {
    pub video_id: String,
    pub scores: Vec<StackScore>,
}

impl PredictionStream {
    pub fn new(video_id: impl Into<String>, scores: Vec<StackScore>) -> Result<Self> {
        let stream = Self {
            video_id: video_id.into(),
            scores,
        };
        stream.validate()?;
        Ok(stream)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.scores.iter().enumerate() {
            if !(0.0..=1.0).contains(&s.score) {
                return Err(Error::InvalidInput(format!(
                    "video {}: score {} at anchor {} is outside [0, 1]",
                    self.video_id, s.score, s.anchor_frame
                )));
            }
            if i > 0 && self.scores[i - 1].anchor_frame >= s.anchor_frame {
                return Err(Error::InvalidInput(format!(
                    "video {}: anchor {} does not increase after {}",
                    self.video_id,
                    s.anchor_frame,
                    self.scores[i - 1].anchor_frame
                )));
            }
        }
        Ok(())
    }

    pub fn anchors(&self) -> Vec<u64> {
        self.scores.iter().map(|s| s.anchor_frame).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.scores.iter().map(|s| s.score).collect()
    }
}

/// An annotation paired with the score stream for the same video.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledVideo {
    pub annotation: VideoAnnotation,
    pub stream: PredictionStream,
}

/// Paired videos grouped by database, iterated in database-id order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub databases: BTreeMap<String, Vec<LabeledVideo>>,
}

impl Corpus {
    /// Joins annotations and streams on `video_id`. Every annotation needs a stream
    /// and every stream an annotation.
    pub fn pair(annotations: Vec<VideoAnnotation>, streams: Vec<PredictionStream>) -> Result<Self> {
        let mut by_id: BTreeMap<String, PredictionStream> = BTreeMap::new();
        for stream in streams {
            if by_id.contains_key(&stream.video_id) {
                return Err(Error::InvalidInput(format!(
                    "duplicate prediction stream for video {}",
                    stream.video_id
                )));
            }
            by_id.insert(stream.video_id.clone(), stream);
        }
        let mut seen = BTreeSet::new();
        let mut databases: BTreeMap<String, Vec<LabeledVideo>> = BTreeMap::new();
        for annotation in annotations {
            annotation.validate()?;
            if !seen.insert(annotation.video_id.clone()) {
                return Err(Error::InvalidInput(format!(
                    "duplicate annotation for video {}",
                    annotation.video_id
                )));
            }
            let stream = by_id.remove(&annotation.video_id).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "no prediction stream for annotated video {}",
                    annotation.video_id
                ))
            })?;
            stream.validate()?;
            databases
                .entry(annotation.database_id.clone())
                .or_default()
                .push(LabeledVideo { annotation, stream });
        }
        if let Some(orphan) = by_id.keys().next() {
            return Err(Error::InvalidInput(format!(
                "prediction stream for unannotated video {orphan}"
            )));
        }
        Ok(Self { databases })
    }

    pub fn is_empty(&self) -> bool {
        self.databases.values().all(Vec::is_empty)
    }

    pub fn video_count(&self) -> usize {
        self.databases.values().map(Vec::len).sum()
    }

    pub fn fall_count(&self, database_id: &str) -> usize {
        self.databases
            .get(database_id)
            .map(|videos| {
                videos
                    .iter()
                    .map(|v| v.annotation.fall_intervals.len())
                    .sum()
            })
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn annotation(intervals: &[(u64, u64)], frame_count: u64) -> VideoAnnotation {
        VideoAnnotation {
            video_id: "v".into(),
            database_id: "db".into(),
            fps: 30.0,
            frame_count,
            fall_intervals: intervals
                .iter()
                .map(|&(s, e)| FrameInterval::new(s, e).unwrap())
                .collect(),
            group_id: None,
        }
    }

    #[test]
    fn label_examples() {
        let a = annotation(&[(100, 130)], 300);
        let cfg = StackConfig::default();
        assert_eq!(label_stack(&a, 120, &cfg).unwrap(), StackLabel::Fall);
        assert_eq!(label_stack(&a, 50, &cfg).unwrap(), StackLabel::NoFall);
        assert_eq!(label_stack(&a, 105, &cfg).unwrap(), StackLabel::Transition);
        // span [121, 130] is the last fully contained one
        assert_eq!(label_stack(&a, 130, &cfg).unwrap(), StackLabel::Fall);
        assert_eq!(label_stack(&a, 131, &cfg).unwrap(), StackLabel::Transition);
        assert_eq!(label_stack(&a, 140, &cfg).unwrap(), StackLabel::NoFall);
    }

    #[test]
    fn label_out_of_range() {
        let a = annotation(&[(100, 130)], 300);
        let cfg = StackConfig::default();
        assert!(matches!(label_stack(&a, 8, &cfg), Err(Error::Range { .. })));
        assert!(matches!(
            label_stack(&a, 300, &cfg),
            Err(Error::Range { .. })
        ));
        assert!(label_stack(&a, 9, &cfg).is_ok());
        assert!(label_stack(&a, 299, &cfg).is_ok());
    }

    #[test]
    fn validate_rejects_bad_annotations() {
        assert!(annotation(&[], 10).validate().is_ok());
        assert!(annotation(&[(5, 10)], 10).validate().is_err());
        assert!(annotation(&[(1, 3), (3, 5)], 10).validate().is_err());
        assert!(annotation(&[(5, 6), (1, 2)], 10).validate().is_err());
        let mut a = annotation(&[], 10);
        a.fps = 0.0;
        assert!(a.validate().is_err());
        assert!(FrameInterval::new(30, 20).is_err());
    }

    #[test]
    fn pre_and_post_fall_segments() {
        let a = annotation(&[(100, 130)], 300);
        assert_eq!(a.pre_fall(), Some(FrameInterval { start: 0, end: 99 }));
        assert_eq!(
            a.post_fall(),
            Some(FrameInterval {
                start: 131,
                end: 299
            })
        );
        assert_eq!(annotation(&[], 10).pre_fall(), None);
    }

    #[test]
    fn anchors_respect_stride() {
        let cfg = StackConfig {
            stack_length: 3,
            stride: 2,
        };
        assert_eq!(cfg.anchors(8).collect::<Vec<_>>(), vec![2, 4, 6]);
    }

    #[test]
    fn stream_validation() {
        let ok = PredictionStream::new(
            "v",
            vec![
                StackScore {
                    anchor_frame: 9,
                    score: 0.2,
                },
                StackScore {
                    anchor_frame: 10,
                    score: 1.0,
                },
            ],
        );
        assert!(ok.is_ok());
        let dup = PredictionStream::new(
            "v",
            vec![
                StackScore {
                    anchor_frame: 9,
                    score: 0.2,
                },
                StackScore {
                    anchor_frame: 9,
                    score: 1.0,
                },
            ],
        );
        assert!(dup.is_err());
        let out = PredictionStream::new(
            "v",
            vec![StackScore {
                anchor_frame: 9,
                score: 1.2,
            }],
        );
        assert!(out.is_err());
    }

    #[test]
    fn pairing_requires_both_sides() {
        let a = annotation(&[], 20);
        let s = PredictionStream::new(
            "v",
            vec![StackScore {
                anchor_frame: 9,
                score: 1.0,
            }],
        )
        .unwrap();
        assert!(Corpus::pair(vec![a.clone()], vec![s.clone()]).is_ok());
        assert!(Corpus::pair(vec![a.clone()], vec![]).is_err());
        let mut other = s.clone();
        other.video_id = "w".into();
        assert!(Corpus::pair(vec![a], vec![s, other]).is_err());
    }
}
