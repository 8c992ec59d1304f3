//! Seeded synthetic corpora: annotated videos with planted falls and planted
//! false dips, plus a ledger of everything planted.
//!
//! Stack scores are No-Fall probabilities. A stack scores `1 - c / L` where `c` is
//! the number of its frames inside a fall, so fully contained stacks score 0 and
//! boundary stacks ramp linearly. False dips are runs of stacks forced down to
//! `fp_depth`. Optional uniform jitter is added last and the result clamped to
//! `[0, 1]`.
//!
//! Randomness comes from ChaCha8 seeded with `seed`, one stream per video index, so
//! any video can be regenerated on its own.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{FrameInterval, PredictionStream, StackConfig, StackScore, VideoAnnotation};
use crate::error::{Error, Result};

pub const GENERATOR: &str = "ChaCha8";

const PLACEMENT_ATTEMPTS: usize = 200;

/// Integer durations drawn uniformly from `[mean - spread, mean + spread]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationDist {
    pub mean: f64,
    pub spread: f64,
}

impl DurationDist {
    fn bounds(&self) -> (u64, u64) {
        let lo = (self.mean - self.spread).round().max(1.0) as u64;
        let hi = (self.mean + self.spread).round().max(lo as f64) as u64;
        (lo, hi)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        let (lo, hi) = self.bounds();
        rng.random_range(lo..=hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub database_id: String,
    pub video_count: usize,
    pub fps: f64,
    pub frames_per_video: u64,
    /// Expected falls per video; the fractional part is a Bernoulli draw.
    pub fall_rate: f64,
    /// Fall length in frames. Draws below the stack length are raised to it.
    pub fall_duration: DurationDist,
    /// Amplitude of uniform per-stack jitter.
    pub score_noise: f64,
    /// Expected false dips right next to each fall.
    pub near_fall_fp_rate: f64,
    /// Expected isolated false dips per video.
    pub far_fp_rate: f64,
    /// False dip length in stacks.
    pub fp_duration: DurationDist,
    pub fp_depth: f64,
    /// Inclusive range of frame offsets for near-fall dips. The lower bound is at
    /// least 2 so that one clean stack separates the dip from the fall ramp.
    pub near_offset: (u64, u64),
    /// Minimum frame offset of isolated dips from any fall and from the first frame.
    pub far_min_offset: u64,
    pub stack: StackConfig,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            database_id: "synthetic".into(),
            video_count: 20,
            fps: 30.0,
            frames_per_video: 600,
            fall_rate: 1.0,
            fall_duration: DurationDist {
                mean: 32.0,
                spread: 8.0,
            },
            score_noise: 0.0,
            near_fall_fp_rate: 0.0,
            far_fp_rate: 0.0,
            fp_duration: DurationDist {
                mean: 4.0,
                spread: 3.0,
            },
            fp_depth: 0.05,
            near_offset: (2, 4),
            far_min_offset: 30,
            stack: StackConfig::default(),
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        self.stack.validate()?;
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return bad(format!("fps must be positive, got {}", self.fps));
        }
        for (name, v) in [
            ("fall_rate", self.fall_rate),
            ("score_noise", self.score_noise),
            ("near_fall_fp_rate", self.near_fall_fp_rate),
            ("far_fp_rate", self.far_fp_rate),
            ("fall_duration.spread", self.fall_duration.spread),
            ("fp_duration.spread", self.fp_duration.spread),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be >= 0, got {v}"));
            }
        }
        if self.fall_duration.mean < 1.0 || self.fp_duration.mean < 1.0 {
            return bad("duration means must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.fp_depth) {
            return bad(format!(
                "fp_depth must lie in [0, 1], got {}",
                self.fp_depth
            ));
        }
        if self.near_offset.0 < 2 || self.near_offset.0 > self.near_offset.1 {
            return bad(format!(
                "near_offset must satisfy 2 <= min <= max, got {:?}",
                self.near_offset
            ));
        }
        if self.frames_per_video < self.stack.stack_length as u64 {
            return bad("videos shorter than one stack".into());
        }
        Ok(())
    }
}

/// A set of databases generated together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCorpusSpec {
    pub databases: Vec<SynthSpec>,
}

impl SynthCorpusSpec {
    /// Three databases shaped like common fall benchmarks: 30, 25 and 30 fps with
    /// mean fall lengths of 30, 24 and 41 frames, no noise and no false dips.
    pub fn three_databases(seed: u64) -> Self {
        let db = |name: &str, fps: f64, mean: f64, spread: f64, i: u64| SynthSpec {
            database_id: name.into(),
            fps,
            fall_duration: DurationDist { mean, spread },
            seed: seed.wrapping_add(i),
            ..SynthSpec::default()
        };
        Self {
            databases: vec![
                db("URFD", 30.0, 30.0, 6.0, 0),
                db("FDD", 25.0, 24.0, 4.0, 1),
                db("Multicam", 30.0, 41.0, 10.0, 2),
            ],
        }
    }

    /// Tuning benchmark: falls of at least 0.8 s, and near/isolated false dips no
    /// longer than 0.3 s, mildly jittered.
    pub fn tuning_benchmark(seed: u64) -> Self {
        let db = |name: &str, fps: f64, fall: (f64, f64), dip: (f64, f64), i: u64| SynthSpec {
            database_id: name.into(),
            video_count: 24,
            fps,
            frames_per_video: 900,
            fall_rate: 1.0,
            fall_duration: DurationDist {
                mean: fall.0,
                spread: fall.1,
            },
            score_noise: 0.02,
            near_fall_fp_rate: 0.5,
            far_fp_rate: 1.5,
            fp_duration: DurationDist {
                mean: dip.0,
                spread: dip.1,
            },
            seed: seed.wrapping_add(i),
            ..SynthSpec::default()
        };
        Self {
            databases: vec![
                db("URFD", 30.0, (32.0, 8.0), (5.0, 4.0), 0),
                db("FDD", 25.0, (26.0, 6.0), (4.0, 3.0), 1),
                db("Multicam", 30.0, (41.0, 10.0), (5.0, 4.0), 2),
            ],
        }
    }

    /// Sets each database seed to `seed + index`.
    pub fn reseed(&mut self, seed: u64) {
        for (i, db) in self.databases.iter_mut().enumerate() {
            db.seed = seed.wrapping_add(i as u64);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DipKind {
    NearFall,
    Isolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedDip {
    pub start_anchor: u64,
    pub end_anchor: u64,
    pub kind: DipKind,
    pub duration_stacks: u64,
    /// Distance from the dip's frame span to the nearest fall; `None` if no fall.
    pub offset_frames: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerVideo {
    pub video_id: String,
    pub database_id: String,
    pub falls: Vec<FrameInterval>,
    pub dips: Vec<PlantedDip>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthLedger {
    pub generator: String,
    pub seeds: Vec<(String, u64)>,
    pub videos: Vec<LedgerVideo>,
}

impl SynthLedger {
    pub fn planted_falls(&self, database_id: &str) -> usize {
        self.videos
            .iter()
            .filter(|v| v.database_id == database_id)
            .map(|v| v.falls.len())
            .sum()
    }

    pub fn planted_dips(&self, database_id: &str) -> usize {
        self.videos
            .iter()
            .filter(|v| v.database_id == database_id)
            .map(|v| v.dips.len())
            .sum()
    }

    /// Alarm counts that noise-free streams produce at the identity filter with a
    /// threshold between `fp_depth` and 1: every fall found, every dip a false alarm.
    pub fn expected_identity_counts(&self, database_id: &str) -> crate::metrics::AlarmCounts {
        crate::metrics::AlarmCounts::new(
            self.planted_falls(database_id) as u64,
            self.planted_dips(database_id) as u64,
            0,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub annotations: Vec<VideoAnnotation>,
    pub streams: Vec<PredictionStream>,
    pub ledger: SynthLedger,
}

fn draw_count(rate: f64, rng: &mut ChaCha8Rng) -> usize {
    let whole = rate.floor();
    let extra = rng.random_bool((rate - whole).clamp(0.0, 1.0));
    whole as usize + usize::from(extra)
}

fn min_distance(span: &FrameInterval, falls: &[FrameInterval]) -> Option<u64> {
    falls.iter().map(|f| span.distance(f)).min()
}

struct VideoBuilder<'a> {
    spec: &'a SynthSpec,
    falls: Vec<FrameInterval>,
    anchors: Vec<u64>,
    base: Vec<f64>,
    dipped: Vec<bool>,
    dips: Vec<PlantedDip>,
}

impl<'a> VideoBuilder<'a> {
    fn new(spec: &'a SynthSpec, falls: Vec<FrameInterval>) -> Self {
        let anchors: Vec<u64> = spec.stack.anchors(spec.frames_per_video).collect();
        let l = spec.stack.stack_length as f64;
        let base = anchors
            .iter()
            .map(|&a| {
                let span = spec.stack.span(a).expect("anchors start at L - 1");
                let covered: u64 = falls.iter().map(|f| f.intersection_len(&span)).sum();
                1.0 - covered as f64 / l
            })
            .collect();
        let n = anchors.len();
        Self {
            spec,
            falls,
            anchors,
            base,
            dipped: vec![false; n],
            dips: Vec::new(),
        }
    }

    fn clean(&self, idx: usize) -> bool {
        self.base[idx] == 1.0 && !self.dipped[idx]
    }

    /// Plants a dip over anchor indices `[first, last]` if every stack is clean and
    /// a clean stack borders it on both sides (or the stream ends).
    fn try_plant(&mut self, first: usize, last: usize, kind: DipKind) -> bool {
        if last >= self.anchors.len() || first > last {
            return false;
        }
        if !(first..=last).all(|i| self.clean(i)) {
            return false;
        }
        if first > 0 && !self.clean(first - 1) {
            return false;
        }
        if last + 1 < self.anchors.len() && !self.clean(last + 1) {
            return false;
        }
        let span = FrameInterval {
            start: self.anchors[first] + 1 - self.spec.stack.stack_length as u64,
            end: self.anchors[last],
        };
        let offset = min_distance(&span, &self.falls);
        let ok = match kind {
            DipKind::NearFall => {
                offset.is_some_and(|o| o >= self.spec.near_offset.0 && o <= self.spec.near_offset.1)
            }
            // the clipped filter windows at the stream start cannot dilute a dip
            DipKind::Isolated => {
                span.start >= self.spec.far_min_offset
                    && offset.is_none_or(|o| o >= self.spec.far_min_offset)
            }
        };
        if !ok {
            return false;
        }
        for flag in &mut self.dipped[first..=last] {
            *flag = true;
        }
        self.dips.push(PlantedDip {
            start_anchor: self.anchors[first],
            end_anchor: self.anchors[last],
            kind,
            duration_stacks: (last - first + 1) as u64,
            offset_frames: offset,
        });
        true
    }

    fn index_at_or_before(&self, frame: u64) -> Option<usize> {
        self.anchors.partition_point(|&a| a <= frame).checked_sub(1)
    }

    fn index_at_or_after(&self, frame: u64) -> Option<usize> {
        let i = self.anchors.partition_point(|&a| a < frame);
        (i < self.anchors.len()).then_some(i)
    }

    fn plant_near(&mut self, rng: &mut ChaCha8Rng) -> bool {
        let l = self.spec.stack.stack_length as u64;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let fall = self.falls[rng.random_range(0..self.falls.len())];
            let duration = self.spec.fp_duration.sample(rng) as usize;
            let offset = rng.random_range(self.spec.near_offset.0..=self.spec.near_offset.1);
            let (first, last) = if rng.random_bool(0.5) {
                // before the fall: last anchor sits `offset` frames ahead of it
                let Some(end) = fall.start.checked_sub(offset) else {
                    continue;
                };
                let Some(last) = self.index_at_or_before(end) else {
                    continue;
                };
                let Some(first) = (last + 1).checked_sub(duration) else {
                    continue;
                };
                (first, last)
            } else {
                let Some(first) = self.index_at_or_after(fall.end + offset + l - 1) else {
                    continue;
                };
                (first, first + duration - 1)
            };
            if self.try_plant(first, last, DipKind::NearFall) {
                return true;
            }
        }
        false
    }

    fn plant_isolated(&mut self, rng: &mut ChaCha8Rng) -> bool {
        for _ in 0..PLACEMENT_ATTEMPTS {
            let duration = self.spec.fp_duration.sample(rng) as usize;
            if duration > self.anchors.len() {
                return false;
            }
            let first = rng.random_range(0..=self.anchors.len() - duration);
            if self.try_plant(first, first + duration - 1, DipKind::Isolated) {
                return true;
            }
        }
        false
    }
}

fn place_falls(spec: &SynthSpec, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<FrameInterval>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let l = spec.stack.stack_length as u64;
    let margin = 2 * l + spec.near_offset.1;
    let slot = spec.frames_per_video / count as u64;
    let (_, longest) = spec.fall_duration.bounds();
    let longest = longest.max(l);
    if slot < longest + 2 * margin {
        return Err(Error::Infeasible(format!(
            "{count} falls of up to {longest} frames do not fit in {} frames",
            spec.frames_per_video
        )));
    }
    Ok((0..count as u64)
        .map(|i| {
            let duration = spec.fall_duration.sample(rng).max(l);
            let lo = i * slot + margin;
            let hi = (i + 1) * slot - margin - duration;
            let start = rng.random_range(lo..=hi);
            FrameInterval {
                start,
                end: start + duration - 1,
            }
        })
        .collect())
}

fn generate_video(
    spec: &SynthSpec,
    index: usize,
) -> Result<(VideoAnnotation, PredictionStream, LedgerVideo)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);

    let video_id = format!("{}-{index:04}", spec.database_id);
    let fall_count = draw_count(spec.fall_rate, &mut rng);
    let falls = place_falls(spec, fall_count, &mut rng)?;
    let mut video = VideoBuilder::new(spec, falls);

    let near = if video.falls.is_empty() {
        0
    } else {
        (0..video.falls.len())
            .map(|_| draw_count(spec.near_fall_fp_rate, &mut rng))
            .sum()
    };
    for _ in 0..near {
        if !video.plant_near(&mut rng) {
            return Err(Error::Infeasible(format!(
                "{video_id}: no room for a near-fall dip"
            )));
        }
    }
    for _ in 0..draw_count(spec.far_fp_rate, &mut rng) {
        if !video.plant_isolated(&mut rng) {
            return Err(Error::Infeasible(format!(
                "{video_id}: no room for an isolated dip"
            )));
        }
    }
    video.dips.sort_by_key(|d| d.start_anchor);

    let scores = video
        .anchors
        .iter()
        .enumerate()
        .map(|(i, &anchor_frame)| {
            let clean = if video.dipped[i] {
                spec.fp_depth
            } else {
                video.base[i]
            };
            let jitter = if spec.score_noise > 0.0 {
                rng.random_range(-spec.score_noise..=spec.score_noise)
            } else {
                0.0
            };
            StackScore {
                anchor_frame,
                score: (clean + jitter).clamp(0.0, 1.0),
            }
        })
        .collect();

    let annotation = VideoAnnotation {
        video_id: video_id.clone(),
        database_id: spec.database_id.clone(),
        fps: spec.fps,
        frame_count: spec.frames_per_video,
        fall_intervals: video.falls.clone(),
        group_id: None,
    };
    let ledger = LedgerVideo {
        video_id: video_id.clone(),
        database_id: spec.database_id.clone(),
        falls: video.falls,
        dips: video.dips,
    };
    Ok((annotation, PredictionStream { video_id, scores }, ledger))
}

pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    generate_corpus(&SynthCorpusSpec {
        databases: vec![spec.clone()],
    })
}

pub fn generate_corpus(spec: &SynthCorpusSpec) -> Result<SynthOutput> {
    let mut out = SynthOutput {
        annotations: Vec::new(),
        streams: Vec::new(),
        ledger: SynthLedger {
            generator: GENERATOR.into(),
            seeds: Vec::new(),
            videos: Vec::new(),
        },
    };
    for db in &spec.databases {
        db.validate()?;
        out.ledger.seeds.push((db.database_id.clone(), db.seed));
        let indices: Vec<usize> = (0..db.video_count).collect();
        for video in crate::par::map(&indices, |&i| generate_video(db, i)) {
            let (annotation, stream, ledger) = video?;
            out.annotations.push(annotation);
            out.streams.push(stream);
            out.ledger.videos.push(ledger);
        }
    }
    Ok(out)
}
