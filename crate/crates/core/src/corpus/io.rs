use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::corpus::{PredictionStream, StackScore, VideoAnnotation};
use crate::error::{Error, Result};

const PREDICTION_HEADER: [&str; 3] = ["video_id", "anchor_frame", "score"];

/// Reads JSON Lines annotations. Blank lines are skipped; errors carry the 1-based
/// line number.
pub fn parse_annotations<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<VideoAnnotation>> {
    let mut out = Vec::new();
    let mut ids: HashMap<String, u64> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let annotation: VideoAnnotation = serde_json::from_str(&line)
            .map_err(|e| Error::parse(source_name, line_no, e.to_string()))?;
        annotation.validate().map_err(|e| {
            let msg = match e {
                Error::InvalidInput(m) => m,
                other => other.to_string(),
            };
            Error::parse(source_name, line_no, msg)
        })?;
        if let Some(first) = ids.insert(annotation.video_id.clone(), line_no) {
            return Err(Error::parse(
                source_name,
                line_no,
                format!(
                    "video {} already defined on line {first}",
                    annotation.video_id
                ),
            ));
        }
        out.push(annotation);
    }
    Ok(out)
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<VideoAnnotation>> {
    let path = path.as_ref();
    let file = File::open(path)?;
    parse_annotations(BufReader::new(file), &path.display().to_string())
}

pub fn write_annotations<W: Write>(mut writer: W, annotations: &[VideoAnnotation]) -> Result<()> {
    for a in annotations {
        let line = serde_json::to_string(a).map_err(|e| Error::InvalidInput(e.to_string()))?;
        writer.write_all(line.as_bytes())?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn save_annotations(path: impl AsRef<Path>, annotations: &[VideoAnnotation]) -> Result<()> {
    write_annotations(std::io::BufWriter::new(File::create(path)?), annotations)
}

/// Reads a `video_id,anchor_frame,score` CSV into one stream per video, in order of
/// first appearance. Anchors must strictly increase within a video.
pub fn parse_predictions<R: Read>(reader: R, source_name: &str) -> Result<Vec<PredictionStream>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(source_name, 1, e.to_string()))?;
    if headers.iter().map(str::trim).ne(PREDICTION_HEADER) {
        return Err(Error::parse(
            source_name,
            1,
            format!("expected header `{}`", PREDICTION_HEADER.join(",")),
        ));
    }

    let mut streams: Vec<PredictionStream> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::parse(source_name, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 3 {
            return Err(Error::parse(source_name, line, "expected 3 fields"));
        }
        let video_id = record[0].trim();
        let anchor: u64 = record[1]
            .trim()
            .parse()
            .map_err(|e| Error::parse(source_name, line, format!("anchor_frame: {e}")))?;
        let score: f64 = record[2]
            .trim()
            .parse()
            .map_err(|e| Error::parse(source_name, line, format!("score: {e}")))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::parse(
                source_name,
                line,
                format!("score {score} is outside [0, 1]"),
            ));
        }
        let slot = *index.entry(video_id.to_owned()).or_insert_with(|| {
            streams.push(PredictionStream {
                video_id: video_id.to_owned(),
                scores: Vec::new(),
            });
            streams.len() - 1
        });
        let stream = &mut streams[slot];
        if let Some(last) = stream.scores.last() {
            if anchor <= last.anchor_frame {
                return Err(Error::parse(
                    source_name,
                    line,
                    format!(
                        "video {video_id}: anchor {anchor} does not increase after {}",
                        last.anchor_frame
                    ),
                ));
            }
        }
        stream.scores.push(StackScore {
            anchor_frame: anchor,
            score,
        });
    }
    Ok(streams)
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionStream>> {
    let path = path.as_ref();
    let file = File::open(path)?;
    parse_predictions(BufReader::new(file), &path.display().to_string())
}

pub fn write_predictions<W: Write>(writer: W, streams: &[PredictionStream]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::InvalidInput(e.to_string());
    wtr.write_record(PREDICTION_HEADER).map_err(csv_err)?;
    for stream in streams {
        for s in &stream.scores {
            wtr.write_record([
                stream.video_id.as_str(),
                &s.anchor_frame.to_string(),
                &s.score.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_predictions(path: impl AsRef<Path>, streams: &[PredictionStream]) -> Result<()> {
    write_predictions(std::io::BufWriter::new(File::create(path)?), streams)
}
