//! Per-frame detection streams and their line-delimited JSON form.
//!
//! One JSON object per line:
//!
//! ```text
//! {"meta":{"frame_count":120}}
//! {"frame":0,"boxes":[{"x":10.0,"y":12.5,"w":40.0,"h":48.0,"score":0.93}]}
//! {"frame":2,"boxes":[{"x":11.0,"y":12.0,"w":40.0,"h":48.0,"synth":true}]}
//! ```
//!
//! The `meta` header is optional and only legal as the first record. Without
//! it the video length is taken to be the largest frame index plus one.
//! Frames that have no record carry zero detections. Ground truth uses the
//! same grammar without scores.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::StreamError;
use crate::geometry::BBox;

/// Where a box came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Provenance {
    #[default]
    Detected,
    /// Inserted by temporal gap filling rather than emitted by a detector.
    Synthesized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub provenance: Provenance,
}

impl Detection {
    pub fn detected(bbox: BBox) -> Self {
        Self {
            bbox,
            provenance: Provenance::Detected,
        }
    }

    pub fn synthesized(bbox: BBox) -> Self {
        Self {
            bbox,
            provenance: Provenance::Synthesized,
        }
    }

    pub fn is_synthesized(&self) -> bool {
        self.provenance == Provenance::Synthesized
    }
}

impl From<BBox> for Detection {
    fn from(bbox: BBox) -> Self {
        Self::detected(bbox)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame: u64,
    pub boxes: Vec<Detection>,
}

/// Detections (or ground truth) for a whole video, sorted by frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionStream {
    records: Vec<FrameRecord>,
    frame_count: u64,
}

impl DetectionStream {
    pub fn empty(frame_count: u64) -> Self {
        Self {
            records: Vec::new(),
            frame_count,
        }
    }

    /// Builds a stream from records in any order. Records sharing a frame
    /// index are merged by concatenation; the number of merges is returned.
    /// Records with no boxes are dropped, since an absent frame already means
    /// "no detections".
    ///
    /// `frame_count` is raised to cover the largest frame index if needed.
    pub fn from_records(
        records: impl IntoIterator<Item = FrameRecord>,
        frame_count: u64,
    ) -> (Self, usize) {
        let mut records: Vec<FrameRecord> = records.into_iter().collect();
        records.sort_by_key(|r| r.frame);
        let mut merged: Vec<FrameRecord> = Vec::with_capacity(records.len());
        let mut duplicates = 0;
        for rec in records {
            match merged.last_mut() {
                Some(last) if last.frame == rec.frame => {
                    last.boxes.extend(rec.boxes);
                    duplicates += 1;
                }
                _ => merged.push(rec),
            }
        }
        let min_count = merged.last().map_or(0, |r| r.frame + 1);
        merged.retain(|r| !r.boxes.is_empty());
        (
            Self {
                records: merged,
                frame_count: frame_count.max(min_count),
            },
            duplicates,
        )
    }

    /// Convenience for tests and generators: one entry per frame index,
    /// skipping frames whose list is empty.
    pub fn from_frames<I, B>(frames: I) -> Self
    where
        I: IntoIterator<Item = Vec<B>>,
        B: Into<Detection>,
    {
        let mut count = 0;
        let mut records = Vec::new();
        for (frame, boxes) in frames.into_iter().enumerate() {
            count = frame as u64 + 1;
            if !boxes.is_empty() {
                records.push(FrameRecord {
                    frame: frame as u64,
                    boxes: boxes.into_iter().map(Into::into).collect(),
                });
            }
        }
        Self {
            records,
            frame_count: count,
        }
    }

    pub fn records(&self) -> &[FrameRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<FrameRecord> {
        self.records
    }

    pub fn frame_count(&self) -> u64 {
        self.frame_count
    }

    pub fn set_frame_count(&mut self, frame_count: u64) {
        let min_count = self.records.last().map_or(0, |r| r.frame + 1);
        self.frame_count = frame_count.max(min_count);
    }

    /// Boxes at `frame`; empty when the frame has no record.
    pub fn boxes_at(&self, frame: u64) -> &[Detection] {
        match self.records.binary_search_by_key(&frame, |r| r.frame) {
            Ok(i) => &self.records[i].boxes,
            Err(_) => &[],
        }
    }

    pub fn box_count(&self) -> usize {
        self.records.iter().map(|r| r.boxes.len()).sum()
    }

    pub fn synthesized_count(&self) -> usize {
        self.records
            .iter()
            .flat_map(|r| &r.boxes)
            .filter(|d| d.is_synthesized())
            .count()
    }

    /// Drops scored boxes below `min_score`. Unscored boxes are kept.
    pub fn filter_min_score(&self, min_score: f64) -> Self {
        let records = self.records.iter().map(|r| FrameRecord {
            frame: r.frame,
            boxes: r
                .boxes
                .iter()
                .filter(|d| d.bbox.score.is_none_or(|s| s >= min_score))
                .copied()
                .collect(),
        });
        Self::from_records(records, self.frame_count).0
    }
}

/// A parsed stream plus the number of duplicate frame records that were
/// merged while reading it.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedStream {
    pub stream: DetectionStream,
    pub merged_duplicates: usize,
}

#[derive(Serialize, Deserialize)]
struct WireBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    #[serde(default, skip_serializing_if = "is_false")]
    synth: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Serialize, Deserialize)]
struct WireFrame {
    frame: u64,
    boxes: Vec<WireBox>,
}

#[derive(Serialize, Deserialize)]
struct WireMeta {
    frame_count: u64,
}

#[derive(Serialize, Deserialize)]
struct WireHeader {
    meta: WireMeta,
}

impl WireBox {
    fn into_detection(self, line: usize, index: usize) -> Result<Detection, StreamError> {
        if !(self.w >= 0.0) || !(self.h >= 0.0) {
            return Err(StreamError::at(
                line,
                format!(
                    "box {index}: width and height must be non-negative (w={}, h={})",
                    self.w, self.h
                ),
            ));
        }
        if let Some(s) = self.score {
            if !(0.0..=1.0).contains(&s) {
                return Err(StreamError::at(
                    line,
                    format!("box {index}: score {s} outside [0, 1]"),
                ));
            }
        }
        Ok(Detection {
            bbox: BBox {
                x: self.x,
                y: self.y,
                w: self.w,
                h: self.h,
                score: self.score,
            },
            provenance: if self.synth {
                Provenance::Synthesized
            } else {
                Provenance::Detected
            },
        })
    }

    fn from_detection(d: &Detection) -> Self {
        Self {
            x: d.bbox.x,
            y: d.bbox.y,
            w: d.bbox.w,
            h: d.bbox.h,
            score: d.bbox.score,
            synth: d.is_synthesized(),
        }
    }
}

/// Parses a whole stream held in memory.
pub fn parse_stream(text: &[u8]) -> Result<ParsedStream, StreamError> {
    read_stream(text)
}

/// Parses a stream from any buffered reader, one line at a time.
pub fn read_stream<R: BufRead>(mut input: R) -> Result<ParsedStream, StreamError> {
    let mut records = Vec::new();
    let mut header: Option<(usize, u64)> = None;
    let mut seen_record = false;
    let mut buf = Vec::new();
    let mut line_no = 0usize;

    loop {
        buf.clear();
        if input.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let line = std::str::from_utf8(&buf)
            .map_err(|e| StreamError::at(line_no, format!("invalid UTF-8: {e}")))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }

        let value: Value = serde_json::from_str(line)
            .map_err(|e| StreamError::at(line_no, format!("invalid JSON: {e}")))?;
        let Some(obj) = value.as_object() else {
            return Err(StreamError::at(line_no, "record must be a JSON object"));
        };

        if obj.contains_key("meta") {
            if seen_record || header.is_some() {
                return Err(StreamError::at(
                    line_no,
                    "meta header is only allowed as the first record",
                ));
            }
            let h: WireHeader = serde_json::from_value(value)
                .map_err(|e| StreamError::at(line_no, format!("bad meta header: {e}")))?;
            header = Some((line_no, h.meta.frame_count));
            seen_record = true;
            continue;
        }
        seen_record = true;

        let frame: WireFrame =
            serde_json::from_value(value).map_err(|e| StreamError::at(line_no, e.to_string()))?;
        let boxes = frame
            .boxes
            .into_iter()
            .enumerate()
            .map(|(i, b)| b.into_detection(line_no, i))
            .collect::<Result<Vec<_>, _>>()?;
        records.push(FrameRecord {
            frame: frame.frame,
            boxes,
        });
    }

    let (stream, merged_duplicates) =
        DetectionStream::from_records(records, header.map_or(0, |h| h.1));
    if let Some((line, declared)) = header {
        if declared < stream.frame_count {
            return Err(StreamError::at(
                line,
                format!(
                    "frame_count {declared} is smaller than the largest frame index + 1 ({})",
                    stream.frame_count
                ),
            ));
        }
    }
    Ok(ParsedStream {
        stream,
        merged_duplicates,
    })
}

pub fn read_stream_file(path: impl AsRef<Path>) -> Result<ParsedStream, StreamError> {
    read_stream(BufReader::new(File::open(path)?))
}

/// Writes the canonical form: a `meta` header, then one record per frame in
/// ascending order. Numbers use the shortest representation that parses
/// back to the same value.
pub fn write_stream<W: Write>(s: &DetectionStream, mut out: W) -> std::io::Result<()> {
    let header = WireHeader {
        meta: WireMeta {
            frame_count: s.frame_count,
        },
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for rec in &s.records {
        let wire = WireFrame {
            frame: rec.frame,
            boxes: rec.boxes.iter().map(WireBox::from_detection).collect(),
        };
        serde_json::to_writer(&mut out, &wire)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn stream_to_bytes(s: &DetectionStream) -> Vec<u8> {
    let mut out = Vec::new();
    write_stream(s, &mut out).expect("writing to a Vec cannot fail");
    out
}

pub fn write_stream_file(s: &DetectionStream, path: impl AsRef<Path>) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_stream(s, &mut out)?;
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<ParsedStream, StreamError> {
        parse_stream(text.as_bytes())
    }

    #[test]
    fn empty_input() {
        let p = parse("").unwrap();
        assert!(p.stream.records().is_empty());
        assert_eq!(p.stream.frame_count(), 0);
    }

    #[test]
    fn records_are_sorted() {
        let p = parse(
            "{\"frame\": 3, \"boxes\": [{\"x\": 1, \"y\": 2, \"w\": 3, \"h\": 4}]}\n\
             {\"frame\": 1, \"boxes\": [{\"x\": 0, \"y\": 0, \"w\": 3, \"h\": 4}]}\n",
        )
        .unwrap();
        let frames: Vec<u64> = p.stream.records().iter().map(|r| r.frame).collect();
        assert_eq!(frames, vec![1, 3]);
        assert_eq!(p.stream.frame_count(), 4);
    }

    #[test]
    fn negative_width_names_the_line() {
        let err = parse(
            "{\"frame\": 0, \"boxes\": []}\n\
             {\"frame\": 1, \"boxes\": [{\"x\": 0, \"y\": 0, \"w\": -1, \"h\": 4}]}\n",
        )
        .unwrap_err();
        assert_eq!(err.line(), Some(2));
        assert!(err.to_string().contains("non-negative"), "{err}");
    }

    #[test]
    fn missing_frame_field() {
        let err = parse("{\"boxes\": []}").unwrap_err();
        assert_eq!(err.line(), Some(1));
        assert!(err.to_string().contains("frame"), "{err}");
    }

    #[test]
    fn malformed_json_and_non_objects() {
        assert_eq!(parse("{\"frame\": 0,").unwrap_err().line(), Some(1));
        assert_eq!(parse("\n\n[1,2]").unwrap_err().line(), Some(3));
        assert_eq!(
            parse("{\"frame\": -1, \"boxes\": []}").unwrap_err().line(),
            Some(1)
        );
    }

    #[test]
    fn score_out_of_range() {
        let err =
            parse("{\"frame\":0,\"boxes\":[{\"x\":0,\"y\":0,\"w\":1,\"h\":1,\"score\":1.5}]}")
                .unwrap_err();
        assert!(err.to_string().contains("score"));
    }

    #[test]
    fn header_sets_frame_count() {
        let p = parse("{\"meta\":{\"frame_count\":10}}\n{\"frame\":2,\"boxes\":[]}").unwrap();
        assert_eq!(p.stream.frame_count(), 10);
    }

    #[test]
    fn header_must_come_first_and_cover_frames() {
        let late =
            parse("{\"frame\":2,\"boxes\":[]}\n{\"meta\":{\"frame_count\":10}}").unwrap_err();
        assert_eq!(late.line(), Some(2));
        let short =
            parse("{\"meta\":{\"frame_count\":2}}\n{\"frame\":5,\"boxes\":[]}").unwrap_err();
        assert_eq!(short.line(), Some(1));
    }

    #[test]
    fn duplicates_merge_with_count() {
        let p = parse(
            "{\"frame\":1,\"boxes\":[{\"x\":0,\"y\":0,\"w\":1,\"h\":1}]}\n\
             {\"frame\":1,\"boxes\":[{\"x\":5,\"y\":0,\"w\":1,\"h\":1}]}\n",
        )
        .unwrap();
        assert_eq!(p.merged_duplicates, 1);
        assert_eq!(p.stream.boxes_at(1).len(), 2);
        assert_eq!(p.stream.boxes_at(1)[1].bbox.x, 5.0);
    }

    #[test]
    fn single_box_writes_header_and_one_line() {
        let s =
            DetectionStream::from_frames(vec![vec![BBox::new(1.0, 2.0, 3.0, 4.0).with_score(0.5)]]);
        let text = String::from_utf8(stream_to_bytes(&s)).unwrap();
        assert_eq!(
            text,
            "{\"meta\":{\"frame_count\":1}}\n\
             {\"frame\":0,\"boxes\":[{\"x\":1.0,\"y\":2.0,\"w\":3.0,\"h\":4.0,\"score\":0.5}]}\n"
        );
    }

    #[test]
    fn synth_flag_round_trips() {
        let s = DetectionStream::from_frames(vec![vec![
            Detection::detected(BBox::new(0.0, 0.0, 1.0, 1.0)),
            Detection::synthesized(BBox::new(0.1, 0.2, 1.0 / 3.0, 1.0)),
        ]]);
        let text = stream_to_bytes(&s);
        assert!(String::from_utf8_lossy(&text).contains("\"synth\":true"));
        assert_eq!(parse_stream(&text).unwrap().stream, s);
    }

    #[test]
    fn absent_frames_are_empty() {
        let s = DetectionStream::from_frames(vec![
            vec![BBox::new(0.0, 0.0, 1.0, 1.0)],
            vec![],
            vec![BBox::new(0.0, 0.0, 1.0, 1.0)],
        ]);
        assert_eq!(s.records().len(), 2);
        assert!(s.boxes_at(1).is_empty());
        assert!(s.boxes_at(99).is_empty());
    }

    fn arb_detection() -> impl Strategy<Value = Detection> {
        (
            -1e4..1e4f64,
            -1e4..1e4f64,
            0.0..1e3f64,
            0.0..1e3f64,
            proptest::option::of(0.0..=1.0f64),
            any::<bool>(),
        )
            .prop_map(|(x, y, w, h, score, synth)| Detection {
                bbox: BBox { x, y, w, h, score },
                provenance: if synth {
                    Provenance::Synthesized
                } else {
                    Provenance::Detected
                },
            })
    }

    fn arb_stream() -> impl Strategy<Value = DetectionStream> {
        (
            proptest::collection::btree_map(
                0u64..500,
                proptest::collection::vec(arb_detection(), 0..5),
                0..20,
            ),
            0u64..600,
        )
            .prop_map(|(frames, count)| {
                let records = frames
                    .into_iter()
                    .map(|(frame, boxes)| FrameRecord { frame, boxes });
                DetectionStream::from_records(records, count).0
            })
    }

    proptest! {
        #[test]
        fn write_then_parse_is_identity(s in arb_stream()) {
            let parsed = parse_stream(&stream_to_bytes(&s)).unwrap();
            prop_assert_eq!(parsed.merged_duplicates, 0);
            prop_assert_eq!(parsed.stream, s);
        }
    }
}
