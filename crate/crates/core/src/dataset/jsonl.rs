use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{numbered_classes, GestureDataset, GestureSample, FEATURES, FRAMES};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct GestureRecord {
    label: usize,
    frames: Vec<Vec<f64>>,
}

/// Parses one `{"label": int, "frames": [[63 reals] x 20]}` object per line.
///
/// Blank lines are skipped. Any invalid line fails the whole load.
pub fn parse_gesture_jsonl(text: &str, num_classes: usize) -> Result<GestureDataset> {
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: GestureRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        if rec.label >= num_classes {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("unknown label {} (expected < {num_classes})", rec.label),
            });
        }
        if rec.frames.len() != FRAMES {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {FRAMES} frames, got {}", rec.frames.len()),
            });
        }
        if let Some((f, frame)) = rec.frames.iter().enumerate().find(|(_, f)| f.len() != FEATURES) {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("frame {f} has {} values, expected {FEATURES}", frame.len()),
            });
        }
        let sample = GestureSample::from_frames(&rec.frames, rec.label).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        samples.push(sample);
    }
    GestureDataset::new(samples, numbered_classes(num_classes))
}

pub fn load_gesture_jsonl(path: &Path, num_classes: usize) -> Result<GestureDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_gesture_jsonl(&text, num_classes)
}

pub fn write_gesture_jsonl(dataset: &GestureDataset, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for s in &dataset.samples {
        let rec = GestureRecord {
            label: s.label,
            frames: s.frames().map(<[f64]>::to_vec).collect(),
        };
        serde_json::to_writer(&mut out, &rec).expect("in-memory serialization");
        out.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(label: usize, frames: usize, width: usize) -> String {
        let frame: Vec<f64> = (0..width).map(|i| i as f64 / 100.0).collect();
        let rec = serde_json::json!({ "label": label, "frames": vec![frame; frames] });
        rec.to_string()
    }

    #[test]
    fn loads_valid_lines() {
        let text: Vec<String> = (0..120).map(|i| line(i % 6, 20, 63)).collect();
        let ds = parse_gesture_jsonl(&text.join("\n"), 6).unwrap();
        assert_eq!(ds.len(), 120);
        assert_eq!(ds.class_counts(), vec![20; 6]);
    }

    #[test]
    fn short_frame_names_its_line() {
        let text = [line(0, 20, 63), line(1, 20, 62)].join("\n");
        match parse_gesture_jsonl(&text, 6) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("62"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_label_and_bad_json_fail() {
        assert!(matches!(
            parse_gesture_jsonl(&line(6, 20, 63), 6),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_gesture_jsonl("{\"label\": 0", 6),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_gesture_jsonl(&line(0, 19, 63), 6),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn empty_input_is_empty_dataset() {
        let ds = parse_gesture_jsonl("", 6).unwrap();
        assert!(ds.is_empty());
    }
}
