//! Session files: one event per line.
//!
//! ```text
//! {"ev":"toggle","on":true}
//! {"ev":"face","faces":[[128 reals], ...]}
//! {"ev":"hand","coords":[63 reals]}
//! {"ev":"context","app":"msword"}      // or null
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ActionEvent, SessionEvent};
use crate::error::{Error, Result};
use crate::face::{normalize_embedding, FaceEmbedding};

#[derive(Serialize, Deserialize)]
#[serde(tag = "ev", rename_all = "lowercase", deny_unknown_fields)]
enum RawEvent {
    Toggle { on: bool },
    Face { faces: Vec<Vec<f64>> },
    Hand { coords: Vec<f64> },
    Context { app: Option<String> },
}

impl RawEvent {
    fn into_event(self) -> std::result::Result<SessionEvent, String> {
        Ok(match self {
            RawEvent::Toggle { on } => SessionEvent::Toggle { on },
            RawEvent::Face { faces } => SessionEvent::Face {
                faces: faces
                    .iter()
                    .map(|v| normalize_embedding(v).map_err(|e| e.to_string()))
                    .collect::<std::result::Result<_, _>>()?,
            },
            RawEvent::Hand { coords } => {
                if coords.iter().any(|v| !v.is_finite()) {
                    return Err("hand frame has non-finite coordinates".into());
                }
                SessionEvent::Hand { coords }
            }
            RawEvent::Context { app } => SessionEvent::Context { app },
        })
    }

    fn from_event(event: &SessionEvent) -> Self {
        match event {
            SessionEvent::Toggle { on } => RawEvent::Toggle { on: *on },
            SessionEvent::Face { faces } => RawEvent::Face {
                faces: faces.iter().map(|f: &FaceEmbedding| f.vector.clone()).collect(),
            },
            SessionEvent::Hand { coords } => RawEvent::Hand {
                coords: coords.clone(),
            },
            SessionEvent::Context { app } => RawEvent::Context { app: app.clone() },
        }
    }
}

/// Parses a session. Blank lines are skipped; errors carry the index of the
/// offending event (0-based, counting only non-blank lines).
pub fn parse_session_jsonl(text: &str) -> Result<Vec<SessionEvent>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(index, line)| {
            serde_json::from_str::<RawEvent>(line)
                .map_err(|e| e.to_string())
                .and_then(RawEvent::into_event)
                .map_err(|msg| Error::Event { index, msg })
        })
        .collect()
}

pub fn read_session(path: &Path) -> Result<Vec<SessionEvent>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_session_jsonl(&text)
}

pub fn write_session_jsonl(events: &[SessionEvent], path: &Path) -> Result<()> {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(&RawEvent::from_event(e)).expect("event serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// `{"idx":..,"action":..,"context":..}` per line.
pub fn render_action_log(log: &[ActionEvent]) -> String {
    log.iter()
        .map(|a| serde_json::to_string(a).expect("action serializes") + "\n")
        .collect()
}

pub fn parse_action_log(text: &str) -> Result<Vec<ActionEvent>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::Action;

    #[test]
    fn parses_every_event_kind() {
        let face: Vec<String> = (0..128).map(|i| if i == 0 { "2.0".into() } else { "0.0".into() }).collect();
        let hand = vec!["0.5"; 63].join(",");
        let text = format!(
            "{{\"ev\":\"toggle\",\"on\":true}}\n\n{{\"ev\":\"face\",\"faces\":[[{}]]}}\n{{\"ev\":\"hand\",\"coords\":[{hand}]}}\n{{\"ev\":\"context\",\"app\":\"msword\"}}\n{{\"ev\":\"context\",\"app\":null}}\n",
            face.join(",")
        );
        let events = parse_session_jsonl(&text).unwrap();
        assert_eq!(events.len(), 5);
        match &events[1] {
            SessionEvent::Face { faces } => assert_eq!(faces[0].vector[0], 1.0),
            other => panic!("{other:?}"),
        }
        assert_eq!(events[4], SessionEvent::Context { app: None });
    }

    #[test]
    fn malformed_event_reports_index() {
        let text = "{\"ev\":\"toggle\",\"on\":true}\n{\"ev\":\"jump\"}\n";
        assert!(matches!(
            parse_session_jsonl(text),
            Err(Error::Event { index: 1, .. })
        ));
        let short_face = "{\"ev\":\"face\",\"faces\":[[1.0,2.0]]}";
        assert!(matches!(
            parse_session_jsonl(short_face),
            Err(Error::Event { index: 0, .. })
        ));
    }

    #[test]
    fn session_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let mut v = vec![0.0; 128];
        v[3] = 1.0;
        let events = vec![
            SessionEvent::Toggle { on: true },
            SessionEvent::Face {
                faces: vec![FaceEmbedding { vector: v, identity: None }],
            },
            SessionEvent::Hand { coords: vec![0.25; 63] },
            SessionEvent::Context { app: Some("vlc".into()) },
        ];
        write_session_jsonl(&events, &path).unwrap();
        assert_eq!(read_session(&path).unwrap(), events);
    }

    #[test]
    fn action_log_format() {
        let log = vec![
            ActionEvent { idx: 4, action: Action::Save, context: Some("msword".into()) },
            ActionEvent { idx: 9, action: Action::Shutdown, context: None },
        ];
        let text = render_action_log(&log);
        assert_eq!(
            text,
            "{\"idx\":4,\"action\":\"Save\",\"context\":\"msword\"}\n{\"idx\":9,\"action\":\"Shutdown\",\"context\":null}\n"
        );
        assert_eq!(parse_action_log(&text).unwrap(), log);
    }
}
