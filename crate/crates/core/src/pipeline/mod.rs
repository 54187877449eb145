//! In-use state machine: toggle, face gate, 20-frame gesture windows and
//! macro dispatch, plus the training phase that produces an engine bundle.
//!
//! Authorization is event-driven. Every face frame re-runs the gate and the
//! result holds until the next face frame; a failed frame deauthorizes at once
//! and drops any partial gesture window.

mod bindings;
mod bundle;
mod session;

pub use bindings::{default_bindings, register_binding, Action, BindingTable, MacroBinding, Resolved};
pub use bundle::{run_training_phase, EngineBundle, TrainingPhaseConfig};
pub use session::{parse_action_log, parse_session_jsonl, read_session, render_action_log, write_session_jsonl};

use serde::{Deserialize, Serialize};

use crate::dataset::{GestureSample, FEATURES, FRAMES};
use crate::error::{Error, Result};
use crate::face::{verify_frame, FaceEmbedding, VerifierModel, DEFAULT_AUTH_THRESHOLD};
use crate::model::{argmax, classify_gesture, GestureNet};

pub const DEFAULT_GESTURE_THRESHOLD: f64 = 0.80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    AwaitingAuth,
    Authorized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Screen {
    Locked,
    Unlocked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub phase: Phase,
    pub screen: Screen,
    pub active_context: Option<String>,
    buffer: Vec<Vec<f64>>,
    /// Index the next event will receive; action logs stay globally indexed
    /// when a stream is replayed in pieces.
    events_seen: usize,
}

impl Default for SessionState {
    fn default() -> Self {
        Self {
            phase: Phase::Idle,
            screen: Screen::Unlocked,
            active_context: None,
            buffer: Vec::new(),
            events_seen: 0,
        }
    }
}

impl SessionState {
    pub fn buffered_frames(&self) -> usize {
        self.buffer.len()
    }

    pub fn events_seen(&self) -> usize {
        self.events_seen
    }
}

/// One input event. On disk faces are bare 128-vectors; see [`parse_session_jsonl`].
#[derive(Debug, Clone, PartialEq)]
pub enum SessionEvent {
    Toggle { on: bool },
    Face { faces: Vec<FaceEmbedding> },
    Hand { coords: Vec<f64> },
    Context { app: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionEvent {
    pub idx: usize,
    pub action: Action,
    pub context: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// A face authorizes only with user probability strictly above this.
    pub auth_threshold: f64,
    /// Minimum top-class probability for a gesture window to dispatch.
    pub gesture_threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            auth_threshold: DEFAULT_AUTH_THRESHOLD,
            gesture_threshold: DEFAULT_GESTURE_THRESHOLD,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("auth", self.auth_threshold), ("gesture", self.gesture_threshold)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} threshold {v} outside (0, 1)")));
            }
        }
        Ok(())
    }
}

/// Class probabilities for one complete gesture window.
pub trait GestureClassifier {
    fn gesture_probabilities(&self, window: &GestureSample) -> Result<Vec<f64>>;
}

pub trait FaceVerifier {
    fn authorizes(&self, faces: &[FaceEmbedding], threshold: f64) -> bool;
}

impl GestureClassifier for GestureNet {
    fn gesture_probabilities(&self, window: &GestureSample) -> Result<Vec<f64>> {
        classify_gesture(self, window)
    }
}

impl FaceVerifier for VerifierModel {
    fn authorizes(&self, faces: &[FaceEmbedding], threshold: f64) -> bool {
        verify_frame(self, faces, threshold).authorized
    }
}

/// The two models consulted while stepping; both are read-only.
pub struct Models<'a, G: ?Sized, F: ?Sized> {
    pub gesture: &'a G,
    pub face: &'a F,
}

impl<G: ?Sized, F: ?Sized> Clone for Models<'_, G, F> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<G: ?Sized, F: ?Sized> Copy for Models<'_, G, F> {}

fn dispatch(
    state: &mut SessionState,
    idx: usize,
    probs: &[f64],
    bindings: &BindingTable,
    config: &PipelineConfig,
) -> Option<ActionEvent> {
    let class = argmax(probs);
    if class == bindings.garbage_class() || probs[class] < config.gesture_threshold {
        return None;
    }
    let resolved = bindings.get(class)?.resolve(state.active_context.as_deref())?;
    if state.screen == Screen::Locked && resolved.action != Action::UnlockScreen {
        return None;
    }
    match resolved.action {
        Action::LockScreen => state.screen = Screen::Locked,
        Action::UnlockScreen => state.screen = Screen::Unlocked,
        _ => {}
    }
    Some(ActionEvent {
        idx,
        action: resolved.action,
        context: resolved.context,
    })
}

/// Advances the session by one event. Returns the new state and at most one action.
pub fn step<G, F>(
    state: &SessionState,
    event: &SessionEvent,
    models: Models<'_, G, F>,
    bindings: &BindingTable,
    config: &PipelineConfig,
) -> Result<(SessionState, Option<ActionEvent>)>
where
    G: GestureClassifier + ?Sized,
    F: FaceVerifier + ?Sized,
{
    let idx = state.events_seen;
    let mut next = state.clone();
    next.events_seen += 1;
    let mut emitted = None;
    match event {
        SessionEvent::Toggle { on: true } => {
            if next.phase == Phase::Idle {
                next.phase = Phase::AwaitingAuth;
            }
        }
        SessionEvent::Toggle { on: false } => {
            next.phase = Phase::Idle;
            next.buffer.clear();
        }
        SessionEvent::Context { app } => next.active_context = app.clone(),
        SessionEvent::Face { faces } => {
            if next.phase != Phase::Idle {
                if models.face.authorizes(faces, config.auth_threshold) {
                    next.phase = Phase::Authorized;
                } else {
                    next.phase = Phase::AwaitingAuth;
                    next.buffer.clear();
                }
            }
        }
        SessionEvent::Hand { coords } => {
            if coords.len() != FEATURES {
                return Err(Error::Event {
                    index: idx,
                    msg: format!("hand frame has {} values, expected {FEATURES}", coords.len()),
                });
            }
            if next.phase == Phase::Authorized {
                next.buffer.push(coords.clone());
                if next.buffer.len() == FRAMES {
                    let window = GestureSample::from_frames(&next.buffer, 0)
                        .map_err(|e| Error::Event { index: idx, msg: e.to_string() })?;
                    next.buffer.clear();
                    let probs = models
                        .gesture
                        .gesture_probabilities(&window)
                        .map_err(|e| Error::Event { index: idx, msg: e.to_string() })?;
                    emitted = dispatch(&mut next, idx, &probs, bindings, config);
                }
            }
        }
    }
    Ok((next, emitted))
}

/// Folds [`step`] over `events` starting from `state`.
pub fn replay_from<G, F>(
    state: SessionState,
    events: &[SessionEvent],
    models: Models<'_, G, F>,
    bindings: &BindingTable,
    config: &PipelineConfig,
) -> Result<(SessionState, Vec<ActionEvent>)>
where
    G: GestureClassifier + ?Sized,
    F: FaceVerifier + ?Sized,
{
    let mut state = state;
    let mut log = Vec::new();
    for event in events {
        let (next, action) = step(&state, event, models, bindings, config)?;
        state = next;
        log.extend(action);
    }
    Ok((state, log))
}

/// Action log of a whole session from a fresh state.
pub fn replay<G, F>(
    events: &[SessionEvent],
    models: Models<'_, G, F>,
    bindings: &BindingTable,
    config: &PipelineConfig,
) -> Result<Vec<ActionEvent>>
where
    G: GestureClassifier + ?Sized,
    F: FaceVerifier + ?Sized,
{
    replay_from(SessionState::default(), events, models, bindings, config).map(|(_, log)| log)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Reads the class off the first coordinate of the first frame.
    struct FirstValue;

    impl GestureClassifier for FirstValue {
        fn gesture_probabilities(&self, window: &GestureSample) -> Result<Vec<f64>> {
            let class = window.frame(0)[0] as usize;
            let mut p = vec![0.02; 6];
            p[class] = 0.9;
            Ok(p)
        }
    }

    /// Authorizes when any face's first component is positive.
    struct SignGate;

    impl FaceVerifier for SignGate {
        fn authorizes(&self, faces: &[FaceEmbedding], _: f64) -> bool {
            faces.iter().any(|f| f.vector[0] > 0.0)
        }
    }

    fn face(sign: f64) -> SessionEvent {
        let mut v = vec![0.0; 128];
        v[0] = sign;
        SessionEvent::Face {
            faces: vec![FaceEmbedding { vector: v, identity: None }],
        }
    }

    fn gesture(class: usize) -> Vec<SessionEvent> {
        (0..FRAMES)
            .map(|_| SessionEvent::Hand {
                coords: vec![class as f64; FEATURES],
            })
            .collect()
    }

    fn ctx(app: Option<&str>) -> SessionEvent {
        SessionEvent::Context {
            app: app.map(String::from),
        }
    }

    fn run(events: &[SessionEvent]) -> Vec<ActionEvent> {
        let models = Models { gesture: &FirstValue, face: &SignGate };
        replay(events, models, &default_bindings(), &PipelineConfig::default()).unwrap()
    }

    fn session(parts: Vec<Vec<SessionEvent>>) -> Vec<SessionEvent> {
        parts.into_iter().flatten().collect()
    }

    #[test]
    fn authorized_save_in_msword() {
        let events = session(vec![
            vec![SessionEvent::Toggle { on: true }, face(1.0), ctx(Some("msword"))],
            gesture(0),
        ]);
        let log = run(&events);
        assert_eq!(
            log,
            vec![ActionEvent {
                idx: 22,
                action: Action::Save,
                context: Some("msword".into())
            }]
        );
    }

    #[test]
    fn exit_closes_app_or_shuts_down() {
        let with_app = session(vec![
            vec![SessionEvent::Toggle { on: true }, face(1.0), ctx(Some("msword"))],
            gesture(2),
        ]);
        assert_eq!(run(&with_app)[0].action, Action::Exit);
        let without = session(vec![vec![SessionEvent::Toggle { on: true }, face(1.0)], gesture(2)]);
        let log = run(&without);
        assert_eq!(log[0].action, Action::Shutdown);
        assert_eq!(log[0].context, None);
    }

    #[test]
    fn stray_face_never_dispatches() {
        let events = session(vec![
            vec![SessionEvent::Toggle { on: true }, face(-1.0), ctx(Some("msword"))],
            gesture(0),
            gesture(2),
        ]);
        assert!(run(&events).is_empty());
    }

    #[test]
    fn toggle_off_mid_capture_discards_window() {
        let g = gesture(0);
        let events = session(vec![
            vec![SessionEvent::Toggle { on: true }, face(1.0), ctx(Some("msword"))],
            g[..10].to_vec(),
            vec![SessionEvent::Toggle { on: false }, SessionEvent::Toggle { on: true }, face(1.0)],
            g[..10].to_vec(),
        ]);
        assert!(run(&events).is_empty());
    }

    #[test]
    fn deauthorization_clears_buffer() {
        let g = gesture(0);
        let events = session(vec![
            vec![SessionEvent::Toggle { on: true }, face(1.0), ctx(Some("msword"))],
            g[..15].to_vec(),
            vec![face(-1.0), face(1.0)],
            g[..5].to_vec(),
        ]);
        assert!(run(&events).is_empty());
        let models = Models { gesture: &FirstValue, face: &SignGate };
        let (state, _) = replay_from(
            SessionState::default(),
            &events,
            models,
            &default_bindings(),
            &PipelineConfig::default(),
        )
        .unwrap();
        assert_eq!(state.buffered_frames(), 5);
    }

    #[test]
    fn garbage_and_low_confidence_do_not_dispatch() {
        struct Unsure;
        impl GestureClassifier for Unsure {
            fn gesture_probabilities(&self, _: &GestureSample) -> Result<Vec<f64>> {
                Ok(vec![0.79, 0.21, 0.0, 0.0, 0.0, 0.0])
            }
        }
        let events = session(vec![vec![SessionEvent::Toggle { on: true }, face(1.0), ctx(Some("msword"))], gesture(5)]);
        assert!(run(&events).is_empty());
        let models = Models { gesture: &Unsure, face: &SignGate };
        let log = replay(&events, models, &default_bindings(), &PipelineConfig::default()).unwrap();
        assert!(log.is_empty());
    }

    #[test]
    fn locked_screen_only_unlocks() {
        let events = session(vec![
            vec![SessionEvent::Toggle { on: true }, face(1.0), ctx(Some("vlc"))],
            gesture(3),
            gesture(0),
            gesture(2),
            gesture(4),
            gesture(0),
        ]);
        let actions: Vec<Action> = run(&events).into_iter().map(|a| a.action).collect();
        assert_eq!(
            actions,
            vec![Action::LockScreen, Action::UnlockScreen, Action::PlayPause]
        );
    }

    #[test]
    fn wrong_arity_reports_event_index() {
        let events = vec![
            SessionEvent::Toggle { on: true },
            SessionEvent::Hand { coords: vec![0.0; 62] },
        ];
        let models = Models { gesture: &FirstValue, face: &SignGate };
        let err = replay(&events, models, &default_bindings(), &PipelineConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Event { index: 1, .. }));
    }

    #[test]
    fn empty_stream_empty_log() {
        assert!(run(&[]).is_empty());
    }

    #[test]
    fn replay_composes() {
        let events = session(vec![
            vec![SessionEvent::Toggle { on: true }, face(1.0), ctx(Some("vlc"))],
            gesture(1),
            gesture(0),
        ]);
        let models = Models { gesture: &FirstValue, face: &SignGate };
        let bindings = default_bindings();
        let config = PipelineConfig::default();
        let whole = run(&events);
        for cut in [0, 7, 13, 30, events.len()] {
            let (mid, mut first) =
                replay_from(SessionState::default(), &events[..cut], models, &bindings, &config).unwrap();
            let (_, second) = replay_from(mid, &events[cut..], models, &bindings, &config).unwrap();
            first.extend(second);
            assert_eq!(first, whole, "cut at {cut}");
        }
    }

    #[test]
    fn thresholds_validated() {
        assert!(PipelineConfig::default().validate().is_ok());
        let bad = PipelineConfig {
            auth_threshold: 1.0,
            ..PipelineConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
