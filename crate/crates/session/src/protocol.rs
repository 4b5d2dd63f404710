//! Messages on the turn channel. The same envelopes travel over the
//! WebSocket and the plain-HTTP fallback.

use pigchase_core::game::ArrowKey;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::store::{SessionStore, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageType {
    /// Client keypress.
    Key,
    /// Board after the server applied a turn.
    State,
    /// Outcome of a trial that just ended.
    TrialEnd,
    /// A rejected message; the payload carries `code` and `message`.
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    #[serde(rename = "type")]
    pub kind: MessageType,
    pub trial: u32,
    pub seq: u64,
    #[serde(default)]
    pub payload: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyPayload {
    pub key: ArrowKey,
    #[serde(default)]
    pub latency_ms: u64,
}

impl Envelope {
    pub fn key(trial: u32, seq: u64, key: ArrowKey, latency_ms: u64) -> Self {
        Self { kind: MessageType::Key, trial, seq, payload: json!(KeyPayload { key, latency_ms }) }
    }

    pub fn error(trial: u32, seq: u64, code: &str, message: impl Into<String>) -> Self {
        let message: String = message.into();
        Self { kind: MessageType::Error, trial, seq, payload: json!({ "code": code, "message": message }) }
    }
}

/// Stable machine-readable code for each rejection.
pub fn error_code(e: &StoreError) -> &'static str {
    match e {
        StoreError::EmptyParticipant => "empty_participant",
        StoreError::DuplicateActive(_) => "duplicate_active",
        StoreError::UnknownSession(_) => "unknown_session",
        StoreError::NotInProgress(_) => "not_in_progress",
        StoreError::OutOfOrder { .. } => "out_of_order",
        StoreError::TrialTerminated(_) => "trial_terminated",
        StoreError::StaleSeq { .. } => "stale_seq",
        StoreError::Premature(_) => "premature_survey",
        StoreError::Survey(_) => "invalid_survey",
        StoreError::Game(_) => "illegal_move",
        StoreError::Io(_) | StoreError::Json(_) => "storage",
    }
}

/// Applies one client message and returns the replies in send order:
/// `state`, then `trial_end` when the trial finished, or a single `error`.
pub fn handle_message(store: &SessionStore, session_id: &str, msg: &Envelope) -> Vec<Envelope> {
    if msg.kind != MessageType::Key {
        return vec![Envelope::error(msg.trial, msg.seq, "bad_message", "clients may only send key messages")];
    }
    let key: KeyPayload = match serde_json::from_value(msg.payload.clone()) {
        Ok(k) => k,
        Err(e) => return vec![Envelope::error(msg.trial, msg.seq, "bad_message", e.to_string())],
    };
    match store.play_turn(session_id, msg.trial, msg.seq, key.key, key.latency_ms) {
        Ok(r) => {
            let mut state = json!(r.state);
            state["effect"] = json!(r.effect);
            let mut out = vec![Envelope { kind: MessageType::State, trial: msg.trial, seq: msg.seq, payload: state }];
            if let Some(end) = r.trial_end {
                out.push(Envelope { kind: MessageType::TrialEnd, trial: end.trial, seq: msg.seq, payload: json!(end) });
            }
            out
        }
        Err(e) => vec![Envelope::error(msg.trial, msg.seq, error_code(&e), e.to_string())],
    }
}

/// Parses and applies a raw text frame.
pub fn handle_text(store: &SessionStore, session_id: &str, text: &str) -> Vec<Envelope> {
    match serde_json::from_str::<Envelope>(text) {
        Ok(msg) => handle_message(store, session_id, &msg),
        Err(e) => vec![Envelope::error(0, 0, "bad_message", e.to_string())],
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use pigchase_core::record::Demographic;

    use super::*;
    use crate::clock::ManualClock;
    use crate::store::StoreConfig;

    #[test]
    fn key_message_wire_format() {
        let text = serde_json::to_string(&Envelope::key(1, 4, ArrowKey::Up, 230)).unwrap();
        assert_eq!(text, r#"{"type":"key","trial":1,"seq":4,"payload":{"key":"Up","latency_ms":230}}"#);
    }

    #[test]
    fn replies_state_then_trial_end() {
        let store = SessionStore::new(StoreConfig::default(), Arc::new(ManualClock::new(0))).unwrap();
        let id = store.create_session("p", Demographic::White).unwrap().session_id;
        let first = handle_message(&store, &id, &Envelope::key(1, 1, ArrowKey::Up, 0));
        assert_eq!(first.len(), 1);
        assert_eq!(first[0].kind, MessageType::State);
        assert_eq!(first[0].payload["actions_used"], 1);
        assert_eq!(first[0].payload["effect"], "moved");
        let second = handle_text(&store, &id, r#"{"type":"key","trial":1,"seq":2,"payload":{"key":"Up"}}"#);
        let kinds: Vec<_> = second.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, [MessageType::State, MessageType::TrialEnd]);
        assert_eq!(second[1].payload["outcome"], "Exited");
        let replay = handle_message(&store, &id, &Envelope::key(1, 3, ArrowKey::Up, 0));
        assert_eq!(replay[0].payload["code"], "trial_terminated");
        assert_eq!(handle_text(&store, &id, "{")[0].payload["code"], "bad_message");
    }
}
