//! Errors on the wire: `{code, message, detail}` with stable codes.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::elicitation::Stage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub detail: Value,
}

impl ApiError {
    pub fn new(code: &str, message: impl Into<String>, detail: Value) -> Self {
        ApiError { code: code.to_string(), message: message.into(), detail }
    }

    pub fn core(e: rentdiv_core::Error) -> Self {
        use rentdiv_core::Error as E;
        let code = match &e {
            E::InvalidEconomy(_) => "invalid_economy",
            E::InvalidAllocation(_) => "invalid_allocation",
            E::UnknownRoom(_) => "unknown_room",
            E::UnknownAgent(_) => "unknown_agent",
            E::NotEnvyFree { .. } => "not_envy_free",
            E::NoPerfectMatching => "no_perfect_matching",
            E::MalformedLp(_) | E::Internal(_) => "internal",
            E::Precondition(_) => "precondition_failed",
            E::TooLarge(_) => "too_large",
        };
        let detail = match &e {
            E::NotEnvyFree { agent, envied } => serde_json::json!({ "agent": agent, "envied": envied }),
            _ => Value::Null,
        };
        ApiError::new(code, e.to_string(), detail)
    }

    pub fn bad_json(e: impl std::fmt::Display) -> Self {
        ApiError::new("invalid_json", e.to_string(), Value::Null)
    }

    pub fn invalid_answer(msg: impl Into<String>) -> Self {
        ApiError::new("invalid_answer", msg, Value::Null)
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        ApiError::new("precondition_failed", msg, Value::Null)
    }

    pub fn wrong_stage(agent: &str, stage: Stage) -> Self {
        ApiError::new("wrong_stage", format!("agent {agent} is not expecting this answer"), serde_json::json!({ "agent": agent, "stage": stage }))
    }

    pub fn session_done(id: &str) -> Self {
        ApiError::new("session_done", format!("session {id} has no open questions"), serde_json::json!({ "session": id }))
    }

    pub fn sessions_incomplete(id: &str) -> Self {
        ApiError::new("session_incomplete", format!("session {id} still has open questions"), serde_json::json!({ "session": id }))
    }

    pub fn session_not_found(id: &str) -> Self {
        ApiError::new("session_not_found", format!("no session {id}"), serde_json::json!({ "session": id }))
    }

    pub fn uncertified(detail: Value) -> Self {
        ApiError::new("uncertified", "solver output failed its certificate", detail)
    }

    pub fn storage(e: impl std::fmt::Display) -> Self {
        ApiError::new("storage", e.to_string(), Value::Null)
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        ApiError::new("internal", msg, Value::Null)
    }

    /// HTTP status for the code.
    pub fn status(&self) -> u16 {
        match self.code.as_str() {
            "session_not_found" => 404,
            "session_done" | "session_incomplete" | "wrong_stage" => 409,
            "too_large" => 413,
            "invalid_json" => 400,
            "internal" | "uncertified" | "storage" => 500,
            _ => 422,
        }
    }
}

impl From<rentdiv_core::Error> for ApiError {
    fn from(e: rentdiv_core::Error) -> Self {
        ApiError::core(e)
    }
}
