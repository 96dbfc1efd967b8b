//! JSON documents, HTTP service and preference elicitation around
//! `rentdiv-core`.

pub mod api;
pub mod elicitation;
pub mod error;
pub mod http;
pub mod store;

pub use error::ApiError;
