//! HTTP service, snapshot persistence and batch commands for linkrisk.

pub mod api;
pub mod config;
pub mod error;
pub mod snapshot;
pub mod state;
pub mod types;

pub use api::router;
pub use config::Config;
pub use state::AppState;
