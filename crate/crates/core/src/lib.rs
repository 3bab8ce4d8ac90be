//! gencast-core: trace-driven simulation of quality-adaptive generated-video
//! conferencing.
//!
//! The library has three layers:
//!
//! * [`predictor`] — the multimodal attention kernel that forecasts user
//!   behavior (head motion, eye blink, voice, gaze) from aligned feature
//!   sequences, plus the MAE/RMSE evaluation metrics.
//! * [`trace`], [`controller`], [`pipeline`] — bandwidth traces, the
//!   Lagrangian quality/delay controller with its FBR and BB baselines, and
//!   the chunk generation/transmission/buffer simulation loop.
//! * [`metrics`] — per-session quality-of-experience metrics (AVQ, the
//!   rebuffering ratio, and the cumulative utility objective).
//!
//! Everything is deterministic given a seed; sessions are independent and
//! safe to run in parallel.

pub mod controller;
pub mod defaults;
pub mod metrics;
pub mod pipeline;
pub mod predictor;
pub mod trace;

pub use controller::{
    bb_select, fbr_select, select_quality, update_buffer, update_lambda, BbConfig,
    ControllerConfig, ControllerError, ControllerSpec, ControllerState, LevelSet, QualityLevel,
};
pub use metrics::{avq, objective_value, rebuffer_ratio, session_metrics, MetricsError, SessionMetrics};
pub use pipeline::{
    effective_generation_delay, run_session, transmission_time, ChunkRecord, PredictiveConfig,
    SessionConfig, SessionLog, SessionStatus, SimError,
};
pub use trace::{classify_band, parse_trace, synth_trace, Band, ThroughputTrace, TraceError};
