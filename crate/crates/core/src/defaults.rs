//! Default experiment parameters.
//!
//! Quality-level tables are deployment measurements in a real system; none
//! are published for the evaluated one. This default table is a synthetic
//! benchmark set, shaped so the three controllers separate on both metrics
//! across the bandwidth bands: level 1 trades a very low bitrate for a heavy
//! encode pass (long effective delay), level 2 is the fast recovery tier, and
//! levels 3-5 climb the usual quality/delay/bitrate ladder.

use crate::controller::{BbConfig, ControllerConfig, ControllerSpec, LevelSet};

/// Default five-level table `(quality, gen_delay s, bitrate Mbps)`.
pub const DEFAULT_LEVEL_TRIPLES: [(f64, f64, f64); 5] = [
    (1.0, 0.80, 0.55),
    (2.0, 0.22, 0.80),
    (3.0, 0.32, 1.30),
    (4.0, 0.45, 1.90),
    (5.0, 0.60, 2.50),
];

pub fn default_levels() -> LevelSet {
    LevelSet::from_triples(&DEFAULT_LEVEL_TRIPLES).expect("default level table is valid")
}

/// Default reservoir/cushion map for the BB baseline.
pub fn default_bb() -> BbConfig {
    BbConfig { reservoir: 0.2, cushion: 1.6 }
}

/// Default adaptive-controller spec matching [`ControllerConfig::default`].
pub fn default_proposed() -> ControllerSpec {
    let c = ControllerConfig::default();
    ControllerSpec::Proposed { gamma: c.gamma, beta: c.beta, lambda_init: c.lambda_init }
}

pub const DEFAULT_NUM_CHUNKS: usize = 300;
pub const DEFAULT_REPETITIONS: usize = 20;
pub const DEFAULT_SEED_BASE: u64 = 42;
pub const DEFAULT_TRACE_STEP: f64 = 1.0;

/// Default synthetic-trace duration for `num_chunks` chunks: the playback
/// horizon plus generous stall headroom so heavy rebuffering cannot run the
/// trace out.
pub fn default_trace_duration(num_chunks: usize, chunk_duration: f64) -> f64 {
    2.0 * num_chunks as f64 * chunk_duration + 10.0
}
