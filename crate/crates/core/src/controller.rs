//! Quality-level selection: the Lagrangian utility controller and the fixed
//! (FBR) and buffer-based (BB) baselines, behind one interface.
//!
//! The adaptive controller maximizes, per chunk, the utility
//! `q_i - lambda * d_i / B^gamma` over the available levels, then nudges the
//! multiplier with `lambda <- lambda - beta * (B - B_max)`. Because the
//! buffer never exceeds `B_max`, the multiplier is non-decreasing throughout
//! a session.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Floor substituted for the buffer level in the utility denominator so the
/// penalty stays finite when the buffer has drained to zero.
pub const BUFFER_FLOOR: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum ControllerError {
    #[error("level set is empty")]
    EmptyLevels,
    #[error("invalid level set: {0}")]
    InvalidLevels(String),
    #[error("level index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("negative input: {0}")]
    Negative(&'static str),
    #[error("invalid BB config: {0}")]
    InvalidBbConfig(String),
    #[error("invalid controller config: {0}")]
    InvalidConfig(String),
}

/// One generator tier: a quality score, the time the generator needs to
/// synthesize one chunk at that tier, and the encoded bitrate of its output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityLevel {
    /// 1-based level index.
    pub index: usize,
    /// Dimensionless quality score, strictly increasing with index.
    pub quality: f64,
    /// Generation delay in seconds.
    pub gen_delay: f64,
    /// Nominal output bitrate in Mbps.
    pub bitrate_mbps: f64,
}

/// A validated, index-ordered set of quality levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<QualityLevel>", into = "Vec<QualityLevel>")]
pub struct LevelSet(Vec<QualityLevel>);

impl TryFrom<Vec<QualityLevel>> for LevelSet {
    type Error = ControllerError;
    fn try_from(levels: Vec<QualityLevel>) -> Result<Self, ControllerError> {
        LevelSet::new(levels)
    }
}

impl From<LevelSet> for Vec<QualityLevel> {
    fn from(set: LevelSet) -> Self {
        set.0
    }
}

impl LevelSet {
    /// Validates: indexes are contiguous starting at 1, quality strictly
    /// increasing, delays and bitrates positive and finite.
    pub fn new(levels: Vec<QualityLevel>) -> Result<Self, ControllerError> {
        if levels.is_empty() {
            return Err(ControllerError::EmptyLevels);
        }
        for (i, l) in levels.iter().enumerate() {
            if l.index != i + 1 {
                return Err(ControllerError::InvalidLevels(format!(
                    "expected index {} at position {i}, got {}",
                    i + 1,
                    l.index
                )));
            }
            if !(l.quality.is_finite() && l.gen_delay.is_finite() && l.bitrate_mbps.is_finite()) {
                return Err(ControllerError::InvalidLevels(format!("non-finite fields at level {}", l.index)));
            }
            if l.gen_delay <= 0.0 {
                return Err(ControllerError::InvalidLevels(format!(
                    "gen_delay must be positive at level {}",
                    l.index
                )));
            }
            if l.bitrate_mbps <= 0.0 {
                return Err(ControllerError::InvalidLevels(format!(
                    "bitrate must be positive at level {}",
                    l.index
                )));
            }
            if i > 0 && l.quality <= levels[i - 1].quality {
                return Err(ControllerError::InvalidLevels(format!(
                    "quality must be strictly increasing, violated at level {}",
                    l.index
                )));
            }
        }
        Ok(LevelSet(levels))
    }

    /// Builds a level set from `(quality, gen_delay, bitrate)` triples,
    /// assigning indexes 1..=N in order.
    pub fn from_triples(triples: &[(f64, f64, f64)]) -> Result<Self, ControllerError> {
        LevelSet::new(
            triples
                .iter()
                .enumerate()
                .map(|(i, &(quality, gen_delay, bitrate_mbps))| QualityLevel {
                    index: i + 1,
                    quality,
                    gen_delay,
                    bitrate_mbps,
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> Result<&QualityLevel, ControllerError> {
        self.0
            .get(index.wrapping_sub(1))
            .ok_or(ControllerError::IndexOutOfRange { index, len: self.0.len() })
    }

    pub fn iter(&self) -> std::slice::Iter<'_, QualityLevel> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[QualityLevel] {
        &self.0
    }
}

/// Parameters of the adaptive controller and the buffer plant it regulates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// Utility exponent shaping how strongly a low buffer amplifies the
    /// delay penalty.
    pub gamma: f64,
    /// Multiplier step size.
    pub beta: f64,
    /// Initial Lagrange multiplier.
    pub lambda_init: f64,
    /// Maximum buffer level in seconds.
    pub b_max: f64,
    /// Chunk playback duration in seconds; also the decision cadence.
    pub chunk_duration: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            gamma: 1.0,
            beta: 0.05,
            lambda_init: 1.0,
            b_max: 4.0,
            chunk_duration: 1.0,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        let fields = [
            ("gamma", self.gamma),
            ("beta", self.beta),
            ("b_max", self.b_max),
            ("chunk_duration", self.chunk_duration),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v <= 0.0 {
                return Err(ControllerError::InvalidConfig(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !self.lambda_init.is_finite() || self.lambda_init < 0.0 {
            return Err(ControllerError::InvalidConfig(format!(
                "lambda_init must be nonnegative and finite, got {}",
                self.lambda_init
            )));
        }
        Ok(())
    }
}

/// Mutable per-session controller state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub lambda: f64,
    pub buffer: f64,
    pub t_last: f64,
}

/// Reservoir/cushion map for the buffer-based baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BbConfig {
    pub reservoir: f64,
    pub cushion: f64,
}

impl BbConfig {
    pub fn validate(&self, b_max: f64) -> Result<(), ControllerError> {
        if !self.reservoir.is_finite() || self.reservoir < 0.0 {
            return Err(ControllerError::InvalidBbConfig(format!(
                "reservoir must be nonnegative, got {}",
                self.reservoir
            )));
        }
        if !self.cushion.is_finite() || self.cushion <= 0.0 {
            return Err(ControllerError::InvalidBbConfig(format!("cushion must be positive, got {}", self.cushion)));
        }
        if self.reservoir + self.cushion > b_max {
            return Err(ControllerError::InvalidBbConfig(format!(
                "reservoir + cushion = {} exceeds b_max = {b_max}",
                self.reservoir + self.cushion
            )));
        }
        Ok(())
    }
}

/// Which controller drives a session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ControllerSpec {
    /// The adaptive Lagrangian controller.
    Proposed { gamma: f64, beta: f64, lambda_init: f64 },
    /// Fixed level, regardless of conditions.
    Fbr { level: usize },
    /// Reservoir/cushion buffer map.
    Bb { reservoir: f64, cushion: f64 },
}

impl ControllerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerSpec::Proposed { .. } => "proposed",
            ControllerSpec::Fbr { .. } => "fbr",
            ControllerSpec::Bb { .. } => "bb",
        }
    }
}

/// Utility of one level at the given buffer and multiplier. The buffer is
/// floored at [`BUFFER_FLOOR`] so the penalty stays finite at B = 0.
fn level_utility(level: &QualityLevel, buffer: f64, lambda: f64, gamma: f64) -> f64 {
    let b_eff = buffer.max(BUFFER_FLOOR);
    level.quality - lambda * level.gen_delay / b_eff.powf(gamma)
}

/// Picks the level maximizing `q_i - lambda * d_i / B^gamma`. Exact ties go
/// to the lowest index (the lower generation delay).
pub fn select_quality(levels: &LevelSet, buffer: f64, lambda: f64, gamma: f64) -> Result<usize, ControllerError> {
    if !lambda.is_finite() {
        return Err(ControllerError::NonFinite("lambda"));
    }
    if !gamma.is_finite() {
        return Err(ControllerError::NonFinite("gamma"));
    }
    if !buffer.is_finite() {
        return Err(ControllerError::NonFinite("buffer"));
    }
    if buffer < 0.0 {
        return Err(ControllerError::Negative("buffer"));
    }
    let mut best = levels.get(1)?;
    let mut best_utility = level_utility(best, buffer, lambda, gamma);
    for level in levels.iter().skip(1) {
        let u = level_utility(level, buffer, lambda, gamma);
        if u > best_utility {
            best = level;
            best_utility = u;
        }
    }
    Ok(best.index)
}

/// Advances the buffer one decision: gain `dt` of playback credit, pay the
/// previous chunk's delay, clamp into `[0, b_max]`. The clamped deficit is
/// returned as rebuffering time.
pub fn update_buffer(b_prev: f64, dt: f64, d_prev: f64, b_max: f64) -> Result<(f64, f64), ControllerError> {
    for (name, v) in [("b_prev", b_prev), ("dt", dt), ("d_prev", d_prev), ("b_max", b_max)] {
        if !v.is_finite() {
            return Err(ControllerError::NonFinite(match name {
                "b_prev" => "b_prev",
                "dt" => "dt",
                "d_prev" => "d_prev",
                _ => "b_max",
            }));
        }
    }
    if dt < 0.0 {
        return Err(ControllerError::Negative("dt"));
    }
    if d_prev < 0.0 {
        return Err(ControllerError::Negative("d_prev"));
    }
    let raw = b_prev + dt - d_prev;
    let rebuffer = (-raw).max(0.0);
    let b_new = raw.max(0.0).min(b_max);
    Ok((b_new, rebuffer))
}

/// Multiplier update `lambda - beta * (B - B_max)`, clamped at zero. With
/// `B <= B_max` the gradient is nonnegative, so the clamp never binds and the
/// sequence is non-decreasing.
pub fn update_lambda(lambda: f64, buffer: f64, b_max: f64, beta: f64) -> Result<f64, ControllerError> {
    for v in [lambda, buffer, b_max, beta] {
        if !v.is_finite() {
            return Err(ControllerError::NonFinite("update_lambda input"));
        }
    }
    Ok((lambda - beta * (buffer - b_max)).max(0.0))
}

/// The fixed baseline: returns the configured index after a range check.
pub fn fbr_select(fixed_index: usize, levels: &LevelSet) -> Result<usize, ControllerError> {
    levels.get(fixed_index)?;
    Ok(fixed_index)
}

/// The buffer-based baseline: lowest level at or below the reservoir,
/// highest at or above reservoir + cushion, linear interpolation between.
pub fn bb_select(buffer: f64, cfg: &BbConfig, levels: &LevelSet) -> Result<usize, ControllerError> {
    if !buffer.is_finite() {
        return Err(ControllerError::NonFinite("buffer"));
    }
    if buffer < 0.0 {
        return Err(ControllerError::Negative("buffer"));
    }
    if cfg.cushion <= 0.0 || cfg.reservoir < 0.0 || !cfg.cushion.is_finite() || !cfg.reservoir.is_finite() {
        return Err(ControllerError::InvalidBbConfig("reservoir >= 0 and cushion > 0 required".into()));
    }
    let n = levels.len();
    if buffer <= cfg.reservoir {
        return Ok(1);
    }
    if buffer >= cfg.reservoir + cfg.cushion {
        return Ok(n);
    }
    let frac = (buffer - cfg.reservoir) / cfg.cushion;
    let index = 1 + (frac * (n - 1) as f64).floor() as usize;
    Ok(index.min(n))
}

/// Single-session controller state machine used by the simulation loop.
#[derive(Debug, Clone)]
pub enum SessionController {
    Proposed { config: ControllerConfig, lambda: f64 },
    Fbr { level: usize },
    Bb { config: BbConfig },
}

impl SessionController {
    /// Builds the controller from its spec, sharing the plant parameters.
    pub fn build(spec: &ControllerSpec, b_max: f64, chunk_duration: f64, levels: &LevelSet) -> Result<Self, ControllerError> {
        match *spec {
            ControllerSpec::Proposed { gamma, beta, lambda_init } => {
                let config = ControllerConfig { gamma, beta, lambda_init, b_max, chunk_duration };
                config.validate()?;
                Ok(SessionController::Proposed { config, lambda: lambda_init })
            }
            ControllerSpec::Fbr { level } => {
                levels.get(level)?;
                Ok(SessionController::Fbr { level })
            }
            ControllerSpec::Bb { reservoir, cushion } => {
                let config = BbConfig { reservoir, cushion };
                config.validate(b_max)?;
                Ok(SessionController::Bb { config })
            }
        }
    }

    /// Picks the level for the chunk decided at buffer level `buffer`.
    pub fn pick(&self, levels: &LevelSet, buffer: f64) -> Result<usize, ControllerError> {
        match self {
            SessionController::Proposed { config, lambda } => {
                select_quality(levels, buffer, *lambda, config.gamma)
            }
            SessionController::Fbr { level } => fbr_select(*level, levels),
            SessionController::Bb { config } => bb_select(buffer, config, levels),
        }
    }

    /// Post-decision multiplier update; a no-op for the baselines.
    pub fn after_decision(&mut self, buffer: f64) -> Result<(), ControllerError> {
        if let SessionController::Proposed { config, lambda } = self {
            *lambda = update_lambda(*lambda, buffer, config.b_max, config.beta)?;
        }
        Ok(())
    }

    /// Current multiplier; 0 for the baselines, which do not carry one.
    pub fn lambda(&self) -> f64 {
        match self {
            SessionController::Proposed { lambda, .. } => *lambda,
            _ => 0.0,
        }
    }
}
