//! Session-level quality-of-experience metrics: average video quality,
//! rebuffering ratio, and the cumulative utility objective evaluated over a
//! finished log.

use crate::controller::BUFFER_FLOOR;
use crate::pipeline::SessionLog;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("session log has no chunk records")]
    EmptyLog,
    #[error("record references unknown level {0}")]
    UnknownLevel(usize),
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
}

/// Aggregate metrics for one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    /// Mean selected level index, in [1, N].
    pub avq: f64,
    /// Stall time as a percentage of session wall clock, in [0, 100].
    pub rr_percent: f64,
    /// Cumulative utility: sum over chunks of `q_i - lambda * d_i / B^gamma`
    /// with the buffer recorded at each decision.
    pub objective: f64,
    pub band: Option<crate::trace::Band>,
}

/// Average video quality: the arithmetic mean of the selected level index.
pub fn avq(log: &SessionLog) -> Result<f64, MetricsError> {
    if log.records.is_empty() {
        return Err(MetricsError::EmptyLog);
    }
    let sum: f64 = log.records.iter().map(|r| r.level as f64).sum();
    Ok(sum / log.records.len() as f64)
}

/// Rebuffering ratio: stall time as a percentage of total session time
/// (playback plus stalls; startup excluded).
pub fn rebuffer_ratio(log: &SessionLog) -> Result<f64, MetricsError> {
    if log.records.is_empty() {
        return Err(MetricsError::EmptyLog);
    }
    let stalls: f64 = log.records.iter().map(|r| r.rebuffer).sum();
    Ok(100.0 * stalls / log.wall_clock)
}

/// Evaluates the cumulative quality/delay objective over a log with a fixed
/// multiplier: `sum_k q_{i_k} - lambda * d_{i_k} / B(t_k)^gamma`, using each
/// level's nominal generation delay and the buffer recorded at each decision
/// (floored like the selector's denominator).
pub fn objective_value(log: &SessionLog, lambda: f64, gamma: f64) -> Result<f64, MetricsError> {
    if log.records.is_empty() {
        return Err(MetricsError::EmptyLog);
    }
    if !lambda.is_finite() {
        return Err(MetricsError::NonFinite("lambda"));
    }
    if !gamma.is_finite() {
        return Err(MetricsError::NonFinite("gamma"));
    }
    let mut total = 0.0;
    for r in &log.records {
        let level = log
            .levels
            .iter()
            .find(|l| l.index == r.level)
            .ok_or(MetricsError::UnknownLevel(r.level))?;
        let b_eff = r.b_after.max(BUFFER_FLOOR);
        total += level.quality - lambda * level.gen_delay / b_eff.powf(gamma);
    }
    Ok(total)
}

/// All session metrics in one pass.
pub fn session_metrics(log: &SessionLog, lambda: f64, gamma: f64) -> Result<SessionMetrics, MetricsError> {
    Ok(SessionMetrics {
        avq: avq(log)?,
        rr_percent: rebuffer_ratio(log)?,
        objective: objective_value(log, lambda, gamma)?,
        band: log.band,
    })
}

/// Header of the one-row-per-session summary CSV.
pub const SUMMARY_CSV_HEADER: &str = "controller,band,avq,rr_percent,objective";

/// One row of the summary CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub controller: String,
    pub band: String,
    pub avq: f64,
    pub rr_percent: f64,
    pub objective: f64,
}

impl SummaryRow {
    pub fn to_csv_row(&self) -> String {
        format!("{},{},{},{},{}", self.controller, self.band, self.avq, self.rr_percent, self.objective)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::QualityLevel;
    use crate::pipeline::{ChunkRecord, SessionStatus};

    fn synthetic_log(levels: &[usize], rebuffers: &[f64], buffers: &[f64]) -> SessionLog {
        let records: Vec<ChunkRecord> = levels
            .iter()
            .zip(rebuffers)
            .zip(buffers)
            .enumerate()
            .map(|(i, ((&level, &rebuffer), &b_after))| ChunkRecord {
                k: i + 1,
                t_k: i as f64,
                dt: 1.0,
                level,
                gen_delay: [0.1, 0.2, 0.4, 0.8, 1.6][level - 1],
                effective_gen_delay: 0.0,
                tx_delay: 0.0,
                total_delay: 0.0,
                b_after,
                lambda_after: 0.0,
                rebuffer,
                prediction_hit: None,
            })
            .collect();
        let total_rebuffer: f64 = rebuffers.iter().sum();
        SessionLog {
            digest: String::new(),
            controller: "test".into(),
            band: None,
            levels: (1..=5)
                .map(|index| QualityLevel {
                    index,
                    quality: index as f64,
                    gen_delay: [0.1, 0.2, 0.4, 0.8, 1.6][index - 1],
                    bitrate_mbps: 1.0,
                })
                .collect(),
            b_max: 4.0,
            chunk_duration: 1.0,
            wall_clock: records.len() as f64 + total_rebuffer,
            total_rebuffer,
            records,
            status: SessionStatus::Completed,
        }
    }

    #[test]
    fn avq_is_mean_level() {
        let log = synthetic_log(&[3, 3, 4, 2], &[0.0; 4], &[1.0; 4]);
        assert_eq!(avq(&log).unwrap(), 3.0);
        let fives = synthetic_log(&[5; 6], &[0.0; 6], &[1.0; 6]);
        assert_eq!(avq(&fives).unwrap(), 5.0);
    }

    #[test]
    fn rebuffer_ratio_examples() {
        let clean = synthetic_log(&[1; 5], &[0.0; 5], &[1.0; 5]);
        assert_eq!(rebuffer_ratio(&clean).unwrap(), 0.0);
        // 38 s of playback plus 2 s of stalls: 5 percent.
        let levels = vec![1; 38];
        let mut stalls = vec![0.0; 38];
        stalls[10] = 2.0;
        let log = synthetic_log(&levels, &stalls, &vec![1.0; 38]);
        assert!((rebuffer_ratio(&log).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn objective_examples() {
        // Single chunk: q = 3, d = 0.4, B = 2, gamma = 1, lambda = 5 -> 2.0.
        let log = synthetic_log(&[3], &[0.0], &[2.0]);
        assert!((objective_value(&log, 5.0, 1.0).unwrap() - 2.0).abs() < 1e-12);
        // lambda = 0 reduces to the quality sum.
        let log = synthetic_log(&[1, 2, 5], &[0.0; 3], &[1.0; 3]);
        assert!((objective_value(&log, 0.0, 1.0).unwrap() - 8.0).abs() < 1e-12);
        // Nonpositive slope in lambda.
        let lo = objective_value(&log, 1.0, 1.0).unwrap();
        let hi = objective_value(&log, 2.0, 1.0).unwrap();
        assert!(hi <= lo);
    }

    #[test]
    fn empty_log_is_an_error() {
        let log = synthetic_log(&[], &[], &[]);
        assert_eq!(avq(&log), Err(MetricsError::EmptyLog));
        assert_eq!(rebuffer_ratio(&log), Err(MetricsError::EmptyLog));
        assert_eq!(objective_value(&log, 1.0, 1.0), Err(MetricsError::EmptyLog));
    }
}
