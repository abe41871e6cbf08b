//! Deterministic gain sequences (`β_t`, `c_t`, `λ`, `α_t`).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// What a schedule is indexed by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleIndex {
    /// Global iteration counter `t`.
    #[default]
    Iteration,
    /// Iteration at which the most recent model update happened, `t_(n)`.
    UpdateTime,
    /// Number of model updates so far, `n`.
    UpdateCount,
}

/// Position of a run, as seen by schedules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Clock {
    pub t: u64,
    pub n_updates: u64,
    pub last_update_t: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Constant(f64),
    /// `scale · (k + offset)^(-exponent)`, `k` picked by `index` and floored at 1.
    Power {
        #[serde(default = "one")]
        scale: f64,
        exponent: f64,
        #[serde(default)]
        offset: f64,
        #[serde(default)]
        index: ScheduleIndex,
    },
}

fn one() -> f64 {
    1.0
}

impl Schedule {
    pub fn power(exponent: f64) -> Self {
        Schedule::Power {
            scale: 1.0,
            exponent,
            offset: 0.0,
            index: ScheduleIndex::Iteration,
        }
    }

    pub fn power_indexed(exponent: f64, index: ScheduleIndex) -> Self {
        Schedule::Power {
            scale: 1.0,
            exponent,
            offset: 0.0,
            index,
        }
    }

    /// Value at iteration `t` (other clock fields taken from `clock`).
    pub fn at(&self, clock: Clock) -> f64 {
        match *self {
            Schedule::Constant(v) => v,
            Schedule::Power {
                scale,
                exponent,
                offset,
                index,
            } => {
                let k = match index {
                    ScheduleIndex::Iteration => clock.t,
                    ScheduleIndex::UpdateTime => clock.last_update_t.unwrap_or(0),
                    ScheduleIndex::UpdateCount => clock.n_updates,
                };
                let k = (k.max(1) as f64) + offset;
                scale * k.powf(-exponent)
            }
        }
    }

    /// Convenience for schedules that only depend on `t`.
    pub fn at_iteration(&self, t: u64) -> f64 {
        self.at(Clock {
            t,
            ..Clock::default()
        })
    }

    /// Positive and non-increasing.
    pub fn validate_step(&self, key: &str) -> Result<()> {
        match *self {
            Schedule::Constant(v) if v > 0.0 && v.is_finite() => Ok(()),
            Schedule::Constant(v) => Err(Error::config(key, format!("must be positive, got {v}"))),
            Schedule::Power {
                scale,
                exponent,
                offset,
                ..
            } => {
                if !(scale > 0.0) || !scale.is_finite() {
                    Err(Error::config(key, format!("scale must be positive, got {scale}")))
                } else if !(exponent >= 0.0) || !exponent.is_finite() {
                    Err(Error::config(key, format!("exponent must be non-negative, got {exponent}")))
                } else if !(offset > -1.0) {
                    Err(Error::config(key, format!("offset must exceed -1, got {offset}")))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Checks that every value lies in `(lo, hi)` (`lo` inclusive if `closed_lo`).
    pub fn validate_range(&self, key: &str, lo: f64, hi: f64, closed_lo: bool) -> Result<()> {
        self.validate_step_like(key)?;
        let max = self.sup();
        let min = self.inf();
        let lo_ok = if closed_lo { min >= lo } else { min > lo };
        if lo_ok && max < hi {
            Ok(())
        } else {
            Err(Error::config(
                key,
                format!("values must lie in {}{lo}, {hi}), got range [{min}, {max}]", if closed_lo { "[" } else { "(" }),
            ))
        }
    }

    fn validate_step_like(&self, key: &str) -> Result<()> {
        match self {
            Schedule::Constant(v) if !v.is_finite() => Err(Error::config(key, "must be finite")),
            Schedule::Constant(_) => Ok(()),
            Schedule::Power { .. } => self.validate_step(key),
        }
    }

    fn sup(&self) -> f64 {
        match *self {
            Schedule::Constant(v) => v,
            Schedule::Power {
                scale,
                exponent,
                offset,
                ..
            } => scale * (1.0 + offset).powf(-exponent),
        }
    }

    fn inf(&self) -> f64 {
        match *self {
            Schedule::Constant(v) => v,
            Schedule::Power { exponent, .. } if exponent == 0.0 => self.sup(),
            Schedule::Power { .. } => 0.0,
        }
    }

    /// Warning text when the schedule is not of a family known to satisfy
    /// `Σβ = ∞, Σβ² < ∞`.
    pub fn robbins_monro_warning(&self, key: &str) -> Option<String> {
        match *self {
            Schedule::Constant(v) => Some(format!(
                "`{key}` is the constant {v}: Σβ² diverges, so the trackers keep O({v}) noise"
            )),
            Schedule::Power { exponent, .. } if exponent > 0.5 && exponent <= 1.0 => None,
            Schedule::Power { exponent, .. } => Some(format!(
                "`{key}` decays as k^-{exponent}; exponents outside (0.5, 1] break Σβ = ∞ or Σβ² < ∞"
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_values() {
        let s = Schedule::power(0.52);
        assert_eq!(s.at_iteration(1), 1.0);
        assert!((s.at_iteration(100) - 100f64.powf(-0.52)).abs() < 1e-15);
        // floored at 1
        assert_eq!(s.at_iteration(0), 1.0);
    }

    #[test]
    fn update_time_index() {
        let s = Schedule::power_indexed(3.0, ScheduleIndex::UpdateTime);
        let c = Clock {
            t: 500,
            n_updates: 2,
            last_update_t: Some(10),
        };
        assert!((s.at(c) - 1e-3).abs() < 1e-15);
        let n = Schedule::power_indexed(1.0, ScheduleIndex::UpdateCount);
        assert_eq!(n.at(c), 0.5);
    }

    #[test]
    fn warnings() {
        assert!(Schedule::Constant(0.1).robbins_monro_warning("beta").is_some());
        assert!(Schedule::power(0.52).robbins_monro_warning("beta").is_none());
        assert!(Schedule::power(0.3).robbins_monro_warning("beta").is_some());
    }

    #[test]
    fn serde_shapes() {
        let s: Schedule = serde_json::from_str(r#"{"power": {"exponent": 0.52}}"#).unwrap();
        assert_eq!(s, Schedule::power(0.52));
        let c: Schedule = serde_json::from_str(r#"{"constant": 0.06}"#).unwrap();
        assert_eq!(c, Schedule::Constant(0.06));
    }

    #[test]
    fn range_validation() {
        assert!(Schedule::Constant(0.06).validate_range("c", 0.0, 1.0, false).is_ok());
        assert!(Schedule::Constant(1.0).validate_range("c", 0.0, 1.0, false).is_err());
        assert!(Schedule::power(1.0).validate_range("lambda", 0.0, 1.0, true).is_err());
        let shifted = Schedule::Power {
            scale: 0.5,
            exponent: 1.0,
            offset: 0.0,
            index: ScheduleIndex::Iteration,
        };
        assert!(shifted.validate_range("lambda", 0.0, 1.0, true).is_ok());
    }
}
