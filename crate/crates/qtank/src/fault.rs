//! Multiplicative actuator-fault injection and a delayed perfect-FDI
//! oracle.
//!
//! Faults are step losses of actuator effectiveness: a factor in [0, 1]
//! multiplying the flow each pump delivers. Detection is modeled as an
//! oracle that reports the exact effectiveness, a fixed delay late.

use serde::{Deserialize, Serialize};

/// Comparison slack for event times that are reconstructed as multiples
/// of a sample period.
const TIME_EPS: f64 = 1e-9;

/// Step change of both actuators' effectiveness at a point in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultEvent {
    /// Onset time, s.
    pub time: f64,
    /// Post-fault multiplicative gain per actuator, each in [0, 1].
    pub effectiveness: [f64; 2],
}

/// Fault-detection oracle settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FdiConfig {
    /// Time between fault onset and its report, s.
    pub detection_delay: f64,
}

impl Default for FdiConfig {
    fn default() -> Self {
        Self { detection_delay: 1.0 }
    }
}

impl FdiConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.detection_delay >= 0.0) {
            return Err(format!(
                "fdi.detection_delay must be >= 0, got {}",
                self.detection_delay
            ));
        }
        Ok(())
    }
}

/// Effectiveness as reported by the detection oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectivenessEstimate {
    pub estimate: [f64; 2],
    /// Time from which this estimate has been reportable.
    pub valid_from: f64,
}

/// Checks ordering and ranges of a fault schedule; failures name the
/// offending entry.
pub fn validate_schedule(schedule: &[FaultEvent]) -> Result<(), String> {
    for (i, ev) in schedule.iter().enumerate() {
        if !(ev.time >= 0.0) {
            return Err(format!("faults[{i}].time must be >= 0, got {}", ev.time));
        }
        for (j, &e) in ev.effectiveness.iter().enumerate() {
            if !(0.0..=1.0).contains(&e) {
                return Err(format!(
                    "faults[{i}].effectiveness[{j}] must lie in [0,1], got {e}"
                ));
            }
        }
        if i > 0 && schedule[i - 1].time >= ev.time {
            return Err(format!(
                "faults[{i}].time ({}) must be strictly after faults[{}].time ({})",
                ev.time,
                i - 1,
                schedule[i - 1].time
            ));
        }
    }
    Ok(())
}

/// Piecewise-constant effectiveness: (1, 1) before the first event, then
/// the most recent event's value. Event onset is inclusive.
pub fn true_effectiveness(schedule: &[FaultEvent], t: f64) -> [f64; 2] {
    let mut eff = [1.0, 1.0];
    for ev in schedule {
        if t >= ev.time - TIME_EPS {
            eff = ev.effectiveness;
        } else {
            break;
        }
    }
    eff
}

/// Componentwise application of the effectiveness factors to the voltages
/// commanded to the pumps; a factor scales the whole delivered flow.
pub fn apply_fault(u_commanded: [f64; 2], effectiveness: [f64; 2]) -> [f64; 2] {
    [u_commanded[0] * effectiveness[0], u_commanded[1] * effectiveness[1]]
}

/// The detection oracle: exact effectiveness, `detection_delay` late.
pub fn fdi_estimate(schedule: &[FaultEvent], t: f64, config: &FdiConfig) -> EffectivenessEstimate {
    let shifted = t - config.detection_delay;
    let estimate = true_effectiveness(schedule, shifted);
    let valid_from = schedule
        .iter()
        .filter(|ev| shifted >= ev.time - TIME_EPS)
        .map(|ev| ev.time + config.detection_delay)
        .fold(0.0, f64::max);
    EffectivenessEstimate { estimate, valid_from }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single_fault() -> Vec<FaultEvent> {
        vec![FaultEvent { time: 200.0, effectiveness: [0.4, 0.4] }]
    }

    #[test]
    fn empty_schedule_is_healthy() {
        assert_eq!(true_effectiveness(&[], 0.0), [1.0, 1.0]);
        assert_eq!(true_effectiveness(&[], 1e6), [1.0, 1.0]);
    }

    #[test]
    fn step_onset_is_inclusive() {
        let schedule = single_fault();
        assert_eq!(true_effectiveness(&schedule, 199.99), [1.0, 1.0]);
        assert_eq!(true_effectiveness(&schedule, 200.0), [0.4, 0.4]);
    }

    #[test]
    fn later_events_supersede() {
        let schedule = vec![
            FaultEvent { time: 100.0, effectiveness: [0.8, 1.0] },
            FaultEvent { time: 200.0, effectiveness: [0.4, 0.4] },
        ];
        assert_eq!(true_effectiveness(&schedule, 150.0), [0.8, 1.0]);
        assert_eq!(true_effectiveness(&schedule, 250.0), [0.4, 0.4]);
    }

    #[test]
    fn schedule_validation_names_fields() {
        let err = validate_schedule(&[
            FaultEvent { time: 200.0, effectiveness: [0.4, 0.4] },
            FaultEvent { time: 100.0, effectiveness: [0.4, 0.4] },
        ])
        .unwrap_err();
        assert!(err.contains("faults[1].time"));
        let err =
            validate_schedule(&[FaultEvent { time: 1.0, effectiveness: [1.5, 0.4] }]).unwrap_err();
        assert!(err.contains("effectiveness[0]"));
    }

    #[test]
    fn apply_fault_is_componentwise() {
        assert_eq!(apply_fault([5.0, 2.0], [1.0, 1.0]), [5.0, 2.0]);
        let faulted = apply_fault([5.0, 2.0], [0.4, 0.4]);
        assert!((faulted[0] - 2.0).abs() < 1e-15 && (faulted[1] - 0.8).abs() < 1e-15);
        assert_eq!(apply_fault([3.0, 3.0], [0.0, 1.0]), [0.0, 3.0]);
    }

    #[test]
    fn estimate_lags_by_the_detection_delay() {
        let schedule = single_fault();
        let cfg = FdiConfig { detection_delay: 1.0 };
        assert_eq!(fdi_estimate(&schedule, 200.5, &cfg).estimate, [1.0, 1.0]);
        let est = fdi_estimate(&schedule, 201.0, &cfg);
        assert_eq!(est.estimate, [0.4, 0.4]);
        assert_eq!(est.valid_from, 201.0);
    }

    #[test]
    fn zero_delay_estimate_equals_truth() {
        let schedule = single_fault();
        let cfg = FdiConfig { detection_delay: 0.0 };
        for t in [0.0, 199.9, 200.0, 500.0] {
            assert_eq!(fdi_estimate(&schedule, t, &cfg).estimate, true_effectiveness(&schedule, t));
        }
    }

    #[test]
    fn long_delay_keeps_old_estimate() {
        let schedule = single_fault();
        let cfg = FdiConfig { detection_delay: 5.0 };
        assert_eq!(fdi_estimate(&schedule, 204.9, &cfg).estimate, [1.0, 1.0]);
        assert_eq!(fdi_estimate(&schedule, 205.0, &cfg).estimate, [0.4, 0.4]);
    }

    proptest! {
        #[test]
        fn delay_consistency(
            times in proptest::collection::vec(0.0f64..400.0, 0..4),
            effs in proptest::collection::vec(proptest::array::uniform2(0.0f64..=1.0), 4),
            t in 0.0f64..500.0,
            delay in 0.0f64..10.0,
        ) {
            let mut times = times;
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            times.dedup();
            let schedule: Vec<FaultEvent> = times
                .iter()
                .zip(&effs)
                .map(|(&time, &effectiveness)| FaultEvent { time, effectiveness })
                .collect();
            prop_assert!(validate_schedule(&schedule).is_ok());
            let cfg = FdiConfig { detection_delay: delay };
            let est = fdi_estimate(&schedule, t, &cfg);
            prop_assert_eq!(est.estimate, true_effectiveness(&schedule, t - delay));
            // The governing event is never reported before onset + delay.
            prop_assert!(est.valid_from <= t + 1e-9);
        }
    }
}
