//! Shared reporting types for candidate-battery checks and unit conversion
//! helpers for emitted values.

use serde::{Deserialize, Serialize};

/// Margin of one candidate against a Gaussian reference value. Margins are
/// `reference - candidate` for maximization claims, so a pass is
/// `margin >= -3 * stderr`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateMargin {
    pub index: usize,
    pub label: String,
    pub candidate_value_nats: f64,
    pub margin_nats: f64,
    pub stderr_nats: f64,
    pub pass: bool,
}

/// A battery of candidate comparisons against a Gaussian reference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatteryReport {
    pub reference_value_nats: f64,
    pub items: Vec<CandidateMargin>,
    pub all_pass: bool,
}

impl BatteryReport {
    pub fn new(reference_value_nats: f64, items: Vec<CandidateMargin>) -> Self {
        let all_pass = items.iter().all(|i| i.pass);
        BatteryReport {
            reference_value_nats,
            items,
            all_pass,
        }
    }

    pub fn worst_margin(&self) -> f64 {
        self.items
            .iter()
            .map(|i| i.margin_nats + 3.0 * i.stderr_nats)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn nats_to_bits(x: f64) -> f64 {
    x / std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_pass_aggregation() {
        let r = BatteryReport::new(
            1.0,
            vec![
                CandidateMargin {
                    index: 0,
                    label: "a".into(),
                    candidate_value_nats: 0.9,
                    margin_nats: 0.1,
                    stderr_nats: 1e-9,
                    pass: true,
                },
                CandidateMargin {
                    index: 1,
                    label: "b".into(),
                    candidate_value_nats: 1.2,
                    margin_nats: -0.2,
                    stderr_nats: 1e-9,
                    pass: false,
                },
            ],
        );
        assert!(!r.all_pass);
    }

    #[test]
    fn bits_conversion() {
        assert!((nats_to_bits(std::f64::consts::LN_2) - 1.0).abs() < 1e-15);
    }
}
