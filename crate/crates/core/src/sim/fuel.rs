use serde::{Deserialize, Serialize};

/// Polynomial instantaneous fuel model, in ml/s:
/// `max(idle, c0 + c1 v + c2 v^2 + c3 v^3 + c4 max(a, 0) v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FuelModel {
    pub idle: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl Default for FuelModel {
    fn default() -> Self {
        // Roughly a 1.5 l passenger car: ~1.1 l/h idle, ~1.3 ml/s cruising at 15 m/s.
        Self { idle: 0.3, c0: 0.3, c1: 0.04, c2: 0.0, c3: 1.2e-4, c4: 0.12 }
    }
}

impl FuelModel {
    pub fn rate(&self, v: f64, a: f64) -> f64 {
        let p = self.c0 + v * (self.c1 + v * (self.c2 + v * self.c3)) + self.c4 * a.max(0.0) * v;
        p.max(self.idle)
    }

    /// Non-negative coefficients keep the rate monotone in `v` for `a >= 0`.
    pub fn is_monotone(&self) -> bool {
        [self.c1, self.c2, self.c3, self.c4].iter().all(|&c| c >= 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idle_floor_at_rest() {
        let f = FuelModel::default();
        assert_eq!(f.rate(0.0, 0.0), f.idle);
    }

    #[test]
    fn braking_adds_nothing() {
        let f = FuelModel::default();
        assert_eq!(f.rate(10.0, -2.0), f.rate(10.0, 0.0));
    }

    #[test]
    fn traction_costs_fuel() {
        let f = FuelModel::default();
        assert!(f.rate(10.0, 1.0) >= f.rate(10.0, 0.0));
    }

    #[test]
    fn monotone_in_speed() {
        let f = FuelModel::default();
        assert!(f.is_monotone());
        for a in [0.0, 0.5, 2.5] {
            let mut last = 0.0;
            for i in 0..=150 {
                let r = f.rate(i as f64 * 0.1, a);
                assert!(r >= last);
                last = r;
            }
        }
    }
}
