use serde::{Deserialize, Serialize};

use crate::reservation::Status;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub in_intersection: f64,
    pub be_clashed: f64,
    pub leave: f64,
    pub after: f64,
    pub will_clash: f64,
    pub otherwise: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { in_intersection: -1.0, be_clashed: -300.0, leave: 50.0, after: 0.0, will_clash: -50.0, otherwise: 0.0 }
    }
}

/// Case of the upper agents' per-step reward. Exactly one applies per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpperCase {
    InIntersection,
    BeClashed,
    Leave,
    After,
}

/// `already_left`: the vehicle finished its task on an earlier step.
/// `left_now`: it finishes this step. A vehicle that leaves while marked
/// be-clashed is rewarded for leaving.
pub fn upper_case(already_left: bool, left_now: bool, status: Status) -> UpperCase {
    if already_left {
        UpperCase::After
    } else if left_now {
        UpperCase::Leave
    } else if status == Status::BeClashed {
        UpperCase::BeClashed
    } else {
        UpperCase::InIntersection
    }
}

pub fn upper_step_reward(cfg: &RewardConfig, case: UpperCase) -> f64 {
    match case {
        UpperCase::InIntersection => cfg.in_intersection,
        UpperCase::BeClashed => cfg.be_clashed,
        UpperCase::Leave => cfg.leave,
        UpperCase::After => cfg.after,
    }
}

/// Feedback over one upper window: the plain sum of its step rewards.
pub fn upper_reward(window: &[f64]) -> f64 {
    window.iter().sum()
}

pub fn lower_reward(cfg: &RewardConfig, status: Status) -> f64 {
    if status == Status::Clash {
        cfg.will_clash
    } else {
        cfg.otherwise
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upper_cases() {
        let c = RewardConfig::default();
        let r = |a, l, s| upper_step_reward(&c, upper_case(a, l, s));
        assert_eq!(r(false, false, Status::Assigned), -1.0);
        assert_eq!(r(false, false, Status::UnassignedNew), -1.0);
        assert_eq!(r(false, false, Status::Clash), -1.0);
        assert_eq!(r(false, false, Status::BeClashed), -300.0);
        assert_eq!(r(false, true, Status::Assigned), 50.0);
        assert_eq!(r(false, true, Status::BeClashed), 50.0);
        for s in [Status::Assigned, Status::BeClashed, Status::Clash, Status::UnassignedNew] {
            assert_eq!(r(true, false, s), 0.0);
            assert_eq!(r(true, true, s), 0.0);
        }
    }

    #[test]
    fn window_sums() {
        assert_eq!(upper_reward(&[-1.0; 10]), -10.0);
        let mut w = vec![-1.0; 9];
        w.push(50.0);
        assert_eq!(upper_reward(&w), 41.0);
        assert_eq!(upper_reward(&[0.0; 10]), 0.0);
        assert_eq!(upper_reward(&[-1.0, -1.0, -1.0]), -3.0);
    }

    #[test]
    fn lower_cases() {
        let c = RewardConfig::default();
        assert_eq!(lower_reward(&c, Status::Clash), -50.0);
        assert_eq!(lower_reward(&c, Status::Assigned), 0.0);
        assert_eq!(lower_reward(&c, Status::BeClashed), 0.0);
        assert_eq!(lower_reward(&c, Status::UnassignedNew), 0.0);
    }
}
