use serde::{Deserialize, Serialize};

/// Which IDM formula to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdmForm {
    /// `a_max [1 - v/v0 - s*/s]`: no exponents on either ratio.
    #[default]
    Literal,
    /// `a_max [1 - (v/v0)^4 - (s*/s)^2]`.
    Standard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdmParams {
    pub a_max: f64,
    /// Comfortable deceleration `b`.
    pub b: f64,
    /// Desired speed `v0`.
    pub v0: f64,
    /// Jam gap `s0`.
    pub s0: f64,
    /// Time headway `T`.
    pub time_headway: f64,
    pub form: IdmForm,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self { a_max: 2.5, b: 2.5, v0: 15.0, s0: 2.0, time_headway: 1.5, form: IdmForm::Literal }
    }
}

/// Hard acceleration bounds applied to every IDM output (m/s^2).
pub const IDM_ACCEL_CEIL: f64 = 2.5;
pub const IDM_ACCEL_FLOOR: f64 = -5.0;

/// Nearest vehicle (or virtual obstacle) ahead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leader {
    /// Bumper-to-bumper gap in meters.
    pub gap: f64,
    pub speed: f64,
}

impl IdmParams {
    /// Desired dynamic gap `s*`; the follower's own speed sets the headway
    /// term and `v - v_leader` is the approach rate.
    pub fn desired_gap(&self, v: f64, leader_speed: f64) -> f64 {
        let dv = v - leader_speed;
        self.s0 + (v * self.time_headway + v * dv / (2.0 * (self.a_max * self.b).sqrt())).max(0.0)
    }
}

/// IDM acceleration, clamped to `[-5, 2.5]` m/s^2. A non-positive gap
/// returns the emergency floor.
pub fn idm_accel(v: f64, leader: Option<Leader>, p: &IdmParams) -> f64 {
    let ratio = v / p.v0;
    let free = match p.form {
        IdmForm::Literal => ratio,
        IdmForm::Standard => ratio.powi(4),
    };
    let interaction = match leader {
        None => 0.0,
        Some(l) if l.gap <= 0.0 => return IDM_ACCEL_FLOOR,
        Some(l) => {
            let q = p.desired_gap(v, l.speed) / l.gap;
            match p.form {
                IdmForm::Literal => q,
                IdmForm::Standard => q * q,
            }
        }
    };
    (p.a_max * (1.0 - free - interaction)).clamp(IDM_ACCEL_FLOOR, IDM_ACCEL_CEIL)
}
