//! Forward-process noise schedules.
//!
//! A schedule fixes per-step standard deviations `sigma_t` for `t = 0..=T`
//! and the cumulative levels `sigma_bar_t = sqrt(sum_{s<=t} sigma_s^2)`,
//! which is the total corruption at step `t` because independent Gaussian
//! increments add in variance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::cast_usize;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    /// `sigma_t = scale / T` for `t >= 1`.
    Constant,
    /// `sigma_t` proportional to `t`, normalized so the final cumulative
    /// level equals `scale`.
    Linear,
    /// Caller-supplied per-step sigmas.
    Custom,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(ScheduleKind::Constant),
            "linear" => Ok(ScheduleKind::Linear),
            "custom" => Ok(ScheduleKind::Custom),
            other => Err(Error::arg(
                "schedule kind",
                format!("unknown schedule kind `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule<F> {
    kind: ScheduleKind,
    sigmas: Vec<F>,
    cumulative: Vec<F>,
}

impl<F: Scalar> NoiseSchedule<F> {
    /// Builds the named schedule with `T` noising steps (levels `0..=T`,
    /// `sigma_0 = 0`).
    pub fn make(kind: ScheduleKind, t_max: usize, scale: F) -> Result<Self> {
        if t_max < 1 {
            return Err(Error::arg("NoiseSchedule::make", "T must be >= 1"));
        }
        if scale <= F::zero() {
            return Err(Error::arg("NoiseSchedule::make", "scale must be > 0"));
        }
        match kind {
            ScheduleKind::Constant => {
                let step = scale / cast_usize::<F>(t_max);
                let mut sigmas = vec![step; t_max + 1];
                sigmas[0] = F::zero();
                Self::from_sigmas_with_kind(sigmas, ScheduleKind::Constant)
            }
            ScheduleKind::Linear => {
                // sigma_t ∝ t, rescaled so sigma_bar_T = scale
                let sum_sq: F = (1..=t_max)
                    .map(|t| {
                        let tf = cast_usize::<F>(t);
                        tf * tf
                    })
                    .fold(F::zero(), |a, b| a + b);
                let coeff = scale / sum_sq.sqrt();
                let sigmas: Vec<F> = (0..=t_max)
                    .map(|t| coeff * cast_usize::<F>(t))
                    .collect();
                Self::from_sigmas_with_kind(sigmas, ScheduleKind::Linear)
            }
            ScheduleKind::Custom => Err(Error::arg(
                "NoiseSchedule::make",
                "custom schedules need explicit sigmas; use NoiseSchedule::custom",
            )),
        }
    }

    /// Schedule from explicit per-step sigmas (`sigmas[0]` is level 0).
    pub fn custom(sigmas: Vec<F>) -> Result<Self> {
        Self::from_sigmas_with_kind(sigmas, ScheduleKind::Custom)
    }

    /// Schedule whose cumulative levels are exactly `levels` (must be
    /// non-negative and non-decreasing; `levels[0]` is level 0).
    pub fn from_cumulative(levels: &[F]) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::arg("NoiseSchedule::from_cumulative", "empty levels"));
        }
        if levels[0] < F::zero() {
            return Err(Error::arg(
                "NoiseSchedule::from_cumulative",
                "levels must be non-negative",
            ));
        }
        let mut sigmas = Vec::with_capacity(levels.len());
        sigmas.push(levels[0]);
        for w in levels.windows(2) {
            if w[1] < w[0] {
                return Err(Error::arg(
                    "NoiseSchedule::from_cumulative",
                    "levels must be non-decreasing",
                ));
            }
            sigmas.push((w[1] * w[1] - w[0] * w[0]).max(F::zero()).sqrt());
        }
        let mut s = Self::from_sigmas_with_kind(sigmas, ScheduleKind::Custom)?;
        // store the requested levels verbatim to avoid rounding drift
        s.cumulative = levels.to_vec();
        Ok(s)
    }

    fn from_sigmas_with_kind(sigmas: Vec<F>, kind: ScheduleKind) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(Error::arg("NoiseSchedule", "empty sigma list"));
        }
        let mut cumulative = Vec::with_capacity(sigmas.len());
        let mut acc = F::zero();
        for &s in &sigmas {
            if s < F::zero() || !s.is_finite() {
                return Err(Error::arg("NoiseSchedule", "sigmas must be finite and >= 0"));
            }
            acc += s * s;
            cumulative.push(acc.sqrt());
        }
        Ok(NoiseSchedule {
            kind,
            sigmas,
            cumulative,
        })
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    /// Largest timestep `T`.
    pub fn t_max(&self) -> usize {
        self.sigmas.len() - 1
    }

    pub fn sigmas(&self) -> &[F] {
        &self.sigmas
    }

    pub fn cumulative(&self) -> &[F] {
        &self.cumulative
    }

    pub fn sigma(&self, t: usize) -> F {
        self.sigmas[t]
    }

    /// Cumulative level `sigma_bar_t`.
    pub fn sigma_bar(&self, t: usize) -> F {
        self.cumulative[t]
    }

    /// Checks `cumulative[t]^2 - cumulative[t-1]^2 = sigmas[t]^2` within
    /// `tol`. Used by tests and by chain deserialization.
    pub fn consistency_residual(&self) -> F {
        let mut worst =
            (self.cumulative[0] * self.cumulative[0] - self.sigmas[0] * self.sigmas[0]).abs();
        for t in 1..self.sigmas.len() {
            let delta = self.cumulative[t] * self.cumulative[t]
                - self.cumulative[t - 1] * self.cumulative[t - 1]
                - self.sigmas[t] * self.sigmas[t];
            if delta.abs() > worst {
                worst = delta.abs();
            }
        }
        worst
    }
}
