//! Numerical tolerances, resolutions and effort budgets.
//!
//! Tolerances marked "relative" are multiplied by the system's field scale
//! ([`crate::PwsSystem::scale`]) before use.

// float methods for no_std; redundant when std is linked through dev-dependencies
#[allow(unused_imports)]
use num_traits::Float;

/// Decision thresholds.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Tolerances {
    /// Surface residual `|f| ≤ eps_f` (absolute).
    pub eps_f: f64,
    /// Tangency residual `|Wf| ≤ eps_t` (relative).
    pub eps_t: f64,
    /// Sign decision margin for second and third Lie derivatives (relative).
    pub delta: f64,
    /// Linear-independence margin on normalized determinants and sines.
    pub delta_det: f64,
    /// Tangency band for region labels (relative).
    pub tau: f64,
    /// Gradient floor for the regular-value condition (absolute).
    pub g_min: f64,
    /// Hyperbolicity margin on real parts and multipliers (relative).
    pub delta_h: f64,
    /// Minimum transversality angle in radians.
    pub theta_min: f64,
    /// Residual for zeros of the normalized sliding field (relative, squared scale).
    pub eps_eq: f64,
    /// Relative tolerance of the adaptive integrator.
    pub rtol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eps_f: 1e-9,
            eps_t: 1e-9,
            delta: 1e-6,
            delta_det: 1e-8,
            tau: 1e-8,
            g_min: 1e-8,
            delta_h: 1e-6,
            theta_min: 1e-4,
            eps_eq: 1e-9,
            rtol: 1e-9,
        }
    }
}

impl Tolerances {
    /// Names accepted by [`Tolerances::set`].
    pub const KEYS: [&'static str; 10] = [
        "eps_f", "eps_t", "delta", "delta_det", "tau", "g_min", "delta_h", "theta_min",
        "eps_eq", "rtol",
    ];

    pub fn set(&mut self, key: &str, value: f64) -> Result<(), ConfigError> {
        if !Self::KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey);
        }
        if !(value.is_finite() && value > 0.0) {
            return Err(ConfigError::NonPositive);
        }
        let slot = match key {
            "eps_f" => &mut self.eps_f,
            "eps_t" => &mut self.eps_t,
            "delta" => &mut self.delta,
            "delta_det" => &mut self.delta_det,
            "tau" => &mut self.tau,
            "g_min" => &mut self.g_min,
            "delta_h" => &mut self.delta_h,
            "theta_min" => &mut self.theta_min,
            "eps_eq" => &mut self.eps_eq,
            "rtol" => &mut self.rtol,
            _ => unreachable!("key checked against KEYS"),
        };
        *slot = value;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let all = [
            self.eps_f,
            self.eps_t,
            self.delta,
            self.delta_det,
            self.tau,
            self.g_min,
            self.delta_h,
            self.theta_min,
            self.eps_eq,
            self.rtol,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(ConfigError::NonPositive)
        }
    }
}

/// Sampling and continuation resolutions.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Resolution {
    /// Grid cells per axis for the surface mesh.
    pub mesh: usize,
    /// Grid points per axis for tangency seeding.
    pub seed_grid: usize,
    /// Continuation step bounds, relative to the box diameter.
    pub step_min: f64,
    pub step_max: f64,
    pub step_initial: f64,
    /// Node budget per traced curve.
    pub max_curve_nodes: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution {
            mesh: 28,
            seed_grid: 8,
            step_min: 1e-4,
            step_max: 1e-1,
            step_initial: 1e-2,
            max_curve_nodes: 20_000,
        }
    }
}

impl Resolution {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let ok = self.mesh >= 2
            && self.seed_grid >= 2
            && self.max_curve_nodes >= 16
            && [self.step_min, self.step_max, self.step_initial]
                .iter()
                .all(|v| v.is_finite() && *v > 0.0)
            && self.step_min <= self.step_initial
            && self.step_initial <= self.step_max;
        if ok {
            Ok(())
        } else {
            Err(ConfigError::NonPositive)
        }
    }
}


/// Budgets for bounded-effort protocols.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Effort {
    /// Horizon for connection searches.
    pub t_conn: f64,
    /// Connection radius relative to the block diameter.
    pub r_conn: f64,
    /// Horizon of the sector flow-through protocol.
    pub sector_horizon: f64,
    /// Sector radius relative to the box diameter.
    pub sector_radius: f64,
    /// Vertex exclusion radius relative to the sector radius.
    pub sector_r_min: f64,
    /// Seeds per sector fan.
    pub sector_fan: usize,
    /// Horizon of the recurrence search.
    pub recurrence_horizon: f64,
    /// Number of mesh samples integrated for the recurrence search.
    pub recurrence_samples: usize,
    /// Samples along transversal segments for periodic-orbit search.
    pub periodic_samples: usize,
    /// Chart radius for return maps, relative to the box diameter.
    pub chart_radius: f64,
    /// Lamination height relative to the box diameter.
    pub lambda: f64,
    /// Step budget per orbit.
    pub max_steps: usize,
    /// Seed for sample selection.
    pub seed: u64,
}

impl Default for Effort {
    fn default() -> Self {
        Effort {
            t_conn: 1e3,
            r_conn: 1e-4,
            sector_horizon: 50.0,
            sector_radius: 0.05,
            sector_r_min: 1e-2,
            sector_fan: 16,
            recurrence_horizon: 100.0,
            recurrence_samples: 8,
            periodic_samples: 12,
            chart_radius: 1e-3,
            lambda: 0.05,
            max_steps: 200_000,
            seed: 0,
        }
    }
}

impl Effort {
    /// Every budget multiplied by `k` (radii untouched).
    pub fn scaled(&self, k: f64) -> Self {
        let mul = |n: usize| ((n as f64) * k).ceil() as usize;
        Effort {
            t_conn: self.t_conn * k,
            sector_horizon: self.sector_horizon * k,
            sector_fan: mul(self.sector_fan),
            recurrence_horizon: self.recurrence_horizon * k,
            recurrence_samples: mul(self.recurrence_samples),
            periodic_samples: mul(self.periodic_samples),
            max_steps: mul(self.max_steps),
            ..*self
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let reals = [
            self.t_conn,
            self.r_conn,
            self.sector_horizon,
            self.sector_radius,
            self.sector_r_min,
            self.recurrence_horizon,
            self.chart_radius,
            self.lambda,
        ];
        let ok = reals.iter().all(|v| v.is_finite() && *v > 0.0)
            && self.sector_fan > 0
            && self.recurrence_samples > 0
            && self.periodic_samples > 1
            && self.max_steps > 0;
        if ok {
            Ok(())
        } else {
            Err(ConfigError::NonPositive)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown tolerance key")]
    UnknownKey,
    #[error("tolerances, resolutions and budgets must be strictly positive")]
    NonPositive,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        Tolerances::default().validate().unwrap();
        Resolution::default().validate().unwrap();
        Effort::default().validate().unwrap();
    }

    #[test]
    fn set_rejects_unknown_and_non_positive() {
        let mut t = Tolerances::default();
        assert_eq!(t.set("bogus", 1.0), Err(ConfigError::UnknownKey));
        assert_eq!(t.set("tau", 0.0), Err(ConfigError::NonPositive));
        t.set("tau", 1e-6).unwrap();
        assert_eq!(t.tau, 1e-6);
    }
}
