use crate::error::{Result, SwingError};

/// Uniform time discretisation `t_k = k * T / K` of the horizon `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(SwingError::InvalidModel(format!(
                "horizon must be finite and positive, got {horizon}"
            )));
        }
        if steps == 0 {
            return Err(SwingError::InvalidModel("step count must be >= 1".into()));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Grid time `t_k`; computed as `T * k / K` so that `t_0 = 0` and `t_K = T` exactly.
    pub fn time(&self, k: usize) -> f64 {
        self.horizon * k as f64 / self.steps as f64
    }

    /// Index of a grid time, rejecting times that are not on the grid.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let x = t / self.dt();
        let k = x.round();
        if !(k >= 0.0 && k <= self.steps as f64) || (x - k).abs() > 1e-9 {
            return Err(SwingError::OffTimeGrid { time: t, dt: self.dt() });
        }
        Ok(k as usize)
    }

    /// Number of full-rate steps needed to exhaust the unit volume, i.e. `1/(L*dt)`.
    ///
    /// The volume grid is only well defined when this ratio is a positive integer.
    pub fn volume_steps(&self, rate: f64) -> Result<usize> {
        let dt = self.dt();
        if !(rate.is_finite() && rate > 0.0) {
            return Err(SwingError::InvalidModel(format!(
                "rate L must be finite and positive, got {rate}"
            )));
        }
        let ratio = self.steps as f64 / (rate * self.horizon);
        let r = ratio.round();
        if r < 1.0 || (ratio - r).abs() > 1e-9 * ratio.max(1.0) {
            return Err(SwingError::MisalignedGrid { rate, dt, ratio });
        }
        Ok(r as usize)
    }
}
