use crate::error::{Error, Result};

/// Two-slope linearly decreasing ε.
///
/// ε is 1 up to `n_start`, then falls steeply to `eps_last` over the next
/// `eps_ann` steps, then shallowly to `eps_end` at `n_max`, where it stays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecreasingSchedule {
    pub eps_start: f64,
    pub eps_last: f64,
    pub eps_end: f64,
    pub n_start: u64,
    pub eps_ann: u64,
    pub n_max: u64,
    steep_intercept: f64,
    steep_slope: f64,
    shallow_intercept: f64,
    shallow_slope: f64,
}

impl DecreasingSchedule {
    pub fn new(eps_start: f64, eps_last: f64, eps_end: f64, n_start: u64, eps_ann: u64, n_max: u64) -> Result<Self> {
        for (name, v) in [("eps_start", eps_start), ("eps_last", eps_last), ("eps_end", eps_end)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if eps_ann == 0 || n_start + eps_ann >= n_max {
            return Err(Error::config(format!(
                "decreasing schedule needs eps_ann > 0 and n_start + eps_ann < n_max \
                 (got {n_start} + {eps_ann} vs {n_max})"
            )));
        }
        let steep_slope = -(eps_start - eps_last) / eps_ann as f64;
        let steep_intercept = eps_start - steep_slope * n_start as f64;
        let shallow_slope = -(eps_last - eps_end) / (n_max - eps_ann - n_start) as f64;
        let shallow_intercept = eps_end - shallow_slope * n_max as f64;
        Ok(Self {
            eps_start,
            eps_last,
            eps_end,
            n_start,
            eps_ann,
            n_max,
            steep_intercept,
            steep_slope,
            shallow_intercept,
            shallow_slope,
        })
    }

    /// Defaults for a million-step run.
    pub fn full_scale() -> Self {
        Self::new(1.0, 0.1, 0.01, 50_000, 400_000, 1_000_000).expect("valid defaults")
    }

    pub fn epsilon(&self, step: u64) -> f64 {
        let eps = if step <= self.n_start {
            1.0
        } else if step > self.n_max {
            self.eps_end
        } else if step > self.n_start + self.eps_ann {
            self.shallow_intercept + self.shallow_slope * step as f64
        } else {
            self.steep_intercept + self.steep_slope * step as f64
        };
        eps.clamp(0.0, 1.0)
    }
}

/// Free-function form of [`DecreasingSchedule::epsilon`].
pub fn eps_decreasing(step: u64, schedule: &DecreasingSchedule) -> f64 {
    schedule.epsilon(step)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scale_breakpoints() {
        let s = DecreasingSchedule::full_scale();
        assert_eq!(s.epsilon(0), 1.0);
        assert!((s.epsilon(250_000) - 0.55).abs() < 1e-12);
        assert!((s.epsilon(450_000) - 0.1).abs() < 1e-12);
        assert!((s.epsilon(1_000_000) - 0.01).abs() < 1e-12);
        assert_eq!(s.epsilon(5_000_000), 0.01);
    }

    #[test]
    fn rejects_overlapping_breakpoints() {
        assert!(DecreasingSchedule::new(1.0, 0.1, 0.01, 600_000, 400_000, 1_000_000).is_err());
        assert!(DecreasingSchedule::new(1.0, 0.1, 0.01, 0, 0, 10).is_err());
        assert!(DecreasingSchedule::new(1.2, 0.1, 0.01, 0, 5, 10).is_err());
    }
}
