use serde::{Deserialize, Serialize};

use crate::error::{HedgeError, Result};

/// Vanilla positions q(t) and trading rates q̇(t) sampled on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
}

/// `M + 1` uniformly spaced points on [0, T], with the endpoints hit exactly.
pub fn uniform_grid(horizon: f64, m: usize) -> Vec<f64> {
    (0..=m).map(|k| horizon * (k as f64 / m as f64)).collect()
}

impl Trajectory {
    pub fn new(
        times: Vec<f64>,
        positions: Vec<Vec<f64>>,
        velocities: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let tr = Trajectory {
            times,
            positions,
            velocities,
        };
        tr.validate()?;
        Ok(tr)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.len() < 2 {
            return Err(HedgeError::domain(
                "a trajectory needs at least two grid points",
            ));
        }
        if self.times[0] != 0.0 {
            return Err(HedgeError::domain(format!(
                "trajectory grid must start at 0, starts at {}",
                self.times[0]
            )));
        }
        if !self.times.windows(2).all(|w| w[1] > w[0]) {
            return Err(HedgeError::domain(
                "trajectory grid must be strictly increasing",
            ));
        }
        HedgeError::check_len(
            "trajectory positions",
            self.times.len(),
            self.positions.len(),
        )?;
        HedgeError::check_len(
            "trajectory velocities",
            self.times.len(),
            self.velocities.len(),
        )?;
        let n = self.positions[0].len();
        for (q, v) in self.positions.iter().zip(&self.velocities) {
            HedgeError::check_len("trajectory position vector", n, q.len())?;
            HedgeError::check_len("trajectory velocity vector", n, v.len())?;
        }
        Ok(())
    }

    /// Number of vanillas.
    pub fn dim(&self) -> usize {
        self.positions[0].len()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("validated")
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Grid spacing if the grid is uniform (to 1e-9 relative), else `None`.
    pub fn uniform_step(&self) -> Option<f64> {
        let h = self.horizon() / self.steps() as f64;
        self.times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h)
            .then_some(h)
    }

    /// Linear interpolation of positions and velocities at `t` (clamped to [0, T]).
    pub fn sample(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let t = t.clamp(0.0, self.horizon());
        let idx = match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => return (self.positions[i].clone(), self.velocities[i].clone()),
            Err(i) => i,
        };
        let (lo, hi) = (idx - 1, idx);
        let w = (t - self.times[lo]) / (self.times[hi] - self.times[lo]);
        let lerp = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect()
        };
        (
            lerp(&self.positions[lo], &self.positions[hi]),
            lerp(&self.velocities[lo], &self.velocities[hi]),
        )
    }

    /// Holds `q` over [0, T].
    pub fn constant(q: &[f64], horizon: f64, m: usize) -> Self {
        let times = uniform_grid(horizon, m);
        let positions = vec![q.to_vec(); m + 1];
        let velocities = vec![vec![0.0; q.len()]; m + 1];
        Trajectory {
            times,
            positions,
            velocities,
        }
    }

    /// Straight line from `from` at 0 to `to` at T, constant trading rate.
    pub fn linear(from: &[f64], to: &[f64], horizon: f64, m: usize) -> Self {
        let times = uniform_grid(horizon, m);
        let rate: Vec<f64> = from
            .iter()
            .zip(to)
            .map(|(a, b)| (b - a) / horizon)
            .collect();
        let positions = (0..=m)
            .map(|k| {
                let s = k as f64 / m as f64;
                from.iter()
                    .zip(to)
                    .map(|(a, b)| (1.0 - s) * a + s * b)
                    .collect()
            })
            .collect();
        Trajectory {
            times,
            positions,
            velocities: vec![rate; m + 1],
        }
    }

    /// Fast unwind: a smooth (cubic smoothstep) move from `from` to `to`
    /// over the first `window` of the horizon, then hold.
    pub fn fast_unwind(from: &[f64], to: &[f64], window: f64, horizon: f64, m: usize) -> Self {
        let times = uniform_grid(horizon, m);
        let window = window.clamp(f64::MIN_POSITIVE, horizon);
        let mut positions = Vec::with_capacity(m + 1);
        let mut velocities = Vec::with_capacity(m + 1);
        for &t in &times {
            let s = (t / window).min(1.0);
            let shape = s * s * (3.0 - 2.0 * s);
            let slope = 6.0 * s * (1.0 - s) / window;
            positions.push(
                from.iter()
                    .zip(to)
                    .map(|(a, b)| a + shape * (b - a))
                    .collect(),
            );
            velocities.push(from.iter().zip(to).map(|(a, b)| slope * (b - a)).collect());
        }
        Trajectory {
            times,
            positions,
            velocities,
        }
    }
}
