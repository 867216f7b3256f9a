use crate::error::{Error, Result};

/// Uniform time grid `t_k = t0 + k·dt`, `k = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    dt: f64,
    len: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, len: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() || !t0.is_finite() {
            return Err(Error::InvalidGrid(format!("need finite t0 and dt > 0, got t0={t0}, dt={dt}")));
        }
        if len == 0 {
            return Err(Error::InvalidGrid("grid must have at least one point".into()));
        }
        Ok(Self { t0, dt, len })
    }

    /// Builds a grid from explicit points, rejecting non-uniform spacing.
    pub fn from_points(points: &[f64]) -> Result<Self> {
        match points {
            [] => Err(Error::InvalidGrid("no grid points".into())),
            [t] => Err(Error::InvalidGrid(format!(
                "a single point at {t} does not define a step"
            ))),
            [first, second, ..] => {
                let dt = second - first;
                if !(dt > 0.0) {
                    return Err(Error::InvalidGrid("grid must be strictly increasing".into()));
                }
                let tol = 1e-9 * dt.max(first.abs().max(points[points.len() - 1].abs()) * 1e-6);
                for (k, t) in points.iter().enumerate() {
                    let expected = first + k as f64 * dt;
                    if (t - expected).abs() > tol.max(1e-12 * expected.abs()) {
                        return Err(Error::InvalidGrid(format!(
                            "point {k} at {t} breaks uniform spacing {dt}"
                        )));
                    }
                }
                Self::new(*first, dt, points.len())
            }
        }
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn times(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.len).map(move |k| self.time(k))
    }
}
