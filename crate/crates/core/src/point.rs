use std::fmt;

use serde::{Deserialize, Serialize};

/// A spacetime event in adapted coordinates: time `t` and three spatial coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub t: f64,
    pub x: [f64; 3],
}

impl Point {
    pub fn new(t: f64, x: [f64; 3]) -> Self {
        Self { t, x }
    }

    pub fn from_coords(c: [f64; 4]) -> Self {
        Self { t: c[0], x: [c[1], c[2], c[3]] }
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.t, self.x[0], self.x[1], self.x[2]]
    }

    /// Coordinate along `axis` (0 = t, 1..=3 spatial).
    pub fn coord(&self, axis: usize) -> f64 {
        self.coords()[axis]
    }

    pub fn shifted(&self, axis: usize, delta: f64) -> Self {
        let mut c = self.coords();
        c[axis] += delta;
        Self::from_coords(c)
    }

    pub fn with_time(&self, t: f64) -> Self {
        Self { t, x: self.x }
    }

    pub fn is_finite(&self) -> bool {
        self.coords().iter().all(|v| v.is_finite())
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(t={}, x=[{}, {}, {}])", self.t, self.x[0], self.x[1], self.x[2])
    }
}
