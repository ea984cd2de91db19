use serde::{Deserialize, Serialize};

use crate::error::{FnlsError, Result};

/// Smallest number of points per axis accepted for a grid.
pub const MIN_POINTS: usize = 16;

/// Uniform cubic grid on `[-L, L]^3` with `n` nodes per axis.
///
/// Node `i` along an axis sits at `-L + i h` with `h = 2L / (n - 1)`, so both
/// faces of the box carry nodes. Values outside the box are taken as zero by
/// every operator in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid3D {
    half_width: f64,
    points: usize,
    spacing: f64,
}

impl Grid3D {
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(FnlsError::InvalidGrid(format!(
                "half-width must be positive and finite, got {half_width}"
            )));
        }
        if points < MIN_POINTS {
            return Err(FnlsError::InvalidGrid(format!(
                "need at least {MIN_POINTS} points per axis, got {points}"
            )));
        }
        // cube of the point count must fit comfortably in memory indexing
        if points > 2048 {
            return Err(FnlsError::InvalidGrid(format!(
                "at most 2048 points per axis supported, got {points}"
            )));
        }
        let spacing = 2.0 * half_width / (points as f64 - 1.0);
        Ok(Self {
            half_width,
            points,
            spacing,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Total number of nodes, `n^3`.
    pub fn len(&self) -> usize {
        self.points * self.points * self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume element `h^3` of the rectangle rule.
    pub fn cell_volume(&self) -> f64 {
        self.spacing * self.spacing * self.spacing
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.points + j) * self.points + k
    }

    #[inline]
    pub fn unindex(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.points;
        (idx / (n * n), (idx / n) % n, idx % n)
    }

    pub fn position(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.unindex(idx);
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    /// Index of the node treated as the box center (`n / 2` on every axis).
    pub fn center_node(&self) -> (usize, usize, usize) {
        let c = self.points / 2;
        (c, c, c)
    }

    pub fn contains(&self, point: [f64; 3]) -> bool {
        point.iter().all(|c| c.abs() <= self.half_width)
    }

    /// True when `point` coincides with a grid node up to a tiny relative slack.
    pub fn is_node(&self, point: [f64; 3]) -> bool {
        point.iter().all(|&c| {
            let s = (c + self.half_width) / self.spacing;
            let r = s.round();
            r >= 0.0 && r <= (self.points - 1) as f64 && (s - r).abs() < 1e-9
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_is_exact() {
        let g = Grid3D::new(1.0, 17).unwrap();
        assert_eq!(g.spacing(), 2.0 / 16.0);
        assert_eq!(g.coord(0), -1.0);
        assert_eq!(g.coord(16), 1.0);
        assert_eq!(g.len(), 17 * 17 * 17);
    }

    #[test]
    fn rejects_small_or_bad_grids() {
        assert!(Grid3D::new(1.0, 15).is_err());
        assert!(Grid3D::new(0.0, 32).is_err());
        assert!(Grid3D::new(f64::NAN, 32).is_err());
    }

    #[test]
    fn index_round_trip() {
        let g = Grid3D::new(2.0, 16).unwrap();
        for idx in [0, 1, 17, 255, 4095] {
            let (i, j, k) = g.unindex(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
    }

    #[test]
    fn node_detection() {
        let even = Grid3D::new(24.0, 96).unwrap();
        assert!(!even.is_node([0.0, 0.0, 0.0]));
        let odd = Grid3D::new(24.0, 97).unwrap();
        assert!(odd.is_node([0.0, 0.0, 0.0]));
        assert!(odd.is_node([0.5, -1.0, 24.0]));
    }
}
