use rayon::prelude::*;

use super::grid::Grid3D;
use super::sum;
use crate::error::{FnlsError, Result};

/// Real function sampled on a [`Grid3D`], row-major with `z` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid3D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid3D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid3D, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    /// Samples `f(x, y, z)` at every node.
    pub fn from_fn<F>(grid: Grid3D, f: F) -> Self
    where
        F: Fn([f64; 3]) -> f64 + Sync,
    {
        let mut values = vec![0.0; grid.len()];
        values
            .par_iter_mut()
            .enumerate()
            .for_each(|(idx, v)| *v = f(grid.position(idx)));
        Self { grid, values }
    }

    pub fn from_values(grid: Grid3D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(FnlsError::ShapeMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(FnlsError::NonFinite(bad));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: Grid3D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid3D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid.index(i, j, k)]
    }

    /// Rectangle-rule integral `h^3 Σ f`.
    pub fn integrate(&self) -> f64 {
        self.grid.cell_volume() * sum::sum(&self.values)
    }

    /// L² inner product `h^3 Σ f g`.
    pub fn inner(&self, other: &ScalarField) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.grid.cell_volume() * sum::dot(&self.values, &other.values)
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Index of the largest value; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn map<F>(&self, f: F) -> ScalarField
    where
        F: Fn(f64) -> f64 + Sync,
    {
        let values = self.values.par_iter().map(|&v| f(v)).collect();
        Self::from_raw(self.grid, values)
    }

    pub fn zip_map<F>(&self, other: &ScalarField, f: F) -> ScalarField
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        debug_assert_eq!(self.grid, other.grid);
        let values = self
            .values
            .par_iter()
            .zip(other.values.par_iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_raw(self.grid, values)
    }

    pub fn scaled(&self, a: f64) -> ScalarField {
        self.map(|v| a * v)
    }

    pub fn scale_mut(&mut self, a: f64) {
        self.values.par_iter_mut().for_each(|v| *v *= a);
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &ScalarField) {
        debug_assert_eq!(self.grid, x.grid);
        self.values
            .par_iter_mut()
            .zip(x.values.par_iter())
            .for_each(|(y, &xv)| *y += a * xv);
    }

    /// `self = a * x + b * y`
    pub fn linear_combination(a: f64, x: &ScalarField, b: f64, y: &ScalarField) -> ScalarField {
        x.zip_map(y, |p, q| a * p + b * q)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Rectangle-rule quadrature of a field.
pub fn integrate(f: &ScalarField) -> f64 {
    f.integrate()
}
