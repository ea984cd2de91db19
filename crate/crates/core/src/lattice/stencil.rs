use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::ScalarField;
use crate::error::{FnlsError, Result};

/// Central finite-difference order for the Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(try_from = "u8", into = "u8")]
pub enum Stencil {
    /// 7-point stencil, O(h²).
    #[default]
    Second,
    /// 13-point stencil, O(h⁴).
    Fourth,
}

impl Stencil {
    pub fn from_order(order: u8) -> Result<Self> {
        match order {
            2 => Ok(Stencil::Second),
            4 => Ok(Stencil::Fourth),
            other => Err(FnlsError::Domain(format!(
                "stencil order must be 2 or 4, got {other}"
            ))),
        }
    }

    pub fn order(self) -> u8 {
        match self {
            Stencil::Second => 2,
            Stencil::Fourth => 4,
        }
    }

    /// Coefficients of `-d²/dx²` along one axis, scaled by `h²`:
    /// `(diagonal, nearest, next-nearest)`.
    fn axis_coefficients(self) -> (f64, f64, f64) {
        match self {
            Stencil::Second => (2.0, -1.0, 0.0),
            Stencil::Fourth => (2.5, -4.0 / 3.0, 1.0 / 12.0),
        }
    }

    /// Diagonal entry of the 3D operator `-Δ_h`.
    pub fn diagonal(self, h: f64) -> f64 {
        3.0 * self.axis_coefficients().0 / (h * h)
    }

    /// Symbol of the 1D operator on the Dirichlet sine mode `m = 1..=n`.
    pub fn sine_symbol(self, m: usize, n: usize, h: f64) -> f64 {
        let theta = std::f64::consts::PI * m as f64 / (n as f64 + 1.0);
        let c = theta.cos();
        match self {
            Stencil::Second => 2.0 * (1.0 - c) / (h * h),
            Stencil::Fourth => (1.0 - c) * (7.0 - c) / (3.0 * h * h),
        }
    }
}

impl TryFrom<u8> for Stencil {
    type Error = FnlsError;
    fn try_from(v: u8) -> Result<Self> {
        Stencil::from_order(v)
    }
}

impl From<Stencil> for u8 {
    fn from(s: Stencil) -> u8 {
        s.order()
    }
}

/// Applies `-Δ` with zero values outside the box.
pub fn dirichlet_laplacian_apply(f: &ScalarField, stencil: Stencil) -> ScalarField {
    let mut out = ScalarField::zeros(*f.grid());
    neg_laplacian_into(f.values(), out.values_mut(), f.grid().points(), f.grid().spacing(), stencil);
    out
}

/// Raw-slice kernel of [`dirichlet_laplacian_apply`].
pub(crate) fn neg_laplacian_into(src: &[f64], dst: &mut [f64], n: usize, h: f64, stencil: Stencil) {
    let (d, c1, c2) = stencil.axis_coefficients();
    let inv_h2 = 1.0 / (h * h);
    let c0 = 3.0 * d * inv_h2;
    let c1 = c1 * inv_h2;
    let c2 = c2 * inv_h2;
    let plane = n * n;
    let wide = c2 != 0.0;

    dst.par_chunks_mut(plane).enumerate().for_each(|(i, out)| {
        let base = i * plane;
        let here = &src[base..base + plane];
        for (o, &v) in out.iter_mut().zip(here) {
            *o = c0 * v;
        }
        // x neighbours
        let mut add_plane = |offset: isize, c: f64| {
            let ii = i as isize + offset;
            if ii >= 0 && (ii as usize) < n {
                let p = &src[ii as usize * plane..(ii as usize + 1) * plane];
                for (o, &v) in out.iter_mut().zip(p) {
                    *o += c * v;
                }
            }
        };
        add_plane(-1, c1);
        add_plane(1, c1);
        if wide {
            add_plane(-2, c2);
            add_plane(2, c2);
        }
        // y neighbours
        for j in 0..n {
            let row = &mut out[j * n..(j + 1) * n];
            for (offset, c) in [(-1isize, c1), (1, c1), (-2, c2), (2, c2)] {
                if c == 0.0 {
                    continue;
                }
                let jj = j as isize + offset;
                if jj >= 0 && (jj as usize) < n {
                    let r = &here[jj as usize * n..(jj as usize + 1) * n];
                    for (o, &v) in row.iter_mut().zip(r) {
                        *o += c * v;
                    }
                }
            }
        }
        // z neighbours
        for j in 0..n {
            let row = &mut out[j * n..(j + 1) * n];
            let r = &here[j * n..(j + 1) * n];
            for k in 0..n {
                let mut acc = 0.0;
                if k >= 1 {
                    acc += c1 * r[k - 1];
                }
                if k + 1 < n {
                    acc += c1 * r[k + 1];
                }
                if wide {
                    if k >= 2 {
                        acc += c2 * r[k - 2];
                    }
                    if k + 2 < n {
                        acc += c2 * r[k + 2];
                    }
                }
                row[k] += acc;
            }
        }
    });
}

/// `∫|∇f|²` evaluated as `⟨f, -Δf⟩` with the given stencil.
pub fn kinetic_quadratic_form(f: &ScalarField, stencil: Stencil) -> f64 {
    let lap = dirichlet_laplacian_apply(f, stencil);
    f.inner(&lap)
}
