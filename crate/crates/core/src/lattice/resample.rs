use rayon::prelude::*;

use super::field::ScalarField;
use super::grid::Grid3D;
use crate::error::{FnlsError, Result};

/// Trilinear sample of `f` at a physical point. Nodes outside the box read as 0.
pub fn sample_trilinear(f: &ScalarField, point: [f64; 3]) -> f64 {
    let g = f.grid();
    let n = g.points() as isize;
    let mut base = [0isize; 3];
    let mut frac = [0.0; 3];
    for a in 0..3 {
        let s = (point[a] + g.half_width()) / g.spacing();
        if !(s > -1.0 && s < n as f64) {
            return 0.0;
        }
        let fl = s.floor();
        base[a] = fl as isize;
        frac[a] = s - fl;
    }
    let node = |i: isize, j: isize, k: isize| -> f64 {
        if i < 0 || j < 0 || k < 0 || i >= n || j >= n || k >= n {
            0.0
        } else {
            f.at(i as usize, j as usize, k as usize)
        }
    };
    let mut acc = 0.0;
    for di in 0..2 {
        let wi = if di == 0 { 1.0 - frac[0] } else { frac[0] };
        if wi == 0.0 {
            continue;
        }
        for dj in 0..2 {
            let wj = if dj == 0 { 1.0 - frac[1] } else { frac[1] };
            if wj == 0.0 {
                continue;
            }
            for dk in 0..2 {
                let wk = if dk == 0 { 1.0 - frac[2] } else { frac[2] };
                if wk == 0.0 {
                    continue;
                }
                acc += wi * wj * wk * node(base[0] + di, base[1] + dj, base[2] + dk);
            }
        }
    }
    acc
}

/// `g(x) = scale^{3/2} f(scale * x + shift)` on `target`, by trilinear
/// interpolation. The prefactor keeps the L² mass when the support fits.
pub fn rescale_field(
    f: &ScalarField,
    scale: f64,
    shift: [f64; 3],
    target: &Grid3D,
) -> Result<ScalarField> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(FnlsError::Domain(format!("scale must be positive, got {scale}")));
    }
    let pref = scale.powf(1.5);
    let mut values = vec![0.0; target.len()];
    values.par_iter_mut().enumerate().for_each(|(idx, v)| {
        let x = target.position(idx);
        let p = [
            scale * x[0] + shift[0],
            scale * x[1] + shift[1],
            scale * x[2] + shift[2],
        ];
        *v = pref * sample_trilinear(f, p);
    });
    Ok(ScalarField::from_raw(*target, values))
}

/// `g[i] = f[i + offset]` node-wise, zero where the source index leaves the box.
pub fn shift_cells(f: &ScalarField, offset: [isize; 3]) -> ScalarField {
    let g = *f.grid();
    let n = g.points() as isize;
    let mut values = vec![0.0; g.len()];
    values.par_iter_mut().enumerate().for_each(|(idx, v)| {
        let (i, j, k) = g.unindex(idx);
        let s = [i as isize + offset[0], j as isize + offset[1], k as isize + offset[2]];
        if s.iter().all(|&c| c >= 0 && c < n) {
            *v = f.at(s[0] as usize, s[1] as usize, s[2] as usize);
        }
    });
    ScalarField::from_raw(g, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(grid: Grid3D, width: f64) -> ScalarField {
        let norm = (2.0 / (std::f64::consts::PI * width * width)).powf(0.75);
        ScalarField::from_fn(grid, |x| {
            norm * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (width * width)).exp()
        })
    }

    #[test]
    fn identity_rescale() {
        let g = Grid3D::new(4.0, 21).unwrap();
        let f = gaussian(g, 1.3);
        let out = rescale_field(&f, 1.0, [0.0; 3], &g).unwrap();
        assert!(out.sub(&f).max_abs() < 1e-14);
    }

    #[test]
    fn mass_preserved_at_scale_two() {
        let g = Grid3D::new(8.0, 64).unwrap();
        let f = gaussian(g, 2.5);
        let out = rescale_field(&f, 2.0, [0.0; 3], &g).unwrap();
        let ratio = out.norm_sq() / f.norm_sq();
        assert!((ratio - 1.0).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn rejects_nonpositive_scale() {
        let g = Grid3D::new(1.0, 16).unwrap();
        assert!(rescale_field(&ScalarField::zeros(g), 0.0, [0.0; 3], &g).is_err());
    }

    #[test]
    fn shift_moves_values() {
        let g = Grid3D::new(1.0, 16).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0] + 2.0 * x[1] + 3.0 * x[2]);
        let s = shift_cells(&f, [1, 0, -1]);
        assert_eq!(s.at(3, 4, 5), f.at(4, 4, 4));
        assert_eq!(s.at(15, 4, 5), 0.0);
        assert_eq!(s.at(3, 4, 0), 0.0);
    }
}
