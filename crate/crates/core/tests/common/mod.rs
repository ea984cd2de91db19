//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use fnls_core::lattice::{Grid3D, ScalarField};

/// Normalized `e^{-r/2}/√(8π)` about `center`: ground state of `−Δ − 1/|x|`.
pub fn hydrogen(grid: Grid3D, center: [f64; 3]) -> ScalarField {
    ScalarField::from_fn(grid, |x| {
        let r = dist(x, center);
        (-r / 2.0).exp() / (8.0 * PI).sqrt()
    })
}

/// `e^{-|x-c|²/(2w²)}`, normalized in the continuum.
pub fn gaussian(grid: Grid3D, center: [f64; 3], width: f64) -> ScalarField {
    let norm = (PI * width * width).powf(-0.75);
    ScalarField::from_fn(grid, |x| {
        let r = dist(x, center);
        norm * (-r * r / (2.0 * width * width)).exp()
    })
}

pub fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Radial ground state `Q` of `−Q'' − (2/r)Q' + Q = Q^{2p−1}` by RK4 shooting,
/// with its `L²` mass and the rescaling onto a unit-mass soliton.
pub struct RadialSoliton {
    pub p: f64,
    pub q0: f64,
    pub mass: f64,
    step: f64,
    samples: Vec<f64>,
}

const SHOOT_STEP: f64 = 1e-3;
const SHOOT_RANGE: f64 = 40.0;

fn rhs(p: f64, r: f64, q: f64, dq: f64) -> (f64, f64) {
    (dq, -2.0 / r * dq + q - q.abs().powf(2.0 * p - 1.0))
}

/// +1 when the trajectory crosses zero, −1 when it turns back up, 0 if
/// neither happens in range. Stops recording at the first verdict.
fn shoot(p: f64, q0: f64, record: Option<&mut Vec<f64>>) -> i32 {
    let h = SHOOT_STEP;
    let (mut r, mut q, mut dq) = (1e-6, q0, 0.0);
    let mut record = record;
    if let Some(s) = record.as_deref_mut() {
        s.push(q0);
    }
    for _ in 0..(SHOOT_RANGE / h) as usize {
        let (a1, b1) = rhs(p, r, q, dq);
        let (a2, b2) = rhs(p, r + h / 2.0, q + h / 2.0 * a1, dq + h / 2.0 * b1);
        let (a3, b3) = rhs(p, r + h / 2.0, q + h / 2.0 * a2, dq + h / 2.0 * b2);
        let (a4, b4) = rhs(p, r + h, q + h * a3, dq + h * b3);
        q += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        dq += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        r += h;
        if q < 0.0 {
            return 1;
        }
        if dq > 0.0 {
            return -1;
        }
        if let Some(s) = record.as_deref_mut() {
            s.push(q);
        }
    }
    0
}

impl RadialSoliton {
    pub fn new(p: f64) -> Self {
        let (mut lo, mut hi) = (1.0_f64, 20.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if shoot(p, mid, None) > 0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let q0 = 0.5 * (lo + hi);
        let mut samples = Vec::new();
        shoot(p, q0, Some(&mut samples));
        let mass = samples
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let r = i as f64 * SHOOT_STEP;
                4.0 * PI * r * r * q * q * SHOOT_STEP
            })
            .sum();
        Self {
            p,
            q0,
            mass,
            step: SHOOT_STEP,
            samples,
        }
    }

    fn q(&self, s: f64) -> f64 {
        let t = s / self.step;
        let i = t.floor() as usize;
        if i + 1 >= self.samples.len() {
            return 0.0;
        }
        let f = t - i as f64;
        self.samples[i] * (1.0 - f) + self.samples[i + 1] * f
    }

    /// `(c, k)` with `w(r) = c Q(k r)` of unit mass at coupling `α`.
    fn scales(&self, alpha: f64) -> (f64, f64) {
        let p = self.p;
        let d = 2.0 - 3.0 * (p - 1.0);
        let c = self.mass.powf(-1.0 / d);
        let k = c.powf(p - 1.0);
        let a = alpha.powf(2.0 * (p - 1.0) / d);
        (c * a.powf(1.5), k * a)
    }

    /// Unit-mass minimizer profile at coupling `α`.
    pub fn profile(&self, alpha: f64, r: f64) -> f64 {
        let (c, k) = self.scales(alpha);
        c * self.q(k * r)
    }

    /// Its eigenvalue `−k²`.
    pub fn eigenvalue(&self, alpha: f64) -> f64 {
        let (_, k) = self.scales(alpha);
        -k * k
    }
}

/// Density-weighted mean position.
pub fn centroid(f: &ScalarField) -> [f64; 3] {
    let g = f.grid();
    let rho = f.mul(f);
    let m = rho.integrate();
    let mut c = [0.0; 3];
    for (idx, &v) in rho.values().iter().enumerate() {
        let x = g.position(idx);
        for d in 0..3 {
            c[d] += x[d] * v * g.cell_volume();
        }
    }
    c.map(|v| v / m)
}
