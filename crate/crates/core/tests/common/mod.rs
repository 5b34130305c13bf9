//! Oracles shared by the integration tests. Nothing here calls into the
//! library's linear algebra or training code.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            // Box-Muller keeps the oracle free of rand_distr.
            let u1: f64 = rng.random_range(f64::EPSILON..1.0);
            let u2: f64 = rng.random();
            scale * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        })
        .collect()
}

/// Central difference of a scalar function along every coordinate.
pub fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let step = h * x[i].abs().max(1.0);
            xp[i] = x[i] + step;
            let fp = f(&xp);
            xp[i] = x[i] - step;
            let fm = f(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * step)
        })
        .collect()
}

/// `‖a − b‖ / max(‖b‖, floor)`.
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    let num = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(floor)
}

pub type Dense = Vec<Vec<f64>>;

pub fn identity(n: usize, scale: f64) -> Dense {
    (0..n).map(|i| (0..n).map(|j| if i == j { scale } else { 0.0 }).collect()).collect()
}

pub fn add_outer(a: &mut Dense, u: &[f64]) {
    for (i, row) in a.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v += u[i] * u[j];
        }
    }
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(a: &Dense) -> Dense {
    let n = a.len();
    let mut m: Dense = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let piv = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, piv);
        let d = m[c][c];
        assert!(d != 0.0, "singular matrix in oracle");
        for v in m[c].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    let pivot_row = m[c].clone();
                    for (v, p) in m[r].iter_mut().zip(&pivot_row) {
                        *v -= f * p;
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn mat_vec(a: &Dense, x: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

/// `max |a − b| / max |b|`.
pub fn rel_max_diff(a: &[f64], b: &Dense) -> f64 {
    let n = b.len();
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            num = num.max((a[i * n + j] - b[i][j]).abs());
            den = den.max(b[i][j].abs());
        }
    }
    num / den
}

/// Direct recursion with explicit inversion: `R ← R + Σ ψψᵀ`,
/// `W ← W − R⁻¹ g`. Returns the final `(W, R⁻¹)`.
pub struct DirectRls {
    pub r: Dense,
    pub w: Vec<f64>,
}

impl DirectRls {
    pub fn new(w: Vec<f64>, delta: f64) -> Self {
        Self {
            r: identity(w.len(), 1.0 / delta),
            w,
        }
    }

    pub fn step(&mut self, psis: &[&[f64]], gradient: &[f64]) -> Dense {
        for p in psis {
            add_outer(&mut self.r, p);
        }
        let p = invert(&self.r);
        let d = mat_vec(&p, gradient);
        for (w, d) in self.w.iter_mut().zip(d) {
            *w -= d;
        }
        p
    }
}

/// Smallest eigenvalue of a symmetric matrix by Jacobi rotations.
pub fn min_eigenvalue(a: &[f64], n: usize) -> f64 {
    let mut m: Vec<f64> = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| m[i * n + i]).fold(f64::INFINITY, f64::min)
}
