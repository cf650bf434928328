//! Extreme eigenvalues of a dense symmetric matrix by power iteration.
//!
//! Both extremes are found on positive semidefinite shifts of the matrix,
//! `M + r·I` and `r·I − M`, with `r` the Gershgorin bound on the spectral
//! radius. On a PSD matrix the dominant eigenvalue is also the largest one,
//! so the iteration never oscillates between ±λ.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIterationConfig {
    /// Stop once ‖Av − ρv‖ ≤ tolerance · r for a unit v.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PowerIterationConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremeEigenvalues {
    pub min: f64,
    pub max: f64,
    /// Total matrix-vector products spent.
    pub iterations: usize,
}

/// Smallest and largest eigenvalues of the symmetric `n`×`n` row-major `matrix`.
pub fn extreme_eigenvalues(n: usize, matrix: &[f64], cfg: &PowerIterationConfig) -> Result<ExtremeEigenvalues> {
    assert_eq!(matrix.len(), n * n, "matrix must be n×n");
    let radius = (0..n)
        .map(|i| matrix[i * n..(i + 1) * n].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if radius == 0.0 {
        return Err(Error::DegenerateMatrix);
    }
    let (top, it_top) = dominant_psd(n, |x, y| shifted_mul(n, matrix, radius, 1.0, x, y), radius, cfg);
    let (bottom, it_bottom) = dominant_psd(n, |x, y| shifted_mul(n, matrix, radius, -1.0, x, y), radius, cfg);
    Ok(ExtremeEigenvalues {
        max: top - radius,
        min: radius - bottom,
        iterations: it_top + it_bottom,
    })
}

/// y = shift·x + sign·M·x.
fn shifted_mul(n: usize, m: &[f64], shift: f64, sign: f64, x: &[f64], y: &mut [f64]) {
    for i in 0..n {
        let row = &m[i * n..(i + 1) * n];
        let dot: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
        y[i] = shift * x[i] + sign * dot;
    }
}

fn dominant_psd<F>(n: usize, mul: F, scale: f64, cfg: &PowerIterationConfig) -> (f64, usize)
where
    F: Fn(&[f64], &mut [f64]),
{
    // Generic start vector: uniform vectors are often exact eigenvectors of
    // symmetric test matrices.
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + ((i as u64).wrapping_mul(2_654_435_761) % 1000) as f64 / 1000.0)
        .collect();
    normalize(&mut v);
    let mut w = vec![0.0; n];
    let mut rho = 0.0;
    for it in 1..=cfg.max_iterations {
        mul(&v, &mut w);
        rho = dot(&v, &w);
        let residual = w.iter().zip(&v).map(|(a, b)| (a - rho * b).powi(2)).sum::<f64>().sqrt();
        let norm = normalize(&mut w);
        if norm == 0.0 {
            return (0.0, it);
        }
        std::mem::swap(&mut v, &mut w);
        if residual <= cfg.tolerance * scale {
            return (rho, it);
        }
    }
    (rho, cfg.max_iterations)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}
