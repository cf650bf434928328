//! Potts mean-field annealing.
//!
//! Starting at the critical temperature, each temperature step sweeps the
//! sites serially in ascending index order, setting row i of V to the
//! softmax of −H_i/T plus ε·rand[0,1] noise, then renormalizing the row.
//! Sweeps repeat until the mean absolute change per site is at most
//! `inner_tol`; the temperature is then multiplied by τ. Annealing stops
//! once (1/N)Σ V² reaches `saturation`.
//!
//! Random draws come from ChaCha8 seeded with `seed` (via
//! `SeedableRng::seed_from_u64`) and are consumed in a fixed order: N·K
//! draws for the initial state in row-major order, then K draws per site
//! update in cluster order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::eigen::{extreme_eigenvalues, PowerIterationConfig};
use super::interactions::InteractionMatrix;
use crate::error::{Error, Result};

/// Global-repulsion coefficient α used when none is given: the tuned per-K
/// values, 0 elsewhere.
pub fn default_alpha(cluster_count: usize) -> f64 {
    match cluster_count {
        8 => 1e-6,
        10 => 3e-7,
        11 => 3e-8,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealParams {
    pub cluster_count: usize,
    /// Self-coupling γ.
    pub gamma: f64,
    /// Global repulsion α.
    pub alpha: f64,
    /// Noise amplitude ε.
    pub epsilon: f64,
    /// Cooling factor τ.
    pub tau: f64,
    pub inner_tol: f64,
    pub saturation: f64,
    pub seed: u64,
    pub max_outer: usize,
    /// Sweep cap per temperature.
    pub max_inner: usize,
}

impl AnnealParams {
    pub fn new(cluster_count: usize, seed: u64) -> Self {
        Self {
            cluster_count,
            gamma: 0.5,
            alpha: default_alpha(cluster_count),
            epsilon: 0.001,
            tau: 0.9,
            inner_tol: 0.01,
            saturation: 0.99,
            seed,
            max_outer: 1000,
            max_inner: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.cluster_count == 0 {
            return bad("cluster count must be at least 1".into());
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad(format!("tau = {} must lie in (0, 1)", self.tau));
        }
        if !(self.saturation > 0.0 && self.saturation < 1.0) {
            return bad(format!("saturation = {} must lie in (0, 1)", self.saturation));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return bad("iteration caps must be at least 1".into());
        }
        for (name, v) in [
            ("gamma", self.gamma),
            ("alpha", self.alpha),
            ("epsilon", self.epsilon),
            ("inner_tol", self.inner_tol),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} = {v} must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

/// Mean-field variables V_ia and annealing counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinState {
    n: usize,
    k: usize,
    values: Vec<f64>,
    pub temperature: f64,
    pub outer_steps: usize,
    pub inner_steps: usize,
}

impl SpinState {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cluster_count(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.k..(i + 1) * self.k]
    }

    /// (1/N) Σ_ia V_ia².
    pub fn saturation(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / self.n as f64
    }

    /// Per-row argmax; ties go to the lowest cluster index.
    pub fn assignment(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| {
                let row = self.row(i);
                let mut best = 0;
                for a in 1..self.k {
                    if row[a] > row[best] {
                        best = a;
                    }
                }
                best
            })
            .collect()
    }
}

/// Outcome of one annealing run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annealed {
    pub assignment: Vec<usize>,
    pub spins: SpinState,
    pub initial_temperature: f64,
    /// False when `max_outer` was reached before saturation.
    pub converged: bool,
}

impl Annealed {
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NoConvergence {
                outer_steps: self.spins.outer_steps,
            })
        }
    }
}

/// T_c = (1/K) · max(−λ_min, λ_max) of M_ij = J_ij + α − γδ_ij.
pub fn critical_temperature(j: &InteractionMatrix, params: &AnnealParams) -> Result<f64> {
    let n = j.n();
    let mut m = Vec::with_capacity(n * n);
    for i in 0..n {
        for (col, &jij) in j.row(i).iter().enumerate() {
            let diag = if i == col { params.gamma } else { 0.0 };
            m.push(jij + params.alpha - diag);
        }
    }
    let e = extreme_eigenvalues(n, &m, &PowerIterationConfig::default())?;
    Ok((-e.min).max(e.max) / params.cluster_count as f64)
}

/// Runs mean-field annealing on `j` and returns the hard assignment with the
/// final spin state. Non-convergence is reported through
/// [`Annealed::converged`], not as an error.
pub fn anneal(j: &InteractionMatrix, params: &AnnealParams) -> Result<Annealed> {
    params.validate()?;
    let n = j.n();
    let k = params.cluster_count;
    if n == 0 {
        return Err(Error::TooFewReports(0));
    }
    let t0 = critical_temperature(j, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let eps = params.epsilon;

    let mut v = vec![0.0; n * k];
    for i in 0..n {
        let row = &mut v[i * k..(i + 1) * k];
        for x in row.iter_mut() {
            *x = 1.0 / k as f64 + eps * rng.random::<f64>();
        }
        normalize_row(row);
    }

    let mut state = SpinState {
        n,
        k,
        values: v,
        temperature: t0,
        outer_steps: 0,
        inner_steps: 0,
    };
    let mut prev = state.values.clone();
    let mut field = vec![0.0; k];
    let mut column_sums = vec![0.0; k];
    let converged = loop {
        let mut sweeps = 0;
        loop {
            prev.copy_from_slice(&state.values);
            column_sums.iter_mut().for_each(|c| *c = 0.0);
            for i in 0..n {
                for a in 0..k {
                    column_sums[a] += state.values[i * k + a];
                }
            }
            for i in 0..n {
                local_field(j, &state.values, k, i, params, &column_sums, &mut field);
                let t = state.temperature;
                let lowest = field.iter().copied().fold(f64::INFINITY, f64::min);
                let mut norm = 0.0;
                for h in field.iter_mut() {
                    *h = (-(*h - lowest) / t).exp();
                    norm += *h;
                }
                let row = &mut state.values[i * k..(i + 1) * k];
                for a in 0..k {
                    let updated = field[a] / norm + eps * rng.random::<f64>();
                    column_sums[a] -= row[a];
                    row[a] = updated;
                }
                normalize_row(row);
                for a in 0..k {
                    column_sums[a] += row[a];
                }
            }
            state.inner_steps += 1;
            sweeps += 1;
            let change: f64 = state.values.iter().zip(&prev).map(|(a, b)| (a - b).abs()).sum::<f64>() / n as f64;
            if change <= params.inner_tol || sweeps >= params.max_inner {
                break;
            }
        }
        state.temperature *= params.tau;
        state.outer_steps += 1;
        if state.saturation() >= params.saturation {
            break true;
        }
        if state.outer_steps >= params.max_outer {
            break false;
        }
    };

    Ok(Annealed {
        assignment: state.assignment(),
        spins: state,
        initial_temperature: t0,
        converged,
    })
}

/// H_ia = Σ_j (J_ij + α) V_ja − γ V_ia for every cluster a.
fn local_field(
    j: &InteractionMatrix,
    values: &[f64],
    k: usize,
    i: usize,
    params: &AnnealParams,
    column_sums: &[f64],
    out: &mut [f64],
) {
    for a in 0..k {
        out[a] = params.alpha * column_sums[a] - params.gamma * values[i * k + a];
    }
    for (jdx, &jij) in j.row(i).iter().enumerate() {
        if jij != 0.0 {
            let other = &values[jdx * k..(jdx + 1) * k];
            for a in 0..k {
                out[a] += jij * other[a];
            }
        }
    }
}

fn normalize_row(row: &mut [f64]) {
    let sum: f64 = row.iter().sum();
    row.iter_mut().for_each(|x| *x /= sum);
}

/// Potts energy of a hard assignment:
/// ½ Σ_a Σ_ij J_ij S_ia S_ja − (γ/2) Σ_ia S_ia² + (α/2) Σ_a (Σ_i S_ia)².
pub fn potts_energy(j: &InteractionMatrix, assignment: &[usize], cluster_count: usize, gamma: f64, alpha: f64) -> f64 {
    let n = j.n();
    let mut pair = 0.0;
    for i in 0..n {
        for jdx in 0..n {
            if assignment[i] == assignment[jdx] {
                pair += j.get(i, jdx);
            }
        }
    }
    let mut sizes = vec![0.0f64; cluster_count];
    for &a in assignment {
        sizes[a] += 1.0;
    }
    0.5 * pair - 0.5 * gamma * n as f64 + 0.5 * alpha * sizes.iter().map(|s| s * s).sum::<f64>()
}
