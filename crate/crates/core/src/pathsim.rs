//! Brownian ensembles on a uniform grid, the Volterra transform
//! `T(B)_t = ∫_0^t ρ_n(t/s) dB_s`, Müntz stochastic integrals, generalized
//! bridges and Monte Carlo estimates.
//!
//! Path `p` draws its increments from the ChaCha8 stream `p` of the master
//! seed, so results do not depend on how paths are spread over threads.
//! Stochastic integrals evaluate their deterministic integrand at the cell
//! midpoint `s_i = (t_i + t_{i+1})/2` unless a [`NodeRule`] says otherwise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MuntzError, Result};
use crate::exponents::ExponentSequence;
use crate::goursat_kernel::GoursatKernel;
use crate::gram_matrix::inverse_closed;
use crate::numeric::{self, ZERO_EXPONENT};

/// `P` Brownian paths sampled on `t_k = T k / M`, stored as row-major increments.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    horizon: f64,
    steps: usize,
    paths: usize,
    seed: u64,
    increments: Vec<f64>,
}

fn check_grid(horizon: f64, steps: usize) -> Result<()> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(MuntzError::InvalidGrid(format!(
            "horizon must be positive and finite, got {horizon}"
        )));
    }
    if steps < 2 {
        return Err(MuntzError::InvalidGrid(format!(
            "need at least 2 steps, got {steps}"
        )));
    }
    Ok(())
}

impl PathEnsemble {
    pub fn generate(horizon: f64, steps: usize, paths: usize, seed: u64) -> Result<Self> {
        check_grid(horizon, steps)?;
        if paths == 0 {
            return Err(MuntzError::InvalidParameter(
                "path count must be positive".into(),
            ));
        }
        let sd = (horizon / steps as f64).sqrt();
        let mut increments = vec![0.0; steps * paths];
        increments
            .par_chunks_mut(steps)
            .enumerate()
            .for_each(|(p, row)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(p as u64);
                for x in row.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *x = sd * z;
                }
            });
        Ok(Self {
            horizon,
            steps,
            paths,
            seed,
            increments,
        })
    }

    /// Wrap existing increments (`paths × steps`, row-major).
    pub fn from_increments(
        horizon: f64,
        steps: usize,
        increments: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        check_grid(horizon, steps)?;
        if increments.is_empty() || increments.len() % steps != 0 {
            return Err(MuntzError::InvalidGrid(format!(
                "{} increments do not fill rows of {steps} steps",
                increments.len()
            )));
        }
        Ok(Self {
            horizon,
            steps,
            paths: increments.len() / steps,
            seed,
            increments,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `t_k = T k / M`.
    pub fn time(&self, k: usize) -> f64 {
        self.horizon * k as f64 / self.steps as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }

    /// Grid index of `t`, which must be a grid point.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let x = t / self.horizon * self.steps as f64;
        let k = x.round();
        if !(k >= 0.0 && k <= self.steps as f64) || (x - k).abs() > 1e-9 * self.steps as f64 {
            return Err(MuntzError::InvalidGrid(format!(
                "t = {t} is not a point of the grid T k/{} with T = {}",
                self.steps, self.horizon
            )));
        }
        Ok(k as usize)
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn path_increments(&self, p: usize) -> &[f64] {
        &self.increments[p * self.steps..(p + 1) * self.steps]
    }

    /// `B_{t_0}, …, B_{t_M}` of path `p`, with `B_0 = 0`.
    pub fn path(&self, p: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.steps + 1);
        let mut b = 0.0;
        out.push(b);
        for &d in self.path_increments(p) {
            b += d;
            out.push(b);
        }
        out
    }

    /// `B_{t_k}` across all paths.
    pub fn values_at(&self, k: usize) -> Vec<f64> {
        self.increments
            .chunks(self.steps)
            .map(|row| row[..k].iter().fold(0.0, |b, &d| b + d))
            .collect()
    }

    /// `B_t` across all paths, `t` a grid point.
    pub fn values_at_time(&self, t: f64) -> Result<Vec<f64>> {
        Ok(self.values_at(self.index_of(t)?))
    }

    /// The same paths on a grid `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.steps % factor != 0 {
            return Err(MuntzError::InvalidGrid(format!(
                "cannot coarsen {} steps by {factor}",
                self.steps
            )));
        }
        let increments = self
            .increments
            .chunks(factor)
            .map(|c| c.iter().sum())
            .collect();
        Self::from_increments(self.horizon, self.steps / factor, increments, self.seed)
    }

    fn with_rows(&self, steps: usize, horizon: f64, increments: Vec<f64>) -> Self {
        Self {
            horizon,
            steps,
            paths: self.paths,
            seed: self.seed,
            increments,
        }
    }
}

/// Where the deterministic integrand of a stochastic sum is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeRule {
    #[default]
    Midpoint,
    Left,
}

impl NodeRule {
    fn node(self, ens: &PathEnsemble, i: usize) -> f64 {
        match self {
            NodeRule::Midpoint => ens.horizon * (i as f64 + 0.5) / ens.steps as f64,
            NodeRule::Left => ens.time(i),
        }
    }
}

/// Separable form of `ρ_n(t/s) = c₀ + Σ_j w_j t^{−λ_j} s^{λ_j} − Σ_{λ_j=0} a_j (ln t − ln s)`.
struct SeparableRho {
    c0: f64,
    powers: Vec<(f64, f64)>,
    logs: Vec<f64>,
}

impl SeparableRho {
    fn new(kern: &GoursatKernel) -> Self {
        let mut powers = Vec::new();
        let mut logs = Vec::new();
        for (&l, &a) in kern.lambdas().iter().zip(kern.coefficients()) {
            if l.abs() < ZERO_EXPONENT {
                logs.push(a);
            } else {
                powers.push((l, a / l));
            }
        }
        let c0 = 1.0 - numeric::sum2(powers.iter().map(|&(_, w)| w));
        Self { c0, powers, logs }
    }
}

/// `T_n(B)_{t_k} = Σ_{i<k} ρ_n(t_k/s_i) ΔB_i` with midpoint nodes, returned as
/// an ensemble of increments on the same grid.
///
/// `ρ_n(t/s)` splits into products of powers of `t` and `s`, so each path
/// costs `O(n M)`. The identity kernel returns the input unchanged.
pub fn transform(ens: &PathEnsemble, kern: &GoursatKernel) -> PathEnsemble {
    if kern.order() == 0 {
        return ens.clone();
    }
    let m = ens.steps;
    let rho = SeparableRho::new(kern);
    let mids: Vec<f64> = (0..m).map(|i| NodeRule::Midpoint.node(ens, i)).collect();
    let times: Vec<f64> = (0..=m).map(|k| ens.time(k)).collect();
    // s_i^{λ} per cell and t_k^{−λ} per output time.
    let s_pow: Vec<Vec<f64>> = rho
        .powers
        .iter()
        .map(|&(l, _)| mids.iter().map(|&s| s.powf(l)).collect())
        .collect();
    let t_pow: Vec<Vec<f64>> = rho
        .powers
        .iter()
        .map(|&(l, _)| {
            times
                .iter()
                .map(|&t| if t > 0.0 { t.powf(-l) } else { 0.0 })
                .collect()
        })
        .collect();
    let ln_s: Vec<f64> = mids.iter().map(|s| s.ln()).collect();
    let ln_t: Vec<f64> = times
        .iter()
        .map(|&t| if t > 0.0 { t.ln() } else { 0.0 })
        .collect();

    let mut out = vec![0.0; ens.increments.len()];
    out.par_chunks_mut(m)
        .zip(ens.increments.par_chunks(m))
        .for_each(|(dst, src)| {
            let mut b = 0.0;
            let mut acc = vec![0.0; rho.powers.len()];
            let mut log_acc = 0.0;
            let mut prev = 0.0;
            for k in 1..=m {
                let i = k - 1;
                let d = src[i];
                b += d;
                for (j, a) in acc.iter_mut().enumerate() {
                    *a += s_pow[j][i] * d;
                }
                log_acc += ln_s[i] * d;
                let mut v = rho.c0 * b;
                for (j, &(_, w)) in rho.powers.iter().enumerate() {
                    v += w * t_pow[j][k] * acc[j];
                }
                for &a in &rho.logs {
                    v -= a * (ln_t[k] * b - log_acc);
                }
                dst[i] = v - prev;
                prev = v;
            }
        });
    ens.with_rows(m, ens.horizon, out)
}

/// Direct `O(M²)` evaluation of [`transform`] from `ρ_n(k/(i + 1/2))`;
/// for cross-checks on small grids.
pub fn transform_direct(ens: &PathEnsemble, kern: &GoursatKernel) -> Result<PathEnsemble> {
    if kern.order() == 0 {
        return Ok(ens.clone());
    }
    let m = ens.steps;
    let mut table = vec![0.0; m * m];
    for k in 1..=m {
        for i in 0..k {
            table[(k - 1) * m + i] = kern.rho(k as f64 / (i as f64 + 0.5))?;
        }
    }
    let mut out = vec![0.0; ens.increments.len()];
    out.par_chunks_mut(m)
        .zip(ens.increments.par_chunks(m))
        .for_each(|(dst, src)| {
            let mut prev = 0.0;
            for k in 1..=m {
                let row = &table[(k - 1) * m..(k - 1) * m + k];
                let v = numeric::dot2(row, &src[..k]);
                dst[k - 1] = v - prev;
                prev = v;
            }
        });
    Ok(ens.with_rows(m, ens.horizon, out))
}

/// `T_n^{(m)}(B)`: the transform applied `m` times.
pub fn iterate(ens: &PathEnsemble, kern: &GoursatKernel, m: usize) -> PathEnsemble {
    let mut cur = ens.clone();
    for _ in 0..m {
        cur = transform(&cur, kern);
    }
    cur
}

fn integrals_for(
    ens: &PathEnsemble,
    lambdas: &[f64],
    k: usize,
    rule: NodeRule,
) -> Result<Vec<Vec<f64>>> {
    if rule == NodeRule::Left {
        if let Some(j) = lambdas.iter().position(|&l| l < -ZERO_EXPONENT) {
            return Err(MuntzError::NodeSingularity { index: j + 1 });
        }
    }
    let weights: Vec<Vec<f64>> = lambdas
        .iter()
        .map(|&l| {
            (0..k)
                .map(|i| {
                    let s = rule.node(ens, i);
                    if l.abs() < ZERO_EXPONENT {
                        1.0
                    } else {
                        s.powf(l)
                    }
                })
                .collect()
        })
        .collect();
    Ok(ens
        .increments
        .par_chunks(ens.steps)
        .map(|row| {
            weights
                .iter()
                .map(|w| {
                    w.iter()
                        .zip(&row[..k])
                        .fold(0.0, |acc, (&w, &d)| acc + w * d)
                })
                .collect()
        })
        .collect())
}

/// Per-path `∫_0^t s^{λ_j} dB_s ≈ Σ_{i<k} s_i^{λ_j} ΔB_i` for `j = 1..n`,
/// `t = t_k`; `result[path][j-1]`.
pub fn muntz_integrals(
    ens: &PathEnsemble,
    seq: &ExponentSequence,
    n: usize,
    t: f64,
    rule: NodeRule,
) -> Result<Vec<Vec<f64>>> {
    if n > seq.len() {
        return Err(MuntzError::InvalidParameter(format!(
            "order {n} exceeds sequence length {}",
            seq.len()
        )));
    }
    integrals_for(ens, &seq.lambdas()[..n], ens.index_of(t)?, rule)
}

/// Generalized bridge on `[0, T]`: `B^{br}_u = B_u − ψ_T(u)·Z` with
/// `Z_j = ∫_0^T s^{λ_j} dB_s`, `ψ_T(u) = α_T F(u)` and `F_j(u) = u^{λ_j+1}/(λ_j+1)`.
/// Returns the bridge increments on the grid points of `[0, T]`.
pub fn bridge(ens: &PathEnsemble, kern: &GoursatKernel, horizon: f64) -> Result<PathEnsemble> {
    let k_end = ens.index_of(horizon)?;
    if k_end < 2 {
        return Err(MuntzError::InvalidGrid(format!(
            "bridge horizon {horizon} spans fewer than 2 steps"
        )));
    }
    let n = kern.order();
    if n == 0 {
        let inc = ens
            .increments
            .chunks(ens.steps)
            .flat_map(|row| row[..k_end].iter().copied())
            .collect();
        return Ok(ens.with_rows(k_end, horizon, inc));
    }
    let alpha = inverse_closed(kern, horizon)?;
    let lambdas = kern.lambdas();
    // Δψ_l over cell i, from the exact antiderivatives F_m.
    let f_at = |u: f64| -> Vec<f64> {
        lambdas
            .iter()
            .map(|&l| {
                if u == 0.0 {
                    0.0
                } else {
                    u.powf(l + 1.0) / (l + 1.0)
                }
            })
            .collect()
    };
    let psi_at = |u: f64| -> Vec<f64> {
        let f = f_at(u);
        (0..n)
            .map(|l| numeric::dot2(&alpha.row(l).iter().copied().collect::<Vec<_>>(), &f))
            .collect()
    };
    let psi: Vec<Vec<f64>> = (0..=k_end).map(|k| psi_at(ens.time(k))).collect();
    let dpsi: Vec<Vec<f64>> = (0..k_end)
        .map(|i| (0..n).map(|l| psi[i + 1][l] - psi[i][l]).collect())
        .collect();
    let z = integrals_for(ens, lambdas, k_end, NodeRule::Midpoint)?;
    let mut out = vec![0.0; k_end * ens.paths];
    out.par_chunks_mut(k_end)
        .zip(ens.increments.par_chunks(ens.steps))
        .zip(z.par_iter())
        .for_each(|((dst, src), z)| {
            for i in 0..k_end {
                let shift: f64 = dpsi[i].iter().zip(z).map(|(d, z)| d * z).sum();
                dst[i] = src[i] - shift;
            }
        });
    Ok(ens.with_rows(k_end, horizon, out))
}

/// Per-path `∫_0^T s^{λ_j} dB^{br}_s` over the whole bridge ensemble; zero up
/// to discretization error.
pub fn bridge_defects(bridge: &PathEnsemble, kern: &GoursatKernel) -> Result<Vec<Vec<f64>>> {
    integrals_for(bridge, kern.lambdas(), bridge.steps, NodeRule::Midpoint)
}

/// Root mean square of all entries.
pub fn rms(values: &[Vec<f64>]) -> f64 {
    let count: usize = values.iter().map(Vec::len).sum();
    if count == 0 {
        return 0.0;
    }
    let ss: f64 = values.iter().flatten().map(|v| v * v).sum();
    (ss / count as f64).sqrt()
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub paths_used: usize,
}

impl McEstimate {
    /// Mean and `sample-std/√P`, summed in path order.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                value: f64::NAN,
                std_error: f64::NAN,
                paths_used: 0,
            };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std_error = if n < 2 {
            f64::NAN
        } else {
            let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (n - 1) as f64 / n as f64).sqrt()
        };
        Self {
            value: mean,
            std_error,
            paths_used: n,
        }
    }

    /// `(value − target)/std_error`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.value - target) / self.std_error
    }

    pub fn within(&self, target: f64, bands: f64) -> bool {
        (self.value - target).abs() <= bands * self.std_error
    }
}

/// `E[XY]` for centered samples, estimated by the mean of products.
pub fn product_moment(xs: &[f64], ys: &[f64]) -> McEstimate {
    let prods: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| x * y).collect();
    McEstimate::from_samples(&prods)
}

/// `Cov[X_s, X_t]` of a centered ensemble at grid times `s`, `t`.
pub fn covariance(ens: &PathEnsemble, s: f64, t: f64) -> Result<McEstimate> {
    let xs = ens.values_at_time(s)?;
    let ys = ens.values_at_time(t)?;
    Ok(product_moment(&xs, &ys))
}
