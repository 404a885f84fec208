#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use muntz::exponents::ExponentSequence;

/// 64-point Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

thread_local! {
    static GL64: (Vec<f64>, Vec<f64>) = gauss_legendre(64);
}

/// 64-point rule on [a, b].
pub fn gl_panel(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    GL64.with(|(x, w)| {
        let (h, m) = ((b - a) / 2.0, (a + b) / 2.0);
        x.iter()
            .zip(w)
            .map(|(&xi, &wi)| wi * f(m + h * xi))
            .sum::<f64>()
            * h
    })
}

/// `∫_0^1 f` for integrands behaving like `x^c` (`c ≥ c_min > −1`) at 0:
/// substitute `x = u^q` with `q(c_min + 1) = 1`, then sum 64-point panels
/// on the dyadic intervals `[2^{-k-1}, 2^{-k}]`.
pub fn integrate_unit(f: &dyn Fn(f64) -> f64, c_min: f64) -> f64 {
    let q = 1.0 / (c_min + 1.0).min(1.0);
    let g = |u: f64| f(u.powf(q)) * q * u.powf(q - 1.0);
    (0..90)
        .map(|k| gl_panel(&g, 0.5f64.powi(k + 1), 0.5f64.powi(k)))
        .sum()
}

/// `∫_0^s f` with the same singular-endpoint treatment.
pub fn integrate_to(f: &dyn Fn(f64) -> f64, s: f64, c_min: f64) -> f64 {
    s * integrate_unit(&|x| f(s * x), c_min)
}

/// `∫_0^∞ f` for `f` decaying at least like `e^{−rate·t}`, using 2048 nodes
/// on `[0, 40/rate]`.
pub fn integrate_half_line(f: &dyn Fn(f64) -> f64, rate: f64) -> f64 {
    let width = 40.0 / rate / 32.0;
    (0..32)
        .map(|k| gl_panel(f, width * k as f64, width * (k + 1) as f64))
        .sum()
}

/// Orthogonalize `x^{λ_1}, …, x^{λ_n}` on [0, 1] with exact inner products
/// `1/(λ_i + λ_j + 1)` and scale each result to value 1 at x = 1.
/// Returns `coeffs[k][j]` for `j ≤ k`.
pub fn gram_schmidt(lambdas: &[f64]) -> Vec<Vec<f64>> {
    let n = lambdas.len();
    let gram = DMatrix::from_fn(n, n, |i, j| 1.0 / (lambdas[i] + lambdas[j] + 1.0));
    let mut out = Vec::new();
    for k in 0..n {
        // L_k = x^{λ_k} − Σ_{j<k} b_j x^{λ_j} with ⟨L_k, x^{λ_i}⟩ = 0 for i < k.
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        if k > 0 {
            let g = gram.view((0, 0), (k, k)).into_owned();
            let rhs = DVector::from_iterator(k, (0..k).map(|i| gram[(i, k)]));
            let b = g.lu().solve(&rhs).expect("gram block invertible");
            for j in 0..k {
                coeffs[j] = -b[j];
            }
        }
        let at_one: f64 = coeffs.iter().sum();
        out.push(coeffs.iter().map(|c| c / at_one).collect());
    }
    out
}

/// Random sequence with `λ_1 ∈ (−0.4, 1)` and gaps growing geometrically,
/// which keeps the kernel coefficients moderate.
pub fn well_separated(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut l = rng.random_range(-0.4..1.0);
    let mut gap = rng.random_range(0.6..1.2);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(l);
        l += gap;
        gap *= rng.random_range(2.5..3.5);
    }
    out
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn seq(l: &[f64]) -> ExponentSequence {
    ExponentSequence::new(l.to_vec()).unwrap()
}

/// Largest `|a_i − b_i| / max(1, |b_i|)`.
pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}
