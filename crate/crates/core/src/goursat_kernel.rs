//! The order-`n` Goursat-Volterra kernel attached to `λ_1, …, λ_n`:
//!
//! * `K_n(x) = Σ_j a_{j,n} x^{λ_j}` on `(0, 1]`,
//! * `k_n(t, s) = t^{-1} K_n(s/t)` for `s ≤ t` and `0` otherwise,
//! * `ρ_n(x) = 1 − ∫_1^x K_n(1/r) dr/r` for `x ≥ 1`,
//!
//! where the coefficients solve `Σ_j a_{j,n}/(λ_j + λ_k + 1) = 1` for every `k`.
//! Every identity check in this module is a finite sum of powers evaluated
//! in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{MuntzError, Result};
use crate::exponents::ExponentSequence;
use crate::muntz_legendre::{power_gram, MuntzLegendreBasis};
use crate::numeric::{self, SignedProduct, ZERO_EXPONENT};

/// Relative disagreement between the product formula and the linear solve
/// above which a kernel is refused.
pub const CONDITIONING_TOLERANCE: f64 = 1e-6;

/// `a_{j,n} = Π_l(λ_j + λ_l + 1) / Π_{l≠j}(λ_j − λ_l)` for the first `n` exponents.
pub fn coefficients_closed(seq: &ExponentSequence, n: usize) -> Result<Vec<f64>> {
    let lambdas = prefix(seq, n)?;
    closed_from_lambdas(lambdas)
}

fn closed_from_lambdas(lambdas: &[f64]) -> Result<Vec<f64>> {
    (0..lambdas.len())
        .map(|j| {
            let lj = lambdas[j];
            let mut prod = SignedProduct::one();
            for (l, &ll) in lambdas.iter().enumerate() {
                prod.mul(lj + ll + 1.0);
                if l != j {
                    prod.div(lj - ll);
                }
            }
            prod.value()
                .ok_or(MuntzError::CoefficientOverflow { index: j + 1 })
        })
        .collect()
}

/// Solve the Cauchy-type system `Σ_j a_j/(λ_j + λ_k + 1) = 1` by pivoted
/// elimination with refinement.
pub fn coefficients_system(seq: &ExponentSequence, n: usize) -> Result<Vec<f64>> {
    let lambdas = prefix(seq, n)?;
    let matrix: Vec<Vec<f64>> = lambdas
        .iter()
        .map(|&lk| lambdas.iter().map(|&lj| 1.0 / (lj + lk + 1.0)).collect())
        .collect();
    numeric::solve_refined(&matrix, &vec![1.0; lambdas.len()])
}

/// `max_k |Σ_j a_j/(λ_j + λ_k + 1) − 1|`.
pub fn system_residual(lambdas: &[f64], a: &[f64]) -> f64 {
    lambdas
        .iter()
        .map(|&lk| {
            let inv: Vec<f64> = lambdas.iter().map(|&lj| 1.0 / (lj + lk + 1.0)).collect();
            (numeric::dot2(a, &inv) - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

fn prefix(seq: &ExponentSequence, n: usize) -> Result<&[f64]> {
    seq.lambdas().get(..n).ok_or_else(|| {
        MuntzError::InvalidParameter(format!(
            "kernel order {n} exceeds sequence length {}",
            seq.len()
        ))
    })
}

fn relative_disagreement(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// `(1 − x^{−λ})/λ` for `x ≥ 1`, with the `ln x` limit at `λ = 0`.
fn log_power_antiderivative(lambda: f64, ln_x: f64) -> f64 {
    if lambda.abs() < ZERO_EXPONENT {
        ln_x
    } else {
        -(-lambda * ln_x).exp_m1() / lambda
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoursatKernel {
    lambdas: Vec<f64>,
    a: Vec<f64>,
}

/// JSON form: `{"lambdas": [...], "n": ..., "a": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelRecord {
    pub lambdas: Vec<f64>,
    pub n: usize,
    pub a: Vec<f64>,
}

impl GoursatKernel {
    /// Build the kernel from the first `n` exponents. The product formula is
    /// cross-checked against the linear solve and the kernel is refused with
    /// [`MuntzError::IllConditioned`] when they disagree by more than
    /// [`CONDITIONING_TOLERANCE`] (relative, max-norm).
    pub fn new(seq: &ExponentSequence, n: usize) -> Result<Self> {
        let closed = coefficients_closed(seq, n)?;
        let system = coefficients_system(seq, n)?;
        let disagreement = relative_disagreement(&closed, &system);
        if !(disagreement <= CONDITIONING_TOLERANCE) {
            return Err(MuntzError::IllConditioned {
                what: "closed-form vs linear-system coefficients",
                disagreement,
                tolerance: CONDITIONING_TOLERANCE,
            });
        }
        Ok(Self {
            lambdas: seq.lambdas()[..n].to_vec(),
            a: closed,
        })
    }

    /// The order-0 kernel: `K_0 ≡ 0`, `ρ_0 ≡ 1`, so the transform is the identity.
    pub fn identity() -> Self {
        Self {
            lambdas: Vec::new(),
            a: Vec::new(),
        }
    }

    /// Assemble a kernel from raw parts without any checks. Intended for
    /// recurrence output and for deliberately perturbed kernels in tests.
    pub fn from_parts_unchecked(lambdas: Vec<f64>, a: Vec<f64>) -> Self {
        assert_eq!(lambdas.len(), a.len(), "one coefficient per exponent");
        Self { lambdas, a }
    }

    pub fn from_record(record: KernelRecord) -> Result<Self> {
        if record.lambdas.len() != record.n || record.a.len() != record.n {
            return Err(MuntzError::InvalidParameter(format!(
                "kernel record has n = {} but {} exponents and {} coefficients",
                record.n,
                record.lambdas.len(),
                record.a.len()
            )));
        }
        if record.n == 0 {
            return Ok(Self::identity());
        }
        let seq = ExponentSequence::new(record.lambdas)?;
        let kernel = Self::new(&seq, record.n)?;
        let disagreement = relative_disagreement(&kernel.a, &record.a);
        if disagreement > CONDITIONING_TOLERANCE {
            return Err(MuntzError::InvalidParameter(format!(
                "stored coefficients differ from the exponents' kernel by {disagreement:e}"
            )));
        }
        Ok(kernel)
    }

    pub fn to_record(&self) -> KernelRecord {
        KernelRecord {
            lambdas: self.lambdas.clone(),
            n: self.order(),
            a: self.a.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_record())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_record(serde_json::from_str(text)?)
    }

    pub fn order(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Coefficients `a_{1,n}, …, a_{n,n}`.
    pub fn coefficients(&self) -> &[f64] {
        &self.a
    }

    /// Same exponents with `a_{index}` shifted by `delta` (1-based index).
    pub fn perturbed(&self, index: usize, delta: f64) -> Self {
        let mut out = self.clone();
        out.a[index - 1] += delta;
        out
    }

    /// `K_n(x)` for `x ∈ (0, 1]`; `K_n(0)` is the limit when no exponent is negative.
    pub fn profile(&self, x: f64) -> Result<f64> {
        if x > 0.0 {
            let ln_x = x.ln();
            return Ok(numeric::sum2(
                self.lambdas.iter().zip(&self.a).map(|(&l, &a)| {
                    if l == 0.0 {
                        a
                    } else {
                        a * (l * ln_x).exp()
                    }
                }),
            ));
        }
        if x == 0.0 && self.lambdas.iter().all(|&l| l >= -ZERO_EXPONENT) {
            return Ok(numeric::sum2(
                self.lambdas
                    .iter()
                    .zip(&self.a)
                    .filter(|(l, _)| l.abs() < ZERO_EXPONENT)
                    .map(|(_, &a)| a),
            ));
        }
        Err(MuntzError::DomainError(format!("K_n undefined at x = {x}")))
    }

    /// `k_n(t, s)`; zero whenever `s > t`.
    pub fn kernel(&self, t: f64, s: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(MuntzError::DomainError(format!(
                "k_n(t, s) needs t > 0, got {t}"
            )));
        }
        if s > t {
            return Ok(0.0);
        }
        Ok(self.profile(s / t)? / t)
    }

    /// `ρ_n(x) = 1 − Σ_j (a_j/λ_j)(1 − x^{−λ_j})`, with `a_j ln x` for `λ_j = 0`.
    pub fn rho(&self, x: f64) -> Result<f64> {
        if !(x >= 1.0) {
            return Err(MuntzError::DomainError(format!(
                "ρ_n(x) needs x ≥ 1, got {x}"
            )));
        }
        let ln_x = x.ln();
        let integral = numeric::sum2(
            self.lambdas
                .iter()
                .zip(&self.a)
                .map(|(&l, &a)| a * log_power_antiderivative(l, ln_x)),
        );
        Ok(1.0 - integral)
    }

    /// `max_k |Σ_j a_j/(λ_j + λ_k + 1) − 1|`.
    pub fn system_residual(&self) -> f64 {
        system_residual(&self.lambdas, &self.a)
    }

    /// Largest gap in `k_n(t, s) = ∫_0^s k_n(t, u) k_n(s, u) du` over the
    /// fixed `(t, s)` probe pairs, right side expanded termwise.
    pub fn self_reproduction_residual(&self) -> f64 {
        let n = self.order();
        numeric::kernel_probe_pairs()
            .into_iter()
            .map(|(t, s)| {
                let lhs = self.kernel(t, s).unwrap_or(f64::NAN);
                let mut xs = Vec::with_capacity(n * n);
                let mut ys = Vec::with_capacity(n * n);
                for (&lj, &aj) in self.lambdas.iter().zip(&self.a) {
                    for (&ll, &al) in self.lambdas.iter().zip(&self.a) {
                        xs.push(aj * al);
                        // t^{-λ_j-1} s^{-λ_l-1} s^{λ_j+λ_l+1} = (s/t)^{λ_j} / t
                        ys.push(numeric::pow(s / t, lj) / t * power_gram(lj, ll, 1.0));
                    }
                }
                (lhs - numeric::dot2(&xs, &ys)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest gap in `K_n(u) = ∫_0^1 K_n(uv) K_n(v) dv` over the unit probe grid.
    pub fn fixed_point_residual(&self) -> f64 {
        let n = self.order();
        numeric::unit_probe_grid()
            .into_iter()
            .map(|u| {
                let lhs = self.profile(u).unwrap_or(f64::NAN);
                let mut xs = Vec::with_capacity(n * n);
                let mut ys = Vec::with_capacity(n * n);
                for (&lj, &aj) in self.lambdas.iter().zip(&self.a) {
                    for (&ll, &al) in self.lambdas.iter().zip(&self.a) {
                        xs.push(aj * al);
                        ys.push(numeric::pow(u, lj) * power_gram(lj, ll, 1.0));
                    }
                }
                (lhs - numeric::dot2(&xs, &ys)).abs()
            })
            .fold(0.0, f64::max)
    }

    fn check_basis(&self, basis: &MuntzLegendreBasis) -> Result<()> {
        if basis.lambdas() != self.lambdas.as_slice() {
            return Err(MuntzError::InvalidParameter(
                "basis and kernel must share the same exponents in the same order".into(),
            ));
        }
        Ok(())
    }

    /// Largest deviation in `K_n = Σ_j (1 + 2λ_j) L_j`, both pointwise on the
    /// unit probe grid and coefficientwise `a_j = Σ_{k≥j} (1 + 2λ_k) c_{j,k}`.
    pub fn legendre_identity_residual(&self, basis: &MuntzLegendreBasis) -> Result<f64> {
        self.check_basis(basis)?;
        let n = self.order();
        let mut worst = 0.0f64;
        for x in numeric::unit_probe_grid() {
            let k = self.profile(x)?;
            let sum = numeric::sum2(
                (1..=n)
                    .map(|j| Ok((1.0 + 2.0 * self.lambdas[j - 1]) * basis.eval(j, x)?))
                    .collect::<Result<Vec<f64>>>()?,
            );
            worst = worst.max((k - sum).abs());
        }
        for j in 1..=n {
            let sum =
                numeric::sum2((j..=n).map(|k| (1.0 + 2.0 * self.lambdas[k - 1]) * basis.c(j, k)));
            worst = worst.max((self.a[j - 1] - sum).abs());
        }
        Ok(worst)
    }

    /// Largest deviation in `a_{j,n} = (λ_j + λ_n + 1) c_{j,n}`, the coefficient
    /// form of `K_n(x) = x^{−λ_n} d/dx (x^{λ_n+1} L_n(x))`.
    pub fn derivative_identity_residual(&self, basis: &MuntzLegendreBasis) -> Result<f64> {
        self.check_basis(basis)?;
        let n = self.order();
        if n == 0 {
            return Ok(0.0);
        }
        let ln = self.lambdas[n - 1];
        Ok((1..=n)
            .map(|j| (self.a[j - 1] - (self.lambdas[j - 1] + ln + 1.0) * basis.c(j, n)).abs())
            .fold(0.0, f64::max))
    }

    /// Largest `|∫_0^1 u^{λ_k} ρ_n(1/u) du|` over `k ≤ n`, evaluated termwise
    /// with the logarithmic branch for a zero exponent.
    pub fn rho_orthogonality_residual(&self) -> f64 {
        self.lambdas
            .iter()
            .map(|&lk| {
                let base = 1.0 / (lk + 1.0);
                let terms = self.lambdas.iter().zip(&self.a).map(|(&lj, &aj)| {
                    if lj.abs() < ZERO_EXPONENT {
                        // ∫ u^{λ_k} ln u du = −1/(λ_k+1)².
                        aj * base * base
                    } else {
                        (aj / lj) * (base - power_gram(lk, lj, 1.0))
                    }
                });
                (base - numeric::sum2(terms)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// One step of the integro-difference recurrence
/// `K_n(x) = K_{n−1}(x) + (2λ_n + 1) x^{λ_n} (1 − ∫_x^1 u^{−λ_n−1} K_{n−1}(u) du)`,
/// integrated termwise on powers.
pub fn recurrence_step(prev: &GoursatKernel, lambda_new: f64) -> Result<GoursatKernel> {
    let w = 2.0 * lambda_new + 1.0;
    let mut lambdas = prev.lambdas.clone();
    let mut a = Vec::with_capacity(prev.order() + 1);
    let mut integral_at_one = Vec::with_capacity(prev.order());
    for (j, (&lj, &aj)) in prev.lambdas.iter().zip(&prev.a).enumerate() {
        let d = lj - lambda_new;
        if d.abs() < ZERO_EXPONENT {
            return Err(MuntzError::DomainError(format!(
                "new exponent {lambda_new} collides with λ_{}",
                j + 1
            )));
        }
        // x^{λ_n} ∫_x^1 u^{λ_j−λ_n−1} du = (x^{λ_n} − x^{λ_j})/(λ_j − λ_n)
        a.push(aj + w * aj / d);
        integral_at_one.push(aj / d);
    }
    a.push(w * (1.0 - numeric::sum2(integral_at_one)));
    lambdas.push(lambda_new);
    Ok(GoursatKernel { lambdas, a })
}

/// Build `K_n` from `K_0 ≡ 0` by `n` recurrence steps.
pub fn kernel_by_recurrence(seq: &ExponentSequence, n: usize) -> Result<GoursatKernel> {
    prefix(seq, n)?
        .iter()
        .try_fold(GoursatKernel::identity(), |k, &l| recurrence_step(&k, l))
}

/// `∫_0^1 (K_n − K_m)² du` evaluated exactly from the coefficient difference (`m ≤ n`).
pub fn cauchy_l2_distance(seq: &ExponentSequence, m: usize, n: usize) -> Result<f64> {
    if m > n {
        return Err(MuntzError::InvalidParameter(format!(
            "cauchy_l2_distance needs m ≤ n, got m = {m}, n = {n}"
        )));
    }
    let an = coefficients_closed(seq, n)?;
    let am = coefficients_closed(seq, m)?;
    let lambdas = &seq.lambdas()[..n];
    let d: Vec<f64> = (0..n)
        .map(|j| an[j] - am.get(j).copied().unwrap_or(0.0))
        .collect();
    let mut xs = Vec::with_capacity(n * n);
    let mut ys = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            xs.push(d[i] * d[j]);
            ys.push(power_gram(lambdas[i], lambdas[j], 1.0));
        }
    }
    Ok(numeric::dot2(&xs, &ys))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(l: &[f64]) -> ExponentSequence {
        ExponentSequence::new(l.to_vec()).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let a = coefficients_closed(&seq(&[1.0, 2.0]), 2).unwrap();
        assert!((a[0] + 12.0).abs() < 1e-13 && (a[1] - 20.0).abs() < 1e-13);
        let a = coefficients_closed(&seq(&[0.7]), 1).unwrap();
        assert!((a[0] - 2.4).abs() < 1e-15);
        let a = coefficients_closed(&seq(&[0.0, -0.25]), 2).unwrap();
        assert!((a[0] - 3.0).abs() < 1e-14 && (a[1] + 1.5).abs() < 1e-14);
    }

    #[test]
    fn system_examples() {
        let s = seq(&[1.0, 2.0]);
        let a = coefficients_system(&s, 2).unwrap();
        assert!((a[0] + 12.0).abs() < 1e-12 && (a[1] - 20.0).abs() < 1e-12);
        assert!(system_residual(s.lambdas(), &a) < 1e-12);
        assert_eq!(coefficients_system(&seq(&[1.0]), 1).unwrap(), vec![3.0]);
        let a = coefficients_system(&seq(&[0.0, -0.25]), 2).unwrap();
        assert!((a[0] - 3.0).abs() < 1e-12 && (a[1] + 1.5).abs() < 1e-12);
    }

    #[test]
    fn evaluators() {
        let k = GoursatKernel::new(&seq(&[1.0, 2.0]), 2).unwrap();
        for x in [1.0, 1.5, 2.0, 7.0] {
            let expected = 3.0 - 12.0 / x + 10.0 / (x * x);
            assert!((k.rho(x).unwrap() - expected).abs() < 1e-13);
        }
        assert_eq!(k.rho(1.0).unwrap(), 1.0);
        assert!((k.kernel(2.0, 1.0).unwrap() + 0.5).abs() < 1e-14);
        assert_eq!(k.kernel(1.0, 2.0).unwrap(), 0.0);
        assert!(k.kernel(0.0, 0.0).is_err());
        assert!(k.rho(0.5).is_err());
    }

    #[test]
    fn rho_zero_exponent_branch() {
        let k = GoursatKernel::new(&seq(&[0.0, -0.25]), 2).unwrap();
        let x: f64 = 3.0;
        let expected = 1.0 - 3.0 * x.ln() - (-1.5 / -0.25) * (1.0 - x.powf(0.25));
        assert!((k.rho(x).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn residuals_small_on_examples() {
        for l in [&[1.0, 2.0][..], &[0.3][..], &[0.0, -0.25][..]] {
            let s = seq(l);
            let k = GoursatKernel::new(&s, l.len()).unwrap();
            let b = MuntzLegendreBasis::build(&s, l.len()).unwrap();
            assert!(k.self_reproduction_residual() < 1e-12, "{l:?}");
            assert!(k.fixed_point_residual() < 1e-12);
            assert!(k.legendre_identity_residual(&b).unwrap() < 1e-12);
            assert!(k.derivative_identity_residual(&b).unwrap() < 1e-12);
            assert!(k.rho_orthogonality_residual() < 1e-12);
        }
    }

    #[test]
    fn one_term_fixed_point() {
        let k = GoursatKernel::new(&seq(&[1.0]), 1).unwrap();
        assert!(k.self_reproduction_residual() < 1e-14);
        // ∫_0^1 3uv·3v dv = 3u.
        assert!((k.profile(0.4).unwrap() - 1.2).abs() < 1e-15);
        assert_eq!(k.profile(0.0).unwrap(), 0.0);
    }

    #[test]
    fn recurrence_examples() {
        let k1 = recurrence_step(&GoursatKernel::identity(), 0.8).unwrap();
        assert_eq!(k1.coefficients(), &[2.6]);
        let k2 = recurrence_step(&GoursatKernel::new(&seq(&[1.0]), 1).unwrap(), 2.0).unwrap();
        assert!((k2.coefficients()[0] + 12.0).abs() < 1e-13);
        assert!((k2.coefficients()[1] - 20.0).abs() < 1e-13);
        let k2 = kernel_by_recurrence(&seq(&[0.0, -0.25]), 2).unwrap();
        assert!((k2.coefficients()[0] - 3.0).abs() < 1e-13);
        assert!((k2.coefficients()[1] + 1.5).abs() < 1e-13);
        assert!(recurrence_step(&k2, 0.0).is_err());
    }

    #[test]
    fn cauchy_distance_examples() {
        let s = seq(&[1.0, 2.0]);
        assert!((cauchy_l2_distance(&s, 1, 2).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(cauchy_l2_distance(&s, 2, 2).unwrap(), 0.0);
        assert!(cauchy_l2_distance(&s, 2, 1).is_err());
    }

    #[test]
    fn perturbation_breaks_self_reproduction() {
        let k = GoursatKernel::new(&seq(&[1.0, 2.0]), 2).unwrap();
        assert!(k.perturbed(1, 1e-3).self_reproduction_residual() > 1e-5);
    }

    #[test]
    fn ill_conditioned_kernels_are_refused() {
        // 14 exponents packed into [0, 1.3]: the Cauchy system loses all digits.
        let l: Vec<f64> = (0..14).map(|i| i as f64 * 0.1).collect();
        let r = GoursatKernel::new(&seq(&l), 14);
        assert!(
            matches!(
                r,
                Err(MuntzError::IllConditioned { .. }) | Err(MuntzError::SingularSystem)
            ),
            "{r:?}"
        );
    }

    #[test]
    fn json_schema() {
        let k = GoursatKernel::new(&seq(&[1.0, 2.0]), 2).unwrap();
        let v: serde_json::Value = serde_json::from_str(&k.to_json().unwrap()).unwrap();
        assert_eq!(v["n"], 2);
        assert_eq!(v["lambdas"], serde_json::json!([1.0, 2.0]));
        let back = GoursatKernel::from_json(&k.to_json().unwrap()).unwrap();
        assert_eq!(back, k);
        assert!(GoursatKernel::from_json(r#"{"lambdas":[1,2],"n":2,"a":[-12,21]}"#).is_err());
        assert!(GoursatKernel::from_json(r#"{"lambdas":[1],"n":2,"a":[3]}"#).is_err());
    }
}
