//! Müntz-Legendre polynomials `L_k(x) = Σ_{j≤k} c_{j,k} x^{λ_j}` on `[0, 1]`,
//! normalized by `L_k(1) = 1`, and the exact power-rule Gram integrals.

use crate::error::{MuntzError, Result};
use crate::exponents::ExponentSequence;
use crate::numeric::{self, SignedProduct, ZERO_EXPONENT};

/// `∫_0^t x^a x^b dx = t^{a+b+1}/(a+b+1)`, for `a + b + 1 > 0` and `t > 0`.
pub fn power_gram(a: f64, b: f64, t: f64) -> f64 {
    let e = a + b + 1.0;
    debug_assert!(e > 0.0 && t > 0.0);
    numeric::pow(t, e) / e
}

/// Triangular table of Müntz-Legendre coefficients for `L_1..L_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MuntzLegendreBasis {
    lambdas: Vec<f64>,
    /// `coeffs[k-1][j-1] = c_{j,k}` for `j ≤ k`.
    coeffs: Vec<Vec<f64>>,
}

/// `c_{j,k} = Π_{l<k}(λ_l + λ_j + 1) / Π_{l≤k, l≠j}(λ_j − λ_l)` (1-based).
fn legendre_coefficient(lambdas: &[f64], j: usize, k: usize) -> Result<f64> {
    let lj = lambdas[j - 1];
    let mut prod = SignedProduct::one();
    for &ll in &lambdas[..k - 1] {
        prod.mul(ll + lj + 1.0);
    }
    for (l, &ll) in lambdas[..k].iter().enumerate() {
        if l + 1 != j {
            prod.div(lj - ll);
        }
    }
    prod.value()
        .ok_or(MuntzError::CoefficientOverflow { index: j })
}

impl MuntzLegendreBasis {
    /// Build `L_1..L_n` from the first `n` exponents of `seq`.
    pub fn build(seq: &ExponentSequence, n: usize) -> Result<Self> {
        if n > seq.len() {
            return Err(MuntzError::InvalidParameter(format!(
                "basis order {n} exceeds sequence length {}",
                seq.len()
            )));
        }
        let lambdas = seq.lambdas()[..n].to_vec();
        let coeffs = (1..=n)
            .map(|k| {
                (1..=k)
                    .map(|j| legendre_coefficient(&lambdas, j, k))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { lambdas, coeffs })
    }

    pub fn order(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Coefficients `c_{1,k}, …, c_{k,k}` of `L_k` (1-based `k`).
    pub fn coefficients(&self, k: usize) -> &[f64] {
        &self.coeffs[k - 1]
    }

    /// `c_{j,k}` (1-based).
    pub fn c(&self, j: usize, k: usize) -> f64 {
        self.coeffs[k - 1][j - 1]
    }

    /// `L_k(x)`. At `x = 0` the value is the limit, which exists only when no
    /// exponent of `L_k` is negative.
    pub fn eval(&self, k: usize, x: f64) -> Result<f64> {
        if k == 0 || k > self.order() {
            return Err(MuntzError::InvalidParameter(format!(
                "polynomial index {k} outside 1..={}",
                self.order()
            )));
        }
        let lam = &self.lambdas[..k];
        let c = &self.coeffs[k - 1];
        if x > 0.0 {
            let ln_x = x.ln();
            let terms: Vec<f64> = c
                .iter()
                .zip(lam)
                .map(|(&cj, &l)| if l == 0.0 { cj } else { cj * (l * ln_x).exp() })
                .collect();
            return Ok(numeric::sum2(terms));
        }
        if x == 0.0 {
            if let Some(pos) = lam.iter().position(|&l| l < -ZERO_EXPONENT) {
                return Err(MuntzError::DomainError(format!(
                    "L_{k}(0) undefined: λ_{} = {} is negative",
                    pos + 1,
                    lam[pos]
                )));
            }
            return Ok(numeric::sum2(
                c.iter()
                    .zip(lam)
                    .filter(|(_, l)| l.abs() < ZERO_EXPONENT)
                    .map(|(&cj, _)| cj),
            ));
        }
        Err(MuntzError::DomainError(format!(
            "L_{k} evaluated at negative x = {x}"
        )))
    }

    /// Exact `∫_0^1 L_j L_k dx` via the power rule.
    pub fn inner_product(&self, j: usize, k: usize) -> f64 {
        let cj = self.coefficients(j);
        let ck = self.coefficients(k);
        let mut xs = Vec::with_capacity(j * k);
        let mut ys = Vec::with_capacity(j * k);
        for (p, &a) in cj.iter().enumerate() {
            for (q, &b) in ck.iter().enumerate() {
                xs.push(a * b);
                ys.push(power_gram(self.lambdas[p], self.lambdas[q], 1.0));
            }
        }
        numeric::dot2(&xs, &ys)
    }

    /// Largest `|∫ L_j L_k − δ_{jk}/(1+2λ_j)|` over all pairs.
    pub fn orthonormality_residual(&self) -> f64 {
        let n = self.order();
        let mut worst = 0.0f64;
        for k in 1..=n {
            for j in 1..=k {
                let target = if j == k {
                    1.0 / (1.0 + 2.0 * self.lambdas[k - 1])
                } else {
                    0.0
                };
                worst = worst.max((self.inner_product(j, k) - target).abs());
            }
        }
        worst
    }

    /// Coefficient table as CSV rows `k,j,c_jk`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,j,c\n");
        for (k, row) in self.coeffs.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                out.push_str(&format!("{},{},{:.16e}\n", k + 1, j + 1, c));
            }
        }
        out
    }
}
