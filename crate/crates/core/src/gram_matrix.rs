//! The covariance matrix `m_t` of `(∫_0^t s^{λ_j} dB_s)_j`, its closed-form
//! inverse `α_t`, the Goursat vector `φ(t) = α_t f(t)` and the reproducing
//! kernel `g_{n,t}` of the Müntz space on `(0, t]`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{MuntzError, Result};
use crate::exponents::ExponentSequence;
use crate::goursat_kernel::GoursatKernel;
use crate::muntz_legendre::{power_gram, MuntzLegendreBasis};
use crate::numeric;

/// Inverse check threshold above which [`inverse_closed`] refuses the result.
pub const INVERSE_TOLERANCE: f64 = 1e-6;

fn check_horizon(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(MuntzError::InvalidParameter(format!(
            "time horizon must be positive, got {t}"
        )))
    }
}

fn gram_from_lambdas(lambdas: &[f64], t: f64) -> DMatrix<f64> {
    let n = lambdas.len();
    DMatrix::from_fn(n, n, |l, j| power_gram(lambdas[l], lambdas[j], t))
}

/// `(m_t)_{lj} = t^{λ_l+λ_j+1}/(λ_l+λ_j+1)` for the first `n` exponents.
pub fn covariance_matrix(seq: &ExponentSequence, n: usize, t: f64) -> Result<DMatrix<f64>> {
    check_horizon(t)?;
    let lambdas = seq.lambdas().get(..n).ok_or_else(|| {
        MuntzError::InvalidParameter(format!("order {n} exceeds sequence length {}", seq.len()))
    })?;
    Ok(gram_from_lambdas(lambdas, t))
}

fn alpha_from_kernel(kern: &GoursatKernel, t: f64) -> DMatrix<f64> {
    let l = kern.lambdas();
    let a = kern.coefficients();
    let n = kern.order();
    DMatrix::from_fn(n, n, |i, j| {
        let e = l[i] + l[j] + 1.0;
        a[i] * a[j] / e * numeric::pow(t, -e)
    })
}

/// Product `m·α` with compensated inner products.
pub fn compensated_product(m: &DMatrix<f64>, alpha: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), alpha.ncols(), |i, j| {
        let row: Vec<f64> = m.row(i).iter().copied().collect();
        let col: Vec<f64> = alpha.column(j).iter().copied().collect();
        numeric::dot2(&row, &col)
    })
}

/// `‖m α − I‖_F / ‖I‖_F`.
pub fn inverse_residual(m: &DMatrix<f64>, alpha: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let prod = compensated_product(m, alpha);
    (prod - DMatrix::<f64>::identity(n, n)).norm() / (n as f64).sqrt()
}

/// `(α_t)_{lj} = a_l a_j (λ_l+λ_j+1)^{-1} t^{−λ_l−λ_j−1}`.
///
/// `m_t = D m_1 D` and `α_t = D^{-1} α_1 D^{-1}` with `D = diag(t^{λ_l+1/2})`,
/// so `m_t α_t = I` exactly when `m_1 α_1 = I`; the check is made at `t = 1`,
/// where rounding is not amplified by `t^{λ_l−λ_j}`.
pub fn inverse_closed(kern: &GoursatKernel, t: f64) -> Result<DMatrix<f64>> {
    check_horizon(t)?;
    let alpha = alpha_from_kernel(kern, t);
    let residual = inverse_residual(
        &gram_from_lambdas(kern.lambdas(), 1.0),
        &alpha_from_kernel(kern, 1.0),
    );
    if !(residual <= INVERSE_TOLERANCE) {
        return Err(MuntzError::IllConditioned {
            what: "closed-form Gram inverse",
            disagreement: residual,
            tolerance: INVERSE_TOLERANCE,
        });
    }
    Ok(alpha)
}

/// The covariance matrix together with its closed-form inverse at horizon `t`.
#[derive(Debug, Clone)]
pub struct GramPair {
    pub t: f64,
    pub m: DMatrix<f64>,
    pub alpha: DMatrix<f64>,
    /// `‖m α − I‖_F / √n`.
    pub residual: f64,
}

impl GramPair {
    pub fn new(kern: &GoursatKernel, t: f64) -> Result<Self> {
        let alpha = inverse_closed(kern, t)?;
        let m = gram_from_lambdas(kern.lambdas(), t);
        let residual = inverse_residual(&m, &alpha);
        Ok(Self {
            t,
            m,
            alpha,
            residual,
        })
    }

    /// Ratio of extreme eigenvalues of `m`.
    pub fn condition_number(&self) -> f64 {
        condition_number(&self.m)
    }
}

/// Ratio of the extreme eigenvalues of a symmetric positive matrix.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let eig = SymmetricEigen::new(m.clone());
    let max = eig
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// The Goursat vector `φ(t)` by its closed form and by the product `α_t f(t)`.
#[derive(Debug, Clone)]
pub struct GoursatPhi {
    /// `φ_l(t) = a_l t^{−λ_l−1}`.
    pub closed: Vec<f64>,
    /// `α_t · (t^{λ_1}, …, t^{λ_n})`.
    pub product: Vec<f64>,
    pub max_difference: f64,
}

pub fn goursat_phi(kern: &GoursatKernel, t: f64) -> Result<GoursatPhi> {
    check_horizon(t)?;
    let closed: Vec<f64> = kern
        .lambdas()
        .iter()
        .zip(kern.coefficients())
        .map(|(&l, &a)| a * numeric::pow(t, -l - 1.0))
        .collect();
    let alpha = alpha_from_kernel(kern, t);
    let f = DVector::from_iterator(
        kern.order(),
        kern.lambdas().iter().map(|&l| numeric::pow(t, l)),
    );
    let product: Vec<f64> = (0..kern.order())
        .map(|i| {
            let row: Vec<f64> = alpha.row(i).iter().copied().collect();
            numeric::dot2(&row, f.as_slice())
        })
        .collect();
    let max_difference = closed
        .iter()
        .zip(&product)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(GoursatPhi {
        closed,
        product,
        max_difference,
    })
}

/// `g_{n,t}(u, v) = t^{-1} Σ_l (1 + 2λ_l) L_l(u/t) L_l(v/t)` for `0 < u, v ≤ t`.
pub fn reproducing_kernel_eval(basis: &MuntzLegendreBasis, t: f64, u: f64, v: f64) -> Result<f64> {
    check_horizon(t)?;
    if !(u > 0.0 && u <= t && v > 0.0 && v <= t) {
        return Err(MuntzError::DomainError(format!(
            "g_(n,t)(u, v) needs 0 < u, v ≤ t = {t}, got u = {u}, v = {v}"
        )));
    }
    let terms = (1..=basis.order())
        .map(|l| {
            let w = 1.0 + 2.0 * basis.lambdas()[l - 1];
            Ok(w * basis.eval(l, u / t)? * basis.eval(l, v / t)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(numeric::sum2(terms) / t)
}

/// Largest deviation over the probe grid `u = t·x` of
/// `∫_0^t g_{n,t}(u, v) v^{λ_m} dv = u^{λ_m}` (every `m ≤ n`, both sides
/// divided by `t^{λ_m}`) and of the boundary identity `k_n(t, s) = g_{n,t}(t, s)`.
pub fn reproduction_residual(basis: &MuntzLegendreBasis, t: f64) -> Result<f64> {
    check_horizon(t)?;
    let n = basis.order();
    if n == 0 {
        return Ok(0.0);
    }
    let lam = basis.lambdas();
    // moments[l][m] = t^{-λ_m-1} ∫_0^t L_l(v/t) v^{λ_m} dv = ∫_0^1 L_l(y) y^{λ_m} dy
    let moments: Vec<Vec<f64>> = (1..=n)
        .map(|l| {
            let c = basis.coefficients(l);
            (0..n)
                .map(|m| {
                    let w: Vec<f64> = (0..l).map(|p| power_gram(lam[p], lam[m], 1.0)).collect();
                    numeric::dot2(c, &w)
                })
                .collect()
        })
        .collect();
    let kern = GoursatKernel::new(&ExponentSequence::new(lam.to_vec())?, n)?;
    let mut worst = 0.0f64;
    for x in numeric::unit_probe_grid() {
        let u = t * x;
        let weights = (1..=n)
            .map(|l| Ok((1.0 + 2.0 * lam[l - 1]) * basis.eval(l, x)?))
            .collect::<Result<Vec<f64>>>()?;
        for m in 0..n {
            let col: Vec<f64> = moments.iter().map(|row| row[m]).collect();
            let lhs = numeric::dot2(&weights, &col);
            worst = worst.max((lhs - numeric::pow(x, lam[m])).abs());
        }
        let boundary = reproducing_kernel_eval(basis, t, t, u)?;
        worst = worst.max((kern.kernel(t, u)? - boundary).abs());
    }
    Ok(worst)
}

/// Matrix as CSV rows `row,col,value` (1-based).
pub fn matrix_to_csv(name: &str, m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push_str(&format!("{name},{},{},{:.16e}\n", i + 1, j + 1, m[(i, j)]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(l: &[f64]) -> ExponentSequence {
        ExponentSequence::new(l.to_vec()).unwrap()
    }

    #[test]
    fn covariance_examples() {
        let m = covariance_matrix(&seq(&[1.0, 2.0]), 2, 1.0).unwrap();
        assert!((m[(0, 0)] - 1.0 / 3.0).abs() < 1e-16);
        assert_eq!(m[(0, 1)], 0.25);
        assert_eq!(m[(1, 0)], 0.25);
        assert!((m[(1, 1)] - 0.2).abs() < 1e-16);
        assert_eq!(
            covariance_matrix(&seq(&[0.0]), 1, 2.0).unwrap()[(0, 0)],
            2.0
        );
        let m2 = covariance_matrix(&seq(&[1.0, 2.0]), 2, 2.0).unwrap();
        assert!((m2[(0, 0)] - 8.0 / 3.0).abs() < 1e-15);
        assert!(covariance_matrix(&seq(&[1.0]), 1, 0.0).is_err());
    }

    #[test]
    fn inverse_examples() {
        let k = GoursatKernel::new(&seq(&[1.0, 2.0]), 2).unwrap();
        let alpha = inverse_closed(&k, 1.0).unwrap();
        let expected = [[48.0, -60.0], [-60.0, 80.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((alpha[(i, j)] - expected[i][j]).abs() < 1e-10);
            }
        }
        let k0 = GoursatKernel::new(&seq(&[0.0]), 1).unwrap();
        assert!((inverse_closed(&k0, 1.0).unwrap()[(0, 0)] - 1.0).abs() < 1e-15);
        let a2 = inverse_closed(&k, 2.0).unwrap();
        for (i, li) in [1.0f64, 2.0].iter().enumerate() {
            for (j, lj) in [1.0f64, 2.0].iter().enumerate() {
                let scaled = alpha[(i, j)] * 2f64.powf(-li - lj - 1.0);
                assert!((a2[(i, j)] - scaled).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn perturbed_inverse_is_refused() {
        let k = GoursatKernel::new(&seq(&[1.0, 2.0]), 2)
            .unwrap()
            .perturbed(1, 1e-3);
        assert!(matches!(
            inverse_closed(&k, 1.0),
            Err(MuntzError::IllConditioned { .. })
        ));
    }

    #[test]
    fn phi_examples() {
        let k = GoursatKernel::new(&seq(&[1.0, 2.0]), 2).unwrap();
        let phi = goursat_phi(&k, 1.0).unwrap();
        assert!((phi.closed[0] + 12.0).abs() < 1e-13 && (phi.closed[1] - 20.0).abs() < 1e-13);
        assert!(phi.max_difference < 1e-12);
        let phi2 = goursat_phi(&k, 2.0).unwrap();
        assert!((phi2.closed[0] + 3.0).abs() < 1e-14);
        assert!(phi2.max_difference < 1e-12);
    }

    #[test]
    fn reproducing_kernel_examples() {
        let b0 = MuntzLegendreBasis::build(&seq(&[0.0]), 1).unwrap();
        assert_eq!(reproducing_kernel_eval(&b0, 1.0, 0.3, 0.9).unwrap(), 1.0);
        let b = MuntzLegendreBasis::build(&seq(&[1.0, 2.0]), 2).unwrap();
        assert!((reproducing_kernel_eval(&b, 1.0, 1.0, 1.0).unwrap() - 8.0).abs() < 1e-13);
        assert!(reproduction_residual(&b, 1.0).unwrap() < 1e-12);
        assert!(reproduction_residual(&b, 2.5).unwrap() < 1e-12);
        assert!(reproducing_kernel_eval(&b, 1.0, 1.5, 0.5).is_err());
    }

    #[test]
    fn condition_number_of_hilbert_segment() {
        let m = covariance_matrix(&seq(&[1.0, 2.0]), 2, 1.0).unwrap();
        let tr: f64 = 1.0 / 3.0 + 0.2;
        let det = 1.0 / 15.0 - 1.0 / 16.0;
        let disc = (tr * tr - 4.0 * det).sqrt();
        let expected = (tr + disc) / (tr - disc);
        assert!((condition_number(&m) - expected).abs() / expected < 1e-10);
    }
}
