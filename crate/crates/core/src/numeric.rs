//! Small numerical kernels shared by the coefficient, Gram and residual code:
//! overflow-safe signed products, compensated dot products and a pivoted
//! dense solver with iterative refinement.

use crate::error::{MuntzError, Result};

/// Exponents closer to zero than this take the logarithmic branch.
pub const ZERO_EXPONENT: f64 = 1e-14;

/// Rescaling threshold for [`SignedProduct`]; a power of two so rescaling is exact.
const RESCALE: f64 = 1.157_920_892_373_162e77; // 2^256
const RESCALE_EXP: i64 = 256;

/// Signed product kept as `mantissa * 2^exponent`.
///
/// The magnitude is effectively tracked in log2 form with an exact integer
/// part, so long alternating products neither overflow nor lose the
/// rounding budget an `exp(Σ ln|x|)` evaluation would.
#[derive(Debug, Clone, Copy)]
pub struct SignedProduct {
    mantissa: f64,
    exponent: i64,
}

impl Default for SignedProduct {
    fn default() -> Self {
        Self::one()
    }
}

impl SignedProduct {
    pub fn one() -> Self {
        Self {
            mantissa: 1.0,
            exponent: 0,
        }
    }

    pub fn mul(&mut self, factor: f64) {
        self.mantissa *= factor;
        self.normalize();
    }

    pub fn div(&mut self, factor: f64) {
        self.mantissa /= factor;
        self.normalize();
    }

    fn normalize(&mut self) {
        let m = self.mantissa.abs();
        if m == 0.0 || !m.is_finite() {
            return;
        }
        if m > RESCALE {
            self.mantissa /= RESCALE;
            self.exponent += RESCALE_EXP;
        } else if m < 1.0 / RESCALE {
            self.mantissa *= RESCALE;
            self.exponent -= RESCALE_EXP;
        }
    }

    pub fn sign(&self) -> f64 {
        self.mantissa.signum()
    }

    /// Natural log of the magnitude.
    pub fn ln_abs(&self) -> f64 {
        self.mantissa.abs().ln() + self.exponent as f64 * std::f64::consts::LN_2
    }

    /// Collapse to an `f64`, or `None` when the magnitude is not representable.
    pub fn value(&self) -> Option<f64> {
        if self.mantissa == 0.0 {
            return Some(0.0);
        }
        if !self.mantissa.is_finite() {
            return None;
        }
        // Apply the exponent in steps of at most 2^±512 so intermediates stay finite.
        let mut v = self.mantissa;
        let mut e = self.exponent;
        while e != 0 && v != 0.0 && v.is_finite() {
            let step = e.clamp(-512, 512);
            v *= 2f64.powi(step as i32);
            e -= step;
        }
        v.is_finite().then_some(v)
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Dot product evaluated as if in twice the working precision.
pub fn dot2(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let (mut s, mut c) = (0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (p, pe) = two_prod(x, y);
        let (t, te) = two_sum(s, p);
        s = t;
        c += pe + te;
    }
    if s.is_finite() {
        s + c
    } else {
        s
    }
}

/// Compensated sum.
pub fn sum2(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for x in xs {
        let (t, e) = two_sum(s, x);
        s = t;
        c += e;
    }
    // TwoSum's error term is NaN once s overflows.
    if s.is_finite() {
        s + c
    } else {
        s
    }
}

/// Solve the dense system `a x = b` by Gaussian elimination with partial
/// pivoting followed by a few steps of refinement whose residuals are
/// accumulated with [`dot2`]. `a` is row-major `n × n`.
pub fn solve_refined(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    if a.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(MuntzError::InvalidParameter(
            "system matrix must be square and match the right-hand side".into(),
        ));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let lu = LuFactors::new(a)?;
    let mut x = lu.solve(b);
    for _ in 0..3 {
        let r: Vec<f64> = (0..n)
            .map(|i| {
                let mut xs = a[i].clone();
                xs.push(-1.0);
                let mut ys = x.clone();
                ys.push(b[i]);
                -dot2(&xs, &ys)
            })
            .collect();
        let dx = lu.solve(&r);
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MuntzError::SingularSystem);
    }
    Ok(x)
}

struct LuFactors {
    lu: Vec<Vec<f64>>,
    perm: Vec<usize>,
}

impl LuFactors {
    fn new(a: &[Vec<f64>]) -> Result<Self> {
        let n = a.len();
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let pivot = (k..n)
                .max_by(|&i, &j| lu[i][k].abs().total_cmp(&lu[j][k].abs()))
                .unwrap_or(k);
            if lu[pivot][k].abs() <= scale * f64::EPSILON * 1e-6 || !lu[pivot][k].is_finite() {
                return Err(MuntzError::SingularSystem);
            }
            lu.swap(k, pivot);
            perm.swap(k, pivot);
            for i in k + 1..n {
                let f = lu[i][k] / lu[k][k];
                lu[i][k] = f;
                for j in k + 1..n {
                    lu[i][j] -= f * lu[k][j];
                }
            }
        }
        Ok(Self { lu, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                y[i] -= self.lu[i][j] * y[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                y[i] -= self.lu[i][j] * y[j];
            }
            y[i] /= self.lu[i][i];
        }
        y
    }
}

/// `x^e` for `x > 0`, with `x^0 = 1` exactly.
#[inline]
pub fn pow(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else {
        x.powf(e)
    }
}

/// The fixed 33-point geometric probe grid on (0, 1]: `10^{-3i/32}`, i = 0..32.
pub fn unit_probe_grid() -> Vec<f64> {
    (0..33)
        .map(|i| 10f64.powf(-3.0 * i as f64 / 32.0))
        .collect()
}

/// The fixed 15 `(t, s)` probe pairs with `0 < s ≤ t ≤ 2`.
pub fn kernel_probe_pairs() -> Vec<(f64, f64)> {
    let ratios = [0.1, 0.3, 0.55, 0.8, 1.0];
    [0.5, 1.0, 2.0]
        .iter()
        .flat_map(|&t| ratios.iter().map(move |&r| (t, r * t)))
        .collect()
}
