//! Stationary side of the transform: the moving-average kernel
//! `η_n(t) = e^{−t/2} ρ_n(e^t)` as an exponential sum, its Fourier transform
//! `η̂_n(ξ) = (1/2 − iξ)^{−1} Π_j (ξ − ip_j)/(ξ + ip_j)`, the stationary
//! Ornstein-Uhlenbeck covariance it induces, and truncations of the infinite
//! Blaschke product.
//!
//! The Fourier convention is `f̂(ξ) = ∫ e^{iξt} f(t) dt`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{MuntzError, Result};
use crate::exponents::{ExponentSequence, ExtensionRule, SequenceClass, SeriesVerdict};
use crate::goursat_kernel::GoursatKernel;
use crate::numeric::{self, ZERO_EXPONENT};

/// One term `b t^d e^{−qt}` with `d ∈ {0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm {
    pub weight: f64,
    pub rate: f64,
    pub degree: u32,
}

impl ExpTerm {
    pub fn new(weight: f64, rate: f64) -> Self {
        Self {
            weight,
            rate,
            degree: 0,
        }
    }
}

/// `f(t) = Σ b t^d e^{−qt}` on `t > 0`, every rate positive.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExponentialSum {
    terms: Vec<ExpTerm>,
}

impl ExponentialSum {
    pub fn new(terms: Vec<ExpTerm>) -> Result<Self> {
        for (i, t) in terms.iter().enumerate() {
            if !(t.rate > 0.0) || !t.rate.is_finite() {
                return Err(MuntzError::InvalidParameter(format!(
                    "term {i}: rate must be positive and finite, got {}",
                    t.rate
                )));
            }
            if t.degree > 1 {
                return Err(MuntzError::InvalidParameter(format!(
                    "term {i}: polynomial degree {} not supported",
                    t.degree
                )));
            }
            if !t.weight.is_finite() {
                return Err(MuntzError::InvalidParameter(format!(
                    "term {i}: weight is not finite"
                )));
            }
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    pub fn has_degenerate_terms(&self) -> bool {
        self.terms.iter().any(|t| t.degree == 1)
    }

    /// `f(t)` for `t > 0`; zero for `t ≤ 0`.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        numeric::sum2(self.terms.iter().map(|term| {
            let base = term.weight * (-term.rate * t).exp();
            if term.degree == 1 {
                base * t
            } else {
                base
            }
        }))
    }

    /// `∫_0^∞ f = Σ b/q^{d+1}` (`d! = 1` for `d ≤ 1`).
    pub fn integral(&self) -> f64 {
        self.laplace(0.0)
    }

    /// `∫_0^∞ e^{−pt} f(t) dt = Σ b d!/(q + p)^{d+1}`, for `p > −min q`.
    pub fn laplace(&self, p: f64) -> f64 {
        numeric::sum2(self.terms.iter().map(|t| {
            let q = t.rate + p;
            t.weight / q.powi(t.degree as i32 + 1)
        }))
    }

    /// `f̂(ξ) = Σ b d!/(q − iξ)^{d+1}`.
    pub fn fourier(&self, xi: f64) -> Complex64 {
        let (mut re, mut im) = (Vec::new(), Vec::new());
        for t in &self.terms {
            let z = Complex64::new(t.rate, -xi).powi(t.degree as i32 + 1);
            let v = t.weight / z;
            re.push(v.re);
            im.push(v.im);
        }
        Complex64::new(numeric::sum2(re), numeric::sum2(im))
    }

    /// `t ↦ f(t + h)`; a degree-1 term `b t e^{−qt}` becomes
    /// `b e^{−qh} (t + h) e^{−qt}`.
    pub fn shifted(&self, h: f64) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() + 1);
        for t in &self.terms {
            let w = t.weight * (-t.rate * h).exp();
            terms.push(ExpTerm { weight: w, ..*t });
            if t.degree == 1 {
                terms.push(ExpTerm::new(w * h, t.rate));
            }
        }
        Self { terms }
    }

    /// `∫_0^∞ f g`, exactly: `∫ t^k e^{−Qt} dt = k!/Q^{k+1}`.
    pub fn inner(&self, other: &ExponentialSum) -> f64 {
        let mut xs = Vec::with_capacity(self.terms.len() * other.terms.len());
        let mut ys = Vec::with_capacity(xs.capacity());
        for a in &self.terms {
            for b in &other.terms {
                let k = a.degree + b.degree;
                let q = a.rate + b.rate;
                let k_fact = if k == 2 { 2.0 } else { 1.0 };
                xs.push(a.weight * b.weight);
                ys.push(k_fact / q.powi(k as i32 + 1));
            }
        }
        numeric::dot2(&xs, &ys)
    }

    pub fn weight_sum(&self) -> f64 {
        numeric::sum2(self.terms.iter().map(|t| t.weight))
    }
}

/// `η_n(t) = c₀ e^{−t/2} + Σ_j (a_j/λ_j) e^{−p_j t}` with `c₀ = 1 − Σ_j a_j/λ_j`;
/// a zero exponent contributes `−a_j t e^{−t/2}` instead.
pub fn eta_from_kernel(kern: &GoursatKernel) -> ExponentialSum {
    let mut terms = Vec::with_capacity(kern.order() + 2);
    let mut ratios = Vec::with_capacity(kern.order());
    for (&l, &a) in kern.lambdas().iter().zip(kern.coefficients()) {
        if l.abs() < ZERO_EXPONENT {
            terms.push(ExpTerm {
                weight: -a,
                rate: 0.5,
                degree: 1,
            });
        } else {
            let w = a / l;
            ratios.push(w);
            terms.push(ExpTerm::new(w, l + 0.5));
        }
    }
    let c0 = 1.0 - numeric::sum2(ratios);
    terms.insert(0, ExpTerm::new(c0, 0.5));
    ExponentialSum { terms }
}

/// `Π_j (ξ − ip_j)/(ξ + ip_j)` for positive `p_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlaschkeProduct {
    p: Vec<f64>,
}

/// `(ξ − ip)/(ξ + ip) = (ξ² − p² − 2iξp)/(ξ² + p²)`.
fn blaschke_factor(p: f64, xi: f64) -> Complex64 {
    let d = xi.mul_add(xi, p * p);
    Complex64::new((xi - p) * (xi + p) / d, -2.0 * xi * p / d)
}

impl BlaschkeProduct {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if let Some(i) = p.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(MuntzError::InvalidParameter(format!(
                "Blaschke zero p_{} = {} must be positive",
                i + 1,
                p[i]
            )));
        }
        Ok(Self { p })
    }

    pub fn from_sequence(seq: &ExponentSequence, n: usize) -> Result<Self> {
        if n > seq.len() {
            return Err(MuntzError::InvalidParameter(format!(
                "order {n} exceeds sequence length {}",
                seq.len()
            )));
        }
        Self::new(seq.p()[..n].to_vec())
    }

    pub fn from_kernel(kern: &GoursatKernel) -> Result<Self> {
        Self::new(kern.lambdas().iter().map(|l| l + 0.5).collect())
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn eval(&self, xi: f64) -> Complex64 {
        self.p.iter().fold(Complex64::new(1.0, 0.0), |acc, &p| {
            acc * blaschke_factor(p, xi)
        })
    }
}

/// `1/(1/2 − iξ)`, the transform of `e^{−t/2}`.
fn ou_factor(xi: f64) -> Complex64 {
    Complex64::new(1.0, 0.0) / Complex64::new(0.5, -xi)
}

/// `η̂_n(ξ) = (1/2 − iξ)^{−1} Π_n(ξ)`.
pub fn fourier_closed(bp: &BlaschkeProduct, xi: f64) -> Complex64 {
    ou_factor(xi) * bp.eval(xi)
}

/// `η̂(ξ)` from the partial-fraction form of the exponential sum.
pub fn fourier_partial_fractions(es: &ExponentialSum, xi: f64) -> Complex64 {
    es.fourier(xi)
}

/// `∫_0^∞ η(r) η(r + h) dr`, which is `e^{−h/2}` for every Goursat kernel.
pub fn ou_covariance(es: &ExponentialSum, h: f64) -> Result<f64> {
    if !(h >= 0.0) || !h.is_finite() {
        return Err(MuntzError::InvalidParameter(format!(
            "lag must be finite and non-negative, got {h}"
        )));
    }
    Ok(es.inner(&es.shifted(h)))
}

/// `∫_0^∞ e^{−pt} η(t) dt`; vanishes at every rate `p_j` of the kernel.
pub fn orthogonality_zero(es: &ExponentialSum, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(MuntzError::InvalidParameter(format!(
            "rate must be positive, got {p}"
        )));
    }
    Ok(es.laplace(p))
}

/// Partial product of the normalized infinite Blaschke product with a bound
/// on the phase of the omitted factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedProduct {
    /// `(1/2 − iξ)^{−1} Π_{j≤N} (ξ − ip_j)/(ξ + ip_j) · |1 − p_j|/(1 − p_j)`.
    pub value: Complex64,
    /// Bound on `|arg H(ξ)/value|`; every omitted factor has unit modulus, so
    /// `|H(ξ) − value| ≤ |value| · tail_bound`.
    pub tail_bound: f64,
    pub terms: usize,
}

/// `N`-term truncation of `H(ξ) = (1/2 − iξ)^{−1} Π_j (ξ − ip_j)/(ξ + ip_j) · |1 − p_j|/(1 − p_j)`.
///
/// `class` is the classification of the sequence generated by `rule`; a
/// divergent Müntz-Szász series makes the product diverge. The phase of the
/// omitted normalized factor `j` is at most `2 min(p_j, 1/p_j) max(|ξ|, 1/|ξ|)`,
/// so the tail is bounded by `2 max(|ξ|, 1/|ξ|)` times the rule's bound on
/// `Σ_{j>N} p_j`, or `4 max(|ξ|, 1/|ξ|)` times its Müntz-Szász tail bound,
/// whichever is smaller (infinite when the rule supplies neither).
pub fn pi_infinity_truncated(
    rule: &ExtensionRule<'_>,
    class: &SequenceClass,
    xi: f64,
    n: usize,
) -> Result<TruncatedProduct> {
    if !class.infinite {
        return Err(MuntzError::InvalidParameter(
            "infinite product needs the classification of an infinite sequence".into(),
        ));
    }
    if class.ms_verdict == SeriesVerdict::Divergent {
        return Err(MuntzError::DivergentProduct);
    }
    if xi == 0.0 || !xi.is_finite() {
        return Err(MuntzError::DomainError(format!(
            "the infinite product is evaluated only for finite ξ ≠ 0, got {xi}"
        )));
    }
    let mut prod = Complex64::new(1.0, 0.0);
    for j in 1..=n {
        let p = rule.p(j);
        if p == 0.0 && rule.has_explicit_p() {
            // Underflowed term; its factor is 1 to working precision.
            continue;
        }
        if !(p > 0.0) {
            return Err(MuntzError::ExponentOutOfRange {
                index: j,
                value: rule.lambda(j),
            });
        }
        if p == 1.0 {
            return Err(MuntzError::NormalizationPole { index: j });
        }
        let f = blaschke_factor(p, xi);
        prod *= if p > 1.0 { -f } else { f };
    }
    let scale = xi.abs().max(1.0 / xi.abs());
    let from_p = rule.p_tail_bound(n).map(|b| 2.0 * scale * b);
    let from_ms = rule.ms_tail_bound(n).map(|b| 4.0 * scale * b);
    let tail_bound = match (from_p, from_ms) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => f64::INFINITY,
    };
    Ok(TruncatedProduct {
        value: ou_factor(xi) * prod,
        tail_bound,
        terms: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::{classify, Family};

    fn eta(l: &[f64]) -> ExponentialSum {
        let s = ExponentSequence::new(l.to_vec()).unwrap();
        eta_from_kernel(&GoursatKernel::new(&s, l.len()).unwrap())
    }

    #[test]
    fn eta_of_integer_pair() {
        let e = eta(&[1.0, 2.0]);
        let w: Vec<f64> = e.terms().iter().map(|t| t.weight).collect();
        let q: Vec<f64> = e.terms().iter().map(|t| t.rate).collect();
        assert_eq!(q, vec![0.5, 1.5, 2.5]);
        for (got, want) in w.iter().zip([3.0, -12.0, 10.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert!((e.weight_sum() - 1.0).abs() < 1e-12);
        assert!((e.inner(&e) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eta_single_exponent() {
        let e = eta(&[1.0]);
        assert!((e.terms()[0].weight + 2.0).abs() < 1e-14);
        assert!((e.terms()[1].weight - 3.0).abs() < 1e-14);
    }

    #[test]
    fn identity_kernel_is_plain_exponential() {
        let e = eta_from_kernel(&GoursatKernel::identity());
        assert_eq!(e.terms(), &[ExpTerm::new(1.0, 0.5)]);
        let f = fourier_partial_fractions(&e, 0.7);
        assert!((f - Complex64::new(1.0, 0.0) / Complex64::new(0.5, -0.7)).norm() < 1e-15);
        for h in [0.0, 1.0, 3.0] {
            assert!((ou_covariance(&e, h).unwrap() - (-h / 2.0f64).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_exponent_gives_degenerate_term() {
        let e = eta(&[0.0, 1.0]);
        assert!(e.has_degenerate_terms());
        for h in [0.0, 0.1, 1.0, 4f64.ln(), 5.0] {
            assert!((ou_covariance(&e, h).unwrap() - (-h / 2.0).exp()).abs() < 1e-12);
        }
        for p in [0.5, 1.5] {
            assert!(orthogonality_zero(&e, p).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn fourier_examples() {
        let e = eta(&[1.0, 2.0]);
        let bp = BlaschkeProduct::new(vec![1.5, 2.5]).unwrap();
        assert!((fourier_partial_fractions(&e, 0.0) - Complex64::new(2.0, 0.0)).norm() < 1e-12);
        assert!((fourier_closed(&bp, 0.0) - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        for xi in [-3.0, -0.2, 0.9, 7.0] {
            let c = fourier_closed(&bp, xi);
            assert!((c - fourier_partial_fractions(&e, xi)).norm() < 1e-12);
            assert!((c.norm() - 1.0 / (xi * xi + 0.25f64).sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn orthogonality_examples() {
        let e = eta(&[1.0, 2.0]);
        assert!(orthogonality_zero(&e, 1.5).unwrap().abs() < 1e-14);
        assert!(orthogonality_zero(&e, 2.5).unwrap().abs() < 1e-14);
        let off = orthogonality_zero(&e, 1.0).unwrap();
        assert!((off - (2.0 - 4.8 + 20.0 / 7.0)).abs() < 1e-13);
        assert!(orthogonality_zero(&e, 0.0).is_err());
    }

    #[test]
    fn shift_matches_pointwise() {
        let e = eta(&[0.0, 0.7]);
        let s = e.shifted(0.8);
        for t in [0.1, 1.0, 2.5] {
            assert!((s.eval(t) - e.eval(t + 0.8)).abs() < 1e-14);
        }
    }

    #[test]
    fn bad_terms_rejected() {
        assert!(ExponentialSum::new(vec![ExpTerm::new(1.0, 0.0)]).is_err());
        assert!(ExponentialSum::new(vec![ExpTerm {
            weight: 1.0,
            rate: 1.0,
            degree: 2
        }])
        .is_err());
        assert!(BlaschkeProduct::new(vec![0.0]).is_err());
    }

    #[test]
    fn truncated_product_examples() {
        let fam = Family::GeometricP { base: 0.5 };
        let rule = fam.extension_rule();
        let seq = fam.sequence(4).unwrap();
        let class = classify(&seq, Some(&rule), 1000).unwrap();
        let r = pi_infinity_truncated(&rule, &class, 1.0, 30).unwrap();
        assert!((r.value.norm() - 1.0 / 1.25f64.sqrt()).abs() < 1e-14);
        assert!(r.tail_bound < 1e-8);
        let empty = pi_infinity_truncated(&rule, &class, 2.0, 0).unwrap();
        assert!((empty.value - ou_factor(2.0)).norm() < 1e-16);
        let neg = pi_infinity_truncated(&rule, &class, -1.0, 30).unwrap();
        assert!((neg.value - r.value.conj()).norm() < 1e-15);
        assert!(pi_infinity_truncated(&rule, &class, 0.0, 30).is_err());
    }

    #[test]
    fn divergent_and_pole_cases() {
        let fam = Family::Hyperharmonic { r: 1.0 };
        let rule = fam.extension_rule();
        let class = classify(&fam.sequence(2).unwrap(), Some(&rule), 1000).unwrap();
        assert!(matches!(
            pi_infinity_truncated(&rule, &class, 1.0, 10),
            Err(MuntzError::DivergentProduct)
        ));
        let ok = Family::Hyperharmonic { r: 2.0 };
        let ok_class =
            classify(&ok.sequence(2).unwrap(), Some(&ok.extension_rule()), 1000).unwrap();
        let pole = ExtensionRule::new(|j| j as f64 - 0.5);
        assert!(matches!(
            pi_infinity_truncated(&pole, &ok_class, 1.0, 3),
            Err(MuntzError::NormalizationPole { index: 1 })
        ));
    }
}
