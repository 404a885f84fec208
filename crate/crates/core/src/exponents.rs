//! Müntz exponent sequences: validation, the standard families and the
//! Müntz-Szász / semimartingale classification of infinite sequences.

use serde::{Deserialize, Serialize};

use crate::error::{MuntzError, Result};

/// Default minimum pairwise separation between exponents.
pub const DEFAULT_GAP_EPSILON: f64 = 1e-8;

/// Default number of terms `N` for the classification heuristic (sums run to `2N`).
pub const DEFAULT_TAIL_TERMS: usize = 100_000;

/// Doubling-increment ratio at or below which a positive series is treated as convergent.
const CONVERGENT_RATIO: f64 = 0.9;
/// Absolute increment below which a series is treated as converged.
const NEGLIGIBLE_INCREMENT: f64 = 1e-9;
/// Terms decaying with a fitted power at most `1 + DIVERGENT_SLACK` count as `≥ c/j`.
const DIVERGENT_SLACK: f64 = 0.02;
/// Relative growth of `sup λ_j` between `N` and `2N` terms tolerated as bounded.
const BOUNDED_GROWTH: f64 = 1e-3;

/// Closed-form exponent families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Family {
    /// `λ_j = (j^{-r} - 1)/2`, so `p_j = j^{-r}/2`.
    Hyperharmonic { r: f64 },
    /// `λ_j = base^j - 1/2`, so `p_j = base^j`.
    GeometricP { base: f64 },
}

impl Family {
    fn check(&self) -> Result<()> {
        match *self {
            Family::Hyperharmonic { r } if !(r > 0.0 && r.is_finite()) => Err(
                MuntzError::InvalidParameter(format!("hyperharmonic family needs r > 0, got {r}")),
            ),
            Family::GeometricP { base } if !(base > 0.0 && base.is_finite() && base != 1.0) => {
                Err(MuntzError::InvalidParameter(format!(
                    "geometric-p family needs base > 0 and base != 1, got {base}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// The 1-based term `λ_j`.
    pub fn lambda(&self, j: usize) -> f64 {
        match *self {
            Family::Hyperharmonic { r } => ((j as f64).powf(-r) - 1.0) / 2.0,
            Family::GeometricP { base } => base.powi(j as i32) - 0.5,
        }
    }

    /// The 1-based term `p_j = λ_j + 1/2`, computed without the cancellation
    /// of `lambda(j) + 0.5`.
    pub fn p(&self, j: usize) -> f64 {
        match *self {
            Family::Hyperharmonic { r } => (j as f64).powf(-r) / 2.0,
            Family::GeometricP { base } => base.powi(j as i32),
        }
    }

    /// Analytic upper bound on `Σ_{j>n} p_j` (infinite when the series diverges).
    pub fn p_tail_majorant(&self, n: usize) -> f64 {
        match *self {
            Family::Hyperharmonic { r } if r > 1.0 => {
                let head = if n == 0 { 0.5 } else { 0.0 };
                let n = n.max(1) as f64;
                head + n.powf(1.0 - r) / (2.0 * (r - 1.0))
            }
            Family::GeometricP { base } if base < 1.0 => base.powi(n as i32 + 1) / (1.0 - base),
            _ => f64::INFINITY,
        }
    }

    /// The first `n` exponents, validated with distinctness only: close
    /// family members (e.g. `j^{-r}` for large `j`) are legitimate terms.
    pub fn sequence(&self, n: usize) -> Result<ExponentSequence> {
        self.check()?;
        if n == 0 {
            return Err(MuntzError::EmptySequence);
        }
        let lambdas = (1..=n).map(|j| self.lambda(j)).collect();
        let mut seq = ExponentSequence::validate(lambdas, 0.0)?;
        seq.family = Some(*self);
        Ok(seq)
    }

    /// Extension rule continuing the family past any stored prefix.
    pub fn extension_rule(&self) -> ExtensionRule<'static> {
        let fam = *self;
        let rule = ExtensionRule::new(move |j| fam.lambda(j)).with_p(move |j| fam.p(j));
        match fam {
            Family::GeometricP { base } if base > 1.0 => {
                // p/(p²+1) < 1/p = base^{-j}.
                rule.with_ms_tail_bound(move |n| base.powi(-(n as i32)) / (base - 1.0))
            }
            _ if fam.p_tail_majorant(1).is_finite() => {
                // p/(p²+1) ≤ p, so the p-tail majorant also bounds the Müntz-Szász tail.
                rule.with_ms_tail_bound(move |n| fam.p_tail_majorant(n))
                    .with_p_tail_bound(move |n| fam.p_tail_majorant(n))
            }
            _ => rule,
        }
    }
}

/// A validated Müntz exponent sequence `λ_1, …, λ_n`, input order preserved.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentSequence {
    lambdas: Vec<f64>,
    gap_epsilon: f64,
    family: Option<Family>,
}

/// JSON form: `{"lambdas": [...], "family": {...} | null}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub family: Option<Family>,
}

impl ExponentSequence {
    /// Validate `λ_j > -1/2` and pairwise separation `≥ gap_epsilon`.
    /// With `gap_epsilon = 0` only exact duplicates are rejected.
    pub fn validate(lambdas: Vec<f64>, gap_epsilon: f64) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(MuntzError::EmptySequence);
        }
        if !(gap_epsilon >= 0.0) {
            return Err(MuntzError::InvalidParameter(format!(
                "gap_epsilon must be non-negative, got {gap_epsilon}"
            )));
        }
        for (i, &l) in lambdas.iter().enumerate() {
            if !(l > -0.5) || !l.is_finite() {
                return Err(MuntzError::ExponentOutOfRange {
                    index: i + 1,
                    value: l,
                });
            }
        }
        for i in 0..lambdas.len() {
            for j in i + 1..lambdas.len() {
                let gap = (lambdas[i] - lambdas[j]).abs();
                if gap < gap_epsilon || gap == 0.0 {
                    return Err(MuntzError::DuplicateExponent {
                        first: i + 1,
                        second: j + 1,
                        gap,
                        gap_epsilon,
                    });
                }
            }
        }
        Ok(Self {
            lambdas,
            gap_epsilon,
            family: None,
        })
    }

    /// Validate with [`DEFAULT_GAP_EPSILON`].
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        Self::validate(lambdas, DEFAULT_GAP_EPSILON)
    }

    pub fn from_record(record: SequenceRecord) -> Result<Self> {
        match record.family {
            Some(fam) => {
                let seq = fam.sequence(record.lambdas.len())?;
                let matches = seq
                    .lambdas
                    .iter()
                    .zip(&record.lambdas)
                    .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0));
                if !matches {
                    return Err(MuntzError::InvalidParameter(
                        "stored lambdas do not match the declared family".into(),
                    ));
                }
                Ok(seq)
            }
            None => Self::new(record.lambdas),
        }
    }

    pub fn to_record(&self) -> SequenceRecord {
        SequenceRecord {
            lambdas: self.lambdas.clone(),
            family: self.family,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_record())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_record(serde_json::from_str(text)?)
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn gap_epsilon(&self) -> f64 {
        self.gap_epsilon
    }

    pub fn family(&self) -> Option<Family> {
        self.family
    }

    /// `p_j = λ_j + 1/2`.
    pub fn p(&self) -> Vec<f64> {
        match self.family {
            Some(fam) => (1..=self.len()).map(|j| fam.p(j)).collect(),
            None => self.lambdas.iter().map(|l| l + 0.5).collect(),
        }
    }

    /// The first `n` exponents as a new sequence.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(MuntzError::InvalidParameter(format!(
                "prefix length {n} outside 1..={}",
                self.len()
            )));
        }
        Ok(Self {
            lambdas: self.lambdas[..n].to_vec(),
            gap_epsilon: self.gap_epsilon,
            family: self.family,
        })
    }
}

/// `λ_j = (j^{-r} - 1)/2` for `j = 1..n`.
pub fn hyperharmonic_family(r: f64, n: usize) -> Result<ExponentSequence> {
    Family::Hyperharmonic { r }.sequence(n)
}

/// A rule continuing an exponent sequence beyond its stored terms.
pub struct ExtensionRule<'a> {
    lambda: Box<dyn Fn(usize) -> f64 + Send + Sync + 'a>,
    p: Option<Box<dyn Fn(usize) -> f64 + Send + Sync + 'a>>,
    ms_tail_bound: Option<Box<dyn Fn(usize) -> f64 + Send + Sync + 'a>>,
    p_tail_bound: Option<Box<dyn Fn(usize) -> f64 + Send + Sync + 'a>>,
}

impl<'a> ExtensionRule<'a> {
    /// `lambda(j)` returns `λ_j` for 1-based `j`.
    pub fn new(lambda: impl Fn(usize) -> f64 + Send + Sync + 'a) -> Self {
        Self {
            lambda: Box::new(lambda),
            p: None,
            ms_tail_bound: None,
            p_tail_bound: None,
        }
    }

    /// Supply `p_j` directly when `λ_j + 1/2` would cancel.
    pub fn with_p(mut self, p: impl Fn(usize) -> f64 + Send + Sync + 'a) -> Self {
        self.p = Some(Box::new(p));
        self
    }

    /// Analytic bound on `Σ_{j>n} p_j/(p_j²+1)`.
    pub fn with_ms_tail_bound(mut self, bound: impl Fn(usize) -> f64 + Send + Sync + 'a) -> Self {
        self.ms_tail_bound = Some(Box::new(bound));
        self
    }

    /// Analytic bound on `Σ_{j>n} p_j`.
    pub fn with_p_tail_bound(mut self, bound: impl Fn(usize) -> f64 + Send + Sync + 'a) -> Self {
        self.p_tail_bound = Some(Box::new(bound));
        self
    }

    /// Whether `p_j` comes from its own formula rather than `λ_j + 1/2`.
    pub fn has_explicit_p(&self) -> bool {
        self.p.is_some()
    }

    pub fn ms_tail_bound(&self, n: usize) -> Option<f64> {
        self.ms_tail_bound.as_ref().map(|b| b(n))
    }

    pub fn p_tail_bound(&self, n: usize) -> Option<f64> {
        self.p_tail_bound.as_ref().map(|b| b(n))
    }

    pub fn lambda(&self, j: usize) -> f64 {
        (self.lambda)(j)
    }

    pub fn p(&self, j: usize) -> f64 {
        match &self.p {
            Some(p) => p(j),
            None => (self.lambda)(j) + 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderClass {
    FiniteOrderOnly,
    InfiniteOrderNonSemimartingale,
    InfiniteOrderSemimartingale,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum SeriesVerdict {
    Convergent { tail_bound: f64 },
    Divergent,
    Inconclusive,
}

impl SeriesVerdict {
    pub fn is_convergent(&self) -> bool {
        matches!(self, SeriesVerdict::Convergent { .. })
    }
}

/// Partial sums recorded at selected term counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialSumTrace {
    pub terms: Vec<usize>,
    pub sums: Vec<f64>,
}

impl PartialSumTrace {
    pub fn last(&self) -> Option<f64> {
        self.sums.last().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceClass {
    pub class: OrderClass,
    /// Partial sums of `p_j/(p_j²+1)`.
    pub ms_partial_sums: PartialSumTrace,
    /// Partial sums of `p_j`.
    pub p_sum_partial: PartialSumTrace,
    pub ms_verdict: SeriesVerdict,
    pub p_sum_verdict: SeriesVerdict,
    pub bounded: bool,
    pub sup_lambda: f64,
    /// Whether "bounded and Müntz-Szász" agrees with "Σ p_j < ∞";
    /// `None` when the `p`-series test was inconclusive.
    pub criteria_agree: Option<bool>,
    pub terms_used: usize,
    pub infinite: bool,
}

fn ms_term(p: f64) -> f64 {
    if p > 1e150 {
        1.0 / p
    } else {
        p / (p * p + 1.0)
    }
}

/// Classify an exponent sequence.
///
/// Without an extension rule the stored finite sequence is summed in full and
/// reported as [`OrderClass::FiniteOrderOnly`]. With a rule, terms
/// `1..=2·tail_terms` are summed (stored terms first, the rule beyond them)
/// and each series is judged convergent when the increment from `N` to `2N`
/// terms is negligible or shrinks by a factor `≤ 0.9` per doubling and a tail
/// bound is finite, divergent when the terms near `N` decay no faster than
/// `c/j` over the last decade, and inconclusive otherwise.
pub fn classify(
    seq: &ExponentSequence,
    extension: Option<&ExtensionRule<'_>>,
    tail_terms: usize,
) -> Result<SequenceClass> {
    let Some(rule) = extension else {
        return Ok(classify_finite(seq));
    };
    if tail_terms < 20 {
        return Err(MuntzError::InvalidParameter(format!(
            "tail_terms must be at least 20, got {tail_terms}"
        )));
    }
    let n = tail_terms;
    let total = 2 * n;
    let stored_p = seq.p();
    let p_at = |j: usize| -> f64 {
        if j <= seq.len() {
            stored_p[j - 1]
        } else {
            rule.p(j)
        }
    };
    let lambda_at = |j: usize| -> f64 {
        if j <= seq.len() {
            seq.lambdas[j - 1]
        } else {
            rule.lambda(j)
        }
    };

    let checkpoints = checkpoints(n);
    let mut ms = SeriesScan::new(&checkpoints, n);
    let mut ps = SeriesScan::new(&checkpoints, n);
    let mut sup_n = f64::NEG_INFINITY;
    let mut sup_2n = f64::NEG_INFINITY;
    for j in 1..=total {
        let p = p_at(j);
        // A directly supplied p_j may underflow to zero (e.g. base^j).
        let underflow = p == 0.0 && j > seq.len() && rule.has_explicit_p();
        if !(p > 0.0) && !underflow {
            return Err(MuntzError::ExponentOutOfRange {
                index: j,
                value: lambda_at(j),
            });
        }
        ms.push(j, ms_term(p));
        ps.push(j, p);
        let l = lambda_at(j);
        if j <= n {
            sup_n = sup_n.max(l);
        }
        sup_2n = sup_2n.max(l);
    }

    let ms_verdict = ms.verdict(rule.ms_tail_bound(total));
    let p_verdict = ps.verdict(rule.p_tail_bound(total));
    let bounded = sup_2n.is_finite() && sup_2n - sup_n <= BOUNDED_GROWTH * sup_n.abs().max(1.0);

    let class = match ms_verdict {
        SeriesVerdict::Divergent => OrderClass::FiniteOrderOnly,
        SeriesVerdict::Inconclusive => {
            return Err(MuntzError::InconclusiveClassification(format!(
                "Müntz-Szász partial sums {:e} (N = {n}) and {:e} (2N) neither clearly converge nor diverge",
                ms.sum_at(n),
                ms.sum_at(total)
            )))
        }
        SeriesVerdict::Convergent { .. } if bounded => OrderClass::InfiniteOrderSemimartingale,
        SeriesVerdict::Convergent { .. } => OrderClass::InfiniteOrderNonSemimartingale,
    };
    let semimartingale = class == OrderClass::InfiniteOrderSemimartingale;
    let criteria_agree = match p_verdict {
        SeriesVerdict::Convergent { .. } => Some(semimartingale),
        SeriesVerdict::Divergent => Some(!semimartingale),
        SeriesVerdict::Inconclusive => None,
    };
    Ok(SequenceClass {
        class,
        ms_partial_sums: ms.trace,
        p_sum_partial: ps.trace,
        ms_verdict,
        p_sum_verdict: p_verdict,
        bounded,
        sup_lambda: sup_2n,
        criteria_agree,
        terms_used: total,
        infinite: true,
    })
}

fn classify_finite(seq: &ExponentSequence) -> SequenceClass {
    let p = seq.p();
    let terms: Vec<usize> = (1..=p.len()).collect();
    let running = |f: &dyn Fn(f64) -> f64| -> Vec<f64> {
        let mut acc = Neumaier::default();
        p.iter()
            .map(|&x| {
                acc.add(f(x));
                acc.value()
            })
            .collect()
    };
    let sup = seq
        .lambdas
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    SequenceClass {
        class: OrderClass::FiniteOrderOnly,
        ms_partial_sums: PartialSumTrace {
            terms: terms.clone(),
            sums: running(&ms_term),
        },
        p_sum_partial: PartialSumTrace {
            terms,
            sums: running(&|x| x),
        },
        ms_verdict: SeriesVerdict::Convergent { tail_bound: 0.0 },
        p_sum_verdict: SeriesVerdict::Convergent { tail_bound: 0.0 },
        bounded: true,
        sup_lambda: sup,
        criteria_agree: None,
        terms_used: p.len(),
        infinite: false,
    }
}

fn checkpoints(n: usize) -> Vec<usize> {
    let mut c: Vec<usize> = std::iter::successors(Some(1usize), |&k| Some(k * 2))
        .take_while(|&k| k <= 2 * n)
        .collect();
    c.extend([n / 10, n / 2, n, 2 * n]);
    c.retain(|&k| k > 0);
    c.sort_unstable();
    c.dedup();
    c
}

#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        if self.sum.is_finite() {
            self.sum + self.comp
        } else {
            self.sum
        }
    }
}

struct SeriesScan<'c> {
    checkpoints: &'c [usize],
    next: usize,
    acc: Neumaier,
    n: usize,
    term_decade: f64,
    term_n: f64,
    trace: PartialSumTrace,
}

impl<'c> SeriesScan<'c> {
    fn new(checkpoints: &'c [usize], n: usize) -> Self {
        Self {
            checkpoints,
            next: 0,
            acc: Neumaier::default(),
            n,
            term_decade: f64::NAN,
            term_n: f64::NAN,
            trace: PartialSumTrace {
                terms: Vec::new(),
                sums: Vec::new(),
            },
        }
    }

    fn push(&mut self, j: usize, term: f64) {
        self.acc.add(term);
        if j == self.n / 10 {
            self.term_decade = term;
        }
        if j == self.n {
            self.term_n = term;
        }
        if self.checkpoints.get(self.next) == Some(&j) {
            self.trace.terms.push(j);
            self.trace.sums.push(self.acc.value());
            self.next += 1;
        }
    }

    fn sum_at(&self, k: usize) -> f64 {
        self.trace
            .terms
            .iter()
            .position(|&t| t == k)
            .map(|i| self.trace.sums[i])
            .unwrap_or(f64::NAN)
    }

    fn verdict(&self, analytic_tail: Option<f64>) -> SeriesVerdict {
        let n = self.n;
        let (s_half, s_n, s_2n) = (self.sum_at(n / 2), self.sum_at(n), self.sum_at(2 * n));
        if !s_2n.is_finite() {
            return SeriesVerdict::Divergent;
        }
        let inc1 = s_n - s_half;
        let inc2 = s_2n - s_n;
        let ratio = if inc1 > 0.0 { inc2 / inc1 } else { 0.0 };
        if inc2 < NEGLIGIBLE_INCREMENT || ratio <= CONVERGENT_RATIO {
            let derived = if inc2 <= 0.0 || ratio <= 0.0 {
                0.0
            } else {
                inc2 * ratio / (1.0 - ratio)
            };
            let tail_bound = analytic_tail.unwrap_or(derived);
            if tail_bound.is_finite() {
                return SeriesVerdict::Convergent { tail_bound };
            }
            return SeriesVerdict::Inconclusive;
        }
        // Fitted power of the term decay over the last decade before N.
        let decay = (self.term_decade / self.term_n).log10();
        if !(self.term_n > 0.0) || decay <= 1.0 + DIVERGENT_SLACK {
            return SeriesVerdict::Divergent;
        }
        SeriesVerdict::Inconclusive
    }
}
