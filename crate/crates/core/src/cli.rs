//! Command-line front end. Every subcommand resolves its flags (and an
//! optional JSON `--config` file) into a [`RunConfig`], writes that config and
//! the crate version at the top of its output, and maps failures to exit codes:
//! 0 pass, 1 identity or Monte Carlo failure, 2 invalid input, 3 numerical
//! conditioning.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{MuntzError, Result};
use crate::exponents::{
    classify, ExponentSequence, Family, DEFAULT_GAP_EPSILON, DEFAULT_TAIL_TERMS,
};
use crate::goursat_kernel::{cauchy_l2_distance, kernel_by_recurrence, GoursatKernel};
use crate::gram_matrix::{
    condition_number, covariance_matrix, inverse_closed, inverse_residual, matrix_to_csv,
    reproduction_residual,
};
use crate::muntz_legendre::MuntzLegendreBasis;
use crate::pathsim::{self, McEstimate, NodeRule, PathEnsemble};
use crate::spectral::{self, BlaschkeProduct};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_SEED: u64 = 42;
/// Below this many paths `simulate` reports estimates without a verdict.
pub const MIN_VERDICT_PATHS: usize = 64;

#[derive(Debug, Parser)]
#[command(
    name = "muntz",
    version,
    about = "Müntz-Legendre polynomials, Goursat-Volterra kernels and Brownian transforms"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Müntz-Legendre and kernel coefficients with the linear-system residual.
    Coeffs(CoeffsArgs),
    /// Residuals of every analytic identity of the kernel.
    Verify(VerifyArgs),
    /// Müntz-Szász / semimartingale classification of a sequence.
    Classify(ClassifyArgs),
    /// Monte Carlo checks of the Brownian transform.
    Simulate(SimulateArgs),
    /// Fourier transform of the moving-average kernel.
    Spectral(SpectralArgs),
    /// Covariance matrix of the Müntz integrals and its closed-form inverse.
    Gram(GramArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    Hyperharmonic,
    GeometricP,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Comma-separated exponents λ_1,…,λ_n.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lambdas: Option<Vec<f64>>,
    /// Generate the exponents from a family instead.
    #[arg(long, value_enum)]
    pub family: Option<FamilyName>,
    /// Hyperharmonic parameter: λ_j = (j^{-r} − 1)/2.
    #[arg(long)]
    pub r: Option<f64>,
    /// Geometric parameter: p_j = base^j.
    #[arg(long)]
    pub base: Option<f64>,
    /// Order (number of exponents used).
    #[arg(long)]
    pub n: Option<usize>,
    /// Minimum spacing between exponents.
    #[arg(long)]
    pub gap_epsilon: Option<f64>,
    /// JSON file with any of the flags (flags take precedence).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum)]
    pub out: Option<Format>,
    /// Write to this file instead of stdout.
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CoeffsArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Horizon used for the Gram and reproducing-kernel identities.
    #[arg(long)]
    pub t: Option<f64>,
    /// Base tolerance (two looser checks use 100×).
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Test hook: add this to one kernel coefficient before checking.
    #[arg(long, allow_hyphen_values = true)]
    pub perturb: Option<f64>,
    /// 1-based coefficient index for --perturb.
    #[arg(long)]
    pub perturb_index: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of terms N; partial sums run to 2N.
    #[arg(long)]
    pub tail_terms: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Time horizon.
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    /// Grid steps M.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Path count P.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Master seed (falls back to MUNTZ_SEED, then 42).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of times the transform is applied.
    #[arg(long)]
    pub iterate: Option<usize>,
    /// Also build and check the generalized bridge on [0, T].
    #[arg(long)]
    pub bridge: bool,
    /// Acceptance band in standard errors.
    #[arg(long)]
    pub band: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SpectralArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, allow_hyphen_values = true)]
    pub xi_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub xi_max: Option<f64>,
    /// Number of equally spaced frequencies.
    #[arg(long)]
    pub xi_count: Option<usize>,
    /// Evaluate the normalized infinite product truncated to N factors (families only).
    #[arg(long)]
    pub truncate: Option<usize>,
    /// Terms used by the convergence check preceding --truncate.
    #[arg(long)]
    pub tail_terms: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GramArgs {
    #[command(flatten)]
    pub common: Common,
    /// Horizon t of m_t and α_t.
    #[arg(long)]
    pub t: Option<f64>,
}

/// Contents of a `--config` file; every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    /// Ignored, so a resolved config header can be fed back as a config file.
    pub command: Option<String>,
    pub lambdas: Option<Vec<f64>>,
    pub family: Option<Family>,
    pub n: Option<usize>,
    pub gap_epsilon: Option<f64>,
    pub out: Option<Format>,
    pub t: Option<f64>,
    pub tolerance: Option<f64>,
    pub perturb: Option<f64>,
    pub perturb_index: Option<usize>,
    pub tail_terms: Option<usize>,
    #[serde(alias = "T")]
    pub horizon: Option<f64>,
    pub grid: Option<usize>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub iterate: Option<usize>,
    pub bridge: Option<bool>,
    pub band: Option<f64>,
    pub xi_min: Option<f64>,
    pub xi_max: Option<f64>,
    pub xi_count: Option<usize>,
    pub truncate: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Fully resolved run parameters; unused keys are omitted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub lambdas: Option<Vec<f64>>,
    pub family: Option<Family>,
    pub n: usize,
    pub gap_epsilon: f64,
    pub out: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturb: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturb_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_terms: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterate: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bridge: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncate: Option<usize>,
}

impl RunConfig {
    fn base(
        command: &'static str,
        common: &Common,
        file: &ConfigFile,
        default_lambdas: Option<Vec<f64>>,
    ) -> Result<Self> {
        let family = match common.family {
            Some(FamilyName::Hyperharmonic) => Some(Family::Hyperharmonic {
                r: common
                    .r
                    .ok_or_else(|| invalid("--family hyperharmonic needs --r"))?,
            }),
            Some(FamilyName::GeometricP) => Some(Family::GeometricP {
                base: common
                    .base
                    .ok_or_else(|| invalid("--family geometric-p needs --base"))?,
            }),
            None => None,
        };
        let (lambdas, family) = match (&common.lambdas, family) {
            (Some(_), Some(_)) => {
                return Err(invalid("give either --lambdas or --family, not both"))
            }
            (Some(l), None) => (Some(l.clone()), None),
            (None, Some(f)) => (None, Some(f)),
            (None, None) => match (&file.lambdas, file.family) {
                (Some(_), Some(_)) => {
                    return Err(invalid("config file gives both lambdas and family"))
                }
                (Some(l), None) => (Some(l.clone()), None),
                (None, Some(f)) => (None, Some(f)),
                (None, None) => match default_lambdas {
                    Some(l) => (Some(l), None),
                    None => return Err(invalid("no exponents: use --lambdas or --family")),
                },
            },
        };
        let n = match common.n.or(file.n) {
            Some(n) => n,
            None => lambdas.as_ref().map_or(8, Vec::len),
        };
        Ok(Self {
            command,
            lambdas,
            family,
            n,
            // Family members are checked for distinctness only.
            gap_epsilon: common
                .gap_epsilon
                .or(file.gap_epsilon)
                .unwrap_or(if family.is_some() {
                    0.0
                } else {
                    DEFAULT_GAP_EPSILON
                }),
            out: common.out.or(file.out).unwrap_or(Format::Csv),
            t: None,
            tolerance: None,
            perturb: None,
            perturb_index: None,
            tail_terms: None,
            horizon: None,
            grid: None,
            paths: None,
            seed: None,
            iterate: None,
            bridge: None,
            band: None,
            xi_min: None,
            xi_max: None,
            xi_count: None,
            truncate: None,
        })
    }

    /// The stored exponent sequence; families are generated with `max(n, 1)` terms.
    pub fn sequence(&self) -> Result<ExponentSequence> {
        match (&self.lambdas, self.family) {
            (Some(l), _) => {
                if self.n > l.len() {
                    return Err(invalid(&format!(
                        "--n {} exceeds the {} exponents given",
                        self.n,
                        l.len()
                    )));
                }
                ExponentSequence::validate(l.clone(), self.gap_epsilon)
            }
            (None, Some(f)) => f.sequence(self.n.max(1)),
            (None, None) => Err(invalid("no exponents")),
        }
    }

    fn kernel(&self, seq: &ExponentSequence) -> Result<GoursatKernel> {
        if self.n == 0 {
            Ok(GoursatKernel::identity())
        } else {
            GoursatKernel::new(seq, self.n)
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

fn invalid(msg: &str) -> MuntzError {
    MuntzError::InvalidParameter(msg.to_string())
}

fn load_file(common: &Common) -> Result<ConfigFile> {
    match &common.config {
        Some(p) => ConfigFile::load(p),
        None => Ok(ConfigFile::default()),
    }
}

fn seed_fallback() -> Result<u64> {
    match std::env::var("MUNTZ_SEED") {
        Ok(s) => s.trim().parse().map_err(|_| {
            invalid(&format!(
                "MUNTZ_SEED must be an unsigned integer, got {s:?}"
            ))
        }),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

/// Outcome of a subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// Output produced but no pass/fail decision (e.g. too few paths).
    None,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub config: RunConfig,
    pub body: String,
    pub verdict: Verdict,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            Verdict::Fail => 1,
            _ => 0,
        }
    }
}

fn csv_header(config: &RunConfig, notes: &[String]) -> String {
    let mut out = format!("# muntz {VERSION}\n# config {}\n", config.to_json());
    for n in notes {
        out.push_str(&format!("# note {n}\n"));
    }
    out
}

fn json_document(config: &RunConfig, notes: &[String], result: serde_json::Value) -> String {
    let doc = json!({
        "version": VERSION,
        "config": serde_json::to_value(config).expect("config serializes"),
        "notes": notes,
        "result": result,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("document serializes");
    s.push('\n');
    s
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn cmd_coeffs(config: RunConfig) -> Result<Report> {
    let seq = config.sequence()?;
    let n = config.n;
    let kern = config.kernel(&seq)?;
    let basis = MuntzLegendreBasis::build(&seq, n)?;
    let residual = kern.system_residual();
    let mut notes = Vec::new();
    if let Some(Family::Hyperharmonic { r }) = config.family {
        notes.push(format!(
            "for λ_j = (j^-r - 1)/2 the coefficients are a_k = k^-r Π_(j≠k) (j^r + k^r)/(j^r - k^r) (r = {r}); \
             the variant with prefactor 2/k^r is twice the solution of Σ_j a_j/(λ_j + λ_k + 1) = 1 and is not used"
        ));
    }
    let body = match config.out {
        Format::Csv => {
            let mut out = csv_header(&config, &notes);
            let _ = writeln!(out, "# system_residual {}", num(residual));
            out.push_str("quantity,k,j,value\n");
            for k in 1..=n {
                for (j, c) in basis.coefficients(k).iter().enumerate() {
                    let _ = writeln!(out, "c,{k},{},{}", j + 1, num(*c));
                }
            }
            for (j, a) in kern.coefficients().iter().enumerate() {
                let _ = writeln!(out, "a,{n},{},{}", j + 1, num(*a));
            }
            out
        }
        Format::Json => {
            let legendre: Vec<Vec<f64>> = (1..=n).map(|k| basis.coefficients(k).to_vec()).collect();
            json_document(
                &config,
                &notes,
                json!({
                    "kernel": kern.to_record(),
                    "legendre": legendre,
                    "system_residual": residual,
                }),
            )
        }
    };
    Ok(Report {
        config,
        body,
        verdict: Verdict::Pass,
        warnings: notes,
    })
}

/// One row of the `verify` table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub identity: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn check(identity: &'static str, residual: f64, tolerance: f64) -> IdentityCheck {
    IdentityCheck {
        identity,
        residual,
        tolerance,
        pass: residual <= tolerance,
    }
}

fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(
        0.0,
        |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) },
    )
}

/// Frequencies `−10, …, 10` used by the Fourier agreement check.
pub fn probe_frequencies() -> Vec<f64> {
    linspace(-10.0, 10.0, 25)
}

fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![a];
    }
    (0..count)
        .map(|i| {
            if i == count - 1 {
                b
            } else {
                a + (b - a) * i as f64 / (count - 1) as f64
            }
        })
        .collect()
}

/// Lags at which the stationary covariance is compared with `e^{−h/2}`.
pub fn probe_lags() -> [f64; 5] {
    [0.0, 0.1, 1.0, 4f64.ln(), 5.0]
}

/// Every analytic identity for the first `n` exponents at horizon `t`.
pub fn identity_checks(
    seq: &ExponentSequence,
    kern: &GoursatKernel,
    t: f64,
    tol: f64,
) -> Result<Vec<IdentityCheck>> {
    let n = kern.order();
    let loose = 100.0 * tol;
    let basis = MuntzLegendreBasis::build(seq, n)?;
    let mut rows = vec![
        check("linear-system", kern.system_residual(), tol),
        check("self-reproduction", kern.self_reproduction_residual(), tol),
        check("fixed-point", kern.fixed_point_residual(), tol),
        check(
            "legendre-orthonormality",
            basis.orthonormality_residual(),
            tol,
        ),
        check(
            "legendre-sum",
            kern.legendre_identity_residual(&basis)?,
            tol,
        ),
        check(
            "derivative",
            kern.derivative_identity_residual(&basis)?,
            tol,
        ),
    ];
    let rec = kernel_by_recurrence(seq, n)?;
    rows.push(check(
        "recurrence",
        max_abs(
            rec.coefficients()
                .iter()
                .zip(kern.coefficients())
                .map(|(a, b)| a - b),
        ),
        loose,
    ));
    rows.push(check(
        "rho-orthogonality",
        kern.rho_orthogonality_residual(),
        tol,
    ));
    let gram = match inverse_closed(kern, t) {
        Ok(alpha) => inverse_residual(&covariance_matrix(seq, n, t)?, &alpha),
        Err(MuntzError::IllConditioned { disagreement, .. }) => disagreement,
        Err(e) => return Err(e),
    };
    rows.push(check("gram-inverse", gram, loose));
    rows.push(check(
        "reproducing-kernel",
        reproduction_residual(&basis, t)?,
        tol,
    ));
    let boundary = crate::numeric::kernel_probe_pairs()
        .into_iter()
        .map(|(tt, s)| -> Result<f64> {
            let g = crate::gram_matrix::reproducing_kernel_eval(&basis, tt, tt, s)?;
            Ok(kern.kernel(tt, s)? - g)
        })
        .collect::<Result<Vec<_>>>()?;
    rows.push(check("kernel-boundary", max_abs(boundary), tol));

    let eta = spectral::eta_from_kernel(kern);
    let bp = BlaschkeProduct::from_kernel(kern)?;
    rows.push(check(
        "fourier-agreement",
        max_abs(probe_frequencies().into_iter().map(|xi| {
            (spectral::fourier_closed(&bp, xi) - spectral::fourier_partial_fractions(&eta, xi))
                .norm()
        })),
        tol,
    ));
    rows.push(check(
        "blaschke-modulus",
        max_abs(
            probe_frequencies()
                .into_iter()
                .map(|xi| bp.eval(xi).norm() - 1.0),
        ),
        tol / 100.0,
    ));
    rows.push(check(
        "ou-covariance",
        max_abs(
            probe_lags()
                .into_iter()
                .map(|h| Ok(spectral::ou_covariance(&eta, h)? - (-h / 2.0).exp()))
                .collect::<Result<Vec<_>>>()?,
        ),
        tol,
    ));
    rows.push(check(
        "orthogonality-zeros",
        max_abs(
            bp.p()
                .iter()
                .map(|&p| spectral::orthogonality_zero(&eta, p))
                .collect::<Result<Vec<_>>>()?,
        ),
        tol,
    ));
    let cauchy = (0..n)
        .map(|m| {
            let want: f64 = seq.lambdas()[m..n].iter().map(|l| 1.0 + 2.0 * l).sum();
            Ok(cauchy_l2_distance(seq, m, n)? - want)
        })
        .collect::<Result<Vec<_>>>()?;
    rows.push(check("cauchy-l2", max_abs(cauchy), tol));
    Ok(rows)
}

pub fn cmd_verify(config: RunConfig) -> Result<Report> {
    let seq = config.sequence()?;
    let t = config.t.unwrap_or(1.0);
    let tol = config.tolerance.unwrap_or(1e-10);
    let mut kern = config.kernel(&seq)?;
    if let Some(delta) = config.perturb {
        let idx = config.perturb_index.unwrap_or(1);
        if idx == 0 || idx > kern.order() {
            return Err(invalid(&format!(
                "--perturb-index {idx} outside 1..={}",
                kern.order()
            )));
        }
        kern = kern.perturbed(idx, delta);
    }
    let rows = if config.n == 0 {
        Vec::new()
    } else {
        identity_checks(&seq, &kern, t, tol)?
    };
    let all = rows.iter().all(|r| r.pass);
    let mut notes = Vec::new();
    if rows.is_empty() {
        notes.push("order 0: no identities to check".to_string());
    }
    let body = match config.out {
        Format::Csv => {
            let mut out = csv_header(&config, &notes);
            out.push_str("identity,max_residual,tolerance,status\n");
            for r in &rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    r.identity,
                    num(r.residual),
                    num(r.tolerance),
                    if r.pass { "pass" } else { "fail" }
                );
            }
            out
        }
        Format::Json => json_document(&config, &notes, json!({ "checks": rows, "pass": all })),
    };
    Ok(Report {
        config,
        body,
        verdict: if all { Verdict::Pass } else { Verdict::Fail },
        warnings: Vec::new(),
    })
}

pub fn cmd_classify(config: RunConfig) -> Result<Report> {
    let seq = config.sequence()?;
    let tail = config.tail_terms.unwrap_or(DEFAULT_TAIL_TERMS);
    let rule = config.family.map(|f| f.extension_rule());
    let class = classify(&seq, rule.as_ref(), tail)?;
    let mut notes = Vec::new();
    if rule.is_none() {
        notes.push("finite sequence without an extension rule: finite order only".to_string());
    }
    if class.criteria_agree == Some(false) {
        notes.push("bounded+Müntz-Szász and Σp_j < ∞ disagree for this sequence".to_string());
    }
    let body = match config.out {
        Format::Csv => {
            let mut out = csv_header(&config, &notes);
            let _ = writeln!(out, "# class {:?}", class.class);
            let _ = writeln!(
                out,
                "# ms_verdict {}",
                serde_json::to_string(&class.ms_verdict)?
            );
            let _ = writeln!(
                out,
                "# p_sum_verdict {}",
                serde_json::to_string(&class.p_sum_verdict)?
            );
            let _ = writeln!(
                out,
                "# bounded {} sup_lambda {}",
                class.bounded,
                num(class.sup_lambda)
            );
            let _ = writeln!(out, "# criteria_agree {:?}", class.criteria_agree);
            out.push_str("series,terms,partial_sum\n");
            for (name, trace) in [
                ("muntz-szasz", &class.ms_partial_sums),
                ("p-sum", &class.p_sum_partial),
            ] {
                for (n, s) in trace.terms.iter().zip(&trace.sums) {
                    let _ = writeln!(out, "{name},{n},{}", num(*s));
                }
            }
            out
        }
        Format::Json => json_document(&config, &notes, serde_json::to_value(&class)?),
    };
    Ok(Report {
        config,
        body,
        verdict: Verdict::Pass,
        warnings: notes,
    })
}

/// One Monte Carlo statistic with its target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McRow {
    pub statistic: String,
    pub estimate: f64,
    pub std_error: f64,
    pub target: f64,
    pub z_score: f64,
}

impl McRow {
    fn new(statistic: String, est: McEstimate, target: f64) -> Self {
        Self {
            statistic,
            estimate: est.value,
            std_error: est.std_error,
            target,
            z_score: est.z_score(target),
        }
    }

    /// A deterministic quantity reported without a standard error.
    fn exact(statistic: String, value: f64, target: f64) -> Self {
        Self {
            statistic,
            estimate: value,
            std_error: f64::NAN,
            target,
            z_score: f64::NAN,
        }
    }
}

/// Probe pairs `(s, t)` as fractions of the horizon.
pub const COVARIANCE_PROBES: [(f64, f64); 3] = [(0.25, 1.0), (0.5, 1.0), (0.5, 0.75)];

/// Monte Carlo statistics of `T_n^{(m)}(B)` (and optionally the bridge).
pub fn simulation_rows(
    ens: &PathEnsemble,
    seq: &ExponentSequence,
    kern: &GoursatKernel,
    iterations: usize,
    with_bridge: bool,
) -> Result<Vec<McRow>> {
    let horizon = ens.horizon();
    let n = kern.order();
    let mut rows = Vec::new();
    let mut level_integrals = Vec::new();
    let mut current = ens.clone();
    for _ in 0..iterations {
        if n > 0 {
            level_integrals.push(pathsim::muntz_integrals(
                &current,
                seq,
                n,
                horizon,
                NodeRule::Midpoint,
            )?);
        }
        current = pathsim::transform(&current, kern);
    }
    let x_end = current.values_at(current.steps());
    rows.push(McRow::new(
        format!("var_x_{horizon}"),
        pathsim::product_moment(&x_end, &x_end),
        horizon,
    ));
    for &(a, b) in &COVARIANCE_PROBES {
        let (s, t) = (a * horizon, b * horizon);
        rows.push(McRow::new(
            format!("cov_x_{s}_{t}"),
            pathsim::covariance(&current, s, t)?,
            s.min(t),
        ));
    }
    for (level, z) in level_integrals.iter().enumerate() {
        for j in 0..n {
            let zj: Vec<f64> = z.iter().map(|row| row[j]).collect();
            rows.push(McRow::new(
                format!("orth_level{level}_j{}", j + 1),
                pathsim::product_moment(&x_end, &zj),
                0.0,
            ));
        }
    }
    if with_bridge && n > 0 {
        let br = pathsim::bridge(ens, kern, horizon)?;
        let z = pathsim::muntz_integrals(ens, seq, n, horizon, NodeRule::Midpoint)?;
        let mid = br.values_at(br.steps() / 2);
        for j in 0..n {
            let zj: Vec<f64> = z.iter().map(|row| row[j]).collect();
            rows.push(McRow::new(
                format!("bridge_orth_u{}_j{}", horizon / 2.0, j + 1),
                pathsim::product_moment(&mid, &zj),
                0.0,
            ));
        }
        let defects = pathsim::bridge_defects(&br, kern)?;
        rows.push(McRow::exact(
            "bridge_defect_rms".into(),
            pathsim::rms(&defects),
            0.0,
        ));
    }
    Ok(rows)
}

pub fn cmd_simulate(config: RunConfig) -> Result<Report> {
    let seq = config.sequence()?;
    let kern = config.kernel(&seq)?;
    let horizon = config.horizon.unwrap_or(1.0);
    let grid = config.grid.unwrap_or(1 << 10);
    let paths = config.paths.unwrap_or(1 << 14);
    let seed = config.seed.unwrap_or(DEFAULT_SEED);
    if grid % 4 != 0 {
        return Err(MuntzError::InvalidGrid(format!(
            "--grid must be a multiple of 4 so the covariance probes are grid points, got {grid}"
        )));
    }
    let ens = PathEnsemble::generate(horizon, grid, paths, seed)?;
    let rows = simulation_rows(
        &ens,
        &seq,
        &kern,
        config.iterate.unwrap_or(1),
        config.bridge.unwrap_or(false),
    )?;
    drop(ens);
    let band = config.band.unwrap_or(4.0);
    let mut warnings = Vec::new();
    let verdict = if paths < MIN_VERDICT_PATHS {
        warnings.push(format!(
            "only {paths} paths (< {MIN_VERDICT_PATHS}): estimates reported without a verdict"
        ));
        Verdict::None
    } else if rows
        .iter()
        .all(|r| !r.z_score.is_finite() || r.z_score.abs() <= band)
    {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let verdict_text = match verdict {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::None => "none",
    };
    let body = match config.out {
        Format::Csv => {
            let mut out = csv_header(&config, &warnings);
            out.push_str("statistic,estimate,std_error,target,z_score\n");
            for r in &rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    r.statistic,
                    num(r.estimate),
                    num(r.std_error),
                    num(r.target),
                    num(r.z_score)
                );
            }
            let _ = writeln!(out, "# verdict {verdict_text}");
            out
        }
        Format::Json => {
            let rows_json: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "statistic": r.statistic,
                        "estimate": r.estimate,
                        "std_error": finite_or_null(r.std_error),
                        "target": r.target,
                        "z_score": finite_or_null(r.z_score),
                    })
                })
                .collect();
            json_document(
                &config,
                &warnings,
                json!({ "rows": rows_json, "verdict": verdict_text }),
            )
        }
    };
    Ok(Report {
        config,
        body,
        verdict,
        warnings,
    })
}

fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        serde_json::Value::Null
    }
}

pub fn cmd_spectral(config: RunConfig) -> Result<Report> {
    let xs = linspace(
        config.xi_min.unwrap_or(-10.0),
        config.xi_max.unwrap_or(10.0),
        config.xi_count.unwrap_or(25),
    );
    if xs.is_empty() {
        return Err(invalid("--xi-count must be positive"));
    }
    let mut notes = Vec::new();
    // (ξ, η̂(ξ), tail bound)
    let mut rows: Vec<(f64, Complex64, Option<f64>)> = Vec::new();
    match config.truncate {
        None => {
            let seq = config.sequence()?;
            let bp = BlaschkeProduct::from_sequence(&seq, config.n)?;
            rows.extend(
                xs.iter()
                    .map(|&xi| (xi, spectral::fourier_closed(&bp, xi), None)),
            );
        }
        Some(terms) => {
            let fam = config
                .family
                .ok_or_else(|| invalid("--truncate needs --family (an infinite sequence)"))?;
            let rule = fam.extension_rule();
            let seq = config.sequence()?;
            let class = classify(
                &seq,
                Some(&rule),
                config.tail_terms.unwrap_or(DEFAULT_TAIL_TERMS),
            )?;
            for &xi in &xs {
                if xi == 0.0 {
                    // The truncations converge only away from ξ = 0.
                    notes.push("xi = 0 excluded: the truncated products converge only on compact sets avoiding 0".into());
                    continue;
                }
                let tp = spectral::pi_infinity_truncated(&rule, &class, xi, terms)?;
                rows.push((xi, tp.value, Some(tp.tail_bound)));
            }
        }
    }
    let with_tail = config.truncate.is_some();
    let body = match config.out {
        Format::Csv => {
            let mut out = csv_header(&config, &notes);
            out.push_str(if with_tail {
                "xi,re,im,modulus,tail_bound\n"
            } else {
                "xi,re,im,modulus\n"
            });
            for (xi, v, tail) in &rows {
                let _ = write!(
                    out,
                    "{},{},{},{}",
                    num(*xi),
                    num(v.re),
                    num(v.im),
                    num(v.norm())
                );
                if let Some(tb) = tail {
                    let _ = write!(out, ",{}", num(*tb));
                }
                out.push('\n');
            }
            out
        }
        Format::Json => {
            let rows_json: Vec<serde_json::Value> = rows
                .iter()
                .map(|(xi, v, tail)| {
                    json!({
                        "xi": xi, "re": v.re, "im": v.im, "modulus": v.norm(),
                        "tail_bound": tail.map(finite_or_null),
                    })
                })
                .collect();
            json_document(&config, &notes, json!({ "rows": rows_json }))
        }
    };
    Ok(Report {
        config,
        body,
        verdict: Verdict::Pass,
        warnings: Vec::new(),
    })
}

pub fn cmd_gram(config: RunConfig) -> Result<Report> {
    let seq = config.sequence()?;
    let kern = config.kernel(&seq)?;
    let t = config.t.unwrap_or(1.0);
    let m = covariance_matrix(&seq, config.n, t)?;
    let alpha = inverse_closed(&kern, t)?;
    let residual = inverse_residual(&m, &alpha);
    let cond = condition_number(&m);
    let mut notes = Vec::new();
    if cond > 1e12 {
        notes.push(format!(
            "covariance matrix is nearly singular (condition number {cond:.3e})"
        ));
    }
    let body = match config.out {
        Format::Csv => {
            let mut out = csv_header(&config, &notes);
            let _ = writeln!(out, "# condition_number {}", num(cond));
            let _ = writeln!(out, "# inverse_residual {}", num(residual));
            out.push_str("matrix,row,col,value\n");
            out.push_str(&matrix_to_csv("m", &m));
            out.push_str(&matrix_to_csv("alpha", &alpha));
            out
        }
        Format::Json => {
            let rows = |mat: &nalgebra::DMatrix<f64>| -> Vec<Vec<f64>> {
                (0..mat.nrows())
                    .map(|i| mat.row(i).iter().copied().collect())
                    .collect()
            };
            json_document(
                &config,
                &notes,
                json!({
                    "m": rows(&m),
                    "alpha": rows(&alpha),
                    "condition_number": cond,
                    "inverse_residual": residual,
                }),
            )
        }
    };
    Ok(Report {
        config,
        body,
        verdict: Verdict::Pass,
        warnings: notes,
    })
}

/// Resolve flags and config file into a [`RunConfig`] for `command`.
pub fn resolve(command: &Command) -> Result<RunConfig> {
    match command {
        Command::Coeffs(a) => {
            let file = load_file(&a.common)?;
            RunConfig::base("coeffs", &a.common, &file, None)
        }
        Command::Verify(a) => {
            let file = load_file(&a.common)?;
            let mut c = RunConfig::base("verify", &a.common, &file, None)?;
            c.t = Some(a.t.or(file.t).unwrap_or(1.0));
            c.tolerance = Some(a.tolerance.or(file.tolerance).unwrap_or(1e-10));
            c.perturb = a.perturb.or(file.perturb);
            if c.perturb.is_some() {
                c.perturb_index = Some(a.perturb_index.or(file.perturb_index).unwrap_or(1));
            }
            Ok(c)
        }
        Command::Classify(a) => {
            let file = load_file(&a.common)?;
            let mut c = RunConfig::base("classify", &a.common, &file, None)?;
            if c.family.is_some() {
                c.tail_terms = Some(
                    a.tail_terms
                        .or(file.tail_terms)
                        .unwrap_or(DEFAULT_TAIL_TERMS),
                );
            }
            Ok(c)
        }
        Command::Simulate(a) => {
            let file = load_file(&a.common)?;
            let mut c = RunConfig::base("simulate", &a.common, &file, Some(vec![1.0, 2.0]))?;
            c.horizon = Some(a.horizon.or(file.horizon).unwrap_or(1.0));
            c.grid = Some(a.grid.or(file.grid).unwrap_or(1 << 10));
            c.paths = Some(a.paths.or(file.paths).unwrap_or(1 << 14));
            c.seed = Some(match a.seed.or(file.seed) {
                Some(s) => s,
                None => seed_fallback()?,
            });
            c.iterate = Some(a.iterate.or(file.iterate).unwrap_or(1));
            c.bridge = Some(a.bridge || file.bridge.unwrap_or(false));
            c.band = Some(a.band.or(file.band).unwrap_or(4.0));
            Ok(c)
        }
        Command::Spectral(a) => {
            let file = load_file(&a.common)?;
            let mut c = RunConfig::base("spectral", &a.common, &file, None)?;
            c.xi_min = Some(a.xi_min.or(file.xi_min).unwrap_or(-10.0));
            c.xi_max = Some(a.xi_max.or(file.xi_max).unwrap_or(10.0));
            c.xi_count = Some(a.xi_count.or(file.xi_count).unwrap_or(25));
            c.truncate = a.truncate.or(file.truncate);
            if c.truncate.is_some() {
                c.tail_terms = Some(
                    a.tail_terms
                        .or(file.tail_terms)
                        .unwrap_or(DEFAULT_TAIL_TERMS),
                );
            }
            Ok(c)
        }
        Command::Gram(a) => {
            let file = load_file(&a.common)?;
            let mut c = RunConfig::base("gram", &a.common, &file, None)?;
            c.t = Some(a.t.or(file.t).unwrap_or(1.0));
            Ok(c)
        }
    }
}

fn output_path(command: &Command) -> Option<&Path> {
    let common = match command {
        Command::Coeffs(a) => &a.common,
        Command::Verify(a) => &a.common,
        Command::Classify(a) => &a.common,
        Command::Simulate(a) => &a.common,
        Command::Spectral(a) => &a.common,
        Command::Gram(a) => &a.common,
    };
    common.output.as_deref()
}

/// Resolve and run one subcommand.
pub fn execute(command: &Command) -> Result<Report> {
    let config = resolve(command)?;
    match config.command {
        "coeffs" => cmd_coeffs(config),
        "verify" => cmd_verify(config),
        "classify" => cmd_classify(config),
        "simulate" => cmd_simulate(config),
        "spectral" => cmd_spectral(config),
        _ => cmd_gram(config),
    }
}

/// Run the parsed command line, writing output and diagnostics; returns the exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(&cli.command) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            let written = match output_path(&cli.command) {
                Some(p) => std::fs::write(p, &report.body).map_err(MuntzError::from),
                None => {
                    print!("{}", report.body);
                    Ok(())
                }
            };
            match written {
                Ok(()) => report.exit_code(),
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
