//! Every analytic identity of a kernel, checked at a tolerance of 1e-10.

use muntz::cli::identity_checks;
use muntz::exponents::ExponentSequence;
use muntz::goursat_kernel::GoursatKernel;

fn main() -> muntz::Result<()> {
    let seq = ExponentSequence::new(vec![-0.25, 0.5, 1.5, 4.0])?;
    let kern = GoursatKernel::new(&seq, seq.len())?;
    for check in identity_checks(&seq, &kern, 1.0, 1e-10)? {
        println!(
            "{:<24} {:.2e}  (tolerance {:.0e})  {}",
            check.identity,
            check.residual,
            check.tolerance,
            if check.pass { "ok" } else { "FAIL" }
        );
    }
    Ok(())
}
