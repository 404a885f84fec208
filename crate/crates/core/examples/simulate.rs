//! Monte Carlo check that the Goursat transform of Brownian motion is again
//! Brownian and independent of the integrals `∫_0^T s^{λ_j} dB_s`.

use muntz::cli::simulation_rows;
use muntz::exponents::ExponentSequence;
use muntz::goursat_kernel::GoursatKernel;
use muntz::pathsim::PathEnsemble;

fn main() -> muntz::Result<()> {
    let seq = ExponentSequence::new(vec![1.0, 2.0])?;
    let kern = GoursatKernel::new(&seq, 2)?;
    let ens = PathEnsemble::generate(1.0, 512, 1 << 13, 42)?;
    println!(
        "{:<22} {:>12} {:>12} {:>8} {:>8}",
        "statistic", "estimate", "std error", "target", "z"
    );
    for row in simulation_rows(&ens, &seq, &kern, 2, true)? {
        println!(
            "{:<22} {:>12.6} {:>12.6} {:>8.4} {:>8.2}",
            row.statistic, row.estimate, row.std_error, row.target, row.z_score
        );
    }
    Ok(())
}
