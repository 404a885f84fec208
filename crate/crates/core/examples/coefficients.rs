//! Müntz-Legendre and Goursat kernel coefficients for a small exponent set,
//! closed form next to the linear-system solution.

use muntz::exponents::{hyperharmonic_family, ExponentSequence};
use muntz::goursat_kernel::{coefficients_closed, coefficients_system, system_residual};
use muntz::muntz_legendre::MuntzLegendreBasis;

fn main() -> muntz::Result<()> {
    let seq = ExponentSequence::new(vec![1.0, 2.0, 3.5])?;
    let basis = MuntzLegendreBasis::build(&seq, seq.len())?;
    for k in 1..=basis.order() {
        println!("L_{k}: c = {:?}", basis.coefficients(k));
    }

    let closed = coefficients_closed(&seq, seq.len())?;
    let system = coefficients_system(&seq, seq.len())?;
    println!("K_n closed  a = {closed:?}");
    println!("K_n system  a = {system:?}");
    println!(
        "residual      = {:.2e}",
        system_residual(seq.lambdas(), &closed)
    );

    let hyper = hyperharmonic_family(1.0, 2)?;
    println!(
        "hyperharmonic r = 1, n = 2: a = {:?}",
        coefficients_system(&hyper, 2)?
    );
    Ok(())
}
