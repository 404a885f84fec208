//! Covariance matrix of the Müntz integrals and its closed-form inverse.

use muntz::exponents::ExponentSequence;
use muntz::goursat_kernel::GoursatKernel;
use muntz::gram_matrix::{
    condition_number, covariance_matrix, inverse_closed, inverse_residual, reproduction_residual,
};
use muntz::muntz_legendre::MuntzLegendreBasis;

fn main() -> muntz::Result<()> {
    let seq = ExponentSequence::new(vec![1.0, 2.0])?;
    let kern = GoursatKernel::new(&seq, 2)?;
    for t in [1.0, 2.0] {
        let m = covariance_matrix(&seq, 2, t)?;
        let alpha = inverse_closed(&kern, t)?;
        println!("t = {t}");
        print!("m ={m}alpha ={alpha}");
        println!(
            "‖mα − I‖ = {:.2e}, cond(m) = {:.1}",
            inverse_residual(&m, &alpha),
            condition_number(&m)
        );
    }

    let wide = ExponentSequence::new(vec![-0.3, 0.4, 1.5, 3.0, 6.0])?;
    let basis = MuntzLegendreBasis::build(&wide, wide.len())?;
    println!(
        "reproducing-kernel residual at t = 1.5: {:.2e}",
        reproduction_residual(&basis, 1.5)?
    );
    Ok(())
}
