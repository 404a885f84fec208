//! Fourier transform of the moving-average kernel `η_n`, its Blaschke factor,
//! and the truncated infinite product for a convergent family.

use muntz::exponents::{classify, ExponentSequence, Family};
use muntz::goursat_kernel::GoursatKernel;
use muntz::spectral::{self, BlaschkeProduct};

fn main() -> muntz::Result<()> {
    let seq = ExponentSequence::new(vec![1.0, 2.0])?;
    let kern = GoursatKernel::new(&seq, 2)?;
    let eta = spectral::eta_from_kernel(&kern);
    let bp = BlaschkeProduct::from_kernel(&kern)?;
    println!("   xi    closed form                 partial fractions          |Π|");
    for xi in [-4.0, -1.0, 0.0, 0.5, 2.0, 8.0] {
        let c = spectral::fourier_closed(&bp, xi);
        let p = spectral::fourier_partial_fractions(&eta, xi);
        println!(
            "{xi:5.1}  {:+.6} {:+.6}i   {:+.6} {:+.6}i   {:.15}",
            c.re,
            c.im,
            p.re,
            p.im,
            bp.eval(xi).norm()
        );
    }
    for h in [0.0, 1.0, 3.0] {
        println!(
            "OU covariance at lag {h}: {:.12} (e^(-h/2) = {:.12})",
            spectral::ou_covariance(&eta, h)?,
            (-h / 2.0f64).exp()
        );
    }

    let fam = Family::GeometricP { base: 0.5 };
    let rule = fam.extension_rule();
    let class = classify(&fam.sequence(8)?, Some(&rule), 1000)?;
    for terms in [5, 10, 20, 40] {
        let tp = spectral::pi_infinity_truncated(&rule, &class, 1.5, terms)?;
        println!(
            "Π_∞(1.5) with {terms:2} factors: {:.12} {:+.12}i  tail bound {:.2e}",
            tp.value.re, tp.value.im, tp.tail_bound
        );
    }
    Ok(())
}
