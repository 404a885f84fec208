//! Generalized Brownian bridge: remove the projection of a path on
//! `∫_0^T s^{λ_j} dB_s` and watch the discrete constraint defect shrink as
//! the grid is refined.

use muntz::exponents::ExponentSequence;
use muntz::goursat_kernel::GoursatKernel;
use muntz::pathsim::{bridge, bridge_defects, rms, PathEnsemble};

fn main() -> muntz::Result<()> {
    let paths = 256;
    let finest = 1 << 13;
    for lambdas in [vec![1.0, 2.0], vec![0.0, 1.0], vec![-0.25, 0.5]] {
        let seq = ExponentSequence::new(lambdas.clone())?;
        let kern = GoursatKernel::new(&seq, lambdas.len())?;
        let fine = PathEnsemble::generate(1.0, finest, paths, 42)?;
        println!("lambdas = {lambdas:?}");
        let mut prev: Option<f64> = None;
        for factor in [16, 8, 4, 2, 1] {
            let ens = fine.coarsen(factor)?;
            let br = bridge(&ens, &kern, 1.0)?;
            let defect = rms(&bridge_defects(&br, &kern)?);
            match prev {
                Some(p) => println!(
                    "  M = {:5}  rms defect = {defect:.3e}  ratio = {:.3}",
                    ens.steps(),
                    p / defect
                ),
                None => println!("  M = {:5}  rms defect = {defect:.3e}", ens.steps()),
            }
            prev = Some(defect);
        }
    }
    Ok(())
}
