//! Semimartingale classification of three infinite exponent families.

use muntz::exponents::{classify, Family};

fn main() -> muntz::Result<()> {
    for fam in [
        Family::Hyperharmonic { r: 2.0 },
        Family::Hyperharmonic { r: 1.0 },
        Family::GeometricP { base: 2.0 },
        Family::GeometricP { base: 0.5 },
    ] {
        let seq = fam.sequence(8)?;
        let class = classify(&seq, Some(&fam.extension_rule()), 100_000)?;
        println!("{fam:?}");
        println!("  class            {:?}", class.class);
        println!(
            "  Müntz-Szász sum  {:?} -> {:?}",
            class.ms_partial_sums.last(),
            class.ms_verdict
        );
        println!(
            "  Σ p_j            {:?} -> {:?}",
            class.p_sum_partial.last(),
            class.p_sum_verdict
        );
        println!("  bounded          {}", class.bounded);
    }
    Ok(())
}
