//! Parameter choices that make the failure bound of the neural sampler at
//! most `√δ`, for a few δ and the default constants.
//!
//! The tail constant `C` and the discretisation constant `C_L′` have no
//! closed form, so every number printed is conditional on the inputs.
//!
//! ```text
//! cargo run --example bounds_table
//! ```

use sfopt::bounds::{solve_t, solve_t_simplified, verify_corollary, BoundConstants};

fn main() -> sfopt::Result<()> {
    let k = BoundConstants::default();
    for delta in [0.09, 0.01, 1e-4] {
        let report = verify_corollary(&k, delta)?;
        println!("{}\n", report.table());
    }

    // The one-line form of the T condition is only exact without the C_L′ term.
    println!("{:>6} {:>10} {:>12}", "C_L'", "exact T", "one-line T");
    for c_lprime in [0.0, 0.5, 1.0, 4.0] {
        let k = BoundConstants { c_lprime, ..k };
        println!(
            "{c_lprime:>6} {:>10} {:>12}",
            solve_t(&k, 0.09)?,
            solve_t_simplified(&k, 0.09)?
        );
    }
    Ok(())
}
