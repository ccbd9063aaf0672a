//! Compliance plus moment of inertia: sweeping the weight moves the dense
//! material toward the rotation axis.

use xls_topopt::config::preset;
use xls_topopt::optimizer::run;

fn main() -> xls_topopt::Result<()> {
    println!("{:>8} {:>10} {:>14} {:>12} {:>10}", "case", "w", "compliance", "J_I", "iters");
    for name in ["case22", "case21", "case20"] {
        let spec = preset(name, &[])?;
        let w = match &spec.objective {
            xls_topopt::optimizer::Objective::ComplianceInertia { weight, .. } => *weight,
            _ => unreachable!("inertia presets use the weighted objective"),
        };
        let out = run(&spec)?;
        let last = out.history.last().expect("at least one iteration");
        println!(
            "{:>8} {:>10.1e} {:>14.5e} {:>12.5e} {:>10}",
            name,
            w,
            last.compliance,
            last.inertia.unwrap_or(f64::NAN),
            out.history.len()
        );
    }
    Ok(())
}
