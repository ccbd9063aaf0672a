//! Multi-material compliance minimization on the 2D cantilever.
//!
//! ```text
//! cargo run --release --example cantilever -- case2 out/cantilever
//! ```
//!
//! Any bundled preset works; extra `key=value` arguments override the preset.

use std::path::PathBuf;

use xls_topopt::config::preset;
use xls_topopt::element::ElementBasis;
use xls_topopt::optimizer::run_with_observer;
use xls_topopt::output::RunWriter;

fn main() -> xls_topopt::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "case2".into());
    let dir = PathBuf::from(args.next().unwrap_or_else(|| format!("out/{name}")));
    let overrides: Vec<String> = args.collect();

    let spec = preset(&name, &overrides)?;
    let mesh = spec.build_mesh()?;
    let nq = ElementBasis::for_mesh(&mesh).quad_points();
    println!("{}: {} phases on {:?} cells", spec.name, spec.phases(), spec.mesh.resolution);

    let mut writer = RunWriter::new(mesh, &dir, 25)?.verbose(true);
    let outcome = run_with_observer(&spec, &mut writer)?;
    writer.finish(&outcome, nq)?;

    let last = outcome.history.last().expect("at least one iteration");
    println!(
        "{} after {} iterations: J = {:.6e}, volumes {:?}",
        if outcome.converged { "converged" } else { "stopped" },
        outcome.history.len(),
        last.objective,
        last.volumes.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>()
    );
    println!("fields in {}/final.vtk, image in {}/final.ppm", dir.display(), dir.display());
    Ok(())
}
