//! Three-material bracket on a hexahedral half model.
//!
//! The default iteration cap is small so the example finishes quickly; pass
//! `convergence.max_iters=400` to run it out.

use xls_topopt::config::preset;
use xls_topopt::element::ElementBasis;
use xls_topopt::optimizer::run_with_observer;
use xls_topopt::output::RunWriter;

fn main() -> xls_topopt::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "case23".into());
    let mut overrides = vec!["convergence.max_iters=60".to_string()];
    overrides.extend(args);
    let spec = preset(&name, &overrides)?;
    let mesh = spec.build_mesh()?;
    let nq = ElementBasis::for_mesh(&mesh).quad_points();
    println!("{name}: {} hexahedra, {} nodes", mesh.n_elements(), mesh.n_nodes());

    let dir = format!("out/{name}");
    let mut writer = RunWriter::new(mesh, &dir, 20)?.verbose(true);
    let out = run_with_observer(&spec, &mut writer)?;
    writer.finish(&out, nq)?;
    let last = out.history.last().expect("at least one iteration");
    println!("J = {:.5e}, g = {:?}; open {dir}/final.vtk in a VTK viewer", last.objective, last.constraints);
    Ok(())
}
