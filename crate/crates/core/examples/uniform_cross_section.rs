//! Uniform cross-section: a huge x-diffusion factor on the 1–2 pair makes
//! the zero set of that pair a set of straight lines along x. The example
//! reports both that zero set and the 1–2 interface of the cell phase map the
//! elastic model sees.

use xls_topopt::config::preset;
use xls_topopt::optimizer::{crossing_spread, element_phases, interface_spread, run};
use xls_topopt::output::{cell_fractions, write_raster, PALETTE};

fn main() -> xls_topopt::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "case9".into());
    let spec = preset(&name, &[])?;
    let mesh = spec.build_mesh()?;
    let out = run(&spec)?;
    let nq = xls_topopt::element::ElementBasis::for_mesh(&mesh).quad_points();

    let phi12 = out.field.pair(1, 2);
    match crossing_spread(&mesh, phi12, 1) {
        Some(s) => println!("phi_1_2 zero set: y position varies by {s:.3} cells along x"),
        None => println!("phi_1_2 zero set: lines disagree on the number of crossings"),
    }
    let phases = element_phases(&out.evaluation.fr_qp, nq);
    match interface_spread(&mesh, &phases, 1, 2, 1) {
        Some(s) => println!("phase map 1-2 interface: largest y extent of one piece {s:.1} cells"),
        None => println!("phase map: materials 1 and 2 never touch"),
    }
    let share = |p: usize| phases.iter().filter(|&&q| q == p).count() as f64 / phases.len() as f64;
    println!("cell shares: void {:.3}, material 1 {:.3}, material 2 {:.3}", share(0), share(1), share(2));

    std::fs::create_dir_all("out").map_err(|e| xls_topopt::Error::io("creating out", e))?;
    let path = std::path::Path::new("out").join(format!("{name}.ppm"));
    write_raster(&mesh, &cell_fractions(&out.evaluation.fr_qp, nq), &PALETTE, &path)?;
    println!("image written to {}", path.display());
    Ok(())
}
