//! Builds ColorLS, PCLS, MMLS and VVLS fields on a grid, converts each into
//! an X-LS field and checks that every node keeps its phase.

use std::f64::consts::PI;

use xls_topopt::mesh::{build_structured_mesh, MeshSpec};
use xls_topopt::output::{pair_arrays, write_vtk, PointArray};
use xls_topopt::representations::{to_xls, verify_equivalence, vvls_default_normals, xls_phase, LegacyRepresentation};

fn main() -> xls_topopt::Result<()> {
    let mesh = build_structured_mesh(&MeshSpec { lengths: vec![1.0, 1.0], resolution: vec![64, 64], char_length: None })?;
    let xy: Vec<[f64; 3]> = mesh.coords().to_vec();
    let wave = |f: &dyn Fn(f64, f64) -> f64| xy.iter().map(|p| f(p[0], p[1])).collect::<Vec<f64>>();

    let reps = vec![
        LegacyRepresentation::ColorLs {
            functions: vec![wave(&|x, _| (2.0 * PI * x).sin() + 0.013), wave(&|_, y| (2.0 * PI * y).cos() + 0.017)],
        },
        LegacyRepresentation::Pcls {
            phases: 3,
            values: wave(&|x, y| {
                let r = ((x - 0.5).powi(2) + (y - 0.5).powi(2)).sqrt();
                if r < 0.2 {
                    2.0
                } else if r < 0.35 {
                    1.0
                } else {
                    0.0
                }
            }),
        },
        LegacyRepresentation::Mmls { functions: vec![wave(&|x, y| 0.3 - (x - 0.5).abs() - 0.2 * y + 0.001), wave(&|x, _| x - 0.45)] },
        LegacyRepresentation::Vvls {
            components: vec![wave(&|x, _| x - 0.501), wave(&|_, y| y - 0.499)],
            normals: vvls_default_normals(),
        },
    ];

    std::fs::create_dir_all("out").map_err(|e| xls_topopt::Error::io("creating out", e))?;
    let nodes: Vec<usize> = (0..mesh.n_nodes()).collect();
    for rep in &reps {
        let x = to_xls(rep, true)?;
        let report = verify_equivalence(rep, &x, &nodes);
        let mut counts = vec![0usize; rep.phases()];
        for &n in &nodes {
            if let Some(p) = xls_phase(&x, n) {
                counts[p] += 1;
            }
        }
        println!(
            "{:8} M={} checked {:5} skipped {:3} mismatches {} phase counts {:?}",
            rep.kind(),
            rep.phases(),
            report.checked,
            report.skipped,
            report.mismatches.len(),
            counts
        );
        let mut arrays = rep.arrays();
        arrays.extend(pair_arrays("phi", &x));
        arrays.push(PointArray::integer("phase", nodes.iter().map(|&n| xls_phase(&x, n).map_or(-1, |p| p as i64)).collect()));
        write_vtk(&mesh, &arrays, &std::path::Path::new("out").join(format!("legacy_{}.vtk", rep.kind())))?;
    }
    Ok(())
}
