//! Checks the elastic moment tensor against finite elements: a quarter plate
//! under uniaxial tension gets a small disk of a softer material at the
//! symmetry corner, and the compliance change per inclusion area is compared
//! with the tensor prediction.

use xls_topopt::elasticity::{mean_compliance, ElasticityModel, Material, MaterialCatalog, TractionBc};
use xls_topopt::element::ElementBasis;
use xls_topopt::mesh::{build_structured_mesh, BoundaryKind, BoundaryTag, MeshSpec, Region};
use xls_topopt::multiphase::PhaseFractions;
use xls_topopt::sensitivity::emt;

fn main() -> xls_topopt::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(128);
    let mut mesh = build_structured_mesh(&MeshSpec { lengths: vec![1.0, 1.0], resolution: vec![n, n], char_length: None })?;
    mesh.add_tag(BoundaryTag::new("x0", BoundaryKind::Symmetry, Region::new(&[0.0], &[0.0])))?;
    mesh.add_tag(BoundaryTag::new("y0", BoundaryKind::Symmetry, Region::new(&[f64::NEG_INFINITY, 0.0], &[f64::INFINITY, 0.0])))?;
    mesh.add_tag(BoundaryTag::new("load", BoundaryKind::Traction, Region::new(&[1.0], &[1.0])))?;

    let cat = MaterialCatalog::new(vec![Material::new(200e9, 0.3), Material::new(100e9, 0.3)])?;
    let basis = ElementBasis::for_mesh(&mesh);
    let nq = basis.quad_points();
    let sigma = 1e6;
    let loads = [TractionBc::new("load", &[sigma, 0.0])];
    let mut model = ElasticityModel::new(&mesh, &cat, &[])?;
    let host = vec![0usize; mesh.n_elements() * nq];
    model.assemble(&PhaseFractions::from_assignment(2, &host))?;
    let f = model.load_vector(&loads)?;
    let j0 = mean_compliance(&model, &model.solve(&f)?, &loads)?;

    let e = cat.get(0).youngs;
    let strain = [sigma / e, -0.3 * sigma / e, 0.0, 0.0, 0.0, 0.0];
    let predicted = -emt(0, 1, &cat, 2)?.contract(&strain, &strain);
    println!("host compliance {j0:.6e}; predicted dJ/area {predicted:.6e}");

    let h = 1.0 / n as f64;
    let mut rho = Vec::new();
    for k in [4.0, 8.0] {
        let r = k * h;
        let mut assign = host.clone();
        let mut area = 0.0;
        for el in 0..mesh.n_elements() {
            for q in 0..nq {
                let x = basis.qp_position(&mesh, el, q);
                if x[0] * x[0] + x[1] * x[1] < r * r {
                    assign[el * nq + q] = 1;
                    area += basis.weight(q);
                }
            }
        }
        model.assemble(&PhaseFractions::from_assignment(2, &assign))?;
        let dj = mean_compliance(&model, &model.solve(&f)?, &loads)? - j0;
        let ratio = dj / area / predicted;
        println!("radius {k:>2} cells: measured / predicted = {ratio:.4}");
        rho.push(ratio);
    }
    println!("extrapolated to a fully resolved disk: {:.4}", 2.0 * rho[1] - rho[0]);
    Ok(())
}
