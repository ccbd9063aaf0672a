//! Randomized property checks runnable outside the test harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::elasticity::MaterialCatalog;
use crate::multiphase::{approx_at_point, ersatz_at_point, exact_at_point, pair_count, SmoothingParams, XlsField};
use crate::representations::{to_xls, verify_equivalence, vvls_default_normals, LegacyRepresentation};
use crate::sensitivity::{emt, time_filter};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

fn random_field(rng: &mut ChaCha8Rng, m: usize, n: usize) -> XlsField {
    XlsField::from_fn(m, n, |_, _, _| rng.gen_range(-1.0..1.0))
}

fn antisymmetry(rng: &mut ChaCha8Rng, samples: usize) -> CheckResult {
    let mut worst = 0.0f64;
    for _ in 0..samples.div_ceil(100) {
        let m = rng.gen_range(2..10);
        let x = random_field(rng, m, 100);
        for node in 0..100 {
            for i in 0..m {
                for j in 0..m {
                    worst = worst.max((x.get(i, j, node) + x.get(j, i, node)).abs());
                }
            }
        }
    }
    check("antisymmetric reads", worst == 0.0, format!("max |φ_ij + φ_ji| = {worst:e}"))
}

fn partition(rng: &mut ChaCha8Rng, samples: usize) -> CheckResult {
    let params = SmoothingParams::default();
    let mut worst = 0.0f64;
    let mut bad_exact = 0;
    let mut bad_approx = 0;
    for _ in 0..samples {
        let m = rng.gen_range(2..10);
        let phi: Vec<f64> = (0..pair_count(m)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut out = vec![0.0; m];
        ersatz_at_point(m, &phi, &params, &mut out);
        worst = worst.max((out.iter().sum::<f64>() - 1.0).abs());
        if out.iter().any(|&v| !(-1e-12..=1.0 + 1e-12).contains(&v)) {
            worst = worst.max(1.0);
        }
        exact_at_point(m, &phi, &mut out);
        if out.iter().sum::<f64>() > 1.0 {
            bad_exact += 1;
        }
        approx_at_point(m, &phi, &mut out);
        if out.iter().sum::<f64>() != 1.0 {
            bad_approx += 1;
        }
    }
    check(
        "partition of unity",
        worst < 1e-12 && bad_exact == 0 && bad_approx == 0,
        format!("ersatz defect {worst:e}, exact overlaps {bad_exact}, approx defects {bad_approx}"),
    )
}

fn clamp(rng: &mut ChaCha8Rng, samples: usize) -> CheckResult {
    let mut ok = true;
    for _ in 0..samples.div_ceil(100) {
        let m = rng.gen_range(2..6);
        let x = XlsField::from_fn(m, 100, |_, _, _| rng.gen_range(-3.0..3.0));
        let c = x.clamp_side_constraint();
        ok &= c.max_abs() <= 1.0 && c.clamp_side_constraint() == c;
    }
    check("side-constraint clamp", ok, "bounded and idempotent".into())
}

fn emt_symmetry() -> CheckResult {
    let cat = MaterialCatalog::reference();
    let mut worst = 0.0f64;
    let mut failures = 0;
    for dim in [2, 3] {
        for a in 0..cat.len() {
            for b in 0..cat.len() {
                if a == b {
                    continue;
                }
                match emt(a, b, &cat, dim) {
                    Ok(t) => worst = worst.max(t.symmetry_defect() / t.norm()),
                    Err(_) => failures += 1,
                }
            }
        }
    }
    check(
        "moment tensor symmetry",
        worst < 1e-12 && failures == 0,
        format!("max relative defect {worst:e}, {failures} failures"),
    )
}

fn filter_fixed_point(rng: &mut ChaCha8Rng) -> CheckResult {
    let prev = random_field(rng, 3, 50);
    let mut worst = 0.0f64;
    for k in [0.03, 0.5, 1.0] {
        match time_filter(&prev, &prev, k) {
            Ok(f) => {
                for (a, b) in f.stored().iter().flatten().zip(prev.stored().iter().flatten()) {
                    worst = worst.max((a - b).abs());
                }
            }
            Err(_) => worst = f64::INFINITY,
        }
    }
    check("time filter fixed point", worst < 1e-15, format!("max |filter(p, p) - p| = {worst:e}"))
}

fn legacy(rng: &mut ChaCha8Rng, samples: usize) -> Vec<CheckResult> {
    let away = |rng: &mut ChaCha8Rng| {
        let v: f64 = rng.gen_range(1e-6..1.0);
        if rng.gen_bool(0.5) {
            v
        } else {
            -v
        }
    };
    let nodes: Vec<usize> = (0..samples).collect();
    let reps = [
        LegacyRepresentation::ColorLs { functions: (0..2).map(|_| (0..samples).map(|_| away(rng)).collect()).collect() },
        LegacyRepresentation::Pcls { phases: 5, values: (0..samples).map(|_| rng.gen_range(0..5) as f64).collect() },
        LegacyRepresentation::Mmls { functions: (0..4).map(|_| (0..samples).map(|_| away(rng)).collect()).collect() },
        LegacyRepresentation::Vvls {
            components: (0..2).map(|_| (0..samples).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
            normals: vvls_default_normals(),
        },
    ];
    reps.iter()
        .map(|rep| {
            let name = match rep.kind() {
                "colorls" => "ColorLS equivalence",
                "pcls" => "PCLS equivalence",
                "mmls" => "MMLS equivalence",
                _ => "VVLS equivalence",
            };
            match to_xls(rep, true) {
                Ok(x) => {
                    let r = verify_equivalence(rep, &x, &nodes);
                    check(
                        name,
                        r.is_equivalent(),
                        format!("{} checked, {} skipped, {} mismatches", r.checked, r.skipped, r.mismatches.len()),
                    )
                }
                Err(e) => check(name, false, e.to_string()),
            }
        })
        .collect()
}

/// Runs every check with `samples` random draws where applicable.
pub fn run_all(samples: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![
        antisymmetry(&mut rng, samples),
        partition(&mut rng, samples),
        clamp(&mut rng, samples),
        emt_symmetry(),
        filter_fixed_point(&mut rng),
    ];
    out.extend(legacy(&mut rng, samples));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for r in run_all(2000, 7) {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
