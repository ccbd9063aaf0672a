//! Defines a problem inline instead of using a preset and watches the
//! optimizer through an [`Observer`]: a short bridge with a center load,
//! two materials plus void.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use xls_topopt::config::parse_config;
use xls_topopt::optimizer::{run_with_observer, IterationRecord, Observer, Snapshot, Stage};

const PROBLEM: &str = r#"
name = "bridge"
objective = "compliance"

[mesh]
lengths = [2.0, 0.5]
resolution = [80, 20]

[[boundary]]
name = "left"
kind = "fixed"
min = [0.0, 0.0]
max = [0.05, 0.0]

[[boundary]]
name = "right"
kind = "fixed"
min = [1.95, 0.0]
max = [2.0, 0.0]

[[boundary]]
name = "deck"
kind = "traction"
min = [0.9, 0.5]
max = [1.1, 0.5]
material = 1

[[traction]]
tag = "deck"
value = [0.0, -1.0]

[materials]
catalog = [0, 1, 3]
vmax = [1.0, 0.15, 0.15]

[evolution]
tau = 0.002
dt = 0.01

[convergence]
max_iters = 500
"#;

#[derive(Default)]
struct Timer {
    started: Option<(Stage, Instant)>,
    totals: BTreeMap<String, Duration>,
}

impl Timer {
    fn close(&mut self) {
        if let Some((stage, t)) = self.started.take() {
            *self.totals.entry(format!("{stage:?}")).or_default() += t.elapsed();
        }
    }
}

impl Observer for Timer {
    fn stage(&mut self, _iteration: usize, stage: Stage) {
        self.close();
        self.started = Some((stage, Instant::now()));
    }

    fn record(&mut self, r: &IterationRecord, _snapshot: &Snapshot<'_>) {
        self.close();
        if r.iteration % 10 == 0 {
            println!("{:4}  J {:.5e}  g {:?}", r.iteration, r.objective, r.constraints);
        }
    }
}

fn main() -> xls_topopt::Result<()> {
    let spec = parse_config(PROBLEM)?;
    let mut timer = Timer::default();
    let out = run_with_observer(&spec, &mut timer)?;
    println!("converged: {} after {} iterations", out.converged, out.history.len());
    for (stage, t) in &timer.totals {
        println!("{stage:>18} {:8.2} s", t.as_secs_f64());
    }
    Ok(())
}
