use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use xls_topopt::config::{parse_config_with_overrides, preset, preset_text, PRESETS};
use xls_topopt::element::ElementBasis;
use xls_topopt::optimizer::run_with_observer;
use xls_topopt::output::{parse_vtk, read_vtk, PointArray, RunWriter};
use xls_topopt::representations::{antisymmetry_defect, to_xls, verify_equivalence, LegacyRepresentation};
use xls_topopt::{verify, Error, Result};

#[derive(Parser)]
#[command(name = "xlsopt", version, about = "Multi-material topology optimization with X-LS fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a problem file or a bundled preset.
    Run {
        /// Path to a TOML problem file, or the name of a bundled preset.
        problem: String,
        #[arg(long, default_value = "out")]
        output_dir: PathBuf,
        /// Write a field snapshot every N iterations (0 disables).
        #[arg(long, default_value_t = 10)]
        snapshot_every: usize,
        #[arg(long)]
        max_iters: Option<usize>,
        /// `section.key=value`, repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Include the objective sensitivity in snapshots.
        #[arg(long)]
        sensitivity: bool,
        #[arg(long)]
        quiet: bool,
    },
    /// List the bundled presets.
    Presets,
    /// Convert a legacy level set snapshot into an X-LS snapshot.
    Convert {
        /// One of colorls, pcls, mmls, vvls.
        #[arg(long)]
        kind: String,
        /// Phase count for PCLS input; inferred from the data otherwise.
        #[arg(long)]
        phases: Option<usize>,
        /// Keep raw values instead of rescaling into [-1, 1].
        #[arg(long)]
        raw: bool,
        input: PathBuf,
        output: PathBuf,
    },
    /// Run the randomized property checks.
    Verify {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn configure_threads() {
    if let Some(n) = std::env::var("XLS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn load_problem(problem: &str, overrides: &[String]) -> Result<xls_topopt::optimizer::ProblemSpec> {
    let path = Path::new(problem);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {problem}"), e))?;
        parse_config_with_overrides(&text, overrides)
    } else if preset_text(problem).is_some() {
        preset(problem, overrides)
    } else {
        Err(Error::Invalid(format!("`{problem}` is neither a file nor a bundled preset")))
    }
}

#[allow(clippy::too_many_arguments)]
fn run(
    problem: &str,
    output_dir: &Path,
    every: usize,
    max_iters: Option<usize>,
    overrides: &[String],
    sensitivity: bool,
    quiet: bool,
) -> Result<bool> {
    let mut spec = load_problem(problem, overrides)?;
    if let Some(n) = max_iters {
        spec.convergence.max_iters = n;
    }
    let mesh = spec.build_mesh()?;
    let nq = ElementBasis::for_mesh(&mesh).quad_points();
    let mut writer = RunWriter::new(mesh, output_dir, every)?.with_sensitivity(sensitivity).verbose(!quiet);
    let outcome = run_with_observer(&spec, &mut writer);
    if let Some(e) = writer.take_error() {
        return Err(e);
    }
    let outcome = outcome?;
    writer.finish(&outcome, nq)?;
    if !quiet {
        let last = outcome.history.last().map(|r| r.objective).unwrap_or(f64::NAN);
        println!(
            "{} after {} iterations, J = {last:.6e}; outputs in {}",
            if outcome.converged { "converged" } else { "not converged" },
            outcome.history.len(),
            output_dir.display()
        );
    }
    Ok(outcome.converged)
}

fn convert(kind: &str, phases: Option<usize>, raw: bool, input: &Path, output: &Path) -> Result<()> {
    let data = read_vtk(input)?;
    let rep = LegacyRepresentation::from_vtk(&data, kind, phases)?;
    let xls = to_xls(&rep, !raw)?;
    assert!(antisymmetry_defect(&xls) == 0.0);
    let nodes: Vec<usize> = (0..rep.n_nodes()).collect();
    let report = verify_equivalence(&rep, &xls, &nodes);
    if !report.is_equivalent() {
        return Err(Error::Invalid(format!("{} nodes changed phase during conversion", report.mismatches.len())));
    }
    let mut arrays = xls_topopt::output::pair_arrays("phi", &xls);
    let phase = nodes.iter().map(|&n| rep.legacy_phase(n).map_or(-1, |p| p as i64)).collect();
    arrays.push(PointArray::integer("phase", phase));
    let text = data.render_with(&arrays)?;
    parse_vtk(&text)?;
    std::fs::write(output, text).map_err(|e| Error::io(format!("writing {}", output.display()), e))
}

fn main() -> ExitCode {
    configure_threads();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run { problem, output_dir, snapshot_every, max_iters, overrides, sensitivity, quiet } => {
            run(&problem, &output_dir, snapshot_every, max_iters, &overrides, sensitivity, quiet)
        }
        Command::Presets => {
            for (name, text) in PRESETS {
                let title = text.lines().next().unwrap_or("").trim_start_matches('#').trim();
                println!("{name:8} {title}");
            }
            Ok(true)
        }
        Command::Convert { kind, phases, raw, input, output } => convert(&kind, phases, raw, &input, &output).map(|_| true),
        Command::Verify { samples, seed } => {
            let results = verify::run_all(samples, seed);
            for r in &results {
                println!("{} {:28} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            if results.iter().all(|r| r.passed) {
                Ok(true)
            } else {
                Err(Error::Invalid("property checks failed".into()))
            }
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
