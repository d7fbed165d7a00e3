//! One pipeline per subcommand.

use std::fmt::Write as _;
use std::path::Path;

use hitlab_core::gauss::{empirical_covariance, simulate, PathEnsemble, SimOptions, Simulator};
use hitlab_core::hitlab::{
    estimate_hitting, image_measure_estimate, kernel_expectation_check, polarity_dichotomy, sharpness_experiment,
    HitEstimate,
};
use hitlab_core::metric::{box_dimension, log_radii};
use hitlab_core::potential::{capacity, RadialKernel, WeightedMeasure};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Block, Command, ExperimentConfig, SimulateBlock};
use crate::{CliError, Output};

/// Largest number of stored path values for `simulate`.
pub const MAX_PATH_VALUES: usize = 200_000_000;

fn to_value(v: &impl Serialize) -> Value {
    serde_json::to_value(v).expect("results serialize")
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

fn rungs_csv(est: &HitEstimate) -> String {
    csv(
        "steps,eps,hits,n_paths,p_hat,ci_lo,ci_hi",
        est.rungs
            .iter()
            .map(|r| format!("{},{},{},{},{},{},{}", r.steps, r.eps, r.hits, r.n_paths, r.p_hat, r.ci.0, r.ci.1)),
    )
}

fn tables(cmd: Command) -> &'static [&'static str] {
    match cmd {
        Command::Simulate => &["variance.csv", "paths.csv (write_paths)"],
        Command::Dimension => &["covering.csv"],
        Command::Capacity => &["capacity.csv", "weights.csv"],
        Command::ConstructSet => &["<name>_leaves.csv"],
        Command::Hitting => &["rungs.csv"],
        Command::Polarity => &["rungs_e1.csv", "rungs_e2.csv", "evidence.csv"],
        Command::Sharpness => &["ladder.csv", "drifts.csv"],
        Command::KernelCheck => &["kernel.csv"],
        Command::ImageMeasure => &["image.csv"],
    }
}

fn work(block: &Block) -> String {
    match block {
        Block::Simulate(b) => format!("{} paths x {} steps x dim {}", b.n_paths, b.n, b.process.dim),
        Block::Dimension(b) => format!("{} radii in [{}, {}]", b.n_radii, b.r_min, b.r_max),
        Block::Capacity(b) => format!("{} truncation rungs, tol {:e}, max_iter {}", b.r0.len(), b.tol, b.max_iter),
        Block::ConstructSet(_) => "tree construction".into(),
        Block::Hitting(b) => format!("{} grid rungs x {} tolerances x {} paths", b.steps.len(), b.eps.len(), b.n_paths),
        Block::Polarity(b) => format!(
            "2 sets at depth {}, {} tolerances x {} paths, evidence depths {:?}",
            b.depth,
            b.eps.len(),
            b.n_paths,
            b.evidence_depths
        ),
        Block::Sharpness(b) => format!(
            "depths {:?}, {} drifts x {} tolerances x {} paths",
            b.depths,
            b.n_drifts,
            b.eps.len(),
            b.n_paths
        ),
        Block::KernelCheck(b) => format!("{} ladder points x {} paths", b.times.len(), b.n_paths),
        Block::ImageMeasure(b) => format!("{} widths x {} paths", b.widths.len(), b.n_paths),
    }
}

/// Execution plan printed by `--dry-run`.
pub fn plan(cfg: &ExperimentConfig, threads: usize, out: &Path) -> String {
    let cmd = cfg.block.command();
    let mut s = String::new();
    let _ = writeln!(s, "plan: {}", cmd.name());
    let _ = writeln!(s, "seed: {}", cfg.seed);
    let _ = writeln!(s, "threads: {threads}");
    let _ = writeln!(s, "work: {}", work(&cfg.block));
    let _ = writeln!(s, "outputs: {}", out.display());
    for name in ["report.json", "config.json"].iter().chain(tables(cmd)) {
        let _ = writeln!(s, "  {name}");
    }
    let _ = writeln!(s, "config: {}", serde_json::to_string(&cfg.to_value()).expect("config serializes"));
    s
}

pub fn execute(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let key = cfg.block.command().key();
    let core = |e| CliError::from_core(key, e);
    match &cfg.block {
        Block::Simulate(b) => run_simulate(b, cfg.seed),
        Block::Dimension(b) => {
            let cloud = b.cloud.build(&b.metric).map_err(core)?;
            let stats = box_dimension(&cloud, &log_radii(b.r_max, b.r_min, b.n_radii)).map_err(core)?;
            Ok(Output {
                summary: format!("dimension: slope {:.4} over {} points", stats.slope, cloud.len()),
                tables: vec![("covering.csv".into(), stats.to_csv())],
                result: json!({ "n_points": cloud.len(), "resolution": cloud.resolution, "covering": to_value(&stats) }),
            })
        }
        Block::Capacity(b) => {
            let cloud = b.cloud.build(&b.metric).map_err(core)?;
            let mut rungs = Vec::new();
            for &r0 in &b.r0 {
                let k = RadialKernel::new(b.kernel, r0).map_err(core)?;
                rungs.push(capacity(&cloud, &k, b.tol, b.max_iter).map_err(core)?);
            }
            let last = rungs.last().expect("non-empty ladder");
            let weights = WeightedMeasure::new(cloud.clone(), last.weights.clone()).map_err(core)?;
            let table = csv(
                "r0,capacity,energy,iterations,duality_gap,converged",
                rungs.iter().map(|r| {
                    format!("{},{},{},{},{},{}", r.r0, r.capacity, r.energy, r.iterations, r.duality_gap, r.converged)
                }),
            );
            Ok(Output {
                summary: format!("capacity: {:.6e} at r0 = {:e}", last.capacity, last.r0),
                tables: vec![("capacity.csv".into(), table), ("weights.csv".into(), weights.to_csv())],
                result: json!({ "n_points": cloud.len(), "rungs": to_value(&rungs) }),
            })
        }
        Block::ConstructSet(b) => {
            let trees = b.build().map_err(core)?;
            let mut result = serde_json::Map::new();
            let mut tables = Vec::new();
            for (name, t) in &trees {
                result.insert(
                    (*name).into(),
                    json!({ "leaf_length": t.leaf_length(), "n_leaves": t.leaves().len(), "tree": to_value(t) }),
                );
                tables.push((format!("{name}_leaves.csv"), t.leaves_csv()));
            }
            Ok(Output {
                summary: format!("construct-set: {} tree(s) at depth {}", trees.len(), trees[0].1.depth),
                tables,
                result: Value::Object(result),
            })
        }
        Block::Hitting(b) => {
            let est = estimate_hitting(b).map_err(core)?;
            Ok(Output {
                summary: format!(
                    "hitting: p_hat {:.4} [{:.4}, {:.4}] at eps {:e}, {} steps",
                    est.p_hat, est.ci.0, est.ci.1, est.eps, est.steps
                ),
                tables: vec![("rungs.csv".into(), rungs_csv(&est))],
                result: to_value(&est),
            })
        }
        Block::Polarity(b) => {
            let rep = polarity_dichotomy(b).map_err(core)?;
            let evidence = csv(
                "depth,capacity_e2,hausdorff_e1",
                rep.evidence.iter().map(|e| format!("{},{},{}", e.depth, e.capacity_e2, e.hausdorff_e1)),
            );
            let mut summary = format!(
                "polarity: p_hat(E2) {:.4} vs p_hat(E1) {:.4}, separated {}",
                rep.e2.p_hat, rep.e1.p_hat, rep.separated
            );
            for d in &rep.diagnostics {
                let _ = write!(summary, "\n  {d}");
            }
            Ok(Output {
                summary,
                tables: vec![
                    ("rungs_e1.csv".into(), rungs_csv(&rep.e1)),
                    ("rungs_e2.csv".into(), rungs_csv(&rep.e2)),
                    ("evidence.csv".into(), evidence),
                ],
                result: to_value(&rep),
            })
        }
        Block::Sharpness(b) => {
            let rep = sharpness_experiment(b).map_err(core)?;
            let ladder = csv(
                "depth,leaf_length,hausdorff,capacity",
                rep.ladder.iter().map(|r| format!("{},{},{},{}", r.depth, r.leaf_length, r.hausdorff, r.capacity)),
            );
            let drifts = csv(
                "drift,p_hat,ci_lo,ci_hi,positive_stable",
                rep.drifts.iter().map(|d| {
                    format!("{},{},{},{},{}", d.index, d.estimate.p_hat, d.estimate.ci.0, d.estimate.ci.1, d.positive_stable)
                }),
            );
            Ok(Output {
                summary: format!(
                    "sharpness: hausdorff decays {}, capacity stable {}, {:.2} of drifts hit stably, separated {}",
                    rep.hausdorff_decays, rep.capacity_stable, rep.fraction_with_property, rep.separated
                ),
                tables: vec![("ladder.csv".into(), ladder), ("drifts.csv".into(), drifts)],
                result: to_value(&rep),
            })
        }
        Block::KernelCheck(b) => {
            let rep = kernel_expectation_check(b).map_err(core)?;
            let table = csv(
                "t,delta,mc,se,quadrature,phi,ratio,agrees",
                rep.rows.iter().map(|r| {
                    format!("{},{},{},{},{},{},{},{}", r.t, r.delta, r.mc, r.se, r.quadrature, r.phi, r.ratio, r.agrees)
                }),
            );
            Ok(Output {
                summary: format!("kernel-check: all agree {}, ratio band {:.3}", rep.all_agree, rep.band),
                tables: vec![("kernel.csv".into(), table)],
                result: to_value(&rep),
            })
        }
        Block::ImageMeasure(b) => {
            let rep = image_measure_estimate(b).map_err(core)?;
            let table = csv(
                "width,mean_volume,se,fraction_positive",
                rep.rungs.iter().map(|r| format!("{},{},{},{}", r.width, r.mean_volume, r.se, r.fraction_positive)),
            );
            Ok(Output {
                summary: format!("image-measure: decays {}, positive stable {}", rep.decays, rep.positive_stable),
                tables: vec![("image.csv".into(), table)],
                result: to_value(&rep),
            })
        }
    }
}

fn load_cached(path: &str, b: &SimulateBlock, seed: u64) -> Option<PathEnsemble> {
    let file = std::fs::File::open(path).ok()?;
    let ens = PathEnsemble::read_cache(std::io::BufReader::new(file), b.process).ok()?;
    (ens.seed == seed && ens.n == b.n && ens.n_paths == b.n_paths).then_some(ens)
}

fn run_simulate(b: &SimulateBlock, seed: u64) -> Result<Output, CliError> {
    let core = |e| CliError::from_core("simulate", e);
    let values = b.n_paths.saturating_mul(b.n + 1).saturating_mul(b.process.dim);
    if values > MAX_PATH_VALUES {
        return Err(CliError::Budget(format!("simulate: {values} path values exceed the limit {MAX_PATH_VALUES}")));
    }
    let cached = b.cache.as_deref().and_then(|p| load_cached(p, b, seed));
    let hit = cached.is_some();
    let ens = match cached {
        Some(e) => e,
        None => simulate(b.process, b.n, b.n_paths, seed).map_err(core)?,
    };
    if let (Some(path), false) = (&b.cache, hit) {
        let file = std::fs::File::create(path).map_err(|e| CliError::Run(format!("cache {path}: {e}")))?;
        ens.write_cache(std::io::BufWriter::new(file)).map_err(core)?;
    }
    let sim = Simulator::new(b.process, b.n, &SimOptions::default()).map_err(core)?;
    let mut rows = Vec::new();
    let probes = 8.min(b.n);
    for j in 1..=probes {
        let t = (j * b.n / probes) as f64 / b.n as f64;
        let (var, se) = empirical_covariance(&ens, t, t).map_err(core)?;
        rows.push(json!({ "t": t, "variance": var, "se": se, "theory": sim.covariance(t, t) }));
    }
    let table = csv(
        "t,variance,se,theory",
        rows.iter().map(|r| format!("{},{},{},{}", r["t"], r["variance"], r["se"], r["theory"])),
    );
    let mut tables = vec![("variance.csv".into(), table)];
    if b.write_paths {
        let mut buf = Vec::new();
        ens.write_csv(&mut buf).map_err(core)?;
        tables.push(("paths.csv".into(), String::from_utf8(buf).expect("csv is utf-8")));
    }
    Ok(Output {
        summary: format!(
            "simulate: {} paths of {} steps ({}){}",
            ens.n_paths,
            ens.n,
            ens.generator,
            if hit { ", loaded from cache" } else { "" }
        ),
        tables,
        result: json!({ "generator": ens.generator, "spec_hash": hex(&b.process.hash()), "variance": rows }),
    })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
