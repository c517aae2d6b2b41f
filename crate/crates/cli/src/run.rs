//! Subcommand implementations and CSV emission.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use acsm_core::refsolver::{snapshot_times, solve_reference, ReferenceSolution};
use acsm_core::sampler::SamplerKind;
use acsm_core::trainer::{
    analytic_reference, evaluate_against_reference, train_with_monitor, TrainMonitor, TrainOutcome, TrainRecord,
};
use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::files::{load_reference, store_params, store_reference};

pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

/// Result of one (method, N_r, seed) training cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub kind: SamplerKind,
    pub n_r: usize,
    pub seed: u64,
    pub relative_l2: f64,
    pub final_loss: f64,
    pub wall_clock: f64,
    pub dir: PathBuf,
}

struct LogMonitor {
    start: Instant,
    label: String,
    every: usize,
    seen: usize,
}

impl TrainMonitor for LogMonitor {
    fn now(&mut self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn on_record(&mut self, r: &TrainRecord) {
        if self.seen % self.every == 0 {
            log::info!(
                "{} iter {} eps {:e} loss {:.4e} (ic {:.3e}, res {:.3e})",
                self.label,
                r.iteration,
                r.epsilon,
                r.breakdown.total,
                r.breakdown.l_ic,
                r.breakdown.l_res
            );
        }
        self.seen += 1;
    }
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

/// Creates the output directory and copies the config text into it.
pub fn prepare_output(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("config.toml"), &cfg.source_text)?;
    Ok(dir)
}

pub fn generate_reference(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let path = cfg.reference_path().context("[reference] path is required for generate-reference")?;
    let problem = cfg.pde_problem()?;
    let r = &cfg.reference;
    let started = Instant::now();
    let sol = solve_reference(&problem, r.n_x, r.dt, &snapshot_times(problem.horizon, r.n_snap))?;
    store_reference(&sol, &path)?;
    log::info!(
        "wrote {} ({} steps, {:.1}s)",
        path.display(),
        sol.metadata.steps,
        started.elapsed().as_secs_f64()
    );
    Ok(path)
}

/// The reference file named in the config, or the closed-form solution when
/// the problem has one and no file is configured.
pub fn obtain_reference(cfg: &ExperimentConfig) -> Result<ReferenceSolution> {
    let problem = cfg.pde_problem()?;
    if let Some(path) = cfg.reference_path() {
        if !path.exists() {
            bail!("reference file {} does not exist (run generate-reference first)", path.display());
        }
        let sol = load_reference(&path)?;
        if sol.x_lo != problem.x_lo || sol.x_hi != problem.x_hi {
            bail!("reference domain [{}, {}) does not match the problem", sol.x_lo, sol.x_hi);
        }
        return Ok(sol);
    }
    analytic_reference(&problem, cfg.reference.eval_nx, cfg.reference.n_snap)
        .with_context(|| format!("problem `{}` needs a [reference] path", cfg.problem.name))
}

fn cell_dir(root: &Path, kind: SamplerKind, n_r: usize, seed: u64) -> PathBuf {
    root.join(format!("{kind}_nr{n_r}_seed{seed}"))
}

/// Trains one cell and writes its per-run artifacts.
pub fn run_cell(
    cfg: &ExperimentConfig,
    kind: SamplerKind,
    seed: u64,
    n_r: usize,
    reference: &ReferenceSolution,
    root: &Path,
) -> Result<CellResult> {
    let dir = cell_dir(root, kind, n_r, seed);
    fs::create_dir_all(&dir)?;
    let marker = dir.join(INCOMPLETE_MARKER);
    fs::write(&marker, "training in progress\n")?;
    let tc = cfg.train_config(kind, seed, n_r)?;
    let mut monitor = LogMonitor {
        start: Instant::now(),
        label: format!("[{kind} N_r={n_r} seed={seed}]"),
        every: 10,
        seen: 0,
    };
    let outcome = match train_with_monitor(&tc, &mut monitor) {
        Ok(o) => o,
        Err(e) => {
            fs::write(&marker, format!("{e}\n"))?;
            return Err(e).with_context(|| format!("training {kind} N_r={n_r} seed={seed}"));
        }
    };
    let model = tc.model()?;
    let rel = evaluate_against_reference(&model, &outcome.params, reference, tc.eval_nx)?;
    let result = CellResult {
        kind,
        n_r,
        seed,
        relative_l2: rel,
        final_loss: outcome.history.final_breakdown.as_ref().map_or(f64::NAN, |b| b.total),
        wall_clock: outcome.history.wall_clock,
        dir: dir.clone(),
    };
    write_cell_artifacts(cfg, &tc.n_t, &outcome, &result)?;
    store_params(&outcome.params, &model.arch, &dir.join("final_params"))?;
    fs::remove_file(&marker)?;
    log::info!("[{kind} N_r={n_r} seed={seed}] relative L2 {rel:.4e}");
    Ok(result)
}

fn write_cell_artifacts(cfg: &ExperimentConfig, n_t: &usize, out: &TrainOutcome, cell: &CellResult) -> Result<()> {
    let hash = cfg.hash();
    let seed = cell.seed.to_string();
    let dir = &cell.dir;

    let mut w = csv_writer(&dir.join("history.csv"))?;
    w.write_record(["iteration", "epsilon", "total_loss", "l_ic", "l_res", "l_res1", "l_res2", "config_hash", "seed"])?;
    for r in &out.history.records {
        let b = &r.breakdown;
        w.write_record([
            r.iteration.to_string(),
            fmt(r.epsilon),
            fmt(b.total),
            fmt(b.l_ic),
            fmt(b.l_res),
            b.l_res1.map(fmt).unwrap_or_default(),
            b.l_res2.map(fmt).unwrap_or_default(),
            hash.clone(),
            seed.clone(),
        ])?;
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("weights_history.csv"))?;
    let mut header = vec!["iteration".to_string(), "epsilon".into()];
    header.extend((1..=*n_t).map(|i| format!("loss_{i}")));
    header.extend((1..=*n_t).map(|i| format!("w_{i}")));
    header.extend(["config_hash".into(), "seed".into()]);
    w.write_record(&header)?;
    for r in &out.history.records {
        let mut row = vec![r.iteration.to_string(), fmt(r.epsilon)];
        row.extend(r.breakdown.per_slice_losses.iter().map(|&v| fmt(v)));
        row.extend(r.weights.iter().map(|&v| fmt(v)));
        row.extend([hash.clone(), seed.clone()]);
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("points_history.csv"))?;
    let mut header = vec!["iteration".to_string()];
    header.extend((1..=*n_t).map(|i| format!("n_col_{i}")));
    header.extend(["time_centroid".into(), "degenerate".into(), "config_hash".into(), "seed".into()]);
    w.write_record(&header)?;
    for e in &out.history.resample_events {
        let mut row = vec![e.iteration.to_string()];
        row.extend(e.counts.iter().map(usize::to_string));
        row.extend([fmt(e.time_centroid), e.degenerate.to_string(), hash.clone(), seed.clone()]);
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("metrics.csv"))?;
    w.write_record(["method", "N_r", "seed", "relative_l2", "final_loss", "iterations", "config_hash"])?;
    w.write_record([
        cell.kind.to_string(),
        cell.n_r.to_string(),
        seed.clone(),
        fmt(cell.relative_l2),
        fmt(cell.final_loss),
        cfg.trainer.total_iterations.to_string(),
        hash.clone(),
    ])?;
    w.flush()?;

    let mut w = csv_writer(&dir.join("timing.csv"))?;
    w.write_record(["method", "N_r", "seed", "wall_clock_s"])?;
    w.write_record([cell.kind.to_string(), cell.n_r.to_string(), seed, format!("{:.3}", cell.wall_clock)])?;
    w.flush()?;
    Ok(())
}

pub fn cmd_train(cfg: &ExperimentConfig, kind: SamplerKind, seed: u64) -> Result<CellResult> {
    let reference = obtain_reference(cfg)?;
    let root = prepare_output(cfg)?;
    run_cell(cfg, kind, seed, cfg.sampler.n_r, &reference, &root)
}

/// Runs every cell in parallel and returns results in input order, writing
/// a root-level marker and failing if any cell failed.
fn run_cells(
    cfg: &ExperimentConfig,
    cells: &[(usize, u64, SamplerKind)],
    reference: &ReferenceSolution,
    root: &Path,
) -> Result<(Vec<CellResult>, Vec<String>)> {
    let outcomes: Vec<Result<CellResult>> = cells
        .par_iter()
        .map(|&(n_r, seed, kind)| run_cell(cfg, kind, seed, n_r, reference, root))
        .collect();
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => ok.push(r),
            Err(e) => failures.push(format!("{e:#}")),
        }
    }
    Ok((ok, failures))
}

fn finish(root: &Path, failures: Vec<String>) -> Result<()> {
    let marker = root.join(INCOMPLETE_MARKER);
    if failures.is_empty() {
        if marker.exists() {
            fs::remove_file(marker)?;
        }
        return Ok(());
    }
    fs::write(&marker, failures.join("\n") + "\n")?;
    bail!("{} cell(s) failed:\n{}", failures.len(), failures.join("\n"))
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn seeds_label(seeds: &[u64]) -> String {
    seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
}

fn write_errors(path: &Path, cfg: &ExperimentConfig, results: &[CellResult]) -> Result<()> {
    let hash = cfg.hash();
    let mut w = csv_writer(path)?;
    w.write_record(["method", "N_r", "seed", "relative_l2", "config_hash"])?;
    for r in results {
        w.write_record([r.kind.to_string(), r.n_r.to_string(), r.seed.to_string(), fmt(r.relative_l2), hash.clone()])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean and median relative L2 per (method, N_r), in config order.
pub fn summarize(cfg: &ExperimentConfig, results: &[CellResult], n_rs: &[usize]) -> Vec<(SamplerKind, usize, f64, f64, Vec<u64>)> {
    let mut rows = Vec::new();
    for &n_r in n_rs {
        for &kind in &cfg.kinds {
            let cell: Vec<&CellResult> = results.iter().filter(|r| r.kind == kind && r.n_r == n_r).collect();
            if cell.is_empty() {
                continue;
            }
            let mut errs: Vec<f64> = cell.iter().map(|r| r.relative_l2).collect();
            let mean = errs.iter().sum::<f64>() / errs.len() as f64;
            let med = median(&mut errs);
            rows.push((kind, n_r, mean, med, cell.iter().map(|r| r.seed).collect()));
        }
    }
    rows
}

/// All sampler kinds times all seeds at the configured `N_r`. Rows of
/// `errors.csv` are grouped by seed, methods in config order within a seed.
pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<Vec<CellResult>> {
    let reference = obtain_reference(cfg)?;
    let root = prepare_output(cfg)?;
    let n_r = cfg.sampler.n_r;
    let cells: Vec<_> = cfg
        .trainer
        .seeds
        .iter()
        .flat_map(|&s| cfg.kinds.iter().map(move |&k| (n_r, s, k)))
        .collect();
    let (results, failures) = run_cells(cfg, &cells, &reference, &root)?;
    write_errors(&root.join("errors.csv"), cfg, &results)?;
    let hash = cfg.hash();
    let mut w = csv_writer(&root.join("errors_summary.csv"))?;
    w.write_record(["method", "N_r", "mean_relative_l2", "median_relative_l2", "seeds", "config_hash"])?;
    for (kind, n_r, mean, med, seeds) in summarize(cfg, &results, &[n_r]) {
        w.write_record([kind.to_string(), n_r.to_string(), fmt(mean), fmt(med), seeds_label(&seeds), hash.clone()])?;
    }
    w.flush()?;
    finish(&root, failures)?;
    Ok(results)
}

/// Varies `N_r` over `[sweep] n_r`; writes per-cell errors and the
/// mean-over-seeds `efficiency.csv`.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Vec<CellResult>> {
    if cfg.sweep.n_r.is_empty() {
        bail!("[sweep] n_r list is empty");
    }
    let reference = obtain_reference(cfg)?;
    let root = prepare_output(cfg)?;
    let cells: Vec<_> = cfg
        .sweep
        .n_r
        .iter()
        .flat_map(|&n| cfg.trainer.seeds.iter().flat_map(move |&s| cfg.kinds.iter().map(move |&k| (n, s, k))))
        .collect();
    let (results, failures) = run_cells(cfg, &cells, &reference, &root)?;
    write_errors(&root.join("sweep_errors.csv"), cfg, &results)?;
    let hash = cfg.hash();
    let mut w = csv_writer(&root.join("efficiency.csv"))?;
    w.write_record(["method", "N_r", "mean_relative_l2", "seeds", "config_hash"])?;
    let mut rows = summarize(cfg, &results, &cfg.sweep.n_r);
    rows.sort_by_key(|r| cfg.kinds.iter().position(|k| *k == r.0));
    for (kind, n_r, mean, _, seeds) in rows {
        w.write_record([kind.to_string(), n_r.to_string(), fmt(mean), seeds_label(&seeds), hash.clone()])?;
    }
    w.flush()?;
    finish(&root, failures)?;
    Ok(results)
}
