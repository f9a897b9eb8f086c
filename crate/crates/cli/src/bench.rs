//! The `bench` subcommand: a datasets x models x seeds sweep with persisted
//! artifacts, an aggregate report, per-cell medians, and plot-ready data.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use fsll_core::{Dataset, DenseTable, ParentSchedule, Result, TruthSpec};

use crate::commands::{assemble_artifacts, gen_files, train, ModelKind, ShapeSpec, TrainFlags};
use crate::report::{fmt_float, write_report, ReportRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// Small spaces (n = 12) where exact-gradient BM training is cheap
    /// enough to compare against; all three models run.
    Desk,
    /// Paper-scale spaces (n = 20); exact-gradient BM is opt-in.
    Full,
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub preset: Preset,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub parallel: bool,
    pub include_bm_di: bool,
    /// Timed repetitions per cell; the reported ms is their median.
    pub reps: usize,
}

struct DataCell {
    stem: String,
    /// Stem with the seed suffix removed; the summary groups by this.
    group: String,
    seed: u64,
    data: Dataset,
    truth: DenseTable,
}

struct JobResult {
    row: ReportRow,
    plot: Vec<(usize, f64)>,
}

fn preset_shapes(preset: Preset) -> Vec<ShapeSpec> {
    match preset {
        Preset::Desk => vec![
            ShapeSpec::Ising { rows: 4, cols: 3, coupling: 0.5 },
            ShapeSpec::Bn { nodes: 12, schedule: ParentSchedule::TwoParent },
            ShapeSpec::Bn { nodes: 12, schedule: ParentSchedule::ThreeParent },
        ],
        Preset::Full => vec![
            ShapeSpec::Ising { rows: 5, cols: 4, coupling: 0.5 },
            ShapeSpec::Bn { nodes: 20, schedule: ParentSchedule::TwoParent },
            ShapeSpec::Bn { nodes: 20, schedule: ParentSchedule::ThreeParent },
        ],
    }
}

fn preset_models(preset: Preset, include_bm_di: bool) -> Vec<ModelKind> {
    match preset {
        Preset::Desk => vec![ModelKind::Fsll, ModelKind::BmDi, ModelKind::BmPcd],
        Preset::Full => {
            let mut models = vec![ModelKind::Fsll];
            if include_bm_di {
                models.push(ModelKind::BmDi);
            }
            models.push(ModelKind::BmPcd);
            models
        }
    }
}

fn median_f64(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("medians of finite values"));
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// Lower-middle median, so integer medians are always attained values.
fn median_u64(values: &mut [u64]) -> u64 {
    values.sort_unstable();
    values[(values.len() - 1) / 2]
}

/// Run one cell: `reps` timed fits (median reported), artifacts from the
/// first. Failures become a report row, not a run abort.
fn run_cell(cell: &DataCell, kind: ModelKind, flags: &TrainFlags, out_dir: &Path, reps: usize) -> JobResult {
    let attempt = || -> Result<JobResult> {
        let mut times = Vec::with_capacity(reps);
        let mut first = None;
        for rep in 0..reps {
            let started = Instant::now();
            let trained = train(kind, &cell.data, flags)?;
            times.push(started.elapsed().as_millis() as u64);
            if rep == 0 {
                first = Some(trained);
            }
        }
        let trained = first.expect("at least one rep");
        let ms = median_u64(&mut times);
        let artifacts = assemble_artifacts(
            kind,
            &cell.data,
            Some(&cell.truth),
            &trained,
            ms,
            cell.seed,
            &cell.stem,
            out_dir,
        )?;
        Ok(JobResult {
            row: artifacts.row,
            plot: trained.trace_points(),
        })
    };
    attempt().unwrap_or_else(|e| JobResult {
        row: ReportRow {
            data: cell.stem.clone(),
            model: kind.as_str().to_owned(),
            kl_pd: None,
            kl_pstar: None,
            basis: 0,
            ms: 0,
            seed: cell.seed,
            status: format!("failed: {e}"),
        },
        plot: Vec::new(),
    })
}

fn worker_count(parallel: bool) -> usize {
    if !parallel {
        return 1;
    }
    std::env::var("FSLL_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map_or(1, |v| v.get())
        })
}

pub fn cmd_bench(opts: &BenchOptions) -> Result<()> {
    if opts.seeds.is_empty() {
        return Err(fsll_core::Error::Domain("need at least one seed".into()));
    }
    if opts.reps == 0 {
        return Err(fsll_core::Error::Domain("reps must be at least 1".into()));
    }
    fs::create_dir_all(&opts.out_dir)?;
    let sample_sizes = [1_000usize, 100_000];
    let shapes = preset_shapes(opts.preset);
    let models = preset_models(opts.preset, opts.include_bm_di);

    // Generate every dataset up front (sequentially: cheap and shared).
    let mut cells = Vec::new();
    for shape in &shapes {
        for &n in &sample_sizes {
            for &seed in &opts.seeds {
                let gen = gen_files(shape, n, seed, &opts.out_dir)?;
                let data = Dataset::read_csv(&gen.data_path)?;
                let truth = TruthSpec::read_file(&gen.truth_path)?.true_distribution()?;
                let group = gen
                    .stem
                    .strip_suffix(&format!("_seed{seed}"))
                    .unwrap_or(&gen.stem)
                    .to_owned();
                cells.push(DataCell { stem: gen.stem, group, seed, data, truth });
            }
        }
    }
    println!(
        "bench: {} datasets x {} models, {} rep(s) per cell",
        cells.len(),
        models.len(),
        opts.reps
    );

    // One job per (dataset, model); results keep deterministic order keys.
    let jobs: Vec<(usize, ModelKind)> = cells
        .iter()
        .enumerate()
        .flat_map(|(i, _)| models.iter().map(move |&m| (i, m)))
        .collect();
    let total = jobs.len();
    let flags = TrainFlags::default();
    let workers = worker_count(opts.parallel);

    let mut results: Vec<(String, String, u64, JobResult)> = if workers <= 1 {
        let mut out = Vec::with_capacity(total);
        for (done, &(cell_idx, kind)) in jobs.iter().enumerate() {
            let cell = &cells[cell_idx];
            let result = run_cell(cell, kind, &flags, &opts.out_dir, opts.reps);
            println!(
                "[{}/{total}] {} {} {} ms ({})",
                done + 1,
                cell.stem,
                kind.as_str(),
                result.row.ms,
                result.row.status
            );
            out.push((cell.stem.clone(), kind.as_str().to_owned(), cell.seed, result));
        }
        out
    } else {
        println!("running on {workers} worker threads");
        let queue: Mutex<VecDeque<(usize, ModelKind)>> = Mutex::new(jobs.into_iter().collect());
        let collected: Mutex<Vec<(String, String, u64, JobResult)>> =
            Mutex::new(Vec::with_capacity(total));
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let job = queue.lock().unwrap().pop_front();
                    let Some((cell_idx, kind)) = job else { break };
                    let cell = &cells[cell_idx];
                    let result = run_cell(cell, kind, &flags, &opts.out_dir, opts.reps);
                    let (ms, status) = (result.row.ms, result.row.status.clone());
                    let mut held = collected.lock().unwrap();
                    held.push((cell.stem.clone(), kind.as_str().to_owned(), cell.seed, result));
                    println!(
                        "[{}/{total}] {} {} {ms} ms ({status})",
                        held.len(),
                        cell.stem,
                        kind.as_str(),
                    );
                });
            }
        });
        collected.into_inner().unwrap()
    };
    results.sort_by(|a, b| (&a.0, &a.1, a.2).cmp(&(&b.0, &b.1, b.2)));

    // Aggregate report: one row per (dataset, model, seed).
    let rows: Vec<ReportRow> = results.iter().map(|(_, _, _, r)| r.row.clone()).collect();
    let report_path = opts.out_dir.join("report.csv");
    write_report(&report_path, &rows)?;

    // Summary: medians across seeds per (dataset group, model).
    let mut summary = String::from("data,model,kl_pd,kl_pstar,basis,ms,seeds\n");
    let mut groups: Vec<(String, String)> = Vec::new();
    for cell in &cells {
        for kind in &models {
            let key = (cell.group.clone(), kind.as_str().to_owned());
            if !groups.contains(&key) {
                groups.push(key);
            }
        }
    }
    for (group, model) in &groups {
        let members: Vec<&ReportRow> = results
            .iter()
            .filter(|(stem, m, _, r)| {
                m == model && stem.starts_with(group.as_str()) && r.row.kl_pd.is_some()
            })
            .map(|(_, _, _, r)| &r.row)
            .collect();
        if members.is_empty() {
            writeln!(summary, "{group},{model},,,,0,0").unwrap();
            continue;
        }
        let mut kl_pd: Vec<f64> = members.iter().filter_map(|r| r.kl_pd).collect();
        let mut kl_pstar: Vec<f64> = members.iter().filter_map(|r| r.kl_pstar).collect();
        let mut basis: Vec<u64> = members.iter().map(|r| r.basis as u64).collect();
        let mut ms: Vec<u64> = members.iter().map(|r| r.ms).collect();
        writeln!(
            summary,
            "{group},{model},{},{},{},{},{}",
            fmt_float(median_f64(&mut kl_pd)),
            if kl_pstar.is_empty() {
                String::new()
            } else {
                fmt_float(median_f64(&mut kl_pstar))
            },
            median_u64(&mut basis),
            median_u64(&mut ms),
            members.len()
        )
        .unwrap();
    }
    let summary_path = opts.out_dir.join("summary.csv");
    fs::write(&summary_path, summary)?;

    // Plot data: cost-vs-iteration for every run.
    let mut plot = String::from("data,model,seed,iter,cost\n");
    for (stem, model, seed, result) in &results {
        for &(iter, cost) in &result.plot {
            writeln!(plot, "{stem},{model},{seed},{iter},{}", fmt_float(cost)).unwrap();
        }
    }
    let plot_path = opts.out_dir.join("plot_data.csv");
    fs::write(&plot_path, plot)?;

    println!("wrote {}", report_path.display());
    println!("wrote {}", summary_path.display());
    println!("wrote {}", plot_path.display());
    Ok(())
}
