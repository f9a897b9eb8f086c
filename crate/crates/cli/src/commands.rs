//! Implementations behind the `gen`, `fit`, and `eval` subcommands, shared
//! with the benchmark runner.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::time::Instant;

use fsll_core::{
    fit, fit_di, fit_pcd, kl_divergence, sample, BayesNetSpec, BmFit, BmParams, BmTracePoint,
    Dataset, DenseTable, DiConfig, Error, FitConfig, FitStatus, FitTrace, IsingGridSpec,
    ModelState, ParentSchedule, PcdConfig, RegularizerTable, Result, TruthSpec,
};

use crate::report::{fmt_float, write_report, ReportRow, REPORT_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModelKind {
    Fsll,
    BmDi,
    BmPcd,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Fsll => "fsll",
            ModelKind::BmDi => "bm-di",
            ModelKind::BmPcd => "bm-pcd",
        }
    }
}

/// A dataset family plus its shape flags.
#[derive(Debug, Clone, Copy)]
pub enum ShapeSpec {
    Ising {
        rows: usize,
        cols: usize,
        coupling: f64,
    },
    Bn {
        nodes: usize,
        schedule: ParentSchedule,
    },
}

impl ShapeSpec {
    /// Realize the truth; the seed drives random network draws and is
    /// ignored by the deterministic Ising family.
    pub fn truth(&self, seed: u64) -> Result<TruthSpec> {
        match *self {
            ShapeSpec::Ising { rows, cols, coupling } => {
                Ok(TruthSpec::Ising(IsingGridSpec::new(rows, cols, coupling)?))
            }
            ShapeSpec::Bn { nodes, schedule } => Ok(TruthSpec::BayesNet(BayesNetSpec::random(
                nodes, schedule, seed,
            )?)),
        }
    }

    /// Dataset family label, e.g. `ising5x4` or `bn20-37`.
    pub fn base_name(&self, truth: &TruthSpec) -> String {
        match (*self, truth) {
            (ShapeSpec::Ising { rows, cols, .. }, _) => format!("ising{rows}x{cols}"),
            (ShapeSpec::Bn { nodes, .. }, TruthSpec::BayesNet(net)) => {
                format!("bn{nodes}-{}", net.edge_count())
            }
            (ShapeSpec::Bn { nodes, .. }, _) => format!("bn{nodes}"),
        }
    }
}

pub struct GenOutput {
    pub stem: String,
    pub data_path: PathBuf,
    pub truth_path: PathBuf,
}

/// Generate truth + dataset files. One user-facing seed covers both the
/// structure draw and the sampling draw; the sampler gets a derived stream
/// so CPT randomness and row randomness never share values.
pub fn gen_files(
    shape: &ShapeSpec,
    n_samples: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<GenOutput> {
    let truth = shape.truth(seed)?;
    let table = truth.true_distribution()?;
    let data_seed = seed ^ 0xd1b5_4a32_d192_ed03;
    let data = sample(&table, n_samples, data_seed)?;

    fs::create_dir_all(out_dir)?;
    let stem = format!("{}_N{}_seed{}", shape.base_name(&truth), n_samples, seed);
    let data_path = out_dir.join(format!("{stem}.data.csv"));
    let truth_path = out_dir.join(format!("{stem}.truth.csv"));
    data.write_csv(&data_path)?;
    truth.write_file(&truth_path)?;
    Ok(GenOutput {
        stem,
        data_path,
        truth_path,
    })
}

pub fn cmd_gen(shape: &ShapeSpec, n_samples: usize, seed: u64, out_dir: &Path) -> Result<()> {
    let out = gen_files(shape, n_samples, seed, out_dir)?;
    println!("wrote {}", out.data_path.display());
    println!("wrote {}", out.truth_path.display());
    Ok(())
}

/// Trainer flags, one struct across all three model kinds; each trainer
/// reads the fields it understands.
#[derive(Debug, Clone, Copy)]
pub struct TrainFlags {
    pub epsilon: f64,
    pub max_iters: Option<usize>,
    pub prune: bool,
    pub refresh_every: usize,
    pub tolerance: f64,
    pub learning_rate: f64,
    pub chains: usize,
    pub steps: usize,
    pub seed: u64,
}

impl Default for TrainFlags {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            max_iters: None,
            prune: true,
            refresh_every: 512,
            tolerance: 1e-6,
            learning_rate: 0.01,
            chains: 100,
            steps: 10_000,
            seed: 0,
        }
    }
}

pub enum Trained {
    Fsll { state: ModelState, trace: FitTrace },
    Bm(BmFit),
}

impl Trained {
    pub fn basis_count(&self) -> usize {
        match self {
            Trained::Fsll { state, .. } => state.theta().len(),
            Trained::Bm(fit) => fit.params.param_count(),
        }
    }

    pub fn status_str(&self, kind: ModelKind) -> &'static str {
        // PCD's stopping rule is its step budget, so finishing it is the
        // normal outcome rather than a convergence claim.
        if kind == ModelKind::BmPcd {
            return "completed";
        }
        let status = match self {
            Trained::Fsll { trace, .. } => trace.status,
            Trained::Bm(fit) => fit.status,
        };
        match status {
            FitStatus::Converged => "converged",
            FitStatus::IterCapped => "iter-capped",
        }
    }

    pub fn density(&self) -> Result<DenseTable> {
        match self {
            Trained::Fsll { state, .. } => Ok(state.density().clone()),
            Trained::Bm(fit) => fit.params.density(),
        }
    }

    pub fn write_model(&self, path: &Path) -> Result<()> {
        match self {
            Trained::Fsll { state, .. } => state.write_file(path),
            Trained::Bm(fit) => fit.params.write_file(path),
        }
    }

    pub fn write_trace(&self, path: &Path) -> Result<()> {
        match self {
            Trained::Fsll { trace, .. } => trace.write_csv(path),
            Trained::Bm(fit) => write_bm_trace(&fit.trace, path),
        }
    }

    /// (iteration, cost) pairs for plot files.
    pub fn trace_points(&self) -> Vec<(usize, f64)> {
        match self {
            Trained::Fsll { trace, .. } => {
                let mut points = vec![(0, trace.initial_cost)];
                points.extend(trace.records.iter().map(|r| (r.iter, r.cost)));
                points
            }
            Trained::Bm(fit) => fit.trace.iter().map(|p| (p.iter, p.cost)).collect(),
        }
    }
}

/// Boltzmann traces share the learner's column layout; the label column has
/// no meaning for them and stays 0.
fn write_bm_trace(points: &[BmTracePoint], path: &Path) -> Result<()> {
    let mut out = String::from("iter,y,kind,delta,cost,ms\n");
    for p in points {
        writeln!(
            out,
            "{},0,step,{},{},{}",
            p.iter,
            fmt_float(p.delta),
            fmt_float(p.cost),
            p.elapsed_ms
        )
        .unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn train(kind: ModelKind, data: &Dataset, flags: &TrainFlags) -> Result<Trained> {
    match kind {
        ModelKind::Fsll => {
            let config = FitConfig {
                epsilon: flags.epsilon,
                max_iters: flags.max_iters.unwrap_or_else(|| FitConfig::default().max_iters),
                prune: flags.prune,
                refresh_every: flags.refresh_every,
                seed: flags.seed,
            };
            let (state, trace) = fit(data, &config)?;
            Ok(Trained::Fsll { state, trace })
        }
        ModelKind::BmDi => {
            let config = DiConfig {
                tolerance: flags.tolerance,
                max_iters: flags.max_iters.unwrap_or_else(|| DiConfig::default().max_iters),
            };
            Ok(Trained::Bm(fit_di(data, &config)?))
        }
        ModelKind::BmPcd => {
            let config = PcdConfig {
                learning_rate: flags.learning_rate,
                chains: flags.chains,
                steps: flags.steps,
                seed: flags.seed,
            };
            Ok(Trained::Bm(fit_pcd(data, &config)?))
        }
    }
}

/// Dataset stem for artifact naming: `x.data.csv` -> `x`, else the bare
/// file stem.
pub fn dataset_stem(data_path: &Path) -> String {
    let name = data_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.strip_suffix(".data.csv")
        .map(str::to_owned)
        .unwrap_or_else(|| {
            data_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or(name)
        })
}

pub struct FitArtifacts {
    pub row: ReportRow,
    pub model_path: PathBuf,
    pub trace_path: PathBuf,
}

/// Write model + trace files and assemble the report row for an already
/// trained model. `ms` is the wall time to report (the benchmark passes a
/// median over repeated runs), `seed` the run seed to record.
pub fn assemble_artifacts(
    kind: ModelKind,
    data: &Dataset,
    truth_table: Option<&DenseTable>,
    trained: &Trained,
    ms: u64,
    seed: u64,
    stem: &str,
    out_dir: &Path,
) -> Result<FitArtifacts> {
    fs::create_dir_all(out_dir)?;
    let model_path = out_dir.join(format!("{stem}.{}.model.csv", kind.as_str()));
    let trace_path = out_dir.join(format!("{stem}.{}.trace.csv", kind.as_str()));
    trained.write_model(&model_path)?;
    trained.write_trace(&trace_path)?;

    let density = trained.density()?;
    let p_d = data.empirical_distribution();
    let kl_pd = kl_divergence(&p_d, &density);
    let kl_pstar = truth_table.map(|t| kl_divergence(t, &density));
    Ok(FitArtifacts {
        row: ReportRow {
            data: stem.to_owned(),
            model: kind.as_str().to_owned(),
            kl_pd: Some(kl_pd),
            kl_pstar,
            basis: trained.basis_count(),
            ms,
            seed,
            status: trained.status_str(kind).to_owned(),
        },
        model_path,
        trace_path,
    })
}

/// Train once (timed), write model + trace, and assemble the report row.
pub fn run_fit_job(
    kind: ModelKind,
    data: &Dataset,
    truth_table: Option<&DenseTable>,
    flags: &TrainFlags,
    stem: &str,
    out_dir: &Path,
) -> Result<FitArtifacts> {
    let started = Instant::now();
    let trained = train(kind, data, flags)?;
    let ms = started.elapsed().as_millis() as u64;
    assemble_artifacts(kind, data, truth_table, &trained, ms, flags.seed, stem, out_dir)
}

pub fn cmd_fit(
    kind: ModelKind,
    data_path: &Path,
    truth_path: Option<&Path>,
    flags: &TrainFlags,
    out_dir: Option<&Path>,
) -> Result<()> {
    let data = Dataset::read_csv(data_path)?;
    let truth_table = truth_path
        .map(|p| TruthSpec::read_file(p)?.true_distribution())
        .transpose()?;
    if let Some(t) = &truth_table {
        check_same_spec(t, &data)?;
    }
    let stem = dataset_stem(data_path);
    let default_dir = data_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let out_dir = out_dir.unwrap_or(&default_dir);

    let artifacts = run_fit_job(kind, &data, truth_table.as_ref(), flags, &stem, out_dir)?;
    let report_path = out_dir.join(format!("{stem}.{}.report.csv", kind.as_str()));
    write_report(&report_path, std::slice::from_ref(&artifacts.row))?;

    println!("wrote {}", artifacts.model_path.display());
    println!("wrote {}", artifacts.trace_path.display());
    println!("wrote {}", report_path.display());
    println!("{REPORT_HEADER}");
    println!("{}", artifacts.row.to_csv_line());
    Ok(())
}

fn check_same_spec(truth: &DenseTable, data: &Dataset) -> Result<()> {
    if truth.spec() != data.spec() {
        return Err(Error::Domain(format!(
            "truth is over cards {:?} but the dataset is over {:?}",
            truth.spec().cards(),
            data.spec().cards()
        )));
    }
    Ok(())
}

/// Model files identify themselves by their first header line.
enum ModelFileKind {
    Fsll,
    Bm,
}

fn sniff_model_file(path: &Path) -> Result<ModelFileKind> {
    let file = fs::File::open(path)?;
    let mut first = String::new();
    BufReader::new(file).read_line(&mut first)?;
    let first = first.trim();
    if first.starts_with("# cards:") {
        Ok(ModelFileKind::Fsll)
    } else if first.starts_with("# n:") {
        Ok(ModelFileKind::Bm)
    } else {
        Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: format!("expected '# cards:' or '# n:' header, got '{first}'"),
        })
    }
}

/// Re-score a stored model from files alone: no state is shared with the
/// fitting process beyond the artifacts on disk.
pub fn cmd_eval(
    model_path: &Path,
    truth_path: &Path,
    data_path: &Path,
    report_out: Option<&Path>,
) -> Result<()> {
    let started = Instant::now();
    let data = Dataset::read_csv(data_path)?;
    let truth = TruthSpec::read_file(truth_path)?.true_distribution()?;
    check_same_spec(&truth, &data)?;

    let (density, basis, model_label, fsll_state) = match sniff_model_file(model_path)? {
        ModelFileKind::Fsll => {
            let state = ModelState::read_file(model_path)?;
            (state.density().clone(), state.theta().len(), "fsll", Some(state))
        }
        ModelFileKind::Bm => {
            let params = BmParams::read_file(model_path)?;
            (params.density()?, params.param_count(), "bm", None)
        }
    };
    if density.spec() != data.spec() {
        return Err(Error::Domain(format!(
            "model is over cards {:?} but the dataset is over {:?}",
            density.spec().cards(),
            data.spec().cards()
        )));
    }

    let p_d = data.empirical_distribution();
    let kl_pd = kl_divergence(&p_d, &density);
    let kl_pstar = kl_divergence(&truth, &density);
    let row = ReportRow {
        data: dataset_stem(data_path),
        model: model_label.to_owned(),
        kl_pd: Some(kl_pd),
        kl_pstar: Some(kl_pstar),
        basis,
        ms: started.elapsed().as_millis() as u64,
        seed: 0,
        status: "evaluated".to_owned(),
    };
    println!("{REPORT_HEADER}");
    println!("{}", row.to_csv_line());

    // For MDL-fitted models, also report the cost in both of its guises:
    // the KL form and the total description length in nats.
    if let Some(state) = fsll_state {
        let n = data.n_rows() as u64;
        let r = RegularizerTable::new(data.spec(), n)?;
        let penalties: f64 = state.theta().support().map(|y| r.get(y)).sum();
        let entropy: f64 = p_d
            .values()
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum();
        let cost = kl_pd + penalties;
        println!("mdl cost (kl + penalties): {}", fmt_float(cost));
        println!(
            "description length (nats): {}",
            fmt_float(n as f64 * (cost + entropy))
        );
    }

    if let Some(path) = report_out {
        write_report(path, std::slice::from_ref(&row))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
