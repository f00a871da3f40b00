use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use cleanse_core::count::CountMode;
use cleanse_core::data::read_pll_file;
use cleanse_core::knn::KnnScope;
use cleanse_core::neural::{write_checkpoint_file, OptimizerKind};
use cleanse_core::reweight::VoteMode;
use cleanse_core::trainer::{
    fit_with, metrics_row, summarize, NeighborSpace, TrainConfig, METRICS_HEADER,
};
use serde::{Deserialize, Serialize};

pub const METRICS_FILE: &str = "metrics.csv";
pub const MODEL_FILE: &str = "model.mlp";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to replay a training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub train: PathBuf,
    pub test: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub record_wall_time: bool,
    pub config: TrainConfig,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Optim {
    Sgd,
    Adam,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Count {
    Nll,
    Entropy,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Scope {
    Batch,
    Global,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Vote {
    Fractional,
    Multiset,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Space {
    Input,
    Embedding,
}

#[derive(clap::Args)]
pub struct Args {
    /// Replay a run from its manifest; other flags override its values.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Training PLL file.
    #[arg(long, required_unless_present = "manifest")]
    train: Option<PathBuf>,
    /// Test PLL file with known labels.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    out_dir: Option<PathBuf>,
    /// Start from the uniform-candidate baseline (temperature 1, lambda 0).
    #[arg(long)]
    baseline: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long, value_enum)]
    optimizer: Option<Optim>,
    /// Hidden widths, e.g. 300,300.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_enum)]
    count_mode: Option<Count>,
    #[arg(long, value_enum)]
    knn_scope: Option<Scope>,
    #[arg(long, value_enum)]
    vote_mode: Option<Vote>,
    #[arg(long, value_enum)]
    neighbor_space: Option<Space>,
    #[arg(long)]
    seed: Option<u64>,
    /// Final epochs averaged for the reported accuracy.
    #[arg(long)]
    eval_window: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
    /// Fill the seconds column of the metrics CSV (makes it run-dependent).
    #[arg(long)]
    record_wall_time: bool,
}

impl Args {
    fn overlay(&self, cfg: &mut TrainConfig) {
        if self.baseline {
            cfg.temperature = 1.0;
            cfg.lambda = 0.0;
        }
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                }
            )*};
        }
        set!(
            epochs,
            batch_size,
            lr,
            weight_decay,
            hidden,
            k,
            temperature,
            lambda,
            seed,
            eval_window,
            eval_every
        );
        if let Some(o) = self.optimizer {
            cfg.optimizer = match o {
                Optim::Sgd => OptimizerKind::Sgd,
                Optim::Adam => OptimizerKind::Adam,
            };
        }
        if let Some(c) = self.count_mode {
            cfg.count_mode = match c {
                Count::Nll => CountMode::Nll,
                Count::Entropy => CountMode::Entropy,
            };
        }
        if let Some(s) = self.knn_scope {
            cfg.knn_scope = match s {
                Scope::Batch => KnnScope::Batch,
                Scope::Global => KnnScope::Global,
            };
        }
        if let Some(v) = self.vote_mode {
            cfg.vote_mode = match v {
                Vote::Fractional => VoteMode::Fractional,
                Vote::Multiset => VoteMode::Multiset,
            };
        }
        if let Some(s) = self.neighbor_space {
            cfg.neighbor_space = match s {
                Space::Input => NeighborSpace::Input,
                Space::Embedding => NeighborSpace::Embedding,
            };
        }
    }

    fn resolve(&self) -> Result<RunManifest> {
        let mut manifest = match &self.manifest {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str::<RunManifest>(&text)
                    .with_context(|| format!("parsing {}", path.display()))?
            }
            None => RunManifest {
                version: env!("CARGO_PKG_VERSION").to_string(),
                train: PathBuf::new(),
                test: None,
                out_dir: PathBuf::new(),
                seed: 0,
                record_wall_time: false,
                config: TrainConfig::default(),
            },
        };
        self.overlay(&mut manifest.config);
        if let Some(p) = &self.train {
            manifest.train = absolute(p)?;
        }
        if let Some(p) = &self.test {
            manifest.test = Some(absolute(p)?);
        }
        if let Some(p) = &self.out_dir {
            manifest.out_dir = p.clone();
        }
        manifest.record_wall_time |= self.record_wall_time;
        manifest.seed = manifest.config.seed;
        manifest.version = env!("CARGO_PKG_VERSION").to_string();
        Ok(manifest)
    }
}

fn absolute(p: &Path) -> Result<PathBuf> {
    fs::canonicalize(p).with_context(|| format!("opening {}", p.display()))
}

pub fn run(args: &Args) -> Result<()> {
    let manifest = args.resolve()?;
    let cfg = &manifest.config;
    let problems = cfg.problems();
    if !problems.is_empty() {
        for p in &problems {
            eprintln!("invalid configuration: {p}");
        }
        bail!("{} configuration problem(s)", problems.len());
    }

    let train = read_pll_file(&manifest.train)
        .with_context(|| format!("reading {}", manifest.train.display()))?;
    let test = match &manifest.test {
        Some(p) => Some(read_pll_file(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    if let Some(t) = &test {
        if cfg.eval_window > cfg.epochs {
            bail!(
                "eval_window {} exceeds epochs {}",
                cfg.eval_window,
                cfg.epochs
            );
        }
        if t.complete_truth().is_none() {
            bail!(
                "{}: test instances need known labels",
                manifest.test.as_ref().unwrap().display()
            );
        }
    }
    eprintln!("train {}", train.stats()?);

    let out = &manifest.out_dir;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let manifest_path = out.join(MANIFEST_FILE);
    fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest)? + "\n",
    )
    .with_context(|| format!("writing {}", manifest_path.display()))?;

    let metrics_path = out.join(METRICS_FILE);
    let mut csv = BufWriter::new(
        File::create(&metrics_path)
            .with_context(|| format!("creating {}", metrics_path.display()))?,
    );
    writeln!(csv, "{METRICS_HEADER}")?;
    let mut write_err = None;
    let fitted = fit_with(train.training_view(), test.as_ref(), cfg, |m| {
        let acc = m
            .test_accuracy
            .map_or_else(|| "-".to_string(), |a| format!("{a:.4}"));
        eprintln!(
            "epoch {:>4}  loss {:.6}  reweight {:.6}  count {:.6}  acc {acc}  {:.2}s",
            m.epoch, m.total_loss, m.reweight_loss, m.count_loss, m.seconds
        );
        if write_err.is_none() {
            if let Err(e) = writeln!(csv, "{}", metrics_row(m, manifest.record_wall_time)) {
                write_err = Some(e);
            }
        }
    })?;
    if let Some(e) = write_err {
        return Err(e).with_context(|| format!("writing {}", metrics_path.display()));
    }
    csv.flush()?;

    let model_path = out.join(MODEL_FILE);
    write_checkpoint_file(&fitted.model, &model_path)
        .with_context(|| format!("writing {}", model_path.display()))?;

    let clamped: usize = fitted.history.iter().map(|m| m.knn_clamped).sum();
    let saturated: usize = fitted.history.iter().map(|m| m.saturated).sum();
    if clamped > 0 {
        eprintln!("note: k was clamped to the available neighbours in {clamped} batch(es)");
    }
    if saturated > 0 {
        eprintln!("note: a loss hit its probability floor in {saturated} batch(es)");
    }
    if test.is_some() {
        let (mean, std) = summarize(&fitted.history, cfg.eval_window)?;
        println!(
            "test accuracy mean ± std over last {} epochs: {mean:.4} ± {std:.4}",
            cfg.eval_window
        );
    }
    eprintln!("outputs in {}", out.display());
    Ok(())
}
