use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::ValueEnum;
use cleanse_core::data::{
    gaussian_clusters, generate_candidates, read_pll_file, split, write_pll_file, GenerationMode,
    PartialDataset,
};
use cleanse_core::Matrix;

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Mode {
    /// Each false label joins independently with probability q.
    Binomial,
    /// Set size uniform on 1..=m.
    UniformSize,
}

#[derive(clap::Args)]
pub struct Args {
    /// Use the built-in Gaussian-cluster synthesizer.
    #[arg(long, conflicts_with = "from")]
    gaussian: bool,
    /// Labelled source: a CSV of features with the class in the last column,
    /// or an existing PLL file whose hidden truth is reused.
    #[arg(long, value_name = "FILE")]
    from: Option<PathBuf>,
    /// Number of classes (inferred from a CSV source when omitted).
    #[arg(long)]
    classes: Option<usize>,
    /// Instances for the Gaussian synthesizer.
    #[arg(long, default_value_t = 600)]
    n: usize,
    /// Feature dimension for the Gaussian synthesizer.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Cluster standard deviation for the Gaussian synthesizer.
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    /// Flip probability for each false label.
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    #[arg(long, value_enum, default_value_t = Mode::Binomial)]
    mode: Mode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output PLL file (the training part when splitting).
    #[arg(short, long)]
    output: PathBuf,
    /// Also write a held-out test split here.
    #[arg(long, requires = "test_fraction")]
    test_out: Option<PathBuf>,
    #[arg(long, requires = "test_out")]
    test_fraction: Option<f64>,
}

#[derive(clap::Args)]
pub struct DescribeArgs {
    file: PathBuf,
}

pub fn run(args: &Args) -> Result<()> {
    let (features, labels, m) = if args.gaussian {
        let classes = args.classes.unwrap_or(3);
        let (x, y) = gaussian_clusters(args.n, classes, args.dim, args.spread, args.seed)?;
        (x, y, classes)
    } else if let Some(path) = &args.from {
        load_labelled(path, args.classes)?
    } else {
        bail!("choose a source: --gaussian or --from FILE");
    };
    let mode = match args.mode {
        Mode::Binomial => GenerationMode::Binomial { q: args.q },
        Mode::UniformSize => GenerationMode::UniformSize,
    };
    // candidate draws use their own stream so features and sets stay independent
    let candidates = generate_candidates(&labels, m, mode, args.seed.wrapping_add(1))?;
    let truth = labels.into_iter().map(Some).collect();
    let dataset = PartialDataset::new(features, candidates, truth, m)?;

    match (&args.test_out, args.test_fraction) {
        (Some(test_out), Some(fraction)) => {
            let (train, test) = split(&dataset, fraction, args.seed.wrapping_add(2))?;
            write(&train, &args.output)?;
            write(&test, test_out)?;
            println!("train {}", train.stats()?);
            println!("test  {}", test.stats()?);
        }
        _ => {
            write(&dataset, &args.output)?;
            println!("{}", dataset.stats()?);
        }
    }
    Ok(())
}

pub fn describe(args: &DescribeArgs) -> Result<()> {
    let dataset =
        read_pll_file(&args.file).with_context(|| format!("reading {}", args.file.display()))?;
    println!("{}", dataset.stats()?);
    Ok(())
}

fn write(dataset: &PartialDataset, path: &Path) -> Result<()> {
    write_pll_file(dataset, path).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {} instances to {}", dataset.len(), path.display());
    Ok(())
}

fn load_labelled(path: &Path, classes: Option<usize>) -> Result<(Matrix, Vec<usize>, usize)> {
    if path.extension().is_some_and(|e| e == "pll") {
        let ds = read_pll_file(path).with_context(|| format!("reading {}", path.display()))?;
        let Some(truth) = ds.complete_truth() else {
            bail!(
                "{}: every instance needs a known label to regenerate candidates",
                path.display()
            );
        };
        if let Some(c) = classes {
            ensure!(
                c == ds.num_classes(),
                "--classes {c} disagrees with m={} in {}",
                ds.num_classes(),
                path.display()
            );
        }
        let m = ds.num_classes();
        return Ok((ds.features().clone(), truth, m));
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let Ok(values) = parsed else {
            if i == 0 {
                continue; // header
            }
            bail!("{}:{}: non-numeric field", path.display(), i + 1);
        };
        ensure!(
            values.len() >= 2,
            "{}:{}: need features and a label",
            path.display(),
            i + 1
        );
        let label = values[values.len() - 1];
        ensure!(
            label >= 0.0 && label.fract() == 0.0,
            "{}:{}: label {label} is not a class index",
            path.display(),
            i + 1
        );
        if let Some(first) = rows.first().map(Vec::len) {
            ensure!(
                values.len() - 1 == first,
                "{}:{}: expected {first} features, found {}",
                path.display(),
                i + 1,
                values.len() - 1
            );
        }
        labels.push(label as usize);
        rows.push(values[..values.len() - 1].to_vec());
    }
    ensure!(!rows.is_empty(), "{}: no data rows", path.display());
    let m = match classes {
        Some(c) => c,
        None => labels.iter().max().map_or(0, |&l| l + 1),
    };
    Ok((Matrix::from_rows(&rows), labels, m))
}
