use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use cleanse_core::stats::{
    bonferroni_dunn_cd, bonferroni_dunn_q, friedman, rank_results, render_cd, RankTable,
};

#[derive(clap::Args)]
pub struct Args {
    /// Accuracy CSV: header row of algorithm names, one row per case.
    /// Empty, `NA` or `-` cells need --na-rank.
    #[arg(conflicts_with = "ranks")]
    csv: Option<PathBuf>,
    /// Average ranks given directly, comma separated.
    #[arg(long, value_delimiter = ',', requires = "n")]
    ranks: Option<Vec<f64>>,
    /// Algorithm names for --ranks, comma separated.
    #[arg(long, value_delimiter = ',')]
    names: Option<Vec<String>>,
    /// Number of algorithms (checked against the data when both are given).
    #[arg(long)]
    k: Option<usize>,
    /// Number of cases.
    #[arg(long)]
    n: Option<usize>,
    /// Critical value for the critical difference; looked up from --alpha if omitted.
    #[arg(long)]
    q_alpha: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Rank assigned to every missing cell.
    #[arg(long)]
    na_rank: Option<f64>,
}

pub fn run(args: &Args) -> Result<()> {
    let data = if let Some(path) = &args.csv {
        let (names, table) = from_csv(path, args.na_rank)?;
        Some((names, table))
    } else {
        args.ranks.as_ref().map(|r| {
            let names = args
                .names
                .clone()
                .unwrap_or_else(|| (1..=r.len()).map(|i| format!("alg{i}")).collect());
            (names, RankTable::new(r.clone(), args.n.unwrap_or(0)))
        })
    };

    let (k, n) = match &data {
        Some((names, table)) => {
            ensure!(
                names.len() == table.algorithms(),
                "{} names for {} algorithms",
                names.len(),
                table.algorithms()
            );
            if let Some(k) = args.k {
                ensure!(
                    k == table.algorithms(),
                    "--k {k} but the data has {} algorithms",
                    table.algorithms()
                );
            }
            if let Some(n) = args.n {
                ensure!(
                    n == table.cases,
                    "--n {n} but the data has {} cases",
                    table.cases
                );
            }
            (table.algorithms(), table.cases)
        }
        None => match (args.k, args.n) {
            (Some(k), Some(n)) => (k, n),
            _ => bail!("give an accuracy CSV, --ranks with --n, or --k and --n"),
        },
    };

    let q = match args.q_alpha {
        Some(q) => q,
        None => bonferroni_dunn_q(k, args.alpha).with_context(|| {
            format!(
                "no tabulated critical value for k={k}, alpha={}; pass --q-alpha",
                args.alpha
            )
        })?,
    };
    let cd = bonferroni_dunn_cd(q, k, n)?;

    if let Some((names, table)) = &data {
        let f = friedman(table)?;
        println!("k = {k}  N = {n}");
        let ranks: Vec<String> = names
            .iter()
            .zip(&table.avg_ranks)
            .map(|(a, r)| format!("{a}={r:.4}"))
            .collect();
        println!("average ranks: {}", ranks.join(" "));
        println!("chi2 = {:.4}", f.chi2);
        println!("F_F = {:.4}", f.f_f);
        println!("CD = {cd:.4} (q_alpha = {q})");
        print!("{}", render_cd(names, table, cd));
    } else {
        println!("CD = {cd:.4} (q_alpha = {q}, k = {k}, N = {n})");
    }
    Ok(())
}

fn from_csv(path: &PathBuf, na_rank: Option<f64>) -> Result<(Vec<String>, RankTable)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        bail!("{}: empty file", path.display());
    };
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let k = names.len();
    let mut scores = Vec::new();
    let mut fixed = HashMap::new();
    for (line_no, line) in lines {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        ensure!(
            cells.len() == k,
            "{}: row {}: expected {k} columns, found {}",
            path.display(),
            line_no + 1,
            cells.len()
        );
        let case = scores.len();
        let mut row = Vec::with_capacity(k);
        for (col, cell) in cells.iter().enumerate() {
            if matches!(*cell, "" | "NA" | "-") {
                let Some(r) = na_rank else {
                    bail!(
                        "{}: row {}, column {}: missing value needs --na-rank",
                        path.display(),
                        line_no + 1,
                        col + 1
                    );
                };
                fixed.insert((case, col), r);
                row.push(f64::NAN);
            } else {
                let v: f64 = cell.parse().with_context(|| {
                    format!(
                        "{}: row {}, column {}: bad number {cell:?}",
                        path.display(),
                        line_no + 1,
                        col + 1
                    )
                })?;
                row.push(v);
            }
        }
        scores.push(row);
    }
    let table = rank_results(&scores, &fixed)?;
    Ok((names, table))
}
