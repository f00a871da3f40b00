//! PLL text format.
//!
//! ```text
//! #pll n=2 d=2 m=10
//! 3;3,7;0.5 1.25
//! ?;2;1 -4
//! ```
//!
//! One instance per line: true label (or `?`), strictly increasing candidate
//! indices, space-separated features. Floats are written in shortest
//! round-trip form so write-then-read is exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{CandidateSet, PartialDataset};
use crate::{Error, Matrix, Result};

pub fn read_pll_file(path: impl AsRef<Path>) -> Result<PartialDataset> {
    let path = path.as_ref();
    let file = File::open(path)?;
    read_pll_from(BufReader::new(file), path)
}

pub fn write_pll_file(dataset: &PartialDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_pll_to(dataset, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_pll_to<W: Write>(dataset: &PartialDataset, out: &mut W) -> Result<()> {
    writeln!(
        out,
        "#pll n={} d={} m={}",
        dataset.len(),
        dataset.num_features(),
        dataset.num_classes()
    )?;
    let mut line = String::new();
    for (i, candidates) in dataset.candidates().iter().enumerate() {
        use std::fmt::Write as _;
        line.clear();
        match dataset.hidden_truth()[i] {
            Some(t) => write!(line, "{t}").unwrap(),
            None => line.push('?'),
        }
        line.push(';');
        for (k, c) in candidates.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            write!(line, "{c}").unwrap();
        }
        line.push(';');
        for (k, v) in dataset.features().row(i).iter().enumerate() {
            if k > 0 {
                line.push(' ');
            }
            write!(line, "{v}").unwrap();
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

struct Header {
    n: usize,
    d: usize,
    m: usize,
}

/// Parses PLL text from any reader; `origin` names the source in errors.
pub fn read_pll_from<R: BufRead>(reader: R, origin: &Path) -> Result<PartialDataset> {
    let fail = |line: usize, message: String| Error::Parse {
        path: PathBuf::from(origin),
        line,
        message,
    };

    let mut lines = reader.lines();
    let header_text = lines
        .next()
        .ok_or_else(|| fail(1, "missing `#pll` header".into()))??;
    let header = parse_header(&header_text).map_err(|msg| fail(1, msg))?;
    if header.m < 2 {
        return Err(fail(
            1,
            format!("need at least 2 classes, header says m={}", header.m),
        ));
    }

    let mut features = Vec::with_capacity(header.n * header.d);
    let mut candidates = Vec::with_capacity(header.n);
    let mut truth = Vec::with_capacity(header.n);
    for (k, text) in lines.enumerate() {
        let line_no = k + 2;
        let text = text?;
        if text.trim().is_empty() {
            continue;
        }
        let (t, s) =
            parse_instance(&text, &header, &mut features).map_err(|msg| fail(line_no, msg))?;
        if candidates.len() == header.n {
            return Err(fail(line_no, format!("more than n={} instances", header.n)));
        }
        truth.push(t);
        candidates.push(s);
    }
    if candidates.len() != header.n {
        return Err(fail(
            candidates.len() + 2,
            format!(
                "header declares n={} but file has {} instances",
                header.n,
                candidates.len()
            ),
        ));
    }
    let features = Matrix::from_vec(header.n, header.d, features);
    PartialDataset::new(features, candidates, truth, header.m)
}

fn parse_header(text: &str) -> std::result::Result<Header, String> {
    let rest = text
        .strip_prefix("#pll")
        .ok_or_else(|| format!("expected `#pll` header, found {text:?}"))?;
    let (mut n, mut d, mut m) = (None, None, None);
    for field in rest.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| format!("malformed header field {field:?}"))?;
        let value: usize = value
            .parse()
            .map_err(|_| format!("header field {key} has non-integer value {value:?}"))?;
        match key {
            "n" => n = Some(value),
            "d" => d = Some(value),
            "m" => m = Some(value),
            _ => return Err(format!("unknown header field {key:?}")),
        }
    }
    match (n, d, m) {
        (Some(n), Some(d), Some(m)) => Ok(Header { n, d, m }),
        _ => Err("header must define n, d and m".into()),
    }
}

fn parse_instance(
    text: &str,
    header: &Header,
    features: &mut Vec<f64>,
) -> std::result::Result<(Option<usize>, CandidateSet), String> {
    let mut fields = text.split(';');
    let (Some(truth), Some(cands), Some(feats), None) =
        (fields.next(), fields.next(), fields.next(), fields.next())
    else {
        return Err("expected three `;`-separated fields".into());
    };

    let truth = match truth.trim() {
        "?" => None,
        t => Some(
            t.parse::<usize>()
                .map_err(|_| format!("invalid true label {t:?}"))?,
        ),
    };

    let cands = cands.trim();
    if cands.is_empty() {
        return Err("empty candidate list".into());
    }
    let mut labels = Vec::new();
    for c in cands.split(',') {
        let c: usize = c
            .trim()
            .parse()
            .map_err(|_| format!("invalid candidate index {c:?}"))?;
        if c >= header.m {
            return Err(format!("candidate {c} out of range for m={}", header.m));
        }
        if labels.last().is_some_and(|&prev| prev >= c) {
            return Err("candidate indices must be strictly increasing".into());
        }
        labels.push(c);
    }
    if let Some(t) = truth {
        if t >= header.m {
            return Err(format!("true label {t} out of range for m={}", header.m));
        }
        if labels.binary_search(&t).is_err() {
            return Err(format!("true label {t} is not among the candidates"));
        }
    }
    let set = CandidateSet::from_labels(labels, header.m).map_err(|e| e.to_string())?;

    let before = features.len();
    for v in feats.split_whitespace() {
        features.push(
            v.parse()
                .map_err(|_| format!("invalid feature value {v:?}"))?,
        );
    }
    let found = features.len() - before;
    if found != header.d {
        return Err(format!("expected {} features, found {found}", header.d));
    }
    Ok((truth, set))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_synthetic;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn parse(text: &str) -> Result<PartialDataset> {
        read_pll_from(text.as_bytes(), Path::new("mem.pll"))
    }

    fn err_at(text: &str) -> (usize, String) {
        match parse(text) {
            Err(Error::Parse { line, message, .. }) => (line, message),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parses_documented_lines() {
        let ds = parse("#pll n=2 d=2 m=10\n3;3,7;0.5 1.25\n?;2;1.0 -4\n").unwrap();
        assert_eq!(ds.hidden_truth(), &[Some(3), None]);
        assert_eq!(ds.candidates()[0].iter().collect::<Vec<_>>(), vec![3, 7]);
        assert_eq!(ds.candidates()[1].sole_label(), Some(2));
        assert_eq!(ds.features().row(0), &[0.5, 1.25]);
        assert_eq!(ds.features().row(1), &[1.0, -4.0]);
    }

    #[test]
    fn reports_line_numbers() {
        let (line, msg) = err_at("#pll n=2 d=1 m=3\n0;0;1\n1;1,x;2\n");
        assert_eq!(line, 3);
        assert!(msg.contains("candidate"), "{msg}");
    }

    #[test]
    fn rejects_out_of_range_candidate() {
        let (line, msg) = err_at("#pll n=1 d=1 m=3\n?;0,3;1\n");
        assert_eq!(line, 2);
        assert!(msg.contains("out of range"), "{msg}");
    }

    #[test]
    fn rejects_empty_candidates() {
        let (_, msg) = err_at("#pll n=1 d=1 m=3\n?;;1\n");
        assert!(msg.contains("empty candidate"), "{msg}");
    }

    #[test]
    fn rejects_unsorted_and_bad_counts() {
        assert!(err_at("#pll n=1 d=1 m=3\n?;2,1;1\n")
            .1
            .contains("increasing"));
        assert!(err_at("#pll n=1 d=2 m=3\n?;1;1\n").1.contains("features"));
        assert!(err_at("#pll n=2 d=1 m=3\n?;1;1\n").1.contains("n=2"));
        assert!(err_at("#pll n=1 d=1 m=3\n2;1;1\n").1.contains("not among"));
        assert_eq!(err_at("hello\n").0, 1);
    }

    #[test]
    fn synthetic_round_trip_is_exact() {
        let n = 2000;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..10)).collect();
        let feats: Vec<f64> = (0..n * 784).map(|_| rng.random::<f64>()).collect();
        let cands = generate_synthetic(&truth, 10, 0.5, 9).unwrap();
        let ds = PartialDataset::new(
            Matrix::from_vec(n, 784, feats),
            cands,
            truth.into_iter().map(Some).collect(),
            10,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_pll_to(&ds, &mut buf).unwrap();
        let back = read_pll_from(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.stats().unwrap(), ds.stats().unwrap());
        let mut again = Vec::new();
        write_pll_to(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pll");
        let ds = parse("#pll n=2 d=1 m=4\n1;0,1;-0.1\n?;3;1e-300\n").unwrap();
        write_pll_file(&ds, &path).unwrap();
        assert_eq!(read_pll_file(&path).unwrap(), ds);
    }

    proptest! {
        #[test]
        fn write_read_identity(
            rows in proptest::collection::vec(
                (proptest::collection::btree_set(0usize..6, 1..6),
                 proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::ZERO, 3),
                 any::<bool>()),
                1..30)
        ) {
            let n = rows.len();
            let mut feats = Vec::new();
            let mut cands = Vec::new();
            let mut truth = Vec::new();
            for (set, f, known) in &rows {
                feats.extend_from_slice(f);
                cands.push(CandidateSet::from_labels(set.iter().copied(), 6).unwrap());
                truth.push(known.then(|| *set.iter().next().unwrap()));
            }
            let ds = PartialDataset::new(Matrix::from_vec(n, 3, feats), cands, truth, 6).unwrap();
            let mut buf = Vec::new();
            write_pll_to(&ds, &mut buf).unwrap();
            let back = read_pll_from(buf.as_slice(), Path::new("mem")).unwrap();
            prop_assert_eq!(back, ds);
        }
    }
}
