//! Plain-text model checkpoints.
//!
//! ```text
//! #mlp widths=2,300,300,3
//! #layer 0 out=300 in=2
//! <300 lines of 2 weights>
//! <1 line of 300 biases>
//! #layer 1 out=300 in=300
//! ...
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{Layer, Mlp};
use crate::{Error, Matrix, Result};

fn write_row<W: Write>(out: &mut W, values: &[f64]) -> Result<()> {
    let mut line = String::with_capacity(values.len() * 20);
    for (k, v) in values.iter().enumerate() {
        use std::fmt::Write as _;
        if k > 0 {
            line.push(' ');
        }
        write!(line, "{v}").unwrap();
    }
    writeln!(out, "{line}")?;
    Ok(())
}

pub fn write_checkpoint<W: Write>(model: &Mlp, out: &mut W) -> Result<()> {
    let widths: Vec<String> = model.widths().iter().map(usize::to_string).collect();
    writeln!(out, "#mlp widths={}", widths.join(","))?;
    for (l, layer) in model.layers().iter().enumerate() {
        writeln!(
            out,
            "#layer {l} out={} in={}",
            layer.outputs(),
            layer.inputs()
        )?;
        for row in layer.weights.iter_rows() {
            write_row(out, row)?;
        }
        write_row(out, &layer.bias)?;
    }
    Ok(())
}

pub fn write_checkpoint_file(model: &Mlp, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_checkpoint(model, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint_file(path: impl AsRef<Path>) -> Result<Mlp> {
    let path = path.as_ref();
    read_checkpoint(BufReader::new(File::open(path)?), path)
}

pub fn read_checkpoint<R: BufRead>(reader: R, origin: &Path) -> Result<Mlp> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let fail = |line: usize, message: String| Error::Parse {
        path: PathBuf::from(origin),
        line,
        message,
    };
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((no, line)) => Ok((no, line?)),
            None => Err(fail(0, format!("unexpected end of file, expected {what}"))),
        }
    };

    let (no, header) = next("header")?;
    let widths: Vec<usize> = header
        .strip_prefix("#mlp widths=")
        .ok_or_else(|| fail(no, "expected `#mlp widths=...` header".into()))?
        .split(',')
        .map(|w| w.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| fail(no, format!("bad width list: {e}")))?;
    if widths.len() < 2 || widths.contains(&0) {
        return Err(fail(no, "need at least two positive widths".into()));
    }

    let parse_row = |no: usize, text: &str, len: usize| -> Result<Vec<f64>> {
        let row: Vec<f64> = text
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| fail(no, format!("bad number: {e}")))?;
        if row.len() != len {
            return Err(fail(
                no,
                format!("expected {len} values, found {}", row.len()),
            ));
        }
        Ok(row)
    };

    let mut layers = Vec::with_capacity(widths.len() - 1);
    for (l, pair) in widths.windows(2).enumerate() {
        let (inputs, outputs) = (pair[0], pair[1]);
        let (no, marker) = next("layer marker")?;
        let expected = format!("#layer {l} out={outputs} in={inputs}");
        if marker.trim() != expected {
            return Err(fail(no, format!("expected `{expected}`, found `{marker}`")));
        }
        let mut weights = Vec::with_capacity(inputs * outputs);
        for _ in 0..outputs {
            let (no, text) = next("weight row")?;
            weights.extend(parse_row(no, &text, inputs)?);
        }
        let (no, text) = next("bias row")?;
        let bias = parse_row(no, &text, outputs)?;
        layers.push(Layer {
            weights: Matrix::from_vec(outputs, inputs, weights),
            bias,
        });
    }
    if let Some((no, Ok(extra))) = lines.next() {
        if !extra.trim().is_empty() {
            return Err(fail(no, "trailing content after last layer".into()));
        }
    }
    Mlp::from_layers(layers)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let model = Mlp::new(&[5, 7, 6, 3], 12).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&model, &mut buf).unwrap();
        assert!(buf.starts_with(b"#mlp widths=5,7,6,3\n"));
        let back = read_checkpoint(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let model = Mlp::new(&[2, 3], 1).unwrap();
        write_checkpoint_file(&model, &path).unwrap();
        assert_eq!(read_checkpoint_file(&path).unwrap(), model);
    }

    #[test]
    fn truncated_file_is_an_error() {
        let model = Mlp::new(&[2, 3, 2], 1).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&model, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(read_checkpoint(cut.as_bytes(), Path::new("mem")).is_err());
        let bad = text.replacen("#layer 1", "#layer 7", 1);
        assert!(read_checkpoint(bad.as_bytes(), Path::new("mem")).is_err());
    }
}
