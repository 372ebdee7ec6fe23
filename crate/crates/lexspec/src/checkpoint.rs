//! Text checkpoints for [`Mlp`] networks.
//!
//! ```text
//! lexspec-mlp 1
//! layers 2
//! layer 16 512 leaky_relu 0.2
//! <512 weight rows of 16 values>
//! <one bias row of 512 values>
//! layer 512 16 identity
//! ...
//! ```
//!
//! Values are written in Rust's shortest round-trip form, so reading a
//! checkpoint back reproduces every parameter bit for bit.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use lexspec_core::nn::{Activation, Dense, Mlp};
use lexspec_core::Matrix;

use crate::error::{Error, Result};
use crate::formats::{create, open};

const MAGIC: &str = "lexspec-mlp 1";

pub fn activation_token(a: Activation) -> String {
    match a {
        Activation::LeakyRelu(s) => format!("leaky_relu {s}"),
        other => other.name().to_string(),
    }
}

/// Parses `relu`, `tanh`, `identity`, `leaky_relu` (slope 0.2) or
/// `leaky_relu <slope>`; also accepts `leaky_relu(<slope>)`.
pub fn parse_activation(s: &str) -> std::result::Result<Activation, String> {
    let s = s.trim();
    let leaky = |slope: &str| {
        slope
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Activation::LeakyRelu)
            .ok_or_else(|| format!("bad leaky_relu slope `{slope}`"))
    };
    match s {
        "relu" => Ok(Activation::Relu),
        "tanh" => Ok(Activation::Tanh),
        "identity" => Ok(Activation::Identity),
        "leaky_relu" => Ok(Activation::LeakyRelu(0.2)),
        _ => {
            if let Some(rest) = s.strip_prefix("leaky_relu(").and_then(|r| r.strip_suffix(')')) {
                leaky(rest)
            } else if let Some(rest) = s.strip_prefix("leaky_relu ") {
                leaky(rest)
            } else {
                Err(format!("unknown activation `{s}` (relu, leaky_relu, tanh, identity)"))
            }
        }
    }
}

fn push_row(buf: &mut String, row: &[f64]) {
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            buf.push(' ');
        }
        write!(buf, "{v}").unwrap();
    }
    buf.push('\n');
}

pub fn write_mlp<W: Write>(m: &Mlp, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "layers {}", m.layers().len())?;
    let mut buf = String::new();
    for l in m.layers() {
        buf.clear();
        writeln!(buf, "layer {} {} {}", l.in_dim(), l.out_dim(), activation_token(l.activation)).unwrap();
        for r in 0..l.weights.rows() {
            push_row(&mut buf, l.weights.row(r));
        }
        push_row(&mut buf, &l.bias);
        out.write_all(buf.as_bytes())?;
    }
    out.flush()
}

pub fn save_mlp(m: &Mlp, path: &Path) -> Result<()> {
    write_mlp(m, create(path)?).map_err(|e| Error::io(path, e))
}

struct Lines<'p, R> {
    inner: std::iter::Enumerate<std::io::Lines<R>>,
    path: &'p Path,
    line: usize,
}

impl<R: BufRead> Lines<'_, R> {
    fn next(&mut self) -> Result<String> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                l.map_err(|e| Error::io(self.path, e))
            }
            None => Err(self.err("unexpected end of checkpoint")),
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.path, self.line, msg)
    }

    fn row(&mut self, n: usize) -> Result<Vec<f64>> {
        let line = self.next()?;
        let vals = line
            .split_whitespace()
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| self.err("non-numeric parameter"))?;
        if vals.len() != n {
            return Err(self.err(format!("expected {n} values, found {}", vals.len())));
        }
        Ok(vals)
    }
}

pub fn read_mlp<R: BufRead>(reader: R, path: &Path) -> Result<Mlp> {
    let mut lines = Lines {
        inner: reader.lines().enumerate(),
        path,
        line: 0,
    };
    if lines.next()?.trim() != MAGIC {
        return Err(lines.err("not a lexspec network checkpoint"));
    }
    let count: usize = lines
        .next()?
        .strip_prefix("layers ")
        .and_then(|n| n.trim().parse().ok())
        .ok_or_else(|| lines.err("expected `layers <count>`"))?;
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let header = lines.next()?;
        let mut f = header.splitn(4, ' ');
        let (Some("layer"), Some(i), Some(o), Some(act)) = (f.next(), f.next(), f.next(), f.next()) else {
            return Err(lines.err("expected `layer <in> <out> <activation>`"));
        };
        let (inp, outp): (usize, usize) = match (i.parse(), o.parse()) {
            (Ok(i), Ok(o)) => (i, o),
            _ => return Err(lines.err("bad layer shape")),
        };
        let activation = parse_activation(act).map_err(|m| lines.err(m))?;
        let mut data = Vec::with_capacity(inp * outp);
        for _ in 0..outp {
            data.extend(lines.row(inp)?);
        }
        let bias = lines.row(outp)?;
        layers.push(Dense {
            weights: Matrix::from_vec(outp, inp, data)?,
            bias,
            activation,
        });
    }
    Ok(Mlp::from_layers(layers)?)
}

pub fn load_mlp(path: &Path) -> Result<Mlp> {
    read_mlp(open(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use lexspec_core::nn::MlpSpec;
    use rand::SeedableRng;

    #[test]
    fn activation_names() {
        for a in [Activation::Relu, Activation::Tanh, Activation::Identity, Activation::LeakyRelu(0.05)] {
            assert_eq!(parse_activation(&activation_token(a)).unwrap(), a);
        }
        assert_eq!(parse_activation("leaky_relu(0.1)").unwrap(), Activation::LeakyRelu(0.1));
        assert!(parse_activation("sigmoid").is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let spec = MlpSpec::new(5, &[7, 3], Activation::LeakyRelu(0.2), 5, Activation::Identity);
        let m = Mlp::init(&spec, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_mlp(&m, &mut buf).unwrap();
        let back = read_mlp(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn truncated_checkpoint() {
        let mut buf = Vec::new();
        write_mlp(&Mlp::identity(3), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(4).map(|l| format!("{l}\n")).collect();
        assert!(matches!(read_mlp(cut.as_bytes(), Path::new("mem")), Err(Error::Parse { .. })));
        assert!(read_mlp("garbage\n".as_bytes(), Path::new("mem")).is_err());
    }
}
