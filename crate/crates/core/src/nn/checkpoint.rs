//! Plain-text network checkpoints.
//!
//! One document holds the spec followed by named per-layer sections with
//! row-major decimal values. Floats are written in Rust's shortest
//! round-trip form, so a save/load cycle is value-exact.
//!
//! ```text
//! pars-mlp v1
//! input_dim 2
//! hidden_dims 256,256
//! output_dim 1
//! activation relu
//! use_ln true
//! ln_eps 0.00001
//! layer 0 w 256 2
//! <one line per row>
//! layer 0 b 256
//! <one line>
//! layer 0 ln_scale 256
//! layer 0 ln_shift 256
//! ...
//! end
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, Layer, LnAffine, MlpParams, MlpSpec};
use crate::error::{Error, Result};

const MAGIC: &str = "pars-mlp v1";

pub fn save_mlp(params: &MlpParams, path: &Path) -> Result<()> {
    fs::write(path, render_mlp(params))?;
    Ok(())
}

pub fn render_mlp(params: &MlpParams) -> String {
    let spec = &params.spec;
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "input_dim {}", spec.input_dim);
    let dims: Vec<String> = spec.hidden_dims.iter().map(|d| d.to_string()).collect();
    let _ = writeln!(s, "hidden_dims {}", dims.join(","));
    let _ = writeln!(s, "output_dim {}", spec.output_dim);
    let _ = writeln!(s, "activation {}", spec.activation.name());
    let _ = writeln!(s, "use_ln {}", spec.use_ln);
    let _ = writeln!(s, "ln_eps {}", spec.ln_eps);
    for (i, layer) in params.layers.iter().enumerate() {
        let (rows, cols) = layer.w.dim();
        let _ = writeln!(s, "layer {i} w {rows} {cols}");
        for row in layer.w.rows() {
            let _ = writeln!(s, "{}", join_floats(row.iter()));
        }
        let _ = writeln!(s, "layer {i} b {}", layer.b.len());
        let _ = writeln!(s, "{}", join_floats(layer.b.iter()));
        if let Some(ln) = &layer.ln {
            let _ = writeln!(s, "layer {i} ln_scale {}", ln.scale.len());
            let _ = writeln!(s, "{}", join_floats(ln.scale.iter()));
            let _ = writeln!(s, "layer {i} ln_shift {}", ln.shift.len());
            let _ = writeln!(s, "{}", join_floats(ln.shift.iter()));
        }
    }
    s.push_str("end\n");
    s
}

fn join_floats<'a>(vals: impl Iterator<Item = &'a f64>) -> String {
    let mut out = String::new();
    for (i, v) in vals.enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
    }
    out
}

pub fn load_mlp(path: &Path) -> Result<MlpParams> {
    let text = fs::read_to_string(path)?;
    parse_mlp(&text)
}

struct Lines<'a> {
    iter: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        self.line_no += 1;
        self.iter.next().ok_or(Error::Parse {
            line: self.line_no,
            message: "unexpected end of file".into(),
        })
    }
}

pub fn parse_mlp(text: &str) -> Result<MlpParams> {
    let mut lines = Lines {
        iter: text.lines(),
        line_no: 0,
    };
    let err = |line: usize, message: String| Error::Parse { line, message };

    if lines.next()? != MAGIC {
        return Err(err(1, format!("expected header `{MAGIC}`")));
    }
    let input_dim: usize = parse_kv(&mut lines, "input_dim")?;
    let hidden_str: String = parse_kv(&mut lines, "hidden_dims")?;
    let hidden_dims = hidden_str
        .split(',')
        .map(|p| {
            p.parse::<usize>().map_err(|_| Error::Parse {
                line: 3,
                message: format!("bad hidden dim `{p}`"),
            })
        })
        .collect::<Result<Vec<usize>>>()?;
    let output_dim: usize = parse_kv(&mut lines, "output_dim")?;
    let act_name: String = parse_kv(&mut lines, "activation")?;
    let activation = Activation::parse(&act_name).map_err(|_| Error::Parse {
        line: lines.line_no,
        message: format!("unknown activation `{act_name}`"),
    })?;
    let use_ln: bool = parse_kv(&mut lines, "use_ln")?;
    let ln_eps: f64 = parse_kv(&mut lines, "ln_eps")?;

    let spec = MlpSpec {
        input_dim,
        hidden_dims,
        output_dim,
        activation,
        use_ln,
        ln_eps,
    };
    spec.validate().map_err(|e| Error::Parse {
        line: lines.line_no,
        message: format!("invalid spec: {e}"),
    })?;

    let n_hidden = spec.hidden_dims.len();
    let mut layers = Vec::with_capacity(spec.n_layers());
    for (i, (fan_in, fan_out)) in spec.layer_dims().into_iter().enumerate() {
        let w = parse_matrix(&mut lines, i, "w", fan_out, fan_in)?;
        let b = parse_vector(&mut lines, i, "b", fan_out)?;
        let ln = if spec.use_ln && i < n_hidden {
            let scale = parse_vector(&mut lines, i, "ln_scale", fan_out)?;
            let shift = parse_vector(&mut lines, i, "ln_shift", fan_out)?;
            Some(LnAffine { scale, shift })
        } else {
            None
        };
        layers.push(Layer { w, b, ln });
    }
    let last = lines.next()?;
    if last != "end" {
        return Err(err(lines.line_no, format!("expected `end`, got `{last}`")));
    }
    Ok(MlpParams { spec, layers })
}

fn parse_kv<T: std::str::FromStr>(lines: &mut Lines, key: &str) -> Result<T> {
    let line = lines.next()?;
    let rest = line.strip_prefix(key).ok_or(Error::Parse {
        line: lines.line_no,
        message: format!("expected key `{key}`"),
    })?;
    rest.trim().parse::<T>().map_err(|_| Error::Parse {
        line: lines.line_no,
        message: format!("bad value for `{key}`"),
    })
}

fn parse_section_header(lines: &mut Lines, layer: usize, name: &str, expected_dims: &[usize]) -> Result<()> {
    let line = lines.next()?;
    let mut parts = line.split_whitespace();
    let ok = parts.next() == Some("layer")
        && parts.next() == Some(&layer.to_string())
        && parts.next() == Some(name)
        && expected_dims
            .iter()
            .all(|d| parts.next() == Some(&d.to_string()))
        && parts.next().is_none();
    if !ok {
        return Err(Error::Parse {
            line: lines.line_no,
            message: format!(
                "expected section `layer {layer} {name} {}`, got `{line}`",
                expected_dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ")
            ),
        });
    }
    Ok(())
}

fn parse_floats(lines: &mut Lines, n: usize) -> Result<Vec<f64>> {
    let line = lines.next()?;
    let vals = line
        .split(' ')
        .map(|p| {
            p.parse::<f64>().map_err(|_| Error::Parse {
                line: lines.line_no,
                message: format!("bad float `{p}`"),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    if vals.len() != n {
        return Err(Error::Parse {
            line: lines.line_no,
            message: format!("expected {n} values, got {}", vals.len()),
        });
    }
    Ok(vals)
}

fn parse_matrix(lines: &mut Lines, layer: usize, name: &str, rows: usize, cols: usize) -> Result<Array2<f64>> {
    parse_section_header(lines, layer, name, &[rows, cols])?;
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        data.extend(parse_floats(lines, cols)?);
    }
    Ok(Array2::from_shape_vec((rows, cols), data).expect("dims agree"))
}

fn parse_vector(lines: &mut Lines, layer: usize, name: &str, len: usize) -> Result<Array1<f64>> {
    parse_section_header(lines, layer, name, &[len])?;
    Ok(Array1::from_vec(parse_floats(lines, len)?))
}
