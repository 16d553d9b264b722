//! CSV and SVG emission.
//!
//! Every CSV has a header row and a fixed column order; floats are written
//! in shortest round-trip decimal so reruns are byte-comparable. The SVG
//! writer is a minimal rect-grid heatmap with a 256-entry color ramp that
//! linearly interpolates RGB from (32, 32, 90) to (255, 224, 64); NaN cells
//! render gray.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;

/// Shortest round-trip decimal; NaN prints as `NaN`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    fs::write(path, render_csv(header, rows))?;
    Ok(())
}

pub fn render_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = String::new();
    s.push_str(&header.join(","));
    s.push('\n');
    for row in rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

const RAMP_LOW: (f64, f64, f64) = (32.0, 32.0, 90.0);
const RAMP_HIGH: (f64, f64, f64) = (255.0, 224.0, 64.0);
const RAMP_STEPS: usize = 256;

fn ramp_color(t: f64) -> (u8, u8, u8) {
    // quantize to the 256-entry ramp
    let idx = ((t.clamp(0.0, 1.0) * (RAMP_STEPS - 1) as f64).round()) / (RAMP_STEPS - 1) as f64;
    let lerp = |a: f64, b: f64| (a + (b - a) * idx).round() as u8;
    (
        lerp(RAMP_LOW.0, RAMP_HIGH.0),
        lerp(RAMP_LOW.1, RAMP_HIGH.1),
        lerp(RAMP_LOW.2, RAMP_HIGH.2),
    )
}

/// Row-major grid heatmap. `values[r * cols + c]` fills the cell at row r,
/// column c, with row 0 at the top. Values are min-max normalized over the
/// finite entries unless an explicit (min, max) is given.
pub fn render_heatmap_svg(values: &[f64], rows: usize, cols: usize, range: Option<(f64, f64)>) -> String {
    assert_eq!(values.len(), rows * cols, "grid size mismatch");
    let (mut lo, mut hi) = range.unwrap_or((f64::INFINITY, f64::NEG_INFINITY));
    if range.is_none() {
        for &v in values {
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    let cell = 8usize;
    let (w, h) = (cols * cell, rows * cell);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    for r in 0..rows {
        for c in 0..cols {
            let v = values[r * cols + c];
            let fill = if v.is_finite() {
                let (cr, cg, cb) = ramp_color((v - lo) / span);
                format!("#{cr:02x}{cg:02x}{cb:02x}")
            } else {
                "#808080".to_string()
            };
            let _ = writeln!(
                s,
                "<rect x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" fill=\"{fill}\"/>",
                c * cell,
                r * cell
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_heatmap_svg(
    path: &Path,
    values: &[f64],
    rows: usize,
    cols: usize,
    range: Option<(f64, f64)>,
) -> Result<()> {
    fs::write(path, render_heatmap_svg(values, rows, cols, range))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_bytes_are_stable() {
        let rows = vec![
            vec!["a".to_string(), fmt_f64(0.1)],
            vec!["b".to_string(), fmt_f64(f64::NAN)],
        ];
        let x = render_csv(&["name", "value"], &rows);
        let y = render_csv(&["name", "value"], &rows);
        assert_eq!(x, y);
        assert!(x.starts_with("name,value\n"));
        assert!(x.contains("b,NaN"));
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 123456.789, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn svg_contains_one_rect_per_cell() {
        let svg = render_heatmap_svg(&[0.0, 0.5, f64::NAN, 1.0], 2, 2, None);
        assert_eq!(svg.matches("<rect").count(), 4);
        assert!(svg.contains("#808080"), "NaN cell renders gray");
    }

    #[test]
    fn ramp_endpoints() {
        assert_eq!(ramp_color(0.0), (32, 32, 90));
        assert_eq!(ramp_color(1.0), (255, 224, 64));
    }
}
