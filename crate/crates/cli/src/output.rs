//! CSV table and SVG plot of the signal records.

use std::fmt::Write as _;
use std::path::Path;

use btfem::SignalRecord;

use crate::config::TESLA_PER_METER;
use crate::error::CliError;

pub const CSV_HEADER: &str = "b,g,S_re,S_im,attenuation";

/// One row per record in input order; `b` in s/mm², `g` in T/m.
pub fn csv_string(records: &[SignalRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        let row = [r.b, r.g / TESLA_PER_METER, r.signal.re, r.signal.im, r.attenuation].map(number);
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

/// Shortest round-trip text; exponent notation outside `[1e-4, 1e15)`.
fn number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Output { path: path.display().to_string(), source })
}

pub fn write_csv(records: &[SignalRecord], path: &Path) -> Result<(), CliError> {
    write_file(path, &csv_string(records))
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

/// Attenuation against b as a static SVG 1.1 document.
pub fn svg_string(records: &[SignalRecord], log_y: bool) -> String {
    let mut pts: Vec<(f64, f64)> = records.iter().map(|r| (r.b, r.attenuation)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if log_y {
        pts.retain(|p| p.1 > 0.0);
    }
    let b_max = pts.iter().map(|p| p.0).fold(0.0, f64::max).max(1.0);
    let (y_lo, y_hi) = if log_y {
        let lo = pts.iter().map(|p| p.1.log10()).fold(0.0, f64::min).floor().min(-1.0);
        (lo, 0.0)
    } else {
        (0.0, pts.iter().map(|p| p.1).fold(1.0, f64::max))
    };
    let sx = |b: f64| MARGIN + b / b_max * (WIDTH - 2.0 * MARGIN);
    let sy = |a: f64| {
        let v = if log_y { a.log10() } else { a };
        HEIGHT - MARGIN - (v - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN)
    };

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(s, r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" stroke="black" fill="none"/>"#);
    for i in 0..=4 {
        let b = b_max * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
            sx(b),
            y0 + 18.0,
            trim(b)
        );
    }
    if log_y {
        let mut e = y_lo as i32;
        while e <= 0 {
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="end">1e{e}</text>"#,
                x0 - 6.0,
                sy(10f64.powi(e)) + 4.0
            );
            e += 1;
        }
    } else {
        for i in 0..=4 {
            let a = y_hi * i as f64 / 4.0;
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="end">{}</text>"#,
                x0 - 6.0,
                sy(a) + 4.0,
                trim(a)
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">b (s/mm²)</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 15 {:.1})">attenuation</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    let line: Vec<String> = pts.iter().map(|&(b, a)| format!("{:.2},{:.2}", sx(b), sy(a))).collect();
    let _ = writeln!(s, r#"<polyline points="{}" stroke="steelblue" stroke-width="2" fill="none"/>"#, line.join(" "));
    for &(b, a) in &pts {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, sx(b), sy(a));
    }
    s.push_str("</svg>\n");
    s
}

fn trim(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn emit_svg(records: &[SignalRecord], path: &Path, log_y: bool) -> Result<(), CliError> {
    write_file(path, &svg_string(records, log_y))
}
