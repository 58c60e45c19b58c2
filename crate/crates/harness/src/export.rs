//! CSV and SVG output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::HarnessError;
use crate::run::{RunRecord, Row};

pub const CSV_HEADER: [&str; 13] = [
    "t", "j", "px", "py", "theta", "eta1", "eta2", "ux", "uy", "V", "mu", "dobs", "ddest",
];

/// 17 significant digits, enough to round-trip an `f64`.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn csv_fields(r: &Row) -> [String; 13] {
    [
        num(r.t),
        r.j.to_string(),
        num(r.px),
        num(r.py),
        opt(r.theta),
        opt(r.eta.map(|e| e[0])),
        opt(r.eta.map(|e| e[1])),
        num(r.u[0]),
        num(r.u[1]),
        num(r.v),
        opt(r.mu),
        num(r.dobs),
        num(r.ddest),
    ]
}

pub fn csv_bytes(record: &RunRecord) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in &record.rows {
        w.write_record(csv_fields(r))?;
    }
    w.into_inner()
        .map_err(|e| HarnessError::Csv(csv::Error::from(e.into_error())))
}

pub fn export_csv(record: &RunRecord, path: impl AsRef<Path>) -> Result<(), HarnessError> {
    if record.rows.is_empty() {
        return Err(HarnessError::EmptyRecord(record.name.clone()));
    }
    let path = path.as_ref();
    fs::write(path, csv_bytes(record)?).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Top-down view: obstacle disk, ε-shell, barrier activation circle,
/// destination marker and trajectory.
pub fn svg_string(record: &RunRecord) -> String {
    let w = &record.world;
    let outer = w.r_o + w.r_s;
    let mut lo = [w.p_o[0] - outer, w.p_o[1] - outer];
    let mut hi = [w.p_o[0] + outer, w.p_o[1] + outer];
    let mut grow = |x: f64, y: f64| {
        lo = [lo[0].min(x), lo[1].min(y)];
        hi = [hi[0].max(x), hi[1].max(y)];
    };
    grow(w.p_d[0], w.p_d[1]);
    for r in &record.rows {
        grow(r.px, r.py);
    }
    let pad = 0.05 * (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1.0);
    let (x0, y0) = (lo[0] - pad, lo[1] - pad);
    let (width, height) = (hi[0] - lo[0] + 2.0 * pad, hi[1] - lo[1] + 2.0 * pad);
    let scale = 800.0 / width.max(height);
    // world y grows upward, SVG y downward
    let sx = |x: f64| (x - x0) * scale;
    let sy = |y: f64| (height - (y - y0)) * scale;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.1}" height="{:.1}" viewBox="0 0 {:.1} {:.1}">"#,
        width * scale,
        height * scale,
        width * scale,
        height * scale
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let circle = |s: &mut String, r: f64, style: &str, id: &str| {
        let _ = writeln!(
            s,
            r#"<circle id="{id}" cx="{:.3}" cy="{:.3}" r="{:.3}" {style}/>"#,
            sx(w.p_o[0]),
            sy(w.p_o[1]),
            r * scale
        );
    };
    circle(&mut s, w.r_o + w.r_s, r##"fill="none" stroke="#999" stroke-dasharray="4 4""##, "barrier");
    circle(&mut s, w.r_o + w.epsilon, r##"fill="#f4d0d0" stroke="#c66""##, "shell");
    circle(&mut s, w.r_o, r##"fill="#555""##, "obstacle");
    let _ = writeln!(
        s,
        r##"<circle id="destination" cx="{:.3}" cy="{:.3}" r="5" fill="#2a2"/>"##,
        sx(w.p_d[0]),
        sy(w.p_d[1])
    );
    let points: Vec<String> = record
        .rows
        .iter()
        .map(|r| format!("{:.3},{:.3}", sx(r.px), sy(r.py)))
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline id="trajectory" fill="none" stroke="#1f5fbf" stroke-width="2" points="{}"/>"##,
        points.join(" ")
    );
    for jl in &record.jumps {
        if let Some(r) = record.rows.iter().find(|r| r.j == jl.j + 1) {
            let _ = writeln!(
                s,
                r##"<circle class="jump" cx="{:.3}" cy="{:.3}" r="4" fill="none" stroke="#d80"/>"##,
                sx(r.px),
                sy(r.py)
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="10" y="20" font-family="monospace" font-size="14">{} ({})</text>"#,
        record.name, record.controller
    );
    s.push_str("</svg>\n");
    s
}

pub fn export_svg(record: &RunRecord, path: impl AsRef<Path>) -> Result<(), HarnessError> {
    if record.rows.is_empty() {
        return Err(HarnessError::EmptyRecord(record.name.clone()));
    }
    let path = path.as_ref();
    fs::write(path, svg_string(record)).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}
