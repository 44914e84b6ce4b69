//! Deterministic SVG rendering of view models.

use std::fmt::Write;

use crate::views::{Items, Technique, ViewModel};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 40.0;

fn scale(v: f64, lo: f64, hi: f64, out_lo: f64, out_hi: f64) -> f64 {
    let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
    out_lo + t * (out_hi - out_lo)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn render(view: &ViewModel) -> String {
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" data-technique="{}">"#,
        view.technique.name()
    )
    .unwrap();
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    match (&view.technique, &view.items) {
        (Technique::ParallelCoordinates, Items::Polylines(lines)) => {
            let n = view.axes.len();
            let x_at = |i: usize| {
                if n > 1 {
                    MARGIN + i as f64 * (WIDTH - 2.0 * MARGIN) / (n - 1) as f64
                } else {
                    WIDTH / 2.0
                }
            };
            for (i, axis) in view.axes.iter().enumerate() {
                let x = x_at(i);
                writeln!(
                    out,
                    r#"<line x1="{x:.3}" y1="{MARGIN:.3}" x2="{x:.3}" y2="{:.3}" stroke="black"/>"#,
                    HEIGHT - MARGIN
                )
                .unwrap();
                writeln!(
                    out,
                    r#"<text x="{x:.3}" y="{:.3}" font-size="10" text-anchor="middle">{}</text>"#,
                    HEIGHT - MARGIN / 2.0,
                    escape(&axis.label)
                )
                .unwrap();
            }
            for line in lines {
                let pts: Vec<String> = line
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        format!("{:.3},{:.3}", x_at(i), scale(v, 0.0, 1.0, HEIGHT - MARGIN, MARGIN))
                    })
                    .collect();
                writeln!(
                    out,
                    r#"<polyline data-cod="{}" points="{}" fill="none" stroke="steelblue" stroke-opacity="0.6"/>"#,
                    line.cod,
                    pts.join(" ")
                )
                .unwrap();
            }
        }
        (Technique::Scatter, Items::Points(points)) => {
            let (xa, ya) = (&view.axes[0], &view.axes[1]);
            axes_frame(&mut out, &xa.label, &ya.label);
            for p in points {
                writeln!(
                    out,
                    r#"<circle data-cod="{}" cx="{:.3}" cy="{:.3}" r="3" fill="steelblue"/>"#,
                    p.cod,
                    scale(p.x, xa.min, xa.max, MARGIN, WIDTH - MARGIN),
                    scale(p.y, ya.min, ya.max, HEIGHT - MARGIN, MARGIN)
                )
                .unwrap();
            }
        }
        (Technique::Star, Items::Points(points)) => {
            let (cx, cy) = (WIDTH / 2.0, HEIGHT / 2.0);
            let radius = (HEIGHT / 2.0 - MARGIN) / 2.0;
            for (u, axis) in view.axis_vectors.iter().zip(&view.axes) {
                let (x, y) = (cx + u[0] * radius, cy - u[1] * radius);
                writeln!(
                    out,
                    r#"<line x1="{cx:.3}" y1="{cy:.3}" x2="{x:.3}" y2="{y:.3}" stroke="gray"/>"#
                )
                .unwrap();
                writeln!(
                    out,
                    r#"<text x="{x:.3}" y="{y:.3}" font-size="10">{}</text>"#,
                    escape(&axis.label)
                )
                .unwrap();
            }
            for p in points {
                writeln!(
                    out,
                    r#"<circle data-cod="{}" cx="{:.3}" cy="{:.3}" r="3" fill="steelblue"/>"#,
                    p.cod,
                    cx + p.x * radius,
                    cy - p.y * radius
                )
                .unwrap();
            }
        }
        (Technique::TableLens, Items::Rows(rows)) => {
            let n = view.axes.len().max(1);
            let col_w = (WIDTH - 2.0 * MARGIN) / n as f64;
            let row_h = ((HEIGHT - 2.0 * MARGIN) / rows.len().max(1) as f64).max(0.5);
            for (j, axis) in view.axes.iter().enumerate() {
                writeln!(
                    out,
                    r#"<text x="{:.3}" y="{:.3}" font-size="10">{}</text>"#,
                    MARGIN + j as f64 * col_w,
                    MARGIN - 8.0,
                    escape(&axis.label)
                )
                .unwrap();
            }
            for (i, row) in rows.iter().enumerate() {
                let y = MARGIN + i as f64 * row_h;
                for (j, &c) in row.cells.iter().enumerate() {
                    writeln!(
                        out,
                        r#"<rect data-cod="{}" x="{:.3}" y="{y:.3}" width="{:.3}" height="{row_h:.3}" fill="steelblue"/>"#,
                        row.cod,
                        MARGIN + j as f64 * col_w,
                        c * (col_w - 2.0)
                    )
                    .unwrap();
                }
            }
        }
        _ => {}
    }
    out.push_str("</svg>\n");
    out
}

fn axes_frame(out: &mut String, x_label: &str, y_label: &str) {
    writeln!(
        out,
        r#"<line x1="{MARGIN:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="black"/>"#,
        HEIGHT - MARGIN,
        WIDTH - MARGIN,
        HEIGHT - MARGIN
    )
    .unwrap();
    writeln!(
        out,
        r#"<line x1="{MARGIN:.3}" y1="{MARGIN:.3}" x2="{MARGIN:.3}" y2="{:.3}" stroke="black"/>"#,
        HEIGHT - MARGIN
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{:.3}" y="{:.3}" font-size="10" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - MARGIN / 4.0,
        escape(x_label)
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{:.3}" y="{:.3}" font-size="10">{}</text>"#,
        MARGIN / 4.0,
        MARGIN - 8.0,
        escape(y_label)
    )
    .unwrap();
}
