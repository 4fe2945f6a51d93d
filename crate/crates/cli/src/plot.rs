//! Minimal static SVG output: one panel per frame, or two orthogonal views
//! of a reconstructed curve.

use std::fmt::Write;

const SIZE: f64 = 400.0;
const MARGIN: f64 = 20.0;

/// Axis-aligned bounds mapped onto the square canvas with equal scale.
struct Viewport {
    min: [f64; 2],
    scale: f64,
    offset: [f64; 2],
}

impl Viewport {
    fn fit(points: impl Iterator<Item = [f64; 2]>) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        if !lo[0].is_finite() {
            (lo, hi) = ([-1.0; 2], [1.0; 2]);
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
        let scale = (SIZE - 2.0 * MARGIN) / span;
        // Center the shorter axis.
        let offset = [
            MARGIN + 0.5 * (span - (hi[0] - lo[0])) * scale,
            MARGIN + 0.5 * (span - (hi[1] - lo[1])) * scale,
        ];
        Self { min: lo, scale, offset }
    }

    /// Canvas coordinates, y pointing up.
    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        (
            self.offset[0] + (p[0] - self.min[0]) * self.scale,
            SIZE - (self.offset[1] + (p[1] - self.min[1]) * self.scale),
        )
    }

    fn polyline(&self, out: &mut String, pts: &[[f64; 2]], style: &str) {
        let coords: Vec<String> = pts
            .iter()
            .map(|p| {
                let (x, y) = self.map(*p);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            out,
            r#"  <polyline fill="none" {style} points="{}"/>"#,
            coords.join(" ")
        );
    }

    fn dot(&self, out: &mut String, p: [f64; 2], fill: &str) {
        let (x, y) = self.map(p);
        let _ = writeln!(out, r#"  <circle cx="{x:.3}" cy="{y:.3}" r="3.5" fill="{fill}"/>"#);
    }
}

fn open(width: f64, title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{SIZE}\" viewBox=\"0 0 {width} {SIZE}\">\n  <rect width=\"{width}\" height=\"{SIZE}\" fill=\"white\"/>\n  <text x=\"8\" y=\"16\" font-family=\"sans-serif\" font-size=\"13\">{title}</text>\n"
    )
}

/// One frame: the curve image, both tracked endpoints and short segments
/// along their tangent directions.
pub fn frame_svg(
    index: usize,
    curve: &[[f64; 2]],
    a: [f64; 2],
    b: [f64; 2],
    tan_a: [f64; 2],
    tan_b: [f64; 2],
) -> String {
    let reach = 0.25 * ((b[0] - a[0]).hypot(b[1] - a[1]));
    let segment = |p: [f64; 2], d: [f64; 2]| {
        let n = d[0].hypot(d[1]).max(1e-300);
        [p, [p[0] + d[0] / n * reach, p[1] + d[1] / n * reach]]
    };
    let (sa, sb) = (segment(a, tan_a), segment(b, tan_b));
    let vp = Viewport::fit(curve.iter().chain(&sa).chain(&sb).copied());
    let mut out = open(SIZE, &format!("frame {index}"));
    vp.polyline(&mut out, curve, r##"stroke="#1f4e9c" stroke-width="1.5""##);
    vp.polyline(&mut out, &sa, r##"stroke="#c0392b" stroke-width="1""##);
    vp.polyline(&mut out, &sb, r##"stroke="#c0392b" stroke-width="1""##);
    vp.dot(&mut out, a, "#c0392b");
    vp.dot(&mut out, b, "#27ae60");
    out.push_str("</svg>\n");
    out
}

/// Top (x, y) and side (x, z) views of a reconstructed curve side by side.
pub fn reconstruction_svg(points: &[[f64; 3]], mirror_flag: &str) -> String {
    let mut out = open(2.0 * SIZE, &format!("reconstruction (mirror: {mirror_flag})"));
    for (panel, (label, axis)) in [("x-y", 1usize), ("x-z", 2usize)].into_iter().enumerate() {
        let pts: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p[axis]]).collect();
        let vp = Viewport::fit(pts.iter().copied());
        let shift = panel as f64 * SIZE;
        let _ = writeln!(out, r#"  <g transform="translate({shift} 0)">"#);
        let _ = writeln!(
            out,
            r#"  <text x="8" y="{}" font-family="sans-serif" font-size="12">{label}</text>"#,
            SIZE - 8.0
        );
        vp.polyline(&mut out, &pts, r##"stroke="#1f4e9c" stroke-width="1.5""##);
        if let (Some(first), Some(last)) = (pts.first(), pts.last()) {
            vp.dot(&mut out, *first, "#c0392b");
            vp.dot(&mut out, *last, "#27ae60");
        }
        out.push_str("  </g>\n");
    }
    out.push_str("</svg>\n");
    out
}
