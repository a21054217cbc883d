//! Bare-bones SVG heatmap with an outline around cells above a threshold.

use std::fmt::Write;

pub struct Heatmap {
    pub rows: usize,
    pub cols: usize,
    /// Row-major values in [0, 1]; row 0 is drawn at the bottom.
    pub values: Vec<f64>,
    pub x_label: String,
    pub y_label: String,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub title: String,
    pub threshold: f64,
}

const CELL: f64 = 20.0;
const LEFT: f64 = 70.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

// A few stops of a perceptual dark-blue to yellow ramp.
const RAMP: [(f64, [u8; 3]); 5] = [
    (0.0, [68, 1, 84]),
    (0.25, [59, 82, 139]),
    (0.5, [33, 145, 140]),
    (0.75, [94, 201, 98]),
    (1.0, [253, 231, 37]),
];

fn color(v: f64) -> String {
    let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let k = RAMP.iter().position(|&(s, _)| s >= v).unwrap_or(RAMP.len() - 1).max(1);
    let (s0, c0) = RAMP[k - 1];
    let (s1, c1) = RAMP[k];
    let t = if s1 > s0 { (v - s0) / (s1 - s0) } else { 0.0 };
    let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(c0[0], c1[0]), mix(c0[1], c1[1]), mix(c0[2], c1[2]))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Heatmap {
    fn inside(&self, r: isize, c: isize) -> bool {
        r >= 0
            && c >= 0
            && (r as usize) < self.rows
            && (c as usize) < self.cols
            && self.values[r as usize * self.cols + c as usize] >= self.threshold
    }

    pub fn render(&self) -> String {
        let w = LEFT + self.cols as f64 * CELL + 20.0;
        let h = TOP + self.rows as f64 * CELL + BOTTOM;
        let x0 = LEFT;
        let y0 = TOP + self.rows as f64 * CELL;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"11\">"
        );
        let _ = writeln!(s, "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">{}</text>", w / 2.0, escape(&self.title));
        for r in 0..self.rows {
            for c in 0..self.cols {
                let v = self.values[r * self.cols + c];
                let _ = writeln!(
                    s,
                    "<rect class=\"cell\" x=\"{}\" y=\"{}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{}\"><title>{v:.4}</title></rect>",
                    x0 + c as f64 * CELL,
                    y0 - (r + 1) as f64 * CELL,
                    color(v)
                );
            }
        }
        // Boundary edges of the region at or above the threshold.
        let mut d = String::new();
        for r in 0..self.rows as isize {
            for c in 0..self.cols as isize {
                if !self.inside(r, c) {
                    continue;
                }
                let left = x0 + c as f64 * CELL;
                let right = left + CELL;
                let bottom = y0 - r as f64 * CELL;
                let top = bottom - CELL;
                if !self.inside(r - 1, c) {
                    let _ = write!(d, "M{left} {bottom}H{right}");
                }
                if !self.inside(r + 1, c) {
                    let _ = write!(d, "M{left} {top}H{right}");
                }
                if !self.inside(r, c - 1) {
                    let _ = write!(d, "M{left} {top}V{bottom}");
                }
                if !self.inside(r, c + 1) {
                    let _ = write!(d, "M{right} {top}V{bottom}");
                }
            }
        }
        if !d.is_empty() {
            let _ = writeln!(s, "<path class=\"threshold\" d=\"{d}\" fill=\"none\" stroke=\"white\" stroke-width=\"2\"/>");
        }
        let _ = writeln!(s, "<text x=\"{x0}\" y=\"{}\">{}</text>", y0 + 14.0, self.x_range.0);
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>",
            x0 + self.cols as f64 * CELL,
            y0 + 14.0,
            self.x_range.1
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            x0 + self.cols as f64 * CELL / 2.0,
            y0 + 34.0,
            escape(&self.x_label)
        );
        let _ = writeln!(s, "<text x=\"{}\" y=\"{y0}\" text-anchor=\"end\">{}</text>", x0 - 4.0, self.y_range.0);
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>", x0 - 4.0, TOP + 10.0, self.y_range.1);
        let _ = writeln!(
            s,
            "<text transform=\"translate(14 {}) rotate(-90)\" text-anchor=\"middle\">{}</text>",
            TOP + self.rows as f64 * CELL / 2.0,
            escape(&self.y_label)
        );
        s.push_str("</svg>\n");
        s
    }
}
