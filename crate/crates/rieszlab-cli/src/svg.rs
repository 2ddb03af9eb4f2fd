//! Minimal static SVG writer: scatter, line and bar primitives with fixed
//! decimal formatting so output is byte-stable across runs.

use std::fmt::Write;

pub struct Svg {
    body: String,
    width: f64,
    height: f64,
}

const MARGIN: f64 = 40.0;

fn fmt(x: f64) -> String {
    format!("{x:.3}")
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        Self { body: String::new(), width, height }
    }

    fn map(&self, x: f64, y: f64, bounds: (f64, f64, f64, f64)) -> (f64, f64) {
        let (x0, x1, y0, y1) = bounds;
        let sx = (self.width - 2.0 * MARGIN) / (x1 - x0).max(1e-300);
        let sy = (self.height - 2.0 * MARGIN) / (y1 - y0).max(1e-300);
        (MARGIN + (x - x0) * sx, self.height - MARGIN - (y - y0) * sy)
    }

    pub fn scatter(&mut self, pts: &[(f64, f64)], bounds: (f64, f64, f64, f64), r: f64, color: &str) {
        for &(x, y) in pts {
            let (px, py) = self.map(x, y, bounds);
            let _ = write!(
                self.body,
                "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{color}\"/>",
                fmt(px),
                fmt(py),
                fmt(r)
            );
            self.body.push('\n');
        }
    }

    pub fn circles(&mut self, pts: &[(f64, f64, f64)], bounds: (f64, f64, f64, f64), color: &str) {
        let (x0, x1, _, _) = bounds;
        let sx = (self.width - 2.0 * MARGIN) / (x1 - x0).max(1e-300);
        for &(x, y, radius) in pts {
            let (px, py) = self.map(x, y, bounds);
            let _ = write!(
                self.body,
                "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"0.8\"/>",
                fmt(px),
                fmt(py),
                fmt(radius * sx)
            );
            self.body.push('\n');
        }
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], bounds: (f64, f64, f64, f64), color: &str) {
        let mut coords = String::new();
        for &(x, y) in pts {
            let (px, py) = self.map(x, y, bounds);
            let _ = write!(coords, "{},{} ", fmt(px), fmt(py));
        }
        let _ = write!(
            self.body,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            coords.trim_end()
        );
        self.body.push('\n');
    }

    pub fn bars(&mut self, values: &[(String, f64)], color: &str) {
        if values.is_empty() {
            return;
        }
        let vmax = values.iter().map(|v| v.1).fold(0.0f64, f64::max).max(1e-300);
        let w = (self.width - 2.0 * MARGIN) / values.len() as f64;
        for (i, (label, v)) in values.iter().enumerate() {
            let h = (self.height - 2.0 * MARGIN) * v / vmax;
            let x = MARGIN + i as f64 * w;
            let y = self.height - MARGIN - h;
            let _ = write!(
                self.body,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{color}\"/>",
                fmt(x + 0.1 * w),
                fmt(y),
                fmt(0.8 * w),
                fmt(h)
            );
            self.body.push('\n');
            let _ = write!(
                self.body,
                "<text x=\"{}\" y=\"{}\" font-size=\"9\" text-anchor=\"middle\">{label}</text>",
                fmt(x + 0.5 * w),
                fmt(self.height - MARGIN + 12.0)
            );
            self.body.push('\n');
        }
    }

    pub fn text(&mut self, x: f64, y: f64, s: &str) {
        let _ = write!(self.body, "<text x=\"{}\" y=\"{}\" font-size=\"11\">{s}</text>", fmt(x), fmt(y));
        self.body.push('\n');
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            fmt(self.width),
            fmt(self.height),
            fmt(self.width),
            fmt(self.height),
            self.body
        )
    }
}
