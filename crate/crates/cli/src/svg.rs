//! Minimal deterministic SVG charts.
//!
//! A [`Figure`] records every number it draws, in the exact string form it
//! draws it, into a long-format table (`element,series,key,x,y,value`). The
//! table is written next to the SVG, so nothing in a figure exists only in
//! the figure. Data values are carried as `data-*` attributes in full
//! precision; pixel geometry is layout, not data.

use std::fmt::Write as _;

pub const CSV_HEADER: [&str; 6] = ["element", "series", "key", "x", "y", "value"];

/// Shortest round-trip decimal form; the canonical string for data values.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn fixed(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    // "-0.00" would not round-trip to the value it labels.
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

pub fn fit_annotation(k: f64, r_squared: f64) -> (String, String, String) {
    let (k, r2) = (fixed(k, 2), fixed(r_squared, 2));
    (format!("k = {k}, R² = {r2}"), k, r2)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn px(v: f64) -> String {
    fixed(v, 2)
}

/// Axis range with evenly spaced round ticks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NiceScale {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    pub decimals: usize,
}

impl NiceScale {
    pub fn new(min: f64, max: f64) -> Self {
        let (min, max) = if (max - min).abs() < 1e-12 { (min - 0.5, max + 0.5) } else { (min, max) };
        let raw = (max - min) / 4.0;
        let mag = 10f64.powf(raw.log10().floor());
        let mantissa = [1.0, 2.0, 2.5, 5.0, 10.0].into_iter().find(|m| m * mag >= raw).unwrap_or(10.0);
        let step = mantissa * mag;
        let extra = usize::from(mantissa == 2.5);
        let decimals = (-(step.log10().floor()) as i64).max(0) as usize + extra;
        let lo = (min / step).floor() * step;
        let hi = (max / step).ceil() * step;
        Self { lo, hi, step, decimals }
    }

    /// Symmetric about zero, for correlations.
    pub fn symmetric(values: impl IntoIterator<Item = f64>) -> Self {
        let m = values.into_iter().fold(0.0f64, |m, v| m.max(v.abs())).max(0.1);
        Self::new(-m, m)
    }

    pub fn ticks(&self) -> Vec<(f64, String)> {
        let n = ((self.hi - self.lo) / self.step).round() as i64;
        let first = (self.lo / self.step).round() as i64;
        (0..=n)
            .map(|i| {
                let v = (first + i) as f64 * self.step;
                (v, fixed(v, self.decimals))
            })
            .collect()
    }
}

/// Plot area in pixels plus the data ranges mapped onto it.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub x: NiceScale,
    pub y: NiceScale,
}

impl Frame {
    pub fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.lo) / (self.x.hi - self.x.lo) * self.width
    }

    pub fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y.lo) / (self.y.hi - self.y.lo) * self.height
    }
}

pub struct Figure {
    width: f64,
    height: f64,
    body: String,
    rows: Vec<[String; 6]>,
}

impl Figure {
    pub fn new(title: &str, width: f64, height: f64) -> Self {
        let mut f = Self { width, height, body: String::new(), rows: Vec::new() };
        f.label(width / 2.0, 22.0, "middle", "title", title);
        f
    }

    fn record(&mut self, element: &str, series: &str, key: &str, x: &str, y: &str, value: &str) {
        self.rows.push([element, series, key, x, y, value].map(str::to_string));
    }

    /// Text containing no data values (titles, axis names, category labels).
    pub fn label(&mut self, x: f64, y: f64, anchor: &str, class: &str, text: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{}" y="{}" text-anchor="{anchor}" class="{class}">{}</text>"#,
            px(x),
            px(y),
            escape(text)
        );
    }

    /// Category label drawn rotated, for crowded heatmap columns.
    pub fn label_rotated(&mut self, x: f64, y: f64, text: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{0}" y="{1}" transform="rotate(-60 {0} {1})" text-anchor="end" class="category">{2}</text>"#,
            px(x),
            px(y),
            escape(text)
        );
    }

    /// Text that shows numbers; every number in it must be one of `values`.
    #[allow(clippy::too_many_arguments)]
    pub fn value_text(&mut self, x: f64, y: f64, anchor: &str, element: &str, series: &str, text: &str, values: &[(&str, &str)]) {
        for (key, v) in values {
            self.record(element, series, key, "", "", v);
        }
        let _ = writeln!(
            self.body,
            r#"<text x="{}" y="{}" text-anchor="{anchor}" class="{element}">{}</text>"#,
            px(x),
            px(y),
            escape(text)
        );
    }

    pub fn axes(&mut self, frame: &Frame, x_name: &str, y_name: &str) {
        let (l, t, w, h) = (frame.left, frame.top, frame.width, frame.height);
        let _ = writeln!(
            self.body,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
            px(l),
            px(t),
            px(w),
            px(h)
        );
        for (v, s) in frame.x.ticks() {
            let x = frame.px(v);
            self.record("tick", "x", "", &s, "", &s);
            let _ = writeln!(self.body, r##"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="#444"/>"##, px(x), px(t + h), px(t + h + 5.0));
            let _ = writeln!(self.body, r#"<text x="{}" y="{}" text-anchor="middle" class="tick">{s}</text>"#, px(x), px(t + h + 18.0));
        }
        for (v, s) in frame.y.ticks() {
            let y = frame.py(v);
            self.record("tick", "y", "", "", &s, &s);
            let _ = writeln!(self.body, r##"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="#444"/>"##, px(l - 5.0), px(y), px(l));
            let _ = writeln!(self.body, r#"<text x="{}" y="{}" text-anchor="end" class="tick">{s}</text>"#, px(l - 8.0), px(y + 4.0));
        }
        self.label(l + w / 2.0, t + h + 40.0, "middle", "axis", x_name);
        let _ = writeln!(
            self.body,
            r#"<text x="{0}" y="{1}" transform="rotate(-90 {0} {1})" text-anchor="middle" class="axis">{2}</text>"#,
            px(l - 48.0),
            px(t + h / 2.0),
            escape(y_name)
        );
    }

    pub fn point(&mut self, frame: &Frame, series: &str, key: &str, x: f64, y: f64, color: &str) {
        let (sx, sy) = (num(x), num(y));
        self.record("point", series, key, &sx, &sy, "");
        let _ = writeln!(
            self.body,
            r#"<circle cx="{}" cy="{}" r="3.5" fill="{color}" fill-opacity="0.8" data-series="{}" data-key="{}" data-x="{sx}" data-y="{sy}"/>"#,
            px(frame.px(x)),
            px(frame.py(y)),
            escape(series),
            escape(key)
        );
    }

    /// Straight segment between two data points, clipped to the frame.
    pub fn segment(&mut self, frame: &Frame, series: &str, a: (f64, f64), b: (f64, f64), style: &str) {
        let Some((a, b)) = clip(frame, a, b) else { return };
        let (ax, ay, bx, by) = (num(a.0), num(a.1), num(b.0), num(b.1));
        self.record("line", series, "start", &ax, &ay, "");
        self.record("line", series, "end", &bx, &by, "");
        let _ = writeln!(
            self.body,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" {style} data-series="{}" data-x1="{ax}" data-y1="{ay}" data-x2="{bx}" data-y2="{by}"/>"#,
            px(frame.px(a.0)),
            px(frame.py(a.1)),
            px(frame.px(b.0)),
            px(frame.py(b.1)),
            escape(series)
        );
    }

    pub fn polyline(&mut self, frame: &Frame, series: &str, pts: &[(f64, f64)], color: &str) {
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{},{}", px(frame.px(x)), px(frame.py(y)))).collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5" data-series="{}"/>"#,
            coords.join(" "),
            escape(series)
        );
    }

    /// Filled cell of a heatmap with its value printed inside.
    #[allow(clippy::too_many_arguments)]
    pub fn cell(&mut self, series: &str, key: &str, x: f64, y: f64, w: f64, h: f64, value: f64, fill: &str, decimals: usize) {
        let (v, label) = (num(value), fixed(value, decimals));
        self.record("cell", series, key, "", "", &v);
        self.record("cell_label", series, key, "", "", &label);
        let _ = writeln!(
            self.body,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="{fill}" stroke="#fff" data-series="{}" data-key="{}" data-value="{v}"/>"##,
            px(x),
            px(y),
            px(w),
            px(h),
            escape(series),
            escape(key)
        );
        if w >= 26.0 {
            let _ = writeln!(
                self.body,
                r#"<text x="{}" y="{}" text-anchor="middle" class="cell">{label}</text>"#,
                px(x + w / 2.0),
                px(y + h / 2.0 + 4.0)
            );
        }
    }

    pub fn svg(&self) -> String {
        let (w, h) = (px(self.width), px(self.height));
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#);
        s.push_str(r#"<style>.title{font-size:14px;font-weight:bold}.axis{font-size:12px}.cell{font-size:9px}</style>"#);
        s.push('\n');
        let _ = writeln!(s, r##"<rect width="{w}" height="{h}" fill="#fff"/>"##);
        s.push_str(&self.body);
        s.push_str("</svg>\n");
        s
    }

    pub fn csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// Liang–Barsky clip of a segment to the frame's data rectangle.
fn clip(frame: &Frame, a: (f64, f64), b: (f64, f64)) -> Option<((f64, f64), (f64, f64))> {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (p, q) in [
        (-dx, a.0 - frame.x.lo),
        (dx, frame.x.hi - a.0),
        (-dy, a.1 - frame.y.lo),
        (dy, frame.y.hi - a.1),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let t = q / p;
            if p < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
    }
    if t0 > t1 {
        return None;
    }
    let at = |t: f64| (a.0 + t * dx, a.1 + t * dy);
    Some((at(t0), at(t1)))
}

/// Blue–white–red for values in [-1, 1].
pub fn diverging(v: f64) -> String {
    let t = v.clamp(-1.0, 1.0);
    let (end, mid) = if t < 0.0 { ([59.0, 76.0, 192.0], [247.0, 247.0, 247.0]) } else { ([180.0, 4.0, 38.0], [247.0, 247.0, 247.0]) };
    let a = t.abs();
    let c: Vec<u8> = (0..3).map(|i| (mid[i] + (end[i] - mid[i]) * a).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// White to dark orange for values in [0, max].
pub fn sequential(v: f64, max: f64) -> String {
    let t = if max > 0.0 { (v / max).clamp(0.0, 1.0) } else { 0.0 };
    let (lo, hi) = ([255.0, 247.0, 236.0], [179.0, 88.0, 6.0]);
    let c: Vec<u8> = (0..3).map(|i| (lo[i] + (hi[i] - lo[i]) * t).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nice_scales() {
        let s = NiceScale::new(0.0, 1.0);
        assert_eq!((s.lo, s.hi, s.step, s.decimals), (0.0, 1.0, 0.25, 2));
        let t: Vec<String> = s.ticks().into_iter().map(|t| t.1).collect();
        assert_eq!(t, ["0.00", "0.25", "0.50", "0.75", "1.00"]);
        let s = NiceScale::symmetric([0.33, -0.12]);
        assert_eq!(s.ticks().first().unwrap().1, "-0.4");
        let s = NiceScale::new(1.12, 1.55);
        assert!(s.lo <= 1.12 && s.hi >= 1.55);
        let flat = NiceScale::new(2.0, 2.0);
        assert!(flat.lo < 2.0 && flat.hi > 2.0);
    }

    #[test]
    fn fixed_never_prints_negative_zero() {
        assert_eq!(fixed(-0.0001, 2), "0.00");
        assert_eq!(fixed(-0.5, 1), "-0.5");
    }

    #[test]
    fn clipping() {
        let f = Frame { left: 0.0, top: 0.0, width: 100.0, height: 100.0, x: NiceScale::new(0.0, 1.0), y: NiceScale::new(0.0, 1.0) };
        let (a, b) = clip(&f, (-1.0, -1.0), (2.0, 2.0)).unwrap();
        assert_eq!((a, b), ((0.0, 0.0), (1.0, 1.0)));
        assert!(clip(&f, (2.0, 0.0), (3.0, 1.0)).is_none());
    }

    #[test]
    fn colours() {
        assert_eq!(diverging(0.0), "#f7f7f7");
        assert_eq!(diverging(1.0), "#b40426");
        assert_eq!(diverging(-1.0), "#3b4cc0");
        assert_eq!(sequential(0.0, 1.0), "#fff7ec");
    }
}
