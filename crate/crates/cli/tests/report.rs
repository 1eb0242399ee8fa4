mod common;

use std::collections::HashSet;
use std::path::Path;

use regex::Regex;

use common::{baseline_config, run, write_config};
use structamp_cli::report::{scatter_figure, ReportError};
use structamp_core::reference::reference;
use structamp_core::stats::AmplificationFit;

fn fixture_fit() -> AmplificationFit<f64> {
    let h = &reference().headline;
    AmplificationFit { k: h.k, intercept: 0.0, r_squared: h.r_squared, n_points: 3, k_through_origin: h.k }
}

fn labels(n: usize) -> Vec<(String, String)> {
    (0..n).map(|i| ("O".to_string(), format!("s{i}"))).collect()
}

#[test]
fn fit_fixture_renders_the_published_annotation() {
    let fig = scatter_figure("t", "m", &labels(3), &[-0.3, 0.1, 0.4], &[-0.42, 0.14, 0.56], &fixture_fit(), "human r", "model r").unwrap();
    let svg = fig.svg();
    assert!(svg.contains(">k = 1.42, R² = 0.92</text>"), "{svg}");
    let csv = fig.csv();
    assert!(csv.contains("annotation,m,k,,,1.42"), "{csv}");
    assert!(csv.contains("annotation,m,r_squared,,,0.92"), "{csv}");
}

#[test]
fn empty_or_ragged_pairs_are_missing_artifacts() {
    let fit = fixture_fit();
    let e = scatter_figure("t", "m", &[], &[], &[], &fit, "x", "y").err().unwrap();
    assert!(matches!(e, ReportError::MissingArtifact(_)));
    let e = scatter_figure("t", "m", &labels(2), &[0.1, 0.2], &[0.1], &fit, "x", "y").err().unwrap();
    assert!(matches!(e, ReportError::MissingArtifact(_)));
}

/// Every number drawn in an SVG must be recoverable from its CSV.
fn cross_check(svg_path: &Path) {
    let svg = std::fs::read_to_string(svg_path).unwrap();
    let csv_path = svg_path.with_extension("csv");
    let mut rdr = csv::Reader::from_path(&csv_path).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), ["element", "series", "key", "x", "y", "value"]);
    let fields: HashSet<String> =
        rdr.records().flat_map(|r| r.unwrap().iter().map(str::to_string).collect::<Vec<_>>()).collect();

    let attr = Regex::new(r#"data-(?:x|y|x1|y1|x2|y2|value)="([^"]*)""#).unwrap();
    let mut checked = 0;
    for c in attr.captures_iter(&svg) {
        assert!(fields.contains(&c[1]), "{}: data value {} not in CSV", svg_path.display(), &c[1]);
        checked += 1;
    }
    let text = Regex::new(r#"<text [^>]*class="([^"]+)"[^>]*>([^<]*)</text>"#).unwrap();
    let number = Regex::new(r"-?\d+(?:\.\d+)?(?:e-?\d+)?").unwrap();
    for c in text.captures_iter(&svg) {
        if matches!(&c[1], "title" | "axis" | "category") {
            continue;
        }
        for n in number.find_iter(&c[2]) {
            // The superscript in "R²" is not a number token.
            assert!(fields.contains(n.as_str()), "{}: shown number {} not in CSV", svg_path.display(), n.as_str());
            checked += 1;
        }
    }
    assert!(checked > 0, "{}: nothing to check", svg_path.display());
}

#[test]
fn every_rendered_number_is_in_the_figure_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &baseline_config(200, 3));
    let (code, _, err) = run(&["run", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let reports = tmp.path().join("run/reports");
    let mut svgs: Vec<_> = std::fs::read_dir(&reports)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "svg"))
        .collect();
    svgs.sort();
    assert!(svgs.len() >= 8, "{svgs:?}");
    for p in &svgs {
        cross_check(p);
    }

    // The standalone verb re-renders the same bytes.
    let before: Vec<Vec<u8>> = svgs.iter().map(|p| std::fs::read(p).unwrap()).collect();
    let (code, out, err) = run(&["report", "--run-dir", tmp.path().join("run").to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.lines().count(), svgs.len());
    let after: Vec<Vec<u8>> = svgs.iter().map(|p| std::fs::read(p).unwrap()).collect();
    assert!(before == after);
}
