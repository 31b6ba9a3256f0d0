//! Trend tables and per-topic SVG line charts. Output depends only on the
//! trend records, so identical inputs give byte-identical files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use reliascan_core::surveillance::AlertRecord;
use reliascan_core::PeriodRange;

/// One row per topic, one `F` column per window (`window_start..window_end`).
/// Topics not scanned in a window get an empty cell.
pub fn pivot_table(records: &[AlertRecord], labels: &BTreeMap<String, String>) -> Vec<u8> {
    let windows: BTreeSet<PeriodRange> = records.iter().map(|r| r.window).collect();
    let mut by_topic: BTreeMap<&str, BTreeMap<PeriodRange, f64>> = BTreeMap::new();
    for r in records {
        by_topic.entry(&r.topic_id).or_default().insert(r.window, r.statistic);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["topic_id".to_string(), "label".to_string()];
    header.extend(windows.iter().map(|w| w.to_string()));
    w.write_record(&header).expect("in-memory write");
    for (topic, row) in &by_topic {
        let mut rec = vec![topic.to_string(), labels.get(*topic).cloned().unwrap_or_default()];
        rec.extend(
            windows
                .iter()
                .map(|w| row.get(w).map(|f| format!("{f:.6}")).unwrap_or_default()),
        );
        w.write_record(&rec).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 48.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// `(topic_id, svg)` for every topic in `records`, sorted by topic id.
pub fn charts(
    records: &[AlertRecord],
    labels: &BTreeMap<String, String>,
    threshold: f64,
) -> Vec<(String, String)> {
    let mut by_topic: BTreeMap<&str, Vec<&AlertRecord>> = BTreeMap::new();
    for r in records {
        by_topic.entry(&r.topic_id).or_default().push(r);
    }
    by_topic
        .into_iter()
        .map(|(topic, mut rs)| {
            rs.sort_by_key(|r| r.window);
            let title = match labels.get(topic) {
                Some(l) if !l.is_empty() => format!("{topic} ({l})"),
                _ => topic.to_string(),
            };
            (topic.to_string(), chart(&title, &rs, threshold))
        })
        .collect()
}

fn chart(title: &str, rs: &[&AlertRecord], threshold: f64) -> String {
    let y_max = rs
        .iter()
        .map(|r| r.statistic)
        .fold(threshold, f64::max)
        .max(1.0)
        * 1.1;
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let x = |i: usize| {
        if rs.len() < 2 {
            MARGIN + plot_w / 2.0
        } else {
            MARGIN + plot_w * i as f64 / (rs.len() - 1) as f64
        }
    };
    let y = |v: f64| MARGIN + plot_h * (1.0 - v / y_max);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{:.1}" font-family="sans-serif" font-size="14">{}</text>"#,
        MARGIN / 2.0,
        escape(title)
    );
    // axes
    let _ = writeln!(
        s,
        r#"<path d="M{MARGIN:.1},{MARGIN:.1} V{:.1} H{:.1}" fill="none" stroke="black"/>"#,
        HEIGHT - MARGIN,
        WIDTH - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="4" y="{:.1}" font-family="sans-serif" font-size="10">{y_max:.2}</text>"#,
        MARGIN + 4.0
    );
    // threshold
    let ty = y(threshold);
    let _ = writeln!(
        s,
        r##"<line x1="{MARGIN:.1}" y1="{ty:.1}" x2="{:.1}" y2="{ty:.1}" stroke="#c00" stroke-dasharray="4 3"/>"##,
        WIDTH - MARGIN
    );
    let _ = writeln!(
        s,
        r##"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10" fill="#c00">threshold {threshold}</text>"##,
        WIDTH - MARGIN - 80.0,
        ty - 4.0
    );
    let points: Vec<String> = rs
        .iter()
        .enumerate()
        .map(|(i, r)| format!("{:.1},{:.1}", x(i), y(r.statistic)))
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#036" stroke-width="2"/>"##,
        points.join(" ")
    );
    for (i, r) in rs.iter().enumerate() {
        let fill = if r.emerging { "#c00" } else { "#036" };
        let _ = writeln!(
            s,
            r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{fill}"><title>{} C={} B={:.3} F={:.3}</title></circle>"#,
            x(i),
            y(r.statistic),
            r.window,
            r.observed,
            r.expected,
            r.statistic
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="9" text-anchor="middle">{}</text>"#,
            x(i),
            HEIGHT - MARGIN + 14.0,
            r.window.first
        );
    }
    s.push_str("</svg>\n");
    s
}
