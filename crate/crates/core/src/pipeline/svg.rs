//! Minimal self-contained SVG writer for the classifier comparison
//! chart. No plotting dependency; the chart is a fixed-layout grouped
//! bar chart with all coordinates formatted to two decimals, so the
//! bytes are a pure function of the input rows.

/// One classifier's macro scores, already in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub classifier: String,
    pub accuracy: f64,
    pub specificity: f64,
    pub sensitivity: f64,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;

const PALETTE: [&str; 4] = ["#4c78a8", "#f58518", "#54a24b", "#e45756"];
const METRICS: [&str; 3] = ["accuracy", "specificity", "sensitivity"];

fn esc(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn comparison_chart(rows: &[ComparisonRow]) -> String {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let y_of = |v: f64| MARGIN_TOP + plot_h * (1.0 - v.clamp(0.0, 1.0));

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"13\">\n"
    ));
    s.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">\
         Classifier comparison</text>\n",
        WIDTH / 2.0
    ));

    // Horizontal gridlines and y labels every 0.25.
    for i in 0..=4 {
        let v = i as f64 * 0.25;
        let y = y_of(v);
        s.push_str(&format!(
            "<line x1=\"{MARGIN_LEFT:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" \
             stroke=\"#ddd\"/>\n",
            MARGIN_LEFT + plot_w
        ));
        s.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{v:.2}</text>\n",
            MARGIN_LEFT - 8.0,
            y + 4.0
        ));
    }

    // Bars, grouped by metric.
    let group_w = plot_w / METRICS.len() as f64;
    let bar_w = (group_w * 0.7) / rows.len().max(1) as f64;
    for (m, metric) in METRICS.iter().enumerate() {
        let group_x = MARGIN_LEFT + m as f64 * group_w;
        for (r, row) in rows.iter().enumerate() {
            let v = [row.accuracy, row.specificity, row.sensitivity][m];
            let x = group_x + group_w * 0.15 + r as f64 * bar_w;
            let y = y_of(v);
            let h = MARGIN_TOP + plot_h - y;
            let color = PALETTE[r % PALETTE.len()];
            s.push_str(&format!(
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{h:.2}\" \
                 fill=\"{color}\"/>\n",
                bar_w * 0.9
            ));
            s.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"11\">\
                 {v:.3}</text>\n",
                x + bar_w * 0.45,
                y - 4.0
            ));
        }
        s.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{metric}</text>\n",
            group_x + group_w / 2.0,
            MARGIN_TOP + plot_h + 20.0
        ));
    }

    // Legend under the metric labels.
    let mut legend_x = MARGIN_LEFT;
    let legend_y = HEIGHT - 16.0;
    for (r, row) in rows.iter().enumerate() {
        let color = PALETTE[r % PALETTE.len()];
        s.push_str(&format!(
            "<rect x=\"{legend_x:.2}\" y=\"{:.2}\" width=\"12\" height=\"12\" fill=\"{color}\"/>\n",
            legend_y - 10.0
        ));
        s.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{legend_y:.2}\">{}</text>\n",
            legend_x + 18.0,
            esc(&row.classifier)
        ));
        legend_x += 120.0;
    }

    // Axis frame.
    s.push_str(&format!(
        "<line x1=\"{MARGIN_LEFT:.2}\" y1=\"{MARGIN_TOP:.2}\" x2=\"{MARGIN_LEFT:.2}\" \
         y2=\"{:.2}\" stroke=\"black\"/>\n",
        MARGIN_TOP + plot_h
    ));
    s.push_str(&format!(
        "<line x1=\"{MARGIN_LEFT:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" \
         stroke=\"black\"/>\n",
        MARGIN_TOP + plot_h,
        MARGIN_LEFT + plot_w,
        MARGIN_TOP + plot_h
    ));
    s.push_str("</svg>\n");
    s
}
