//! Self-contained SVG phase portraits of the (X, Y) unit square: the four
//! regions cut out by the barrier curve Q = 0 and the line Y = Y_c in
//! grayscale, the distinguished boundary points, and trajectory
//! projections. No external assets; an 800 x 800 fixed viewport.

use std::fmt::Write as _;

use spin7lab_core::analysis::q_zero_x;
use spin7lab_core::ode::FixedPointId;

use crate::config::{RunConfig, ARTIFACT_VERSION};

const VIEWPORT: f64 = 800.0;
const MARGIN: f64 = 70.0;
const CURVE_SAMPLES: usize = 256;

/// One trajectory to draw, projected to the (X, Y) plane.
pub struct TrajectoryPath {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn px(x: f64) -> f64 {
    MARGIN + x.clamp(0.0, 1.0) * (VIEWPORT - 2.0 * MARGIN)
}

fn py(y: f64) -> f64 {
    MARGIN + (1.0 - y.clamp(0.0, 1.0)) * (VIEWPORT - 2.0 * MARGIN)
}

fn point_list(points: impl IntoIterator<Item = (f64, f64)>) -> String {
    let mut text = String::new();
    for (x, y) in points {
        if !text.is_empty() {
            text.push(' ');
        }
        let _ = write!(text, "{:.2},{:.2}", px(x), py(y));
    }
    text
}

/// The Q = 0 curve inside the unit square, traced from its entry on the
/// X = 1 edge up to Y = 1. `rising` selects the traversal direction.
fn barrier_curve(y_from: f64, y_to: f64) -> Vec<(f64, f64)> {
    (0..=CURVE_SAMPLES)
        .map(|i| {
            let y = y_from + (y_to - y_from) * (i as f64 / CURVE_SAMPLES as f64);
            (q_zero_x(y).min(1.0), y)
        })
        .collect()
}

fn region_path(id: &str, fill: &str, points: &[(f64, f64)]) -> String {
    format!(
        "  <polygon class=\"region\" id=\"{id}\" fill=\"{fill}\" stroke=\"none\" points=\"{}\"/>\n",
        point_list(points.iter().copied())
    )
}

fn marker(label: &str, x: f64, y: f64, dx: f64, dy: f64, color: &str) -> String {
    format!(
        "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"5\" fill=\"{color}\"/>\n  \
         <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"18\" fill=\"{color}\">{label}</text>\n",
        px(x),
        py(y),
        px(x) + dx,
        py(y) + dy,
    )
}

/// Render the portrait. The config echo is embedded so the artifact is
/// reproducible from its own header.
pub fn phase_portrait(config: &RunConfig, trajectories: &[TrajectoryPath]) -> String {
    let cone = FixedPointId::ConePoint.coordinates();
    let (x_c, y_c) = (cone.x, cone.y);
    // Entry height of the Q = 0 curve on the X = 1 edge.
    let y_entry = (9.0 - 41.0f64.sqrt()) / 10.0;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{v}\" height=\"{v}\" \
         viewBox=\"0 0 {v} {v}\">",
        v = VIEWPORT
    );
    svg.push_str("  <title>Flow portrait in the (X, Y) unit square</title>\n");
    let stamp = serde_json::json!({
        "version": ARTIFACT_VERSION,
        "config": config.echo(),
        "trajectories": trajectories.iter().map(|t| t.label.as_str()).collect::<Vec<_>>(),
    });
    let _ = writeln!(svg, "  <metadata><![CDATA[{stamp}]]></metadata>");
    let _ = writeln!(
        svg,
        "  <rect x=\"0\" y=\"0\" width=\"{v}\" height=\"{v}\" fill=\"#ffffff\"/>",
        v = VIEWPORT
    );

    // Region fills, grayscale: D1 white, D2 and D3 gray, D4 black.
    let mut d1 = vec![(0.0, y_c), (0.0, 1.0)];
    d1.extend(barrier_curve(1.0, y_c));
    svg.push_str(&region_path("region-d1", "#ffffff", &d1));

    let mut d2 = vec![(1.0, 1.0), (1.0, y_c)];
    d2.extend(barrier_curve(y_c, 1.0));
    svg.push_str(&region_path("region-d2", "#c0c0c0", &d2));

    let mut d3 = vec![(0.0, 0.0), (0.0, y_c)];
    d3.extend(barrier_curve(y_c, y_entry));
    d3.push((1.0, 0.0));
    svg.push_str(&region_path("region-d3", "#c0c0c0", &d3));

    let mut d4 = vec![(1.0, y_c)];
    d4.extend(barrier_curve(y_c, y_entry));
    svg.push_str(&region_path("region-d4", "#000000", &d4));

    // The barrier curve and the critical height.
    let _ = writeln!(
        svg,
        "  <polyline id=\"q-zero-curve\" fill=\"none\" stroke=\"#000000\" stroke-width=\"2\" \
         points=\"{}\"/>",
        point_list(barrier_curve(y_entry, 1.0))
    );
    let _ = writeln!(
        svg,
        "  <line id=\"y-critical\" x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" \
         stroke=\"#555555\" stroke-width=\"1.5\" stroke-dasharray=\"7 5\"/>",
        px(0.0),
        py(y_c),
        px(1.0),
        py(y_c)
    );

    // Trajectory projections; mid-gray reads on both white and black fills.
    for path in trajectories {
        let _ = writeln!(
            svg,
            "  <polyline class=\"trajectory\" fill=\"none\" stroke=\"#808080\" \
             stroke-width=\"2.5\" points=\"{}\"><title>{}</title></polyline>",
            point_list(path.points.iter().copied()),
            xml_escape(&path.label)
        );
    }

    // Distinguished points of the square.
    svg.push_str(&marker("S^5", 0.0, 1.0, 10.0, 24.0, "#000000"));
    svg.push_str(&marker("ALC", 1.0, 1.0, -46.0, 24.0, "#000000"));
    svg.push_str(&marker("CP^2", 1.0, 0.0, -56.0, -12.0, "#000000"));
    svg.push_str(&marker("Cone", x_c, y_c, -62.0, 22.0, "#ffffff"));

    // Frame and axis labels.
    let _ = writeln!(
        svg,
        "  <rect x=\"{m:.2}\" y=\"{m:.2}\" width=\"{s:.2}\" height=\"{s:.2}\" fill=\"none\" \
         stroke=\"#000000\" stroke-width=\"1.5\"/>",
        m = MARGIN,
        s = VIEWPORT - 2.0 * MARGIN
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"20\">X</text>",
        VIEWPORT / 2.0,
        VIEWPORT - MARGIN / 2.0
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"20\">Y</text>",
        MARGIN / 2.0 - 10.0,
        VIEWPORT / 2.0
    );
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
