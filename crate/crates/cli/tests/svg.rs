use realitygame_cli::svg::{
    render_svg, Axes, Series, SvgError, HEIGHT, MARGIN_BOTTOM, MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP,
    WIDTH,
};

fn polylines(svg: &str) -> Vec<(String, Vec<(f64, f64)>)> {
    svg.lines()
        .filter(|l| l.starts_with("<polyline"))
        .map(|l| {
            let class = l.split("class=\"").nth(1).unwrap().split('"').next().unwrap().to_string();
            let pts = l.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
            let coords = pts
                .split_whitespace()
                .map(|xy| {
                    let (x, y) = xy.split_once(',').unwrap();
                    (x.parse().unwrap(), y.parse().unwrap())
                })
                .collect();
            (class, coords)
        })
        .collect()
}

#[test]
fn constant_series_is_a_horizontal_line() {
    let s = Series::new("flat", (1..=50).map(|t| (t as f64, 0.5)).collect());
    let svg = render_svg(&[s], &Axes::default()).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    let lines = polylines(&svg);
    assert_eq!(lines.len(), 1);
    let y0 = lines[0].1[0].1;
    assert!(lines[0].1.iter().all(|(_, y)| *y == y0));
}

#[test]
fn inverse_power_is_straight_on_log_axes() {
    let s = Series::new("1/t", (0..=30).map(|k| {
        let t = 10f64.powf(k as f64 / 10.0);
        (t, 1.0 / t)
    }).collect());
    let axes = Axes {
        x_log: true,
        y_log: true,
        ..Axes::default()
    };
    let svg = render_svg(&[s], &axes).unwrap();
    let pts = &polylines(&svg)[0].1;
    // Three decades on both axes: slope in pixels is the aspect ratio of
    // the plot area (positive because SVG y grows downwards).
    let expected = (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM) / (WIDTH - MARGIN_LEFT - MARGIN_RIGHT);
    for w in pts.windows(2) {
        let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
        assert!((slope - expected).abs() < 0.01, "{slope} vs {expected}");
    }
}

#[test]
fn overlay_uses_distinct_stroke_classes() {
    let series: Vec<Series> = (0..5)
        .map(|k| Series::new(format!("seed {k}"), (1..=20).map(|t| (t as f64, (t * (k + 1)) as f64 / 200.0)).collect()))
        .collect();
    let svg = render_svg(&series, &Axes::default()).unwrap();
    let lines = polylines(&svg);
    assert_eq!(lines.len(), 5);
    let mut classes: Vec<&str> = lines.iter().map(|(c, _)| c.as_str()).collect();
    classes.dedup();
    assert_eq!(classes.len(), 5);
    for c in classes {
        assert!(svg.contains(&format!(".{c} {{")), "no style for {c}");
    }
}

#[test]
fn output_is_deterministic() {
    let s = Series::new("a", vec![(1.0, 0.3), (2.0, 0.7), (3.0, 0.1)]);
    let axes = Axes {
        title: "x < y & z".into(),
        ..Axes::default()
    };
    let a = render_svg(std::slice::from_ref(&s), &axes).unwrap();
    let b = render_svg(&[s], &axes).unwrap();
    assert_eq!(a, b);
    assert!(a.contains("x &lt; y &amp; z"));
}

#[test]
fn empty_input_is_an_error() {
    assert_eq!(render_svg(&[], &Axes::default()), Err(SvgError::EmptySeries));
    assert_eq!(
        render_svg(&[Series::new("none", vec![])], &Axes::default()),
        Err(SvgError::EmptySeries)
    );
}
