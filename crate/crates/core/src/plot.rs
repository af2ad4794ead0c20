//! SVG figures: INR heatmaps, empirical CDFs and grouped bar charts.

use std::path::{Path, PathBuf};

use plotters::prelude::*;
use thiserror::Error;

use crate::sweep::{EmpiricalCdf, InrMap};

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("cannot draw {path}: {message}")]
    Draw { path: PathBuf, message: String },
    #[error("nothing to plot: {0}")]
    Empty(&'static str),
}

fn draw_err(path: &Path, e: impl std::fmt::Display) -> PlotError {
    PlotError::Draw {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// dB range mapped onto the heatmap palette. Values outside are clamped, so
/// figures drawn with the same scale are directly comparable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorScale {
    pub min_db: f64,
    pub max_db: f64,
}

impl Default for ColorScale {
    fn default() -> Self {
        Self {
            min_db: -20.0,
            max_db: 40.0,
        }
    }
}

impl ColorScale {
    /// Blue at `min_db` through green to red at `max_db`.
    pub fn color(&self, db: f64) -> RGBColor {
        let t = ((db - self.min_db) / (self.max_db - self.min_db)).clamp(0.0, 1.0);
        let t = if t.is_nan() { 0.0 } else { t };
        let (r, g, b) = HSLColor((1.0 - t) * 240.0 / 360.0, 0.85, 0.5).rgb();
        RGBColor(r, g, b)
    }
}

/// Cell colours of a heatmap in tx-major order.
pub fn heatmap_colors(map: &InrMap, scale: &ColorScale) -> Vec<RGBColor> {
    map.db_values().iter().map(|&v| scale.color(v)).collect()
}

fn half_step(angles: &[f64]) -> f64 {
    if angles.len() > 1 {
        (angles[1] - angles[0]) / 2.0
    } else {
        0.5
    }
}

/// INR heatmap with θ_tx on the horizontal and θ_rx on the vertical axis.
pub fn render_heatmap(map: &InrMap, scale: &ColorScale, title: &str, path: &Path) -> Result<(), PlotError> {
    let tx = map.tx_profile().angles();
    let rx = map.rx_profile().angles();
    let (ht, hr) = (half_step(tx), half_step(rx));
    let colors = heatmap_colors(map, scale);
    let root = SVGBackend::new(path, (720, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| draw_err(path, e))?;
    let (plot_area, bar_area) = root.split_horizontally(620);
    let mut chart = ChartBuilder::on(&plot_area)
        .caption(title, ("sans-serif", 18))
        .margin(10)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(
            (tx[0] - ht)..(tx[tx.len() - 1] + ht),
            (rx[0] - hr)..(rx[rx.len() - 1] + hr),
        )
        .map_err(|e| draw_err(path, e))?;
    chart
        .configure_mesh()
        .disable_mesh()
        .x_desc("θ_tx (deg)")
        .y_desc("θ_rx (deg)")
        .draw()
        .map_err(|e| draw_err(path, e))?;
    let n_rx = rx.len();
    chart
        .draw_series(tx.iter().enumerate().flat_map(|(i, &t)| {
            let colors = &colors;
            rx.iter()
                .enumerate()
                .map(move |(j, &r)| Rectangle::new([(t - ht, r - hr), (t + ht, r + hr)], colors[i * n_rx + j].filled()))
        }))
        .map_err(|e| draw_err(path, e))?;

    let mut bar = ChartBuilder::on(&bar_area)
        .margin_top(40)
        .margin_bottom(50)
        .margin_right(10)
        .y_label_area_size(45)
        .build_cartesian_2d(0.0..1.0, scale.min_db..scale.max_db)
        .map_err(|e| draw_err(path, e))?;
    bar.configure_mesh()
        .disable_mesh()
        .disable_x_axis()
        .y_desc("INR (dB)")
        .draw()
        .map_err(|e| draw_err(path, e))?;
    let steps = 120;
    let dv = (scale.max_db - scale.min_db) / steps as f64;
    bar.draw_series((0..steps).map(|k| {
        let v = scale.min_db + k as f64 * dv;
        Rectangle::new([(0.0, v), (1.0, v + dv)], scale.color(v + dv / 2.0).filled())
    }))
    .map_err(|e| draw_err(path, e))?;
    root.present().map_err(|e| draw_err(path, e))
}

/// Vertices of the right-continuous staircase of an empirical CDF.
pub fn cdf_polyline(cdf: &EmpiricalCdf) -> Vec<(f64, f64)> {
    let steps = cdf.steps();
    let mut pts = Vec::with_capacity(2 * steps.len() + 1);
    let mut prev = 0.0;
    for (x, p) in steps {
        pts.push((x, prev));
        pts.push((x, p));
        prev = p;
    }
    pts
}

const PALETTE: [RGBColor; 8] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
    RGBColor(227, 119, 194),
    RGBColor(127, 127, 127),
];

/// One labelled staircase per CDF.
pub fn render_cdfs(series: &[(String, EmpiricalCdf)], x_desc: &str, path: &Path) -> Result<(), PlotError> {
    let samples = series.iter().flat_map(|(_, c)| c.samples().iter().copied());
    let (lo, hi) = samples.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        return Err(PlotError::Empty("no CDF samples"));
    }
    let pad = ((hi - lo) * 0.05).max(0.5);
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| draw_err(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(10)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d((lo - pad)..(hi + pad), 0.0..1.0)
        .map_err(|e| draw_err(path, e))?;
    chart
        .configure_mesh()
        .x_desc(x_desc)
        .y_desc("CDF")
        .draw()
        .map_err(|e| draw_err(path, e))?;
    for (k, (label, cdf)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut pts = vec![(lo - pad, 0.0)];
        pts.extend(cdf_polyline(cdf));
        pts.push((hi + pad, 1.0));
        chart
            .draw_series(LineSeries::new(pts, color.stroke_width(2)))
            .map_err(|e| draw_err(path, e))?
            .label(label.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .position(SeriesLabelPosition::LowerRight)
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| draw_err(path, e))?;
    root.present().map_err(|e| draw_err(path, e))
}

/// Grouped bars: one group per label, one bar per series.
#[derive(Debug, Clone, PartialEq)]
pub struct BarChart {
    pub groups: Vec<String>,
    pub series: Vec<(String, Vec<f64>)>,
    pub y_desc: String,
}

impl BarChart {
    pub fn bar_count(&self) -> usize {
        self.series.iter().map(|(_, v)| v.len()).sum()
    }
}

/// Draws a grouped bar chart and returns the number of bars drawn.
pub fn render_bars(chart_data: &BarChart, path: &Path) -> Result<usize, PlotError> {
    let n_groups = chart_data.groups.len();
    let n_series = chart_data.series.len();
    if n_groups == 0 || n_series == 0 {
        return Err(PlotError::Empty("no bars"));
    }
    let top = chart_data
        .series
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .fold(0.0f64, f64::max)
        .max(1e-9)
        * 1.1;
    let root = SVGBackend::new(path, (960, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| draw_err(path, e))?;
    let groups = chart_data.groups.clone();
    let mut chart = ChartBuilder::on(&root)
        .margin(10)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(-0.5..(n_groups as f64 - 0.5), 0.0..top)
        .map_err(|e| draw_err(path, e))?;
    chart
        .configure_mesh()
        .disable_x_mesh()
        .x_labels(n_groups)
        .x_label_formatter(&|x| {
            let i = x.round();
            if (x - i).abs() < 1e-6 && i >= 0.0 && (i as usize) < groups.len() {
                groups[i as usize].clone()
            } else {
                String::new()
            }
        })
        .y_desc(chart_data.y_desc.as_str())
        .draw()
        .map_err(|e| draw_err(path, e))?;
    let width = 0.8 / n_series as f64;
    let mut drawn = 0;
    for (k, (label, values)) in chart_data.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let bars: Vec<_> = values
            .iter()
            .take(n_groups)
            .enumerate()
            .map(|(g, &v)| {
                let x0 = g as f64 - 0.4 + k as f64 * width;
                Rectangle::new([(x0, 0.0), (x0 + width * 0.9, v.max(0.0))], color.filled())
            })
            .collect();
        drawn += bars.len();
        chart
            .draw_series(bars)
            .map_err(|e| draw_err(path, e))?
            .label(label.as_str())
            .legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 10, y + 5)], color.filled()));
    }
    chart
        .configure_series_labels()
        .position(SeriesLabelPosition::UpperRight)
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| draw_err(path, e))?;
    root.present().map_err(|e| draw_err(path, e))?;
    Ok(drawn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::{run_sweep, SpatialProfile};

    #[test]
    fn constant_heatmap_is_uniform() {
        let p = SpatialProfile::range(-5.0, 1.0, 5.0).unwrap();
        let map = run_sweep(|_, _| 10.0, &p, &p).unwrap();
        let colors = heatmap_colors(&map, &ColorScale::default());
        assert!(colors.iter().all(|c| *c == colors[0]));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.svg");
        render_heatmap(&map, &ColorScale::default(), "constant", &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("θ_tx (deg)") && text.contains("θ_rx (deg)"));
    }

    #[test]
    fn scale_is_clamped_and_ordered() {
        let s = ColorScale::default();
        assert_eq!(s.color(-100.0), s.color(-20.0));
        assert_eq!(s.color(100.0), s.color(40.0));
        assert_ne!(s.color(-20.0), s.color(40.0));
    }

    #[test]
    fn two_point_cdf_has_two_steps() {
        let cdf = EmpiricalCdf::from_db(vec![0.0, 10.0, 0.0, 10.0]).unwrap();
        let pts = cdf_polyline(&cdf);
        let jumps = pts.windows(2).filter(|w| w[0].0 == w[1].0 && w[1].1 > w[0].1).count();
        assert_eq!(jumps, 2);
        assert_eq!(pts.last().unwrap().1, 1.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.svg");
        render_cdfs(&[("a".into(), cdf)], "INR (dB)", &path).unwrap();
        assert!(std::fs::metadata(&path).unwrap().len() > 0);
    }

    #[test]
    fn grouped_bars() {
        let chart = BarChart {
            groups: (0..12).map(|g| format!("p{g}")).collect(),
            series: [0.0, 3.0, 6.0]
                .iter()
                .map(|d| (format!("Δ={d}°"), (0..12).map(|g| 0.5 + g as f64 / 30.0).collect()))
                .collect(),
            y_desc: "normalized SE".into(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.svg");
        assert_eq!(render_bars(&chart, &path).unwrap(), 36);
        assert_eq!(chart.bar_count(), 36);
    }

    #[test]
    fn unwritable_path_fails() {
        let cdf = EmpiricalCdf::from_db(vec![1.0]).unwrap();
        let r = render_cdfs(&[("a".into(), cdf)], "x", Path::new("/nonexistent/dir/c.svg"));
        assert!(r.is_err());
    }
}
