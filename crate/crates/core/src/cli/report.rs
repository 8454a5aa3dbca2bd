//! Curve files, SVG plots and the dataset statistics table.

use std::fmt::Write as _;
use std::path::Path;

use plotters::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::pipeline::CurvePoint;
use crate::dataset::DatasetStats;
use crate::error::{Error, Result};

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse { path: path.display().to_string(), line, message: e.to_string() }
}

fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = crate::util::open_existing(path)?;
    csv::Reader::from_reader(file)
        .deserialize()
        .map(|r| r.map_err(|e| csv_error(path, e)))
        .collect()
}

/// `step,recall,precision`; precision is blank when no probe task exists.
pub fn write_eval_curve(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    if curve.is_empty() {
        w.write_record(["step", "recall", "precision"]).map_err(|e| csv_error(path, e))?;
    }
    for p in curve {
        w.serialize(p).map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_eval_curve(path: &Path) -> Result<Vec<CurvePoint>> {
    read_csv(path)
}

#[derive(Deserialize, Serialize)]
struct LossRow {
    step: usize,
    loss: f64,
}

pub fn read_loss_curve(path: &Path) -> Result<Vec<(usize, f64)>> {
    Ok(read_csv::<LossRow>(path)?.into_iter().map(|r| (r.step, r.loss)).collect())
}

fn plot_err<E: std::error::Error + Send + Sync>(path: &Path, e: DrawingAreaErrorKind<E>) -> Error {
    Error::Artifact { path: path.to_path_buf(), message: e.to_string() }
}

/// Training loss against step, smoothed over windows of 1% of the run.
pub fn plot_loss(path: &Path, curve: &[(usize, f64)]) -> Result<()> {
    let window = (curve.len() / 100).max(1);
    let smooth: Vec<(f64, f64)> = curve
        .chunks(window)
        .map(|c| (c[0].0 as f64, c.iter().map(|x| x.1).sum::<f64>() / c.len() as f64))
        .collect();
    let x_max = smooth.last().map(|p| p.0).unwrap_or(0.0).max(1.0);
    let y_max = smooth.iter().map(|p| p.1).fold(0.0, f64::max).max(1e-3) * 1.05;

    let root = SVGBackend::new(path, (720, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Training loss", ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(52)
        .build_cartesian_2d(0.0..x_max, 0.0..y_max)
        .map_err(|e| plot_err(path, e))?;
    chart
        .configure_mesh()
        .x_desc("step")
        .y_desc("mean batch loss")
        .draw()
        .map_err(|e| plot_err(path, e))?;
    chart.draw_series(LineSeries::new(smooth, &BLUE)).map_err(|e| plot_err(path, e))?;
    root.present().map_err(|e| plot_err(path, e))?;
    Ok(())
}

/// Recall@K and Precision@K against step.
pub fn plot_metrics(path: &Path, model: &str, k: usize, curve: &[CurvePoint]) -> Result<()> {
    let x_max = curve.last().map(|p| p.step as f64).unwrap_or(0.0).max(1.0);
    let root = SVGBackend::new(path, (720, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("{model}: recall and precision"), ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(52)
        .build_cartesian_2d(0.0..x_max, 0.0..1.0)
        .map_err(|e| plot_err(path, e))?;
    chart
        .configure_mesh()
        .x_desc("step")
        .y_desc("metric")
        .draw()
        .map_err(|e| plot_err(path, e))?;
    chart
        .draw_series(LineSeries::new(curve.iter().map(|p| (p.step as f64, p.recall)), &BLUE))
        .map_err(|e| plot_err(path, e))?
        .label(format!("Recall@{k}"))
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLUE));
    let precision: Vec<(f64, f64)> = curve.iter().filter_map(|p| p.precision.map(|v| (p.step as f64, v))).collect();
    if !precision.is_empty() {
        chart
            .draw_series(LineSeries::new(precision, &RED))
            .map_err(|e| plot_err(path, e))?
            .label(format!("Precision@{k}"))
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], RED));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| plot_err(path, e))?;
    root.present().map_err(|e| plot_err(path, e))?;
    Ok(())
}

/// One row per model: negatives per pair, augmentation and dataset sizes.
pub fn dataset_table(rows: &[(String, usize, usize, DatasetStats)]) -> String {
    let mut out = format!(
        "{:<12}{:>8}{:>8}{:>8}{:>16}{:>16}{:>12}\n",
        "Model", "Random", "BM25", "Aug.", "Positive pairs", "Neg. products", "Triplets"
    );
    for (model, random, bm25, s) in rows {
        let _ = writeln!(
            out,
            "{:<12}{:>8}{:>8}{:>7.0}%{:>16}{:>16}{:>12}",
            model,
            random,
            bm25,
            s.aug_ratio * 100.0,
            s.n_positive_pairs,
            s.n_distinct_negative_products,
            s.n_triplets
        );
    }
    out
}
