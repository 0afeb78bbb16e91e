use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Metric compared between EDRL and baseline runs.
pub const COMPARE_METRIC: &str = "discounted_return";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub run_id: String,
    /// Generation or episode number.
    pub index: u64,
    pub metric: String,
    pub value: f64,
    pub unit: String,
}

/// Append-only metric stream of one run.
#[derive(Debug, Clone, Default)]
pub struct MetricsLog {
    run_id: String,
    rows: Vec<MetricsRow>,
    last_index: HashMap<String, u64>,
}

impl MetricsLog {
    pub fn new(run_id: impl Into<String>) -> Self {
        Self {
            run_id: run_id.into(),
            ..Self::default()
        }
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn rows(&self) -> &[MetricsRow] {
        &self.rows
    }

    /// Appends a row; indices must strictly increase per metric.
    pub fn push(&mut self, index: u64, metric: &str, value: f64, unit: &str) -> Result<()> {
        if let Some(&last) = self.last_index.get(metric) {
            if index <= last {
                return Err(Error::Metrics(format!(
                    "index {index} for `{metric}` does not follow {last}"
                )));
            }
        }
        self.last_index.insert(metric.to_string(), index);
        self.rows.push(MetricsRow {
            run_id: self.run_id.clone(),
            index,
            metric: metric.to_string(),
            value,
            unit: unit.to_string(),
        });
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(w);
        if self.rows.is_empty() {
            writer.write_record(["run_id", "index", "metric", "value", "unit"]).map_err(csv_error)?;
        }
        for row in &self.rows {
            writer.serialize(row).map_err(csv_error)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Metrics(e.to_string())
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_error)?;
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.iter().collect::<Vec<_>>() != ["run_id", "index", "metric", "value", "unit"] {
        return Err(Error::Metrics(format!("unexpected header in {}", path.display())));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(csv_error))
        .collect()
}

/// `(index, value)` pairs of one metric in file order.
pub fn series(rows: &[MetricsRow], metric: &str) -> Vec<(u64, f64)> {
    rows.iter()
        .filter(|r| r.metric == metric)
        .map(|r| (r.index, r.value))
        .collect()
}

/// Empirical CDF at the sorted distinct sample values, thinned to at most
/// `grid` points; the last point always has probability 1.
pub fn export_cdf(samples: &[f64], grid: usize) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::Metrics("CDF of an empty sample".into()));
    }
    if grid == 0 {
        return Err(Error::Metrics("CDF grid size must be at least 1".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Metrics("CDF of non-finite samples".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut steps: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in sorted.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match steps.last_mut() {
            Some(last) if last.0 == x => last.1 = p,
            _ => steps.push((x, p)),
        }
    }
    if steps.len() <= grid {
        return Ok(steps);
    }
    let m = steps.len();
    Ok((1..=grid).map(|j| steps[(j * m).div_ceil(grid) - 1]).collect())
}

pub fn write_cdf_csv(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_error)?;
    writer.write_record(["value", "cumulative_probability"]).map_err(csv_error)?;
    for &(x, p) in points {
        writer.serialize((x, p)).map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_cdf_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_error)?;
    reader.deserialize().map(|r| r.map_err(csv_error)).collect()
}

/// Mean of `metric` over the last tenth of its records (at least one).
pub fn final_window_mean(rows: &[MetricsRow], metric: &str) -> Result<f64> {
    let values: Vec<f64> = series(rows, metric).into_iter().map(|(_, v)| v).collect();
    if values.is_empty() {
        return Err(Error::Metrics(format!("no `{metric}` records")));
    }
    let window = values.len().div_ceil(10);
    Ok(values[values.len() - window..].iter().sum::<f64>() / window as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunComparison {
    pub edrl_final: f64,
    pub drl_final: f64,
    /// `(edrl_final - drl_final) / drl_final`.
    pub ratio: f64,
    /// Per EDRL record: its value minus the mean baseline value over the
    /// baseline records collected within the same environment-step span.
    pub deltas: Vec<(u64, f64)>,
    pub warning: Option<String>,
}

fn relative_gain(edrl: f64, drl: f64) -> f64 {
    if edrl == drl {
        0.0
    } else {
        (edrl - drl) / drl
    }
}

pub fn compare_runs(edrl: &[MetricsRow], drl: &[MetricsRow]) -> Result<RunComparison> {
    let edrl_final = final_window_mean(edrl, COMPARE_METRIC)?;
    let drl_final = final_window_mean(drl, COMPARE_METRIC)?;
    let e_series = series(edrl, COMPARE_METRIC);
    let d_series = series(drl, COMPARE_METRIC);
    let e_steps = series(edrl, "env_steps");
    let d_steps = series(drl, "env_steps");

    let mut warning = None;
    let aligned = e_steps.len() == e_series.len() && d_steps.len() == d_series.len();
    let deltas = if aligned {
        match (e_steps.last(), d_steps.last()) {
            (Some(a), Some(b)) if a.1 != b.1 => {
                warning = Some(format!("environment steps differ: {} vs {}", a.1, b.1));
            }
            _ => {}
        }
        let mut deltas = Vec::with_capacity(e_series.len());
        let mut j = 0;
        let mut prev_mean = None;
        for (&(idx, value), &(_, steps)) in e_series.iter().zip(&e_steps) {
            let (mut sum, mut count) = (0.0, 0);
            while j < d_series.len() && d_steps[j].1 <= steps {
                sum += d_series[j].1;
                count += 1;
                j += 1;
            }
            let mean = if count > 0 { Some(sum / count as f64) } else { prev_mean };
            if let Some(m) = mean {
                deltas.push((idx, value - m));
            }
            prev_mean = mean;
        }
        deltas
    } else {
        warning = Some("environment step counts missing; deltas paired by record order".into());
        e_series.iter().zip(&d_series).map(|(a, b)| (a.0, a.1 - b.1)).collect()
    };

    Ok(RunComparison {
        edrl_final,
        drl_final,
        ratio: relative_gain(edrl_final, drl_final),
        deltas,
        warning,
    })
}

/// Median and interquartile range (linear interpolation between order statistics).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spread {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub count: usize,
}

impl Spread {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Metrics("spread of an empty set".into()));
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Ok(Self {
            median: q(0.5),
            q1: q(0.25),
            q3: q(0.75),
            count: v.len(),
        })
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetComparison {
    pub edrl: Spread,
    pub drl: Spread,
    /// `median(edrl) / median(drl)`.
    pub median_ratio: f64,
    pub runs: Vec<RunComparison>,
    pub warnings: Vec<String>,
}

/// Compares final-window returns across several seeds. Runs are paired in
/// order when both sets have the same size.
pub fn compare_run_sets(edrl: &[Vec<MetricsRow>], drl: &[Vec<MetricsRow>]) -> Result<SetComparison> {
    let e: Vec<f64> = edrl.iter().map(|r| final_window_mean(r, COMPARE_METRIC)).collect::<Result<_>>()?;
    let d: Vec<f64> = drl.iter().map(|r| final_window_mean(r, COMPARE_METRIC)).collect::<Result<_>>()?;
    let edrl_spread = Spread::of(&e)?;
    let drl_spread = Spread::of(&d)?;
    let mut warnings = Vec::new();
    let runs = if edrl.len() == drl.len() {
        edrl.iter().zip(drl).map(|(a, b)| compare_runs(a, b)).collect::<Result<Vec<_>>>()?
    } else {
        warnings.push(format!("unpaired run sets: {} EDRL vs {} baseline", edrl.len(), drl.len()));
        Vec::new()
    };
    warnings.extend(runs.iter().filter_map(|r| r.warning.clone()));
    Ok(SetComparison {
        median_ratio: edrl_spread.median / drl_spread.median,
        edrl: edrl_spread,
        drl: drl_spread,
        runs,
        warnings,
    })
}
