//! Figures and tables from finished run directories. Run data is only read.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{HResult, HarnessError};
use crate::eval::BIN_LABELS;
use crate::svg::{bar_chart, line_chart, Series};
use crate::train::CONFIG_FILE;

pub const REWARD_WINDOW: usize = 100;
pub const LOSS_DIFF_WINDOW: usize = 51;

/// Columns of a CSV file keyed by header name.
pub struct Table {
    path: PathBuf,
    columns: HashMap<String, Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> HResult<Self> {
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| HarnessError::Runtime(format!("{}: {e}", path.display())))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| HarnessError::Runtime(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut columns: HashMap<String, Vec<f64>> = headers.iter().map(|h| (h.clone(), Vec::new())).collect();
        for (n, record) in reader.records().enumerate() {
            let record = record.map_err(|e| HarnessError::Runtime(format!("{}: {e}", path.display())))?;
            for (h, field) in headers.iter().zip(record.iter()) {
                let v = field.parse::<f64>().map_err(|_| {
                    HarnessError::Runtime(format!("{} row {}: `{field}` in column {h} is not a number", path.display(), n + 2))
                })?;
                columns.get_mut(h).expect("header present").push(v);
            }
        }
        Ok(Self { path: path.to_path_buf(), columns })
    }

    pub fn column(&self, name: &str) -> HResult<&[f64]> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| HarnessError::Runtime(format!("{}: missing column `{name}`", self.path.display())))
    }
}

/// Mean over the trailing `window` values (fewer at the start).
pub fn trailing_mean(values: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for i in 0..values.len() {
        sum += values[i];
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// Mean over a window centred on each index, clipped at the ends.
pub fn centered_mean(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// `|loss_k − loss_{k−1}|`.
pub fn loss_differences(losses: &[f64]) -> Vec<f64> {
    losses.windows(2).map(|w| (w[1] - w[0]).abs()).collect()
}

/// Summed per-episode bin columns of an `eval.csv`.
pub fn eval_histogram(eval: &Table) -> HResult<[f64; 4]> {
    let mut bins = [0.0; 4];
    for (k, b) in bins.iter_mut().enumerate() {
        *b = eval.column(&format!("bin_{k}"))?.iter().sum();
    }
    Ok(bins)
}

fn run_label(dir: &Path) -> String {
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| dir.display().to_string());
    let kind = fs::read_to_string(dir.join(CONFIG_FILE)).ok().and_then(|text| {
        text.lines()
            .find_map(|l| l.split_once('=').filter(|(k, _)| k.trim() == "strategy.kind").map(|(_, v)| v.trim().to_string()))
    });
    match kind {
        Some(k) if k != name => format!("{k} ({name})"),
        Some(k) => k,
        None => name,
    }
}

#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub figures: Vec<PathBuf>,
    pub histogram_csv: Option<PathBuf>,
}

/// Writes `reward_ma.svg`, `epsilon.svg`, `loss_diff.svg` and, when runs
/// carry an `eval.csv`, `histogram.svg` and `histogram.csv` into `out`.
pub fn cmd_report(run_dirs: &[PathBuf], out: &Path) -> HResult<ReportFiles> {
    if run_dirs.is_empty() {
        return Err(HarnessError::Config("report needs at least one run directory".into()));
    }
    let mut rewards = Vec::new();
    let mut epsilons = Vec::new();
    let mut loss_diffs = Vec::new();
    let mut hists = Vec::new();
    for dir in run_dirs {
        let label = run_label(dir);
        let metrics = Table::read(&dir.join("metrics.csv"))?;
        let episodes = metrics.column("episode")?;
        let ma = trailing_mean(metrics.column("cum_reward")?, REWARD_WINDOW);
        rewards.push(Series { label: label.clone(), points: episodes.iter().copied().zip(ma).collect() });

        let steps = Table::read(&dir.join("steps.csv"))?;
        let pts = steps.column("step")?.iter().copied().zip(steps.column("epsilon")?.iter().copied()).collect();
        epsilons.push(Series { label: label.clone(), points: pts });

        let updates = Table::read(&dir.join("updates.csv"))?;
        let smooth = centered_mean(&loss_differences(updates.column("loss")?), LOSS_DIFF_WINDOW);
        loss_diffs.push(Series { label: label.clone(), points: smooth.into_iter().enumerate().map(|(i, v)| ((i + 1) as f64, v)).collect() });

        let eval_path = dir.join("eval.csv");
        if eval_path.exists() {
            hists.push((label, eval_histogram(&Table::read(&eval_path)?)?));
        }
    }
    fs::create_dir_all(out)?;
    let mut figures = Vec::new();
    let mut emit = |name: &str, svg: String| -> HResult<()> {
        let path = out.join(name);
        fs::write(&path, svg)?;
        figures.push(path);
        Ok(())
    };
    emit(
        "reward_ma.svg",
        line_chart(&format!("Episode reward, moving average over {REWARD_WINDOW} episodes"), "episode", "cumulative reward", &rewards),
    )?;
    emit("epsilon.svg", line_chart("Exploration rate", "step", "epsilon", &epsilons))?;
    emit(
        "loss_diff.svg",
        line_chart(&format!("|loss difference|, centred mean over {LOSS_DIFF_WINDOW} updates"), "update", "|Δ loss|", &loss_diffs),
    )?;
    let mut histogram_csv = None;
    if !hists.is_empty() {
        let percent: Vec<(String, Vec<f64>)> = hists
            .iter()
            .map(|(l, b)| {
                let total: f64 = b.iter().sum::<f64>().max(1.0);
                (l.clone(), b.iter().map(|c| 100.0 * c / total).collect())
            })
            .collect();
        emit("histogram.svg", bar_chart("Evaluation reward distribution", "% of steps", &BIN_LABELS, &percent))?;
        let path = out.join("histogram.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["run", "bin", "count", "percent"])?;
        for ((label, counts), (_, pct)) in hists.iter().zip(&percent) {
            for k in 0..4 {
                w.write_record([label.clone(), BIN_LABELS[k].to_string(), counts[k].to_string(), pct[k].to_string()])?;
            }
        }
        w.flush()?;
        histogram_csv = Some(path);
    }
    Ok(ReportFiles { figures, histogram_csv })
}
