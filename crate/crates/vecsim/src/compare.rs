//! Aligns fleet metrics files and reports means, seed-paired differences and
//! sign counts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::runner::METRICS_HEADER;

const NUMERIC_COLUMNS: [&str; 5] =
    ["mean_delay_ms", "mean_utility", "mean_energy_j", "deadline_hit_rate", "mean_reward"];

#[derive(Debug)]
struct MetricsFile {
    label: String,
    /// seed -> column name -> value
    rows: BTreeMap<u64, BTreeMap<String, f64>>,
}

fn read_metrics(path: &Path) -> Result<MetricsFile> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let header: Vec<String> =
        reader.headers()?.iter().map(|s| s.to_string()).collect();
    for expected in METRICS_HEADER {
        if !header.iter().any(|h| h == expected) {
            bail!("schema mismatch in {}: missing column {expected}", path.display());
        }
    }
    let seed_at = header.iter().position(|h| h == "seed").expect("checked above");
    let mut rows = BTreeMap::new();
    let mut label = path.display().to_string();
    for record in reader.records() {
        let record = record?;
        let seed: u64 = record[seed_at].parse().context("bad seed cell")?;
        let mut cols = BTreeMap::new();
        for name in NUMERIC_COLUMNS {
            let at = header.iter().position(|h| h == name).expect("checked above");
            cols.insert(name.to_string(), record[at].parse().context("bad numeric cell")?);
        }
        if let Some(at) = header.iter().position(|h| h == "policy") {
            label = record[at].to_string();
        }
        rows.insert(seed, cols);
    }
    Ok(MetricsFile { label, rows })
}

/// Builds the comparison table. The first file is the reference; differences
/// are reference minus other, paired by seed. Returns the rendered text and
/// writes `compare.csv` under `out` when given.
pub fn compare(paths: &[std::path::PathBuf], out: Option<&Path>) -> Result<String> {
    if paths.len() < 2 {
        bail!("need at least two metrics files to compare");
    }
    let files: Vec<MetricsFile> = paths.iter().map(|p| read_metrics(p)).collect::<Result<_>>()?;
    let mut text = String::new();
    let mut csv_rows: Vec<Vec<String>> = Vec::new();

    writeln!(text, "{:<12} {}", "fleet means", NUMERIC_COLUMNS.join(" "))?;
    for f in &files {
        let n = f.rows.len().max(1) as f64;
        let means: Vec<String> = NUMERIC_COLUMNS
            .iter()
            .map(|c| {
                let s: f64 = f.rows.values().map(|r| r[*c]).sum();
                format!("{:.6}", s / n)
            })
            .collect();
        writeln!(text, "{:<12} {}", f.label, means.join(" "))?;
    }

    let reference = &files[0];
    for other in &files[1..] {
        let shared: Vec<u64> =
            reference.rows.keys().filter(|s| other.rows.contains_key(s)).copied().collect();
        if shared.is_empty() {
            bail!("no shared seeds between {} and {}", reference.label, other.label);
        }
        writeln!(
            text,
            "\npaired {} - {} over {} seeds:",
            reference.label,
            other.label,
            shared.len()
        )?;
        for col in NUMERIC_COLUMNS {
            let diffs: Vec<f64> = shared
                .iter()
                .map(|s| reference.rows[s][col] - other.rows[s][col])
                .collect();
            let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
            let pos = diffs.iter().filter(|d| **d > 0.0).count();
            let neg = diffs.iter().filter(|d| **d < 0.0).count();
            let zero = diffs.len() - pos - neg;
            writeln!(text, "  {col}: mean diff {mean:.6}, sign +{pos}/-{neg}/={zero}")?;
            csv_rows.push(vec![
                reference.label.clone(),
                other.label.clone(),
                col.to_string(),
                format!("{mean}"),
                pos.to_string(),
                neg.to_string(),
                zero.to_string(),
            ]);
        }
    }

    if let Some(out) = out {
        std::fs::create_dir_all(out)?;
        let mut w = csv::Writer::from_path(out.join("compare.csv"))?;
        w.write_record(["reference", "other", "column", "mean_diff", "positive", "negative", "zero"])?;
        for row in &csv_rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    Ok(text)
}
