//! Report rendering: seed-averaged final-iteration tables (markdown) and
//! long-format learning-curve data for external plotting.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use alpool_core::acquisition::strategy_names;
use alpool_core::engine::RESULTS_CSV_HEADER;
use alpool_core::models::MODEL_NAMES;

#[derive(Debug, Clone)]
struct Row {
    experiment_id: String,
    strategy: String,
    model: String,
    iteration: usize,
    n_labeled: usize,
    split: String,
    precision: f64,
    recall: f64,
    f1: f64,
}

fn parse_csv(path: &Path) -> Result<Vec<Row>, String> {
    let content =
        fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut lines = content.lines();
    match lines.next() {
        Some(header) if header == RESULTS_CSV_HEADER => {}
        _ => return Err(format!("{}: not a results CSV", path.display())),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(format!("{} line {}: expected 12 fields", path.display(), idx + 2));
        }
        let num = |s: &str| -> Result<f64, String> {
            s.parse().map_err(|_| format!("{} line {}: bad number `{s}`", path.display(), idx + 2))
        };
        rows.push(Row {
            experiment_id: fields[0].to_string(),
            strategy: fields[1].to_string(),
            model: fields[2].to_string(),
            iteration: num(fields[4])? as usize,
            n_labeled: num(fields[6])? as usize,
            split: fields[7].to_string(),
            precision: num(fields[8])?,
            recall: num(fields[9])?,
            f1: num(fields[10])?,
        });
    }
    Ok(rows)
}

/// Half-up rounding to two decimals, matching the reported table precision.
fn round2(v: f64) -> f64 {
    ((v * 100.0) + 0.5).floor() / 100.0
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn population_std(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Sort key giving the canonical reporting order: known names first in
/// their canonical position, anything else after, alphabetically.
fn order_key(canonical: &[String], name: &str) -> (usize, String) {
    match canonical.iter().position(|c| c == name) {
        Some(i) => (i, String::new()),
        None => (canonical.len(), name.to_string()),
    }
}

/// Reads every results CSV in `indir` and writes the markdown table to
/// `out` plus curve data to `<out stem>_curves.csv`. Returns a one-line
/// summary.
pub fn render(indir: &Path, out: &Path) -> Result<String, String> {
    let mut files: Vec<PathBuf> = fs::read_dir(indir)
        .map_err(|e| format!("cannot read {}: {e}", indir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(format!("no results CSVs in {}", indir.display()));
    }
    let mut rows = Vec::new();
    for file in &files {
        rows.extend(parse_csv(file)?);
    }

    // Final iteration per experiment.
    let mut final_iteration: BTreeMap<String, usize> = BTreeMap::new();
    for row in &rows {
        let entry = final_iteration.entry(row.experiment_id.clone()).or_insert(0);
        *entry = (*entry).max(row.iteration);
    }

    // (model, strategy) -> per-metric value lists over seeds, final iteration.
    type Key = (String, String);
    let mut finals: BTreeMap<Key, [Vec<f64>; 6]> = BTreeMap::new();
    for row in &rows {
        if row.iteration != final_iteration[&row.experiment_id] {
            continue;
        }
        let slot = finals
            .entry((row.model.clone(), row.strategy.clone()))
            .or_insert_with(|| std::array::from_fn(|_| Vec::new()));
        let base = if row.split == "train" { 0 } else { 3 };
        slot[base].push(row.precision);
        slot[base + 1].push(row.recall);
        slot[base + 2].push(row.f1);
    }

    let canonical_strategies = strategy_names();
    let canonical_models: Vec<String> = MODEL_NAMES.iter().map(|m| m.to_string()).collect();
    let mut models: Vec<String> =
        finals.keys().map(|(m, _)| m.clone()).collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
    models.sort_by_key(|m| order_key(&canonical_models, m));

    let mut md = String::from("# Final-iteration results (seed-averaged)\n");
    for model in &models {
        let _ = writeln!(md, "\n## model: {model}\n");
        md.push_str("| strategy | train P | train R | train F1 | test P | test R | test F1 |\n");
        md.push_str("|---|---|---|---|---|---|---|\n");
        let mut strategies: Vec<String> = finals
            .keys()
            .filter(|(m, _)| m == model)
            .map(|(_, s)| s.clone())
            .collect();
        strategies.sort_by_key(|s| order_key(&canonical_strategies, s));
        for strategy in strategies {
            let slot = &finals[&(model.clone(), strategy.clone())];
            let _ = write!(md, "| {strategy} |");
            for values in slot {
                if values.is_empty() {
                    md.push_str(" - |");
                } else {
                    let _ = write!(md, " {:.2} |", round2(mean(values)));
                }
            }
            md.push('\n');
        }
    }
    fs::write(out, &md).map_err(|e| format!("cannot write {}: {e}", out.display()))?;

    // Long-format curves: one line per (strategy, model, n_labeled, split).
    let mut curves: BTreeMap<(String, String, usize, String), Vec<f64>> = BTreeMap::new();
    for row in &rows {
        curves
            .entry((row.strategy.clone(), row.model.clone(), row.n_labeled, row.split.clone()))
            .or_default()
            .push(row.f1);
    }
    let mut curve_keys: Vec<_> = curves.keys().cloned().collect();
    curve_keys.sort_by(|a, b| {
        order_key(&canonical_strategies, &a.0)
            .cmp(&order_key(&canonical_strategies, &b.0))
            .then(order_key(&canonical_models, &a.1).cmp(&order_key(&canonical_models, &b.1)))
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(&b.3))
    });
    let mut curve_csv = String::from("strategy,model,n_labeled,split,f1_micro_mean,f1_micro_std\n");
    for key in curve_keys {
        let values = &curves[&key];
        let _ = writeln!(
            curve_csv,
            "{},{},{},{},{:.6},{:.6}",
            key.0,
            key.1,
            key.2,
            key.3,
            mean(values),
            population_std(values)
        );
    }
    let curve_path = curves_path(out);
    fs::write(&curve_path, curve_csv)
        .map_err(|e| format!("cannot write {}: {e}", curve_path.display()))?;

    Ok(format!(
        "report over {} files -> {} and {}",
        files.len(),
        out.display(),
        curve_path.display()
    ))
}

/// `report.md` -> `report_curves.csv` in the same directory.
pub fn curves_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    out.with_file_name(format!("{stem}_curves.csv"))
}
