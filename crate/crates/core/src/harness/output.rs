//! CSV and gnuplot emission.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::runner::SummaryTable;

pub const CSV_HEADER: [&str; 5] = ["policy", "checkpoint_t", "mean_regret", "stderr", "num_runs"];

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: io::Write>(table: &SummaryTable, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in table.rows() {
        w.write_record([
            r.policy.clone(),
            r.checkpoint_t.to_string(),
            format_real(r.mean_regret),
            format_real(r.stderr),
            r.num_runs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(table: &SummaryTable, path: &Path) -> io::Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(table, io::BufWriter::new(file)).map_err(io::Error::other)
}

/// Gnuplot script drawing one mean-regret curve per policy from `csv_name`,
/// which is resolved relative to the script's directory.
pub fn plot_script(table: &SummaryTable, title: &str, csv_name: &str, log_axes: bool) -> String {
    let stem = csv_name.strip_suffix(".csv").unwrap_or(csv_name);
    let mut s = String::new();
    let _ = writeln!(s, "# {title}: cumulative regret against time");
    let _ = writeln!(s, "# usage: gnuplot {stem}.gp");
    s.push_str("set datafile separator ','\n");
    s.push_str("set terminal pngcairo size 960,640 noenhanced\n");
    let _ = writeln!(s, "set output '{stem}.png'");
    let _ = writeln!(s, "set title '{title}'");
    s.push_str("set xlabel 'time t'\n");
    s.push_str("set ylabel 'cumulative regret'\n");
    s.push_str("set key top left\n");
    s.push_str("set grid\n");
    if log_axes {
        s.push_str("set logscale xy\n");
    }
    let policies = table.policies();
    if policies.is_empty() {
        return s;
    }
    s.push_str("plot \\\n");
    for (i, p) in policies.iter().enumerate() {
        let sep = if i + 1 == policies.len() { "" } else { ", \\" };
        let _ = writeln!(
            s,
            "  '{csv_name}' skip 1 using 2:(strcol(1) eq '{p}' ? $3 : 1/0) with lines lw 2 title '{p}'{sep}"
        );
    }
    s
}

pub fn emit_plot_script(table: &SummaryTable, path: &Path, title: &str, csv_name: &str, log_axes: bool) -> io::Result<()> {
    std::fs::write(path, plot_script(table, title, csv_name, log_axes))
}

/// Writes `<name>.csv` and `<name>.gp` into the configured output directory.
pub fn write_outputs(cfg: &ExperimentConfig, table: &SummaryTable) -> io::Result<(PathBuf, PathBuf)> {
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir)?;
    let csv_name = format!("{}.csv", cfg.name);
    let csv_path = dir.join(&csv_name);
    let gp_path = dir.join(format!("{}.gp", cfg.name));
    emit_csv(table, &csv_path)?;
    emit_plot_script(table, &gp_path, &cfg.name, &csv_name, cfg.log_axes)?;
    Ok((csv_path, gp_path))
}
