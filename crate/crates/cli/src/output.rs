//! Artifact writing: every output embeds the resolved configuration and the
//! tool version so a run can be reproduced from the file alone.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::Config;
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// 17 significant digits, round-trippable for f64.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Comment header lines (without the comment marker) for any artifact.
pub fn header_lines(subcommand: &str, cfg: &Config) -> Vec<String> {
    let mut lines = vec![
        format!("coevo {subcommand} (version {VERSION})"),
        "resolved configuration:".to_string(),
    ];
    for line in cfg.echo_lines() {
        lines.push(format!("  {line}"));
    }
    lines
}

pub fn write_text(
    dir: &Path,
    name: &str,
    subcommand: &str,
    cfg: &Config,
    body: &str,
) -> Result<PathBuf, CliError> {
    let mut content = String::new();
    for line in header_lines(subcommand, cfg) {
        content.push_str("# ");
        content.push_str(&line);
        content.push('\n');
    }
    content.push_str(body);
    let path = dir.join(name);
    std::fs::create_dir_all(dir)
        .and_then(|_| {
            let mut f = std::fs::File::create(&path)?;
            f.write_all(content.as_bytes())
        })
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

/// CSV body from a header row and float rows.
pub fn csv_body(columns: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt_float(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
