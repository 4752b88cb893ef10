//! Plain-text tables of headline numbers.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use crate::artifacts::{Headline, RunManifest};
use crate::error::CliResult;

const HEADER: [&str; 5] = ["experiment", "quantity", "value", "target", "verdict"];

fn render(rows: &[[String; 5]]) -> String {
    let mut width = HEADER.map(str::len);
    for r in rows {
        for (w, cell) in width.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: [&str; 5]| {
        let mut text = String::new();
        for (c, w) in cells.iter().zip(width) {
            let _ = write!(text, "{c}{}  ", " ".repeat(w - c.chars().count()));
        }
        out.push_str(text.trim_end());
        out.push('\n');
    };
    line(&mut out, HEADER);
    let rule = width.map(|w| "-".repeat(w));
    line(&mut out, [&rule[0], &rule[1], &rule[2], &rule[3], &rule[4]]);
    for r in rows {
        line(&mut out, [&r[0], &r[1], &r[2], &r[3], &r[4]]);
    }
    out
}

fn row(experiment: &str, h: &Headline) -> [String; 5] {
    [
        experiment.to_string(),
        h.name.clone(),
        format!("{:.6}", h.value),
        h.target.clone(),
        h.verdict().to_string(),
    ]
}

pub fn headline_table(experiment: &str, headlines: &[Headline]) -> String {
    render(&headlines.iter().map(|h| row(experiment, h)).collect::<Vec<_>>())
}

/// A directory stands for its `manifest.json`.
fn manifest_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("manifest.json")
    } else {
        p.to_path_buf()
    }
}

/// Table over every manifest, plus a pass/fail tally.
pub fn emit_report(paths: &[PathBuf]) -> CliResult<String> {
    let mut rows = Vec::new();
    for p in paths {
        let m = RunManifest::load(&manifest_path(p))?;
        rows.extend(m.headlines.iter().map(|h| row(&m.experiment, h)));
    }
    let mut out = render(&rows);
    let checked: Vec<&[String; 5]> = rows.iter().filter(|r| r[4] != "-").collect();
    let passed = checked.iter().filter(|r| r[4] == "PASS").count();
    let _ = writeln!(out, "\n{passed}/{} checks passed", checked.len());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_is_just_a_header() {
        let r = emit_report(&[]).unwrap();
        assert!(r.starts_with("experiment"));
        assert!(r.contains("0/0 checks passed"));
    }

    #[test]
    fn columns_align() {
        let t = headline_table(
            "ghz",
            &[
                Headline::check("peak", 1.0, "1 ± 1e-9", true),
                Headline::info("a much longer quantity name", 0.5, "info"),
            ],
        );
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 4);
        let col = lines[0].find("value").unwrap();
        assert!(lines[2..].iter().all(|l| l[col..].starts_with(|c: char| c.is_ascii_digit())));
        assert!(lines[2].ends_with("PASS") && lines[3].ends_with('-'));
    }
}
