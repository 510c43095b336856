//! Rendering of `meta` reports as Markdown, CSV or JSON.

use crate::analysis::{MetaReport, OutcomeRow, StudyRow};
use crate::args::Format;
use crate::{fmt2, CliError, CliResult};

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn to_csv<T: serde::Serialize>(rows: &[T], stamp: Option<&str>) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(data_err)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(data_err)?).expect("csv output is UTF-8");
    Ok(match stamp {
        Some(s) => format!("# {s}\n{body}"),
        None => body,
    })
}

/// The study table as CSV; [`parse_studies_csv`] reads it back unchanged.
pub fn render_studies_csv(rows: &[StudyRow]) -> CliResult<String> {
    to_csv(rows, None)
}

pub fn parse_studies_csv(text: &str) -> CliResult<Vec<StudyRow>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(data_err)
}

fn stamp(r: &MetaReport) -> CliResult<String> {
    Ok(format!(
        "{} {} input={} config={}",
        r.tool,
        r.version,
        r.input,
        serde_json::to_string(&r.config).map_err(data_err)?
    ))
}

fn markdown(r: &MetaReport) -> CliResult<String> {
    let pct = r.config.level * 100.0;
    let mut out = format!("# Meta-analysis ({}, {} SE)\n\n", r.config.method, r.config.se);
    out += &format!("`{}`\n\n", stamp(r)?);
    out += &format!("| outcome | k | difference | {pct}% CI | tau2 | {pct}% CI | I2 (%) |\n");
    out += "|---|---:|---:|---|---:|---|---:|\n";
    for o in &r.outcomes {
        out += &outcome_line(o);
    }
    if r.outcomes.is_empty() {
        out += "\nNo outcome had enough studies to pool.\n";
    }
    let local: Vec<&str> = r.outcomes.iter().filter(|o| o.tau2_local_mode).map(|o| o.outcome.as_str()).collect();
    if !local.is_empty() {
        out += &format!(
            "\nNote: for {} the REML estimate of tau2 is a local maximum; the restricted likelihood is higher \
             elsewhere, and the Q-profile interval may exclude the estimate.\n",
            local.join(", ")
        );
    }
    if !r.studies.is_empty() {
        out += "\n## Studies\n\n| outcome | study | n1 | n2 | mean1 | mean2 | difference | SE | weight (%) |\n";
        out += "|---|---|---:|---:|---:|---:|---:|---:|---:|\n";
        for s in &r.studies {
            out += &format!(
                "| {} | {} | {} | {} | {} | {} | {} | {} | {} |\n",
                s.outcome,
                s.study_id,
                s.n1,
                s.n2,
                fmt2(s.mean1),
                fmt2(s.mean2),
                fmt2(s.diff),
                fmt2(s.se),
                fmt2(100.0 * s.weight)
            );
        }
    }
    if !r.dropped.is_empty() || !r.skipped.is_empty() {
        out += "\n## Screening\n\n";
        for d in &r.dropped {
            out += &format!("- dropped {} ({}): {}\n", d.study_id, d.outcome, d.reason);
        }
        for s in &r.skipped {
            out += &format!("- skipped outcome {}: {} studies after screening\n", s.outcome, s.studies);
        }
    }
    Ok(out)
}

fn outcome_line(o: &OutcomeRow) -> String {
    format!(
        "| {} | {} | {} | [{}, {}] | {} | [{}, {}] | {} |\n",
        o.outcome,
        o.k,
        fmt2(o.diff),
        fmt2(o.ci_lo),
        fmt2(o.ci_hi),
        fmt2(o.tau2),
        fmt2(o.tau2_lo),
        fmt2(o.tau2_hi),
        fmt2(100.0 * o.i2)
    )
}

/// Render in the report's configured format. CSV carries the outcome table
/// with the configuration stamp as a leading `#` comment.
pub fn render_meta(r: &MetaReport) -> CliResult<String> {
    match r.config.format {
        Format::Markdown => markdown(r),
        Format::Json => Ok(serde_json::to_string_pretty(r).map_err(data_err)? + "\n"),
        Format::Csv => to_csv(&r.outcomes, Some(&stamp(r)?)),
    }
}
