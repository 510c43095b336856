//! Ingestion of per-group study records.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use metamed::summaries::{GroupSummary, MeanSdSummary, TwoGroupSummary};
use metamed::QuantileSummary;

use crate::{CliError, CliResult};

/// One row of the input CSV: a single group of a single study and outcome.
/// A row carries either `mean` and `sd` or a quantile set, never both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub study_id: String,
    pub outcome: String,
    pub group: u8,
    pub n: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub min: Option<f64>,
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
    pub max: Option<f64>,
}

impl StudyRecord {
    pub fn to_group(&self) -> Result<GroupSummary, String> {
        let has_ms = self.mean.is_some() || self.sd.is_some();
        let has_q = [self.min, self.q1, self.median, self.q3, self.max].iter().any(Option::is_some);
        match (has_ms, has_q) {
            (true, true) => Err("row has both mean/sd and quantiles".into()),
            (false, false) => Err("row has neither mean/sd nor quantiles".into()),
            (true, false) => match (self.mean, self.sd) {
                (Some(m), Some(s)) => MeanSdSummary::new(m, s, self.n).map(GroupSummary::MeanSd).map_err(|e| e.to_string()),
                _ => Err("mean and sd must be given together".into()),
            },
            (false, true) => {
                let median = self.median.ok_or("quantile rows need a median")?;
                QuantileSummary::from_parts(self.min, self.q1, median, self.q3, self.max, self.n)
                    .map(GroupSummary::Quantiles)
                    .map_err(|e| e.to_string())
            }
        }
    }
}

/// Both groups of one study for one outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyPair {
    pub study_id: String,
    pub outcome: String,
    pub summary: TwoGroupSummary,
    /// CSV line of each group's row.
    pub lines: [u64; 2],
}

/// Read every record, collecting all malformed lines into one error.
pub fn read_records(path: &Path) -> CliResult<Vec<(u64, StudyRecord)>> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    read_records_from(file)
}

pub fn read_records_from<R: std::io::Read>(reader: R) -> CliResult<Vec<(u64, StudyRecord)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let headers = rdr.headers().map_err(|e| CliError::Data(format!("bad header: {e}")))?.clone();
    for col in ["study_id", "outcome", "group", "n"] {
        if !headers.iter().any(|h| h == col) {
            return Err(CliError::Data(format!("missing required column '{col}'")));
        }
    }
    let mut out = Vec::new();
    let mut bad = Vec::new();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                bad.push(format!("line {line}: {e}"));
                continue;
            }
        };
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        match rec.deserialize::<StudyRecord>(Some(&headers)) {
            Ok(r) => out.push((line, r)),
            Err(e) => bad.push(format!("line {line}: {e}")),
        }
    }
    if !bad.is_empty() {
        return Err(CliError::Data(format!("unparseable rows:\n  {}", bad.join("\n  "))));
    }
    Ok(out)
}

/// Pair the two groups of every (study, outcome), in order of first appearance.
pub fn pair_groups(records: &[(u64, StudyRecord)]) -> CliResult<Vec<StudyPair>> {
    let mut index: HashMap<(String, String), usize> = HashMap::new();
    let mut slots: Vec<(String, String, [Option<(u64, GroupSummary)>; 2])> = Vec::new();
    let mut bad = Vec::new();
    for (line, r) in records {
        if r.group != 1 && r.group != 2 {
            bad.push(format!("line {line}: group must be 1 or 2, got {}", r.group));
            continue;
        }
        let g = match r.to_group() {
            Ok(g) => g,
            Err(msg) => {
                bad.push(format!("line {line}: {msg}"));
                continue;
            }
        };
        let key = (r.outcome.clone(), r.study_id.clone());
        let i = *index.entry(key).or_insert_with(|| {
            slots.push((r.study_id.clone(), r.outcome.clone(), [None, None]));
            slots.len() - 1
        });
        let slot = &mut slots[i].2[r.group as usize - 1];
        if slot.is_some() {
            bad.push(format!("line {line}: duplicate row for study '{}', outcome '{}', group {}", r.study_id, r.outcome, r.group));
            continue;
        }
        *slot = Some((*line, g));
    }
    let mut pairs = Vec::with_capacity(slots.len());
    for (study_id, outcome, [g1, g2]) in slots {
        match (g1, g2) {
            (Some((l1, group1)), Some((l2, group2))) => pairs.push(StudyPair {
                study_id,
                outcome,
                summary: TwoGroupSummary { group1, group2 },
                lines: [l1, l2],
            }),
            (a, _) => {
                let missing = if a.is_none() { 1 } else { 2 };
                bad.push(format!("study '{study_id}', outcome '{outcome}': no row for group {missing}"));
            }
        }
    }
    if !bad.is_empty() {
        return Err(CliError::Data(format!("invalid rows:\n  {}", bad.join("\n  "))));
    }
    Ok(pairs)
}
