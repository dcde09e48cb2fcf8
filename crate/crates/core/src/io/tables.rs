//! CSV label and vote files, JSON documents.

use std::collections::HashSet;
use std::path::Path;

use serde::Serialize;

use super::atomic_write;
use crate::crowdlabel::{RawSubmission, Response};
use crate::error::{Error, Result};
use crate::labels::{LabelVector, NUM_CLASSES};
use crate::metrics::ThresholdSet;

/// Probability columns of a label file, in category order.
pub const LABEL_COLUMNS: [&str; NUM_CLASSES] = ["brain", "muscle", "eye", "heart", "line_noise", "channel_noise", "other"];

pub const VOTE_HEADER: &str =
    "labeler_id,component_id,brain,muscle,eye,heart,line_noise,channel_noise,other,question_mark,is_expert";

fn csv_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Csv {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn open_csv(path: &Path) -> Result<(csv::Reader<std::fs::File>, csv::StringRecord)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_error(path, 0, e.to_string()))?;
    let header = reader.headers().map_err(|e| csv_error(path, 1, e.to_string()))?.clone();
    Ok((reader, header))
}

fn column(path: &Path, header: &csv::StringRecord, name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| csv_error(path, 1, format!("missing column {name:?}")))
}

/// Reads `component_id` plus the seven probability columns; other columns
/// are ignored.
pub fn read_labels(path: &Path) -> Result<Vec<(String, LabelVector)>> {
    let (mut reader, header) = open_csv(path)?;
    let id_col = column(path, &header, "component_id")?;
    let cols: Vec<usize> = LABEL_COLUMNS
        .iter()
        .map(|c| column(path, &header, c))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record[id_col].to_string();
        if id.is_empty() {
            return Err(csv_error(path, line, "empty component_id"));
        }
        if !seen.insert(id.clone()) {
            return Err(csv_error(path, line, format!("component {id} appears twice")));
        }
        let mut p = [0.0; NUM_CLASSES];
        for (k, &c) in cols.iter().enumerate() {
            p[k] = record[c]
                .parse()
                .map_err(|_| csv_error(path, line, format!("{}: cannot parse {:?}", LABEL_COLUMNS[k], &record[c])))?;
        }
        let label = LabelVector::new(p).map_err(|e| csv_error(path, line, e.to_string()))?;
        out.push((id, label));
    }
    Ok(out)
}

pub fn write_labels(path: &Path, labels: &[(String, LabelVector)]) -> Result<()> {
    atomic_write(path, |w| {
        let mut writer = csv::Writer::from_writer(w);
        let mut header = vec!["component_id"];
        header.extend(LABEL_COLUMNS);
        writer.write_record(&header).map_err(|e| Error::Format(e.to_string()))?;
        for (id, l) in labels {
            let mut row = vec![id.clone()];
            row.extend(l.as_array().iter().map(|v| v.to_string()));
            writer.write_record(&row).map_err(|e| Error::Format(e.to_string()))?;
        }
        writer.flush()?;
        Ok(())
    })
}

/// Writes a CSV with the given header; every row must match its width.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    if let Some(r) = rows.iter().find(|r| r.len() != header.len()) {
        return Err(Error::Shape(format!("row of {} fields under a {}-column header", r.len(), header.len())));
    }
    atomic_write(path, |w| {
        let mut writer = csv::Writer::from_writer(w);
        writer.write_record(header).map_err(|e| Error::Format(e.to_string()))?;
        for r in rows {
            writer.write_record(r).map_err(|e| Error::Format(e.to_string()))?;
        }
        writer.flush()?;
        Ok(())
    })
}

fn flag(path: &Path, line: u64, name: &str, v: &str) -> Result<bool> {
    match v {
        "1" | "true" | "TRUE" | "True" => Ok(true),
        "0" | "false" | "FALSE" | "False" | "" => Ok(false),
        _ => Err(csv_error(path, line, format!("{name}: expected 0 or 1, got {v:?}"))),
    }
}

/// One submission per row; the eight response columns are 0/1 selections.
pub fn read_votes(path: &Path) -> Result<Vec<RawSubmission>> {
    let (mut reader, header) = open_csv(path)?;
    let labeler = column(path, &header, "labeler_id")?;
    let component = column(path, &header, "component_id")?;
    let expert = column(path, &header, "is_expert")?;
    let responses: Vec<(Response, usize)> = Response::ALL
        .iter()
        .map(|r| Ok((*r, column(path, &header, r.column())?)))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let mut selections = Vec::new();
        for &(r, c) in &responses {
            if flag(path, line, r.column(), &record[c])? {
                selections.push(r);
            }
        }
        if selections.is_empty() {
            return Err(csv_error(path, line, "no response selected"));
        }
        if record[labeler].is_empty() || record[component].is_empty() {
            return Err(csv_error(path, line, "empty labeler_id or component_id"));
        }
        out.push(RawSubmission {
            labeler_id: record[labeler].to_string(),
            component_id: record[component].to_string(),
            selections,
            is_expert: flag(path, line, "is_expert", &record[expert])?,
        });
    }
    Ok(out)
}

pub fn write_votes(path: &Path, submissions: &[RawSubmission]) -> Result<()> {
    atomic_write(path, |w| {
        writeln!(w, "{VOTE_HEADER}")?;
        for s in submissions {
            let mut row = vec![s.labeler_id.clone(), s.component_id.clone()];
            for r in Response::ALL {
                row.push(if s.selections.contains(&r) { "1" } else { "0" }.into());
            }
            row.push(if s.is_expert { "1" } else { "0" }.into());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    })
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    atomic_write(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

pub fn read_thresholds(path: &Path) -> Result<ThresholdSet> {
    let t: ThresholdSet = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    ThresholdSet::new(t.thresholds, t.provenance)
}

pub fn write_thresholds(path: &Path, t: &ThresholdSet) -> Result<()> {
    write_json(path, t)
}
