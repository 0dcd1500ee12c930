//! Long-format panel files.
//!
//! One row per (unit, time) cell with a header row:
//!
//! ```text
//! unit,time,outcome,treated_start[,group][,x1,…,xp]
//! ```
//!
//! An empty `outcome` field is a missing outcome. `treated_start` holds the
//! time label at which the unit's treatment begins, empty for never-treated
//! units, and must agree across a unit's rows. Units are indexed in order of
//! first appearance; times are sorted numerically when every label parses
//! as a number and kept in order of first appearance otherwise. Absent rows
//! are missing outcomes.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::PanelData;
use crate::scalar::Real;

/// Column names used when reading a panel file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PanelSchema {
    pub unit: String,
    pub time: String,
    pub outcome: String,
    pub treated_start: Option<String>,
    pub group: Option<String>,
    /// Covariate columns; `None` picks up every `x<digits>` column.
    pub covariates: Option<Vec<String>>,
}

impl Default for PanelSchema {
    fn default() -> Self {
        Self {
            unit: "unit".into(),
            time: "time".into(),
            outcome: "outcome".into(),
            treated_start: Some("treated_start".into()),
            group: Some("group".into()),
            covariates: None,
        }
    }
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

fn is_auto_covariate(h: &str) -> bool {
    h.len() > 1 && h.starts_with('x') && h[1..].bytes().all(|b| b.is_ascii_digit())
}

struct Row {
    unit: usize,
    time: String,
    outcome: Option<String>,
    start: Option<String>,
    group: Option<String>,
    covariates: Vec<String>,
}

pub fn read_panel<T: Real, R: Read>(reader: R, schema: &PanelSchema) -> Result<PanelData<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    let need = |name: &str| column(&headers, name).ok_or_else(|| parse_err(format!("missing column {name:?}")));
    let (cu, ct, cy) = (need(&schema.unit)?, need(&schema.time)?, need(&schema.outcome)?);
    let cs = match &schema.treated_start {
        Some(name) => column(&headers, name),
        None => None,
    };
    let cg = match &schema.group {
        Some(name) => column(&headers, name),
        None => None,
    };
    let cov_cols: Vec<usize> = match &schema.covariates {
        Some(names) => names.iter().map(|n| need(n)).collect::<Result<_>>()?,
        None => headers.iter().enumerate().filter(|(_, h)| is_auto_covariate(h)).map(|(j, _)| j).collect(),
    };

    let mut unit_ids: Vec<String> = Vec::new();
    let mut unit_index: HashMap<String, usize> = HashMap::new();
    let mut time_seen: Vec<String> = Vec::new();
    let mut time_set: HashMap<String, ()> = HashMap::new();
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(format!("row {}: {e}", line + 2)))?;
        let field = |j: usize| rec.get(j).unwrap_or("").to_string();
        let nonempty = |s: String| if s.is_empty() { None } else { Some(s) };
        let u = field(cu);
        if u.is_empty() {
            return Err(parse_err(format!("row {}: empty unit label", line + 2)));
        }
        let unit = *unit_index.entry(u.clone()).or_insert_with(|| {
            unit_ids.push(u);
            unit_ids.len() - 1
        });
        let time = field(ct);
        if time.is_empty() {
            return Err(parse_err(format!("row {}: empty time label", line + 2)));
        }
        if time_set.insert(time.clone(), ()).is_none() {
            time_seen.push(time.clone());
        }
        rows.push(Row {
            unit,
            time,
            outcome: nonempty(field(cy)),
            start: cs.and_then(|j| nonempty(field(j))),
            group: cg.map(field),
            covariates: cov_cols.iter().map(|&j| field(j)).collect(),
        });
    }

    let numeric: Option<Vec<f64>> = time_seen.iter().map(|t| t.parse::<f64>().ok()).collect();
    if let Some(vals) = numeric {
        let mut order: Vec<usize> = (0..time_seen.len()).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        time_seen = order.into_iter().map(|j| time_seen[j].clone()).collect();
    }
    let time_index: HashMap<&str, usize> = time_seen.iter().enumerate().map(|(j, t)| (t.as_str(), j)).collect();
    let (n, nt, p) = (unit_ids.len(), time_seen.len(), cov_cols.len());

    let parse_num = |s: &str, what: &str| -> Result<T> {
        let v = s.parse::<T>().map_err(|_| parse_err(format!("cannot parse {what} value {s:?}")))?;
        if v.is_finite() { Ok(v) } else { Err(Error::NonFinite(format!("{what} value {s:?}"))) }
    };
    let mut outcomes = vec![vec![None; nt]; n];
    let mut present = vec![vec![false; nt]; n];
    let mut starts: Vec<Option<Option<usize>>> = vec![None; n];
    let mut groups: Vec<Option<String>> = vec![None; n];
    let mut covs = vec![T::zero(); n * nt * p];
    for r in rows {
        let t = time_index[r.time.as_str()];
        if present[r.unit][t] {
            return Err(parse_err(format!("duplicate row for unit {:?}, time {:?}", unit_ids[r.unit], r.time)));
        }
        present[r.unit][t] = true;
        outcomes[r.unit][t] = r.outcome.as_deref().map(|s| parse_num(s, "outcome")).transpose()?;
        let s = match &r.start {
            Some(label) => Some(
                *time_index
                    .get(label.as_str())
                    .ok_or_else(|| parse_err(format!("treated_start {label:?} is not a time label")))?,
            ),
            None => None,
        };
        match starts[r.unit] {
            None => starts[r.unit] = Some(s),
            Some(prev) if prev != s => {
                return Err(parse_err(format!("inconsistent treated_start for unit {:?}", unit_ids[r.unit])));
            }
            Some(_) => {}
        }
        if let Some(g) = r.group {
            match &groups[r.unit] {
                None => groups[r.unit] = Some(g),
                Some(prev) if *prev != g => {
                    return Err(parse_err(format!("inconsistent group for unit {:?}", unit_ids[r.unit])));
                }
                Some(_) => {}
            }
        }
        for (k, v) in r.covariates.iter().enumerate() {
            covs[(r.unit * nt + t) * p + k] = parse_num(v, "covariate")?;
        }
    }
    if p > 0 && present.iter().flatten().any(|&b| !b) {
        return Err(parse_err("covariates require a row for every (unit, time) cell"));
    }
    let mut panel = PanelData::new(unit_ids, time_seen, outcomes, starts.into_iter().map(Option::flatten).collect())?;
    if p > 0 {
        panel = panel.with_covariates(p, covs)?;
    }
    if cg.is_some() {
        let g: Vec<String> = groups.into_iter().map(Option::unwrap_or_default).collect();
        panel = panel.with_groups(g)?;
    }
    Ok(panel)
}

pub fn read_panel_file<T: Real>(path: &Path, schema: &PanelSchema) -> Result<PanelData<T>> {
    read_panel(std::fs::File::open(path)?, schema)
}

/// Writes every cell in unit-major order with the default column names.
pub fn write_panel<T: Real, W: Write>(panel: &PanelData<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let p = panel.n_covariates();
    let mut header = vec!["unit".to_string(), "time".into(), "outcome".into(), "treated_start".into()];
    if panel.groups().is_some() {
        header.push("group".into());
    }
    header.extend((1..=p).map(|k| format!("x{k}")));
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(&header).map_err(io)?;
    for i in 0..panel.n_units() {
        let start = panel.treatment_start()[i].map(|s| panel.time_ids()[s].clone()).unwrap_or_default();
        for t in 0..panel.n_times() {
            let mut rec = vec![
                panel.unit_ids()[i].clone(),
                panel.time_ids()[t].clone(),
                panel.outcome(i, t).map(|y| y.to_string()).unwrap_or_default(),
                start.clone(),
            ];
            if let Some(g) = panel.groups() {
                rec.push(g[i].clone());
            }
            rec.extend(panel.covariate(i, t).iter().map(|x| x.to_string()));
            w.write_record(&rec).map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_panel_file<T: Real>(panel: &PanelData<T>, path: &Path) -> Result<()> {
    write_panel(panel, std::fs::File::create(path)?)
}
