//! Pulsed I-V measurement sets: CSV ingest, sanity checks and region tags.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mandatory CSV header, in order.
pub const HEADER: [&str; 6] = ["vgs_V", "vds_V", "id_A", "tcase_K", "pulsed", "source_tag"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },
    #[error("bad header: expected `{}`, got `{found}`", HEADER.join(","))]
    UnitHeader { found: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    #[serde(rename = "linear_lowV")]
    LinearLowV,
    #[serde(rename = "output_midV")]
    OutputMidV,
    HighPower,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::LinearLowV, Region::OutputMidV, Region::HighPower];

    pub fn as_str(self) -> &'static str {
        match self {
            Region::LinearLowV => "linear_lowV",
            Region::OutputMidV => "output_midV",
            Region::HighPower => "high_power",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Region {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Region::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| DatasetError::Domain(format!("unknown region {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub vgs: f64,
    pub vds: f64,
    pub id: f64,
    pub t_case: f64,
    pub pulsed: bool,
    pub source_tag: String,
    /// Number of raw rows averaged into this record.
    pub count: usize,
}

impl MeasurementRecord {
    pub fn new(vgs: f64, vds: f64, id: f64, t_case: f64) -> Self {
        Self {
            vgs,
            vds,
            id,
            t_case,
            pulsed: true,
            source_tag: String::new(),
            count: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementSet {
    pub records: Vec<MeasurementRecord>,
    /// One label per record; all `LinearLowV` until [`partition_regions`] runs.
    pub region_labels: Vec<Region>,
    pub units_validated: bool,
}

impl MeasurementSet {
    /// Builds a set from records, collapsing duplicate bias triples.
    pub fn from_records(records: Vec<MeasurementRecord>) -> Self {
        let records = dedup(records);
        let region_labels = vec![Region::LinearLowV; records.len()];
        Self {
            records,
            region_labels,
            units_validated: false,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records carrying `region`, in file order.
    pub fn in_region(&self, region: Region) -> impl Iterator<Item = &MeasurementRecord> {
        self.records
            .iter()
            .zip(&self.region_labels)
            .filter(move |(_, r)| **r == region)
            .map(|(rec, _)| rec)
    }

    pub fn count_in(&self, region: Region) -> usize {
        self.region_labels.iter().filter(|r| **r == region).count()
    }

    /// Writes the set as CSV. Averaged records are written once.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| DatasetError::Io(std::io::Error::other(e));
        w.write_record(HEADER).map_err(err)?;
        for r in &self.records {
            w.write_record([
                format!("{:?}", r.vgs),
                format!("{:?}", r.vds),
                format!("{:?}", r.id),
                format!("{:?}", r.t_case),
                u8::from(r.pulsed).to_string(),
                r.source_tag.clone(),
            ])
            .map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn key(r: &MeasurementRecord) -> (u64, u64, u64) {
    // +0.0 and -0.0 are the same bias
    let bits = |v: f64| if v == 0.0 { 0 } else { v.to_bits() };
    (bits(r.vgs), bits(r.vds), bits(r.t_case))
}

fn dedup(records: Vec<MeasurementRecord>) -> Vec<MeasurementRecord> {
    let mut index: HashMap<(u64, u64, u64), usize> = HashMap::new();
    let mut out: Vec<MeasurementRecord> = Vec::with_capacity(records.len());
    let mut sums: Vec<f64> = Vec::with_capacity(records.len());
    for r in records {
        match index.get(&key(&r)) {
            Some(&i) => {
                sums[i] += r.id * r.count as f64;
                out[i].count += r.count;
            }
            None => {
                index.insert(key(&r), out.len());
                sums.push(r.id * r.count as f64);
                out.push(r);
            }
        }
    }
    for (r, s) in out.iter_mut().zip(sums) {
        if r.count > 1 {
            r.id = s / r.count as f64;
        }
    }
    out
}

/// Parses measurement CSV. `#` lines are comments; the first other line must
/// be the header.
pub fn load_measurements<R: Read>(input: R) -> Result<MeasurementSet, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let mut rows = reader.records();
    let header = match rows.next() {
        Some(h) => h.map_err(|e| csv_error(e, 1))?,
        None => return Err(DatasetError::UnitHeader { found: String::new() }),
    };
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(DatasetError::UnitHeader {
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut records = Vec::new();
    for row in rows {
        let row = row.map_err(|e| csv_error(e, 0))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != HEADER.len() {
            return Err(DatasetError::Parse {
                row: line,
                column: row.len().min(HEADER.len()) + 1,
                message: format!("expected {} fields, found {}", HEADER.len(), row.len()),
            });
        }
        let num = |col: usize| -> Result<f64, DatasetError> {
            let text = &row[col];
            let v: f64 = text.parse().map_err(|_| DatasetError::Parse {
                row: line,
                column: col + 1,
                message: format!("{} is not a number: {text:?}", HEADER[col]),
            })?;
            if !v.is_finite() {
                return Err(DatasetError::Parse {
                    row: line,
                    column: col + 1,
                    message: format!("{} must be finite, got {text:?}", HEADER[col]),
                });
            }
            Ok(v)
        };
        let (vgs, vds, id, t_case) = (num(0)?, num(1)?, num(2)?, num(3)?);
        if vds < 0.0 {
            return Err(DatasetError::Parse {
                row: line,
                column: 2,
                message: format!("vds must be >= 0, got {vds}"),
            });
        }
        if t_case <= 0.0 {
            return Err(DatasetError::Parse {
                row: line,
                column: 4,
                message: format!("tcase must be > 0, got {t_case}"),
            });
        }
        let pulsed = match &row[4] {
            "0" => false,
            "1" => true,
            other => {
                return Err(DatasetError::Parse {
                    row: line,
                    column: 5,
                    message: format!("pulsed must be 0 or 1, got {other:?}"),
                })
            }
        };
        records.push(MeasurementRecord {
            vgs,
            vds,
            id,
            t_case,
            pulsed,
            source_tag: row[5].to_string(),
            count: 1,
        });
    }
    Ok(MeasurementSet::from_records(records))
}

fn csv_error(e: csv::Error, fallback_row: usize) -> DatasetError {
    let row = e.position().map_or(fallback_row, |p| p.line() as usize);
    DatasetError::Parse {
        row,
        column: 0,
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationLimits {
    /// Lowest acceptable current, A.
    pub id_floor: f64,
    /// Relative band within which a current may dip as vgs rises.
    pub monotone_band: f64,
    /// Absolute slack added to the band, A.
    pub monotone_abs: f64,
    /// Safe-operating-area power ceiling, W.
    pub soa_power: f64,
}

impl Default for ValidationLimits {
    fn default() -> Self {
        Self {
            id_floor: -1e-6,
            monotone_band: 0.05,
            monotone_abs: 1e-9,
            soa_power: 5e4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    CurrentFloor,
    NonMonotoneVgs,
    SoaPower,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Index into `records`.
    pub record: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

/// Report-only sanity checks; the set is not modified.
pub fn validate_measurements(set: &MeasurementSet, limits: &ValidationLimits) -> ValidationReport {
    let mut violations = Vec::new();
    for (i, r) in set.records.iter().enumerate() {
        if r.id < limits.id_floor {
            violations.push(Violation {
                kind: ViolationKind::CurrentFloor,
                record: i,
                message: format!("id = {} A below floor {} A", r.id, limits.id_floor),
            });
        }
        let power = r.id * r.vds;
        if power > limits.soa_power {
            violations.push(Violation {
                kind: ViolationKind::SoaPower,
                record: i,
                message: format!("power {power} W above SOA ceiling {} W", limits.soa_power),
            });
        }
    }

    // monotonicity in vgs within each (vds, t_case) group; a point is flagged
    // when it falls below the band around the running maximum of its group
    let mut groups: HashMap<(u64, u64), Vec<usize>> = HashMap::new();
    for (i, r) in set.records.iter().enumerate() {
        let k = key(r);
        groups.entry((k.1, k.2)).or_default().push(i);
    }
    let mut group_list: Vec<_> = groups.into_values().collect();
    group_list.sort_by_key(|g| g[0]);
    for mut members in group_list {
        members.sort_by(|&a, &b| set.records[a].vgs.total_cmp(&set.records[b].vgs));
        let mut best = f64::NEG_INFINITY;
        for &i in &members {
            let id = set.records[i].id;
            if id < best * (1.0 - limits.monotone_band) - limits.monotone_abs {
                violations.push(Violation {
                    kind: ViolationKind::NonMonotoneVgs,
                    record: i,
                    message: format!(
                        "id = {id} A at vgs = {} V drops below {best} A reached at lower vgs",
                        set.records[i].vgs
                    ),
                });
            } else {
                best = best.max(id);
            }
        }
    }
    violations.sort_by_key(|v| v.record);
    ValidationReport { violations }
}

/// Region boundaries in terms of terminal vds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionThresholds {
    pub vds_lin_max: f64,
    pub vds_mid_max: f64,
}

impl Default for RegionThresholds {
    fn default() -> Self {
        Self {
            vds_lin_max: 0.5,
            vds_mid_max: 15.0,
        }
    }
}

/// Tags every record with the setup region it belongs to.
pub fn partition_regions(set: &MeasurementSet, th: &RegionThresholds) -> Result<MeasurementSet, DatasetError> {
    if !(0.0 < th.vds_lin_max && th.vds_lin_max < th.vds_mid_max) || !th.vds_mid_max.is_finite() {
        return Err(DatasetError::Domain(format!(
            "region thresholds must satisfy 0 < vds_lin_max < vds_mid_max, got ({}, {})",
            th.vds_lin_max, th.vds_mid_max
        )));
    }
    let region_labels = set
        .records
        .iter()
        .map(|r| {
            if r.vds <= th.vds_lin_max {
                Region::LinearLowV
            } else if r.vds <= th.vds_mid_max {
                Region::OutputMidV
            } else {
                Region::HighPower
            }
        })
        .collect();
    Ok(MeasurementSet {
        records: set.records.clone(),
        region_labels,
        units_validated: set.units_validated,
    })
}
