//! Record files, CSV tables and atomic writes.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ramc_core::bound::{BoundReport, ExponentLimit, SingleUserBound};
use ramc_core::exponent::ExponentResult;
use ramc_core::region::{C1Report, FeasibilityReport, OperationRegion, RegionMember};
use ramc_core::sim::{Scenario, SimReport, TraceRecord};

use crate::CliError;

/// Format tag written into every record file.
pub const RECORD_FORMAT: &str = "ramc-record/1";

/// A record file: the scenario that produced it and the result.
///
/// Indices inside are 0-based, as in the library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordFile {
    pub format: String,
    pub name: String,
    pub scenario: Scenario,
    pub record: Record,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "kebab-case")]
pub enum Record {
    Exponent(ExponentRecord),
    Bound(BoundReport),
    ExponentLimit(ExponentLimit),
    Region(RegionRecord),
    Partition(SingleUserBound),
    Simulation(SimReport),
    Sweep(Vec<SweepRow>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentRecord {
    pub agreeing: ramc_core::channel::UserSet,
    pub truth: RegionMember,
    pub competing: RegionMember,
    pub result: ExponentResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub region: OperationRegion,
    /// Checked on the channel-level form of the region.
    pub feasibility: FeasibilityReport,
    pub maximal: OperationRegion,
    /// Present when the config defines classes and the region is channel-level.
    pub class_check: Option<C1Report>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: u64,
    #[serde(with = "ramc_core::serde_float")]
    pub log_bound: f64,
    pub clamped_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub format: String,
    pub trace: Vec<TraceRecord>,
}

impl RecordFile {
    pub fn new(name: &str, scenario: Scenario, record: Record) -> Self {
        Self {
            format: RECORD_FORMAT.into(),
            name: name.into(),
            scenario,
            record,
        }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        to_json(self)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let file: Self = serde_json::from_str(text)
            .map_err(|e| CliError::Schema(format!("record file: {e}")))?;
        if file.format != RECORD_FORMAT {
            return Err(CliError::Schema(format!(
                "record format `{}` is not `{RECORD_FORMAT}`",
                file.format
            )));
        }
        Ok(file)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// A number with 12 significant digits.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        x.to_string()
    }
}

/// Renders a CSV table.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::Internal(e.to_string()))?;
    for row in rows {
        w.write_record(row).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Internal(e.to_string()))
}

/// Contents destined for files, written only after everything is computed.
#[derive(Debug, Default)]
pub struct Pending {
    files: Vec<(PathBuf, String)>,
}

impl Pending {
    pub fn add(&mut self, path: PathBuf, contents: String) {
        self.files.push((path, contents));
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    /// Writes each file through a temporary sibling and a rename.
    pub fn commit(self) -> Result<(), CliError> {
        for (path, contents) in self.files {
            write_atomic(&path, contents.as_bytes())?;
        }
        Ok(())
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
