//! AMC controller: threshold tables with entry/exit hysteresis and delayed
//! CQI feedback.

use std::collections::VecDeque;
use std::fmt;

use crate::channel::{McsProfile, MCS_PROFILES};
use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TableLabel {
    A,
    B,
    StaticQpsk12,
    /// Loaded from a file; holds the path as given.
    File(String),
}

impl fmt::Display for TableLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableLabel::A => f.write_str("A"),
            TableLabel::B => f.write_str("B"),
            TableLabel::StaticQpsk12 => f.write_str("static"),
            TableLabel::File(path) => write!(f, "file:{path}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmcRow {
    pub exit_threshold_db: f64,
    pub entry_threshold_db: f64,
    pub mcs_index: usize,
}

/// Ordered threshold rows; row `i` is entered at `entry_threshold_db` and
/// must be left when the report drops below `exit_threshold_db`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmcTable {
    label: TableLabel,
    rows: Vec<AmcRow>,
}

const fn row(exit: f64, entry: f64, mcs_index: usize) -> AmcRow {
    AmcRow {
        exit_threshold_db: exit,
        entry_threshold_db: entry,
        mcs_index,
    }
}

const TABLE_A: [AmcRow; 7] = [
    row(-20.0, 2.0, 0),
    row(5.0, 5.9, 1),
    row(8.0, 8.9, 2),
    row(11.0, 11.9, 3),
    row(14.0, 14.9, 4),
    row(17.0, 17.9, 5),
    row(19.0, 19.9, 6),
];

const TABLE_B: [AmcRow; 7] = [
    row(-20.0, 2.0, 0),
    row(11.0, 11.9, 1),
    row(14.0, 14.9, 2),
    row(17.0, 17.9, 3),
    row(20.0, 20.9, 4),
    row(23.0, 23.9, 5),
    row(25.0, 25.9, 6),
];

impl AmcTable {
    pub fn new(label: TableLabel, rows: Vec<AmcRow>) -> Result<Self, ConfigError> {
        let key = "amc.table";
        if rows.is_empty() {
            return Err(ConfigError::invalid(key, "table has no rows"));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.mcs_index >= MCS_PROFILES.len() {
                return Err(ConfigError::invalid(
                    key,
                    format!("row {i}: unknown MCS index {}", r.mcs_index),
                ));
            }
            if i > 0 {
                if r.entry_threshold_db <= rows[i - 1].entry_threshold_db {
                    return Err(ConfigError::invalid(
                        key,
                        format!("row {i}: entry thresholds must strictly increase"),
                    ));
                }
                if r.exit_threshold_db >= r.entry_threshold_db {
                    return Err(ConfigError::invalid(
                        key,
                        format!("row {i}: exit threshold must lie below entry threshold"),
                    ));
                }
            }
        }
        Ok(AmcTable { label, rows })
    }

    pub fn table_a() -> Self {
        AmcTable {
            label: TableLabel::A,
            rows: TABLE_A.to_vec(),
        }
    }

    pub fn table_b() -> Self {
        AmcTable {
            label: TableLabel::B,
            rows: TABLE_B.to_vec(),
        }
    }

    /// One-row table pinning QPSK 1/2.
    pub fn static_mode() -> Self {
        AmcTable {
            label: TableLabel::StaticQpsk12,
            rows: vec![TABLE_A[0]],
        }
    }

    /// Parses `index,exit_db,entry_db,mcs_name` rows. Blank lines and `#`
    /// comments are skipped.
    pub fn parse(label: TableLabel, text: &str) -> Result<Self, ConfigError> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| ConfigError::Parse {
                line: n + 1,
                message,
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(parse_err(format!("expected 4 fields, found {}", fields.len())));
            }
            let index: usize = fields[0]
                .parse()
                .map_err(|_| parse_err(format!("bad row index `{}`", fields[0])))?;
            if index != rows.len() {
                return Err(parse_err(format!("row index {index} out of order")));
            }
            let exit: f64 = fields[1]
                .parse()
                .map_err(|_| parse_err(format!("bad exit threshold `{}`", fields[1])))?;
            let entry: f64 = fields[2]
                .parse()
                .map_err(|_| parse_err(format!("bad entry threshold `{}`", fields[2])))?;
            let mcs = McsProfile::by_name(fields[3])
                .ok_or_else(|| parse_err(format!("unknown MCS `{}`", fields[3])))?;
            rows.push(row(exit, entry, mcs.index));
        }
        AmcTable::new(label, rows)
    }

    pub fn label(&self) -> &TableLabel {
        &self.label
    }

    pub fn rows(&self) -> &[AmcRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn mcs(&self, row_index: usize) -> &'static McsProfile {
        &MCS_PROFILES[self.rows[row_index].mcs_index]
    }

    /// Highest row whose entry threshold admits `snr_db`, or the floor row.
    fn highest_admissible(&self, snr_db: f64) -> usize {
        self.rows
            .iter()
            .rposition(|r| r.entry_threshold_db <= snr_db)
            .unwrap_or(0)
    }

    /// Picks the row for the next frame from the current row and the reported SNR.
    ///
    /// Upgrades jump straight to the best admissible row. Above the current
    /// row's exit threshold the station never moves down; below it, it falls
    /// to the best admissible row (row 0 at worst).
    pub fn select(&self, current_index: usize, reported_snr_db: f64) -> usize {
        debug_assert!(current_index < self.rows.len());
        let admissible = self.highest_admissible(reported_snr_db);
        if reported_snr_db >= self.rows[current_index].exit_threshold_db {
            admissible.max(current_index)
        } else {
            admissible
        }
    }
}

/// Free-function form of [`AmcTable::select`].
pub fn amc_select(table: &AmcTable, current_index: usize, reported_snr_db: f64) -> usize {
    table.select(current_index, reported_snr_db)
}

/// Per-station controller state.
#[derive(Debug, Clone, PartialEq)]
pub struct AmcState {
    pub current_index: usize,
    cqi_history: VecDeque<f64>,
    pub cqi_period: usize,
    pub last_report_db: Option<f64>,
}

impl AmcState {
    pub fn new(cqi_period: usize) -> Self {
        AmcState {
            current_index: 0,
            cqi_history: VecDeque::with_capacity(cqi_period + 1),
            cqi_period,
            last_report_db: None,
        }
    }

    /// Stores this frame's measurement and exposes the one taken
    /// `cqi_period` frames ago (or the oldest available before that).
    pub fn report_cqi(&mut self, instant_snr_db: f64) -> f64 {
        self.cqi_history.push_back(instant_snr_db);
        while self.cqi_history.len() > self.cqi_period + 1 {
            self.cqi_history.pop_front();
        }
        let report = *self.cqi_history.front().expect("history holds the new sample");
        self.last_report_db = Some(report);
        report
    }

    /// Feeds one measurement and updates the selected row.
    pub fn update(&mut self, table: &AmcTable, instant_snr_db: f64) -> usize {
        let report = self.report_cqi(instant_snr_db);
        self.current_index = table.select(self.current_index, report);
        self.current_index
    }
}
