//! Flat `key=value` configuration.
//!
//! One entry per line, `#` starts a comment, keys are namespaced
//! (`channel.sigma_db`, `harq.max_tx`, ...). Every key except `scenario`
//! has a default; see [`SimConfig::default_for`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::amc::{AmcTable, TableLabel};
use crate::channel::{FadingParams, RadioParams, BLER_SLOPE_DB};
use crate::error::ConfigError;
use crate::mac::FrameBudget;
use crate::transport::TransportParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioId {
    Qpsk12,
    AmcA,
    AmcB,
    AmcAHarq,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 4] = [
        ScenarioId::Qpsk12,
        ScenarioId::AmcA,
        ScenarioId::AmcB,
        ScenarioId::AmcAHarq,
    ];

    /// Name used on the command line and for output files.
    pub fn slug(self) -> &'static str {
        match self {
            ScenarioId::Qpsk12 => "qpsk12",
            ScenarioId::AmcA => "amc-a",
            ScenarioId::AmcB => "amc-b",
            ScenarioId::AmcAHarq => "amc-a-harq",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for ScenarioId {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| *c != '-' && *c != '_')
            .flat_map(char::to_lowercase)
            .collect();
        match norm.as_str() {
            "qpsk12" | "qpsk" | "static" => Ok(ScenarioId::Qpsk12),
            "amca" => Ok(ScenarioId::AmcA),
            "amcb" => Ok(ScenarioId::AmcB),
            "amcaharq" => Ok(ScenarioId::AmcAHarq),
            _ => Err(ConfigError::invalid("scenario", format!("unknown scenario `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub radio: RadioParams,
    pub fading: FadingParams,
    pub mean_snr_min_db: f64,
    pub mean_snr_max_db: f64,
    /// Explicit station distances; overrides the evenly spaced SNR layout.
    pub distances_m: Option<Vec<f64>>,
    pub bler_slope_db: f64,
    /// Fixed block error probability for sanity runs.
    pub bler_override: Option<f64>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            radio: RadioParams::default(),
            fading: FadingParams::default(),
            mean_snr_min_db: 8.0,
            mean_snr_max_db: 22.0,
            distances_m: None,
            bler_slope_db: BLER_SLOPE_DB,
            bler_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmcConfig {
    pub table: AmcTable,
    pub cqi_period: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarqConfig {
    pub enabled: bool,
    pub max_tx: u32,
    pub rtt_frames: u64,
}

impl Default for HarqConfig {
    fn default() -> Self {
        HarqConfig {
            enabled: false,
            max_tx: 4,
            rtt_frames: 2,
        }
    }
}

impl HarqConfig {
    /// Attempts per block actually used by the run.
    pub fn effective_max_tx(&self) -> u32 {
        if self.enabled {
            self.max_tx
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficConfig {
    pub app_kbps: f64,
    pub payload_bytes: u32,
    pub header_bytes: u32,
    /// Spread of source start phases as a fraction of one segment interval;
    /// 0 starts every source in step.
    pub start_spread: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            app_kbps: 20.0,
            payload_bytes: 200,
            header_bytes: 40,
            start_spread: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcpConfig {
    pub window: usize,
    pub rto_ms: f64,
    pub rto_max_ms: f64,
}

impl Default for TcpConfig {
    fn default() -> Self {
        TcpConfig {
            window: 8,
            rto_ms: 600.0,
            rto_max_ms: 8000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scenario: ScenarioId,
    pub seed: u64,
    pub duration_s: f64,
    pub warmup_s: f64,
    pub ss_count: usize,
    pub channel: ChannelConfig,
    pub amc: AmcConfig,
    pub harq: HarqConfig,
    pub mac: FrameBudget,
    pub traffic: TrafficConfig,
    pub tcp: TcpConfig,
}

impl SimConfig {
    /// Defaults for a scenario: 300 s with 30 s warm-up, 20 stations, seed 1.
    pub fn default_for(scenario: ScenarioId) -> Self {
        let (table, harq_enabled) = match scenario {
            ScenarioId::Qpsk12 => (AmcTable::static_mode(), false),
            ScenarioId::AmcA => (AmcTable::table_a(), false),
            ScenarioId::AmcB => (AmcTable::table_b(), false),
            ScenarioId::AmcAHarq => (AmcTable::table_a(), true),
        };
        SimConfig {
            scenario,
            seed: 1,
            duration_s: 300.0,
            warmup_s: 30.0,
            ss_count: 20,
            channel: ChannelConfig::default(),
            amc: AmcConfig {
                table,
                cqi_period: 3,
            },
            harq: HarqConfig {
                enabled: harq_enabled,
                ..HarqConfig::default()
            },
            mac: FrameBudget::default(),
            traffic: TrafficConfig::default(),
            tcp: TcpConfig::default(),
        }
    }

    /// Same settings under another scenario: only the AMC table and HARQ switch change.
    pub fn with_scenario(&self, scenario: ScenarioId) -> Self {
        let preset = SimConfig::default_for(scenario);
        SimConfig {
            scenario,
            amc: AmcConfig {
                table: preset.amc.table,
                cqi_period: self.amc.cqi_period,
            },
            harq: HarqConfig {
                enabled: preset.harq.enabled,
                ..self.harq
            },
            ..self.clone()
        }
    }

    pub fn frame_duration_s(&self) -> f64 {
        self.mac.frame_duration_s
    }

    /// Number of frames the run covers.
    pub fn frame_count(&self) -> u64 {
        (self.duration_s / self.frame_duration_s() + 1e-9).floor() as u64
    }

    pub fn frames_for_ms(&self, ms: f64) -> u64 {
        (ms / 1000.0 / self.frame_duration_s()).round() as u64
    }

    pub fn transport_params(&self) -> TransportParams {
        TransportParams {
            window: self.tcp.window,
            rto_frames: self.frames_for_ms(self.tcp.rto_ms).max(1),
            rto_max_frames: self.frames_for_ms(self.tcp.rto_max_ms).max(1),
        }
    }

    /// Mean SNR targets or explicit distances resolved to per-station distances.
    pub fn station_distances(&self) -> Vec<f64> {
        match &self.channel.distances_m {
            Some(d) => d.clone(),
            None => crate::channel::spaced_mean_snrs(
                self.ss_count,
                self.channel.mean_snr_min_db,
                self.channel.mean_snr_max_db,
            )
            .into_iter()
            .map(|snr| self.channel.radio.distance_for_snr(snr))
            .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, key: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::invalid(key, msg))
            }
        };
        check(self.duration_s > 0.0, "duration", "must be positive")?;
        check(self.warmup_s >= 0.0, "warmup", "must not be negative")?;
        check(self.ss_count >= 1, "ss_count", "need at least one station")?;
        let c = &self.channel;
        check(c.fading.sigma_db >= 0.0, "channel.sigma_db", "must not be negative")?;
        check((0.0..=1.0).contains(&c.fading.rho), "channel.rho", "must lie in [0, 1]")?;
        check(
            c.mean_snr_min_db <= c.mean_snr_max_db,
            "channel.mean_snr_min_db",
            "must not exceed channel.mean_snr_max_db",
        )?;
        if let Some(d) = &c.distances_m {
            check(d.len() == self.ss_count, "channel.distances_m", "need one distance per station")?;
            check(d.iter().all(|&x| x > 0.0), "channel.distances_m", "must be positive")?;
        }
        check(c.radio.tx_power_w > 0.0, "ss.tx_power_w", "must be positive")?;
        check(c.radio.frequency_mhz > 0.0, "channel.frequency_mhz", "must be positive")?;
        check(c.radio.bandwidth_mhz > 0.0, "channel.bandwidth_mhz", "must be positive")?;
        check(c.bler_slope_db > 0.0, "channel.bler_slope_db", "must be positive")?;
        if let Some(p) = c.bler_override {
            check((0.0..=1.0).contains(&p), "channel.bler_override", "must lie in [0, 1]")?;
        }
        check(self.harq.max_tx >= 1, "harq.max_tx", "must be at least 1")?;
        check(self.harq.rtt_frames >= 1, "harq.rtt_frames", "must be at least 1")?;
        check(self.mac.ul_data_symbols > 0, "mac.ul_data_symbols", "must be positive")?;
        check(self.mac.frame_duration_s > 0.0, "mac.frame_ms", "must be positive")?;
        check(self.traffic.app_kbps >= 0.0, "traffic.app_kbps", "must not be negative")?;
        check(self.traffic.payload_bytes > 0, "traffic.payload_bytes", "must be positive")?;
        check(
            (0.0..=1.0).contains(&self.traffic.start_spread),
            "traffic.start_spread",
            "must lie in [0, 1]",
        )?;
        check(self.tcp.window >= 1, "tcp.window", "must be at least 1")?;
        check(self.tcp.rto_ms > 0.0, "tcp.rto_ms", "must be positive")?;
        check(self.tcp.rto_max_ms >= self.tcp.rto_ms, "tcp.rto_max_ms", "must be at least tcp.rto_ms")?;
        Ok(())
    }

    /// Every setting as sorted `key=value` lines.
    pub fn canonical_text(&self) -> String {
        let mut kv: BTreeMap<&str, String> = BTreeMap::new();
        let c = &self.channel;
        kv.insert("scenario", self.scenario.slug().to_string());
        kv.insert("seed", self.seed.to_string());
        kv.insert("duration", self.duration_s.to_string());
        kv.insert("warmup", self.warmup_s.to_string());
        kv.insert("ss_count", self.ss_count.to_string());
        kv.insert("channel.sigma_db", c.fading.sigma_db.to_string());
        kv.insert("channel.rho", c.fading.rho.to_string());
        kv.insert("channel.mean_snr_min_db", c.mean_snr_min_db.to_string());
        kv.insert("channel.mean_snr_max_db", c.mean_snr_max_db.to_string());
        if let Some(d) = &c.distances_m {
            kv.insert("channel.distances_m", join(d));
        }
        kv.insert("channel.frequency_mhz", c.radio.frequency_mhz.to_string());
        kv.insert("channel.bandwidth_mhz", c.radio.bandwidth_mhz.to_string());
        kv.insert("channel.noise_figure_db", c.radio.noise_figure_db.to_string());
        kv.insert("channel.bler_slope_db", c.bler_slope_db.to_string());
        if let Some(p) = c.bler_override {
            kv.insert("channel.bler_override", p.to_string());
        }
        kv.insert("ss.tx_power_w", c.radio.tx_power_w.to_string());
        kv.insert("ss.antenna_gain_dbi", c.radio.ss_antenna_gain_dbi.to_string());
        kv.insert("bs.antenna_gain_dbi", c.radio.bs_antenna_gain_dbi.to_string());
        let rows: Vec<String> = self
            .amc
            .table
            .rows()
            .iter()
            .map(|r| format!("{}/{}/{}", r.exit_threshold_db, r.entry_threshold_db, r.mcs_index))
            .collect();
        kv.insert("amc.table", format!("{}[{}]", self.amc.table.label(), rows.join(";")));
        kv.insert("amc.cqi_period", self.amc.cqi_period.to_string());
        kv.insert("harq.enabled", self.harq.enabled.to_string());
        kv.insert("harq.max_tx", self.harq.max_tx.to_string());
        kv.insert("harq.rtt_frames", self.harq.rtt_frames.to_string());
        kv.insert("mac.ul_data_symbols", self.mac.ul_data_symbols.to_string());
        kv.insert("mac.frame_ms", (self.mac.frame_duration_s * 1000.0).to_string());
        kv.insert("traffic.app_kbps", self.traffic.app_kbps.to_string());
        kv.insert("traffic.payload_bytes", self.traffic.payload_bytes.to_string());
        kv.insert("traffic.header_bytes", self.traffic.header_bytes.to_string());
        kv.insert("traffic.start_spread", self.traffic.start_spread.to_string());
        kv.insert("tcp.window", self.tcp.window.to_string());
        kv.insert("tcp.rto_ms", self.tcp.rto_ms.to_string());
        kv.insert("tcp.rto_max_ms", self.tcp.rto_max_ms.to_string());
        kv.into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Hex SHA-256 of [`SimConfig::canonical_text`].
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_text().as_bytes()))
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

/// Parsed but not yet interpreted document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigDoc {
    entries: BTreeMap<String, (usize, String)>,
}

impl ConfigDoc {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Parse {
                    line: line_no,
                    message: format!("expected `key=value`, found `{line}`"),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Parse {
                    line: line_no,
                    message: "empty key".into(),
                });
            }
            if entries.insert(key.to_string(), (line_no, value.trim().to_string())).is_some() {
                return Err(ConfigError::Parse {
                    line: line_no,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(ConfigDoc { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    /// Sets or replaces a value, as a command-line override would.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), (0, value.into()));
    }
}

const KNOWN_KEYS: &[&str] = &[
    "scenario",
    "seed",
    "duration",
    "warmup",
    "ss_count",
    "channel.sigma_db",
    "channel.rho",
    "channel.mean_snr_min_db",
    "channel.mean_snr_max_db",
    "channel.distances_m",
    "channel.frequency_mhz",
    "channel.bandwidth_mhz",
    "channel.noise_figure_db",
    "channel.bler_slope_db",
    "channel.bler_override",
    "ss.tx_power_w",
    "ss.antenna_gain_dbi",
    "bs.antenna_gain_dbi",
    "amc.table",
    "amc.cqi_period",
    "harq.enabled",
    "harq.max_tx",
    "harq.rtt_frames",
    "mac.ul_data_symbols",
    "mac.frame_ms",
    "traffic.preset",
    "traffic.app_kbps",
    "traffic.payload_bytes",
    "traffic.header_bytes",
    "traffic.start_spread",
    "tcp.window",
    "tcp.rto_ms",
    "tcp.rto_max_ms",
];

fn value<T: FromStr>(doc: &ConfigDoc, key: &str) -> Result<Option<T>, ConfigError> {
    match doc.get(key) {
        None => Ok(None),
        Some(raw) => raw.parse().map(Some).map_err(|_| {
            ConfigError::invalid(key, format!("cannot parse `{raw}`"))
        }),
    }
}

fn flag(doc: &ConfigDoc, key: &str) -> Result<Option<bool>, ConfigError> {
    match doc.get(key).map(str::to_ascii_lowercase).as_deref() {
        None => Ok(None),
        Some("true" | "on" | "yes" | "1") => Ok(Some(true)),
        Some("false" | "off" | "no" | "0") => Ok(Some(false)),
        Some(other) => Err(ConfigError::invalid(key, format!("expected a boolean, found `{other}`"))),
    }
}

fn set<T: FromStr>(doc: &ConfigDoc, key: &str, slot: &mut T) -> Result<(), ConfigError> {
    if let Some(v) = value(doc, key)? {
        *slot = v;
    }
    Ok(())
}

/// Resolves `amc.table`: `A`, `B`, `static`, or `file:<path>`.
fn table_from(spec: &str, base_dir: Option<&Path>) -> Result<AmcTable, ConfigError> {
    if let Some(path) = spec.strip_prefix("file:") {
        let mut full = PathBuf::from(path);
        if full.is_relative() {
            if let Some(base) = base_dir {
                full = base.join(full);
            }
        }
        let text = std::fs::read_to_string(&full).map_err(|e| ConfigError::Io {
            path: full.clone(),
            message: e.to_string(),
        })?;
        return AmcTable::parse(TableLabel::File(path.to_string()), &text);
    }
    match spec.to_ascii_lowercase().as_str() {
        "a" => Ok(AmcTable::table_a()),
        "b" => Ok(AmcTable::table_b()),
        "static" | "qpsk12" => Ok(AmcTable::static_mode()),
        _ => Err(ConfigError::invalid("amc.table", format!("unknown table `{spec}`"))),
    }
}

impl SimConfig {
    /// Builds a config from a parsed document. `file:` table paths resolve
    /// against `base_dir` when given.
    pub fn from_doc(doc: &ConfigDoc, base_dir: Option<&Path>) -> Result<Self, ConfigError> {
        for (key, (line, _)) in &doc.entries {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey {
                    key: key.clone(),
                    line: *line,
                });
            }
        }
        let scenario: ScenarioId = doc
            .get("scenario")
            .ok_or_else(|| ConfigError::MissingKey("scenario".into()))?
            .parse()?;
        let mut cfg = SimConfig::default_for(scenario);

        set(doc, "seed", &mut cfg.seed)?;
        set(doc, "duration", &mut cfg.duration_s)?;
        set(doc, "warmup", &mut cfg.warmup_s)?;
        set(doc, "ss_count", &mut cfg.ss_count)?;

        let ch = &mut cfg.channel;
        set(doc, "channel.sigma_db", &mut ch.fading.sigma_db)?;
        set(doc, "channel.rho", &mut ch.fading.rho)?;
        set(doc, "channel.mean_snr_min_db", &mut ch.mean_snr_min_db)?;
        set(doc, "channel.mean_snr_max_db", &mut ch.mean_snr_max_db)?;
        set(doc, "channel.frequency_mhz", &mut ch.radio.frequency_mhz)?;
        set(doc, "channel.bandwidth_mhz", &mut ch.radio.bandwidth_mhz)?;
        set(doc, "channel.noise_figure_db", &mut ch.radio.noise_figure_db)?;
        set(doc, "channel.bler_slope_db", &mut ch.bler_slope_db)?;
        ch.bler_override = value(doc, "channel.bler_override")?;
        if let Some(raw) = doc.get("channel.distances_m") {
            let d = raw
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| ConfigError::invalid("channel.distances_m", format!("cannot parse `{raw}`")))?;
            ch.distances_m = Some(d);
        }
        set(doc, "ss.tx_power_w", &mut ch.radio.tx_power_w)?;
        set(doc, "ss.antenna_gain_dbi", &mut ch.radio.ss_antenna_gain_dbi)?;
        set(doc, "bs.antenna_gain_dbi", &mut ch.radio.bs_antenna_gain_dbi)?;

        if let Some(spec) = doc.get("amc.table") {
            cfg.amc.table = table_from(spec, base_dir)?;
        }
        set(doc, "amc.cqi_period", &mut cfg.amc.cqi_period)?;
        if let Some(on) = flag(doc, "harq.enabled")? {
            cfg.harq.enabled = on;
        }
        set(doc, "harq.max_tx", &mut cfg.harq.max_tx)?;
        set(doc, "harq.rtt_frames", &mut cfg.harq.rtt_frames)?;

        set(doc, "mac.ul_data_symbols", &mut cfg.mac.ul_data_symbols)?;
        if let Some(ms) = value::<f64>(doc, "mac.frame_ms")? {
            cfg.mac.frame_duration_s = ms / 1000.0;
        }

        match doc.get("traffic.preset") {
            None | Some("default") => {}
            Some("sdu1500") => cfg.traffic.payload_bytes = 1500,
            Some(other) => {
                return Err(ConfigError::invalid("traffic.preset", format!("unknown preset `{other}`")))
            }
        }
        set(doc, "traffic.app_kbps", &mut cfg.traffic.app_kbps)?;
        set(doc, "traffic.payload_bytes", &mut cfg.traffic.payload_bytes)?;
        set(doc, "traffic.header_bytes", &mut cfg.traffic.header_bytes)?;
        set(doc, "traffic.start_spread", &mut cfg.traffic.start_spread)?;
        set(doc, "tcp.window", &mut cfg.tcp.window)?;
        set(doc, "tcp.rto_ms", &mut cfg.tcp.rto_ms)?;
        set(doc, "tcp.rto_max_ms", &mut cfg.tcp.rto_max_ms)?;

        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_doc(&ConfigDoc::parse(&text)?, path.parent())
    }
}

/// Parses a configuration document, applying defaults for omitted keys.
pub fn load_config(source: &str) -> Result<SimConfig, ConfigError> {
    SimConfig::from_doc(&ConfigDoc::parse(source)?, None)
}
