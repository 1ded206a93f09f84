//! Per-frame records, steady-state summaries, CSV output and cross-scenario
//! comparison.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use crate::config::{ScenarioId, SimConfig};
use crate::error::SimError;

pub const MCS_COUNT: usize = 7;

/// Observables for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsRecord {
    pub frame_index: u64,
    pub time_s: f64,
    /// Wire bits generated by the applications this frame, per second.
    pub offered_load_bps: f64,
    /// Bits of SDUs completed over the air this frame, per second.
    pub mac_throughput_bps: f64,
    pub delivered_sdus: u64,
    /// Mean MAC-enqueue to air-delivery delay of SDUs delivered this frame.
    pub mean_wimax_delay_s: Option<f64>,
    pub ul_usage_pct: f64,
    /// Failed transmissions over all transmissions, retransmissions included.
    pub pre_harq_bler: Option<f64>,
    /// Blocks given up on over blocks resolved.
    pub post_harq_loss_rate: Option<f64>,
    /// Stations on each MCS index.
    pub mcs_histogram: [u32; MCS_COUNT],
}

pub const CSV_HEADER: [&str; 16] = [
    "frame_index",
    "time_s",
    "offered_load_bps",
    "mac_throughput_bps",
    "delivered_sdus",
    "mean_wimax_delay_s",
    "ul_usage_pct",
    "pre_harq_bler",
    "post_harq_loss_rate",
    "mcs0",
    "mcs1",
    "mcs2",
    "mcs3",
    "mcs4",
    "mcs5",
    "mcs6",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl StatsRecord {
    fn csv_fields(&self) -> Vec<String> {
        let mut f = vec![
            self.frame_index.to_string(),
            self.time_s.to_string(),
            self.offered_load_bps.to_string(),
            self.mac_throughput_bps.to_string(),
            self.delivered_sdus.to_string(),
            opt(self.mean_wimax_delay_s),
            self.ul_usage_pct.to_string(),
            opt(self.pre_harq_bler),
            opt(self.post_harq_loss_rate),
        ];
        f.extend(self.mcs_histogram.iter().map(u32::to_string));
        f
    }

    fn from_csv(row: &csv::StringRecord, line: u64) -> Result<Self, String> {
        if row.len() != CSV_HEADER.len() {
            return Err(format!("line {line}: expected {} columns, found {}", CSV_HEADER.len(), row.len()));
        }
        let field = |i: usize| &row[i];
        let num = |i: usize| -> Result<f64, String> {
            field(i)
                .parse()
                .map_err(|_| format!("line {line}: bad {} `{}`", CSV_HEADER[i], field(i)))
        };
        let int = |i: usize| -> Result<u64, String> {
            field(i)
                .parse()
                .map_err(|_| format!("line {line}: bad {} `{}`", CSV_HEADER[i], field(i)))
        };
        let maybe = |i: usize| -> Result<Option<f64>, String> {
            if field(i).is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        let mut mcs_histogram = [0u32; MCS_COUNT];
        for (k, slot) in mcs_histogram.iter_mut().enumerate() {
            *slot = int(9 + k)? as u32;
        }
        Ok(StatsRecord {
            frame_index: int(0)?,
            time_s: num(1)?,
            offered_load_bps: num(2)?,
            mac_throughput_bps: num(3)?,
            delivered_sdus: int(4)?,
            mean_wimax_delay_s: maybe(5)?,
            ul_usage_pct: num(6)?,
            pre_harq_bler: maybe(7)?,
            post_harq_loss_rate: maybe(8)?,
            mcs_histogram,
        })
    }
}

/// Writes a header row and one row per record.
pub fn write_csv<W: Write>(records: &[StatsRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record(r.csv_fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<StatsRecord>, String> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err("unexpected CSV header".into());
    }
    rdr.records()
        .enumerate()
        .map(|(i, row)| {
            let row = row.map_err(|e| e.to_string())?;
            StatsRecord::from_csv(&row, i as u64 + 2)
        })
        .collect()
}

fn io_err(path: &Path, source: std::io::Error) -> SimError {
    SimError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> SimError {
    io_err(path, std::io::Error::other(e.to_string()))
}

/// Writes `records` to `path` as CSV.
pub fn emit_csv(records: &[StatsRecord], path: &Path) -> Result<(), SimError> {
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    write_csv(records, std::io::BufWriter::new(file)).map_err(|e| csv_err(path, e))
}

pub fn load_csv(path: &Path) -> Result<Vec<StatsRecord>, SimError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    read_csv(std::io::BufReader::new(file))
        .map_err(|m| io_err(path, std::io::Error::new(std::io::ErrorKind::InvalidData, m)))
}

#[derive(Default)]
struct MeanAcc {
    sum: f64,
    n: u64,
}

impl MeanAcc {
    fn add(&mut self, v: Option<f64>) {
        if let Some(v) = v {
            self.sum += v;
            self.n += 1;
        }
    }

    fn add_weighted(&mut self, v: Option<f64>, w: u64) {
        if let Some(v) = v {
            self.sum += v * w as f64;
            self.n += w;
        }
    }

    fn mean(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }
}

/// Averages consecutive frames into bins of `bin_s` seconds.
///
/// Rates, usage and error ratios are averaged over the frames that report
/// them, delay is weighted by delivered SDUs, and SDU counts and the MCS
/// histogram are summed (the histogram becomes station-frames per MCS).
pub fn downsample(records: &[StatsRecord], frame_s: f64, bin_s: f64) -> Vec<StatsRecord> {
    let per_bin = ((bin_s / frame_s).round() as usize).max(1);
    records
        .chunks(per_bin)
        .map(|chunk| {
            let (mut offered, mut thr, mut usage) = (MeanAcc::default(), MeanAcc::default(), MeanAcc::default());
            let (mut delay, mut bler, mut loss) = (MeanAcc::default(), MeanAcc::default(), MeanAcc::default());
            let mut delivered = 0;
            let mut hist = [0u32; MCS_COUNT];
            for r in chunk {
                offered.add(Some(r.offered_load_bps));
                thr.add(Some(r.mac_throughput_bps));
                usage.add(Some(r.ul_usage_pct));
                delay.add_weighted(r.mean_wimax_delay_s, r.delivered_sdus);
                bler.add(r.pre_harq_bler);
                loss.add(r.post_harq_loss_rate);
                delivered += r.delivered_sdus;
                for (h, v) in hist.iter_mut().zip(r.mcs_histogram) {
                    *h += v;
                }
            }
            StatsRecord {
                frame_index: chunk[0].frame_index,
                time_s: chunk[0].time_s,
                offered_load_bps: offered.mean().unwrap_or(0.0),
                mac_throughput_bps: thr.mean().unwrap_or(0.0),
                delivered_sdus: delivered,
                mean_wimax_delay_s: delay.mean(),
                ul_usage_pct: usage.mean().unwrap_or(0.0),
                pre_harq_bler: bler.mean(),
                post_harq_loss_rate: loss.mean(),
                mcs_histogram: hist,
            }
        })
        .collect()
}

/// Steady-state means of every record field.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub frames: u64,
    pub offered_load_bps: f64,
    pub mac_throughput_bps: f64,
    /// SDUs delivered per frame.
    pub delivered_sdus: f64,
    /// Weighted by delivered SDUs.
    pub mean_wimax_delay_s: Option<f64>,
    pub ul_usage_pct: f64,
    pub pre_harq_bler: Option<f64>,
    pub post_harq_loss_rate: Option<f64>,
    /// Mean stations per MCS.
    pub mcs_histogram: [f64; MCS_COUNT],
}

/// Means over records at or after `warmup_s`.
pub fn summarize(records: &[StatsRecord], warmup_s: f64) -> Result<SteadyState, SimError> {
    let window: Vec<&StatsRecord> = records.iter().filter(|r| r.time_s >= warmup_s - 1e-9).collect();
    if window.is_empty() {
        return Err(SimError::Summary("no steady-state window".into()));
    }
    let n = window.len() as f64;
    let (mut delay, mut bler, mut loss) = (MeanAcc::default(), MeanAcc::default(), MeanAcc::default());
    let mut hist = [0.0; MCS_COUNT];
    let (mut offered, mut thr, mut usage, mut delivered) = (0.0, 0.0, 0.0, 0u64);
    for r in &window {
        offered += r.offered_load_bps;
        thr += r.mac_throughput_bps;
        usage += r.ul_usage_pct;
        delivered += r.delivered_sdus;
        delay.add_weighted(r.mean_wimax_delay_s, r.delivered_sdus);
        bler.add(r.pre_harq_bler);
        loss.add(r.post_harq_loss_rate);
        for (h, v) in hist.iter_mut().zip(r.mcs_histogram) {
            *h += f64::from(v);
        }
    }
    Ok(SteadyState {
        frames: window.len() as u64,
        offered_load_bps: offered / n,
        mac_throughput_bps: thr / n,
        delivered_sdus: delivered as f64 / n,
        mean_wimax_delay_s: delay.mean(),
        ul_usage_pct: usage / n,
        pre_harq_bler: bler.mean(),
        post_harq_loss_rate: loss.mean(),
        mcs_histogram: hist.map(|h| h / n),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSummary {
    pub scenario: ScenarioId,
    pub seed: u64,
    pub config_digest: String,
    pub warmup_s: f64,
    pub steady: SteadyState,
}

impl ScenarioSummary {
    pub fn from_records(config: &SimConfig, records: &[StatsRecord]) -> Result<Self, SimError> {
        Ok(ScenarioSummary {
            scenario: config.scenario,
            seed: config.seed,
            config_digest: config.digest(),
            warmup_s: config.warmup_s,
            steady: summarize(records, config.warmup_s)?,
        })
    }

    pub fn usage(&self) -> f64 {
        self.steady.ul_usage_pct
    }

    pub fn delay(&self) -> Option<f64> {
        self.steady.mean_wimax_delay_s
    }

    pub fn loss(&self) -> Option<f64> {
        self.steady.post_harq_loss_rate
    }

    /// `key: value` text, one field per line.
    pub fn to_text(&self) -> String {
        let s = &self.steady;
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k}: {v}");
        };
        line("scenario", self.scenario.slug().to_string());
        line("seed", self.seed.to_string());
        line("config_digest", self.config_digest.clone());
        line("warmup_s", self.warmup_s.to_string());
        line("steady_frames", s.frames.to_string());
        line("offered_load_bps", s.offered_load_bps.to_string());
        line("mac_throughput_bps", s.mac_throughput_bps.to_string());
        line("delivered_sdus_per_frame", s.delivered_sdus.to_string());
        line("mean_wimax_delay_s", opt(s.mean_wimax_delay_s));
        line("ul_usage_pct", s.ul_usage_pct.to_string());
        line("pre_harq_bler", opt(s.pre_harq_bler));
        line("post_harq_loss_rate", opt(s.post_harq_loss_rate));
        let hist: Vec<String> = s.mcs_histogram.iter().map(f64::to_string).collect();
        line("mcs_histogram", hist.join(","));
        out
    }
}

/// One scenario's line in a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub scenario: ScenarioId,
    pub usage_pct: f64,
    pub delay_s: Option<f64>,
    pub loss: Option<f64>,
    pub rank: usize,
    pub pareto_optimal: bool,
    pub dominated_by: Vec<ScenarioId>,
    pub ties_with: Vec<ScenarioId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// Sorted best first.
    pub rows: Vec<ComparisonRow>,
}

/// Objectives, all minimized. A scenario with no deliveries has infinite delay.
fn objectives(s: &ScenarioSummary) -> [f64; 3] {
    [
        s.usage(),
        s.delay().unwrap_or(f64::INFINITY),
        s.loss().unwrap_or(0.0),
    ]
}

fn dominates(a: &[f64; 3], b: &[f64; 3]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// Ranks scenarios on (usage, delay, post-HARQ loss) and flags the ones no
/// other scenario dominates.
///
/// Rows are ordered by how many scenarios dominate them, then by usage,
/// delay and loss.
pub fn compare(summaries: &[ScenarioSummary]) -> ComparisonReport {
    let objs: Vec<[f64; 3]> = summaries.iter().map(objectives).collect();
    let mut rows: Vec<ComparisonRow> = summaries
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let others = || (0..summaries.len()).filter(move |&j| j != i);
            let dominated_by: Vec<ScenarioId> = others()
                .filter(|&j| dominates(&objs[j], &objs[i]))
                .map(|j| summaries[j].scenario)
                .collect();
            let ties_with = others()
                .filter(|&j| objs[j] == objs[i])
                .map(|j| summaries[j].scenario)
                .collect();
            ComparisonRow {
                scenario: s.scenario,
                usage_pct: s.usage(),
                delay_s: s.delay(),
                loss: s.loss(),
                rank: 0,
                pareto_optimal: dominated_by.is_empty(),
                dominated_by,
                ties_with,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        let key = |r: &ComparisonRow| {
            (
                r.dominated_by.len(),
                r.usage_pct,
                r.delay_s.unwrap_or(f64::INFINITY),
                r.loss.unwrap_or(0.0),
            )
        };
        let (ka, kb) = (key(a), key(b));
        ka.0.cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.total_cmp(&kb.2))
            .then(ka.3.total_cmp(&kb.3))
            .then(a.scenario.cmp(&b.scenario))
    });
    let mut rank = 0;
    for i in 0..rows.len() {
        let tied_with_previous = i > 0 && rows[i].ties_with.contains(&rows[i - 1].scenario);
        if !tied_with_previous {
            rank = i + 1;
        }
        rows[i].rank = rank;
    }
    ComparisonReport { rows }
}

impl ComparisonReport {
    pub fn pareto_optimal(&self) -> Vec<ScenarioId> {
        self.rows.iter().filter(|r| r.pareto_optimal).map(|r| r.scenario).collect()
    }

    pub fn row(&self, scenario: ScenarioId) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.scenario == scenario)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let names = |v: &[ScenarioId]| v.iter().map(|s| s.slug()).collect::<Vec<_>>().join(" ");
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "rank",
            "scenario",
            "ul_usage_pct",
            "mean_wimax_delay_s",
            "post_harq_loss_rate",
            "pareto_optimal",
            "dominated_by",
            "ties_with",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.rank.to_string(),
                r.scenario.slug().to_string(),
                r.usage_pct.to_string(),
                opt(r.delay_s),
                opt(r.loss),
                r.pareto_optimal.to_string(),
                names(&r.dominated_by),
                names(&r.ties_with),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Human-readable table.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<5} {:<11} {:>9} {:>11} {:>11}  pareto",
            "rank", "scenario", "usage %", "delay ms", "loss"
        );
        for r in &self.rows {
            let delay = r.delay_s.map_or("-".to_string(), |d| format!("{:.2}", d * 1000.0));
            let loss = r.loss.map_or("-".to_string(), |l| format!("{l:.2e}"));
            let mut flag = if r.pareto_optimal { "*".to_string() } else { String::new() };
            if !r.ties_with.is_empty() {
                let names: Vec<&str> = r.ties_with.iter().map(|s| s.slug()).collect();
                let _ = write!(flag, " tie with {}", names.join(", "));
            }
            let _ = writeln!(
                out,
                "{:<5} {:<11} {:>9.2} {:>11} {:>11}  {}",
                r.rank,
                r.scenario.slug(),
                r.usage_pct,
                delay,
                loss,
                flag.trim()
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(i: u64) -> StatsRecord {
        StatsRecord {
            frame_index: i,
            time_s: i as f64 * 0.005,
            offered_load_bps: 480_000.0,
            mac_throughput_bps: 384_000.0,
            delivered_sdus: 1,
            mean_wimax_delay_s: Some(0.01),
            ul_usage_pct: 65.1,
            pre_harq_bler: Some(0.05),
            post_harq_loss_rate: None,
            mcs_histogram: [20, 0, 0, 0, 0, 0, 0],
        }
    }

    fn summary(scenario: ScenarioId, usage: f64, delay: f64, loss: f64) -> ScenarioSummary {
        ScenarioSummary {
            scenario,
            seed: 1,
            config_digest: String::new(),
            warmup_s: 0.0,
            steady: SteadyState {
                frames: 1,
                offered_load_bps: 0.0,
                mac_throughput_bps: 0.0,
                delivered_sdus: 0.0,
                mean_wimax_delay_s: Some(delay),
                ul_usage_pct: usage,
                pre_harq_bler: None,
                post_harq_loss_rate: Some(loss),
                mcs_histogram: [0.0; 7],
            },
        }
    }

    #[test]
    fn csv_shape() {
        let records: Vec<_> = (0..200).map(record).collect();
        let mut buf = Vec::new();
        write_csv(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 201);
        assert_eq!(lines[0].split(',').count(), 16);
        // absent post-HARQ loss is an empty field
        assert_eq!(lines[1], "0,0,480000,384000,1,0.01,65.1,0.05,,20,0,0,0,0,0,0");
    }

    #[test]
    fn csv_rejects_wrong_header() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn constant_series_summary() {
        let records: Vec<_> = (0..400).map(record).collect();
        let s = summarize(&records, 1.0).unwrap();
        assert_eq!(s.frames, 200);
        assert_eq!(s.offered_load_bps, 480_000.0);
        assert!((s.ul_usage_pct - 65.1).abs() < 1e-9);
        assert!((s.mean_wimax_delay_s.unwrap() - 0.01).abs() < 1e-12);
        assert!((s.pre_harq_bler.unwrap() - 0.05).abs() < 1e-12);
        assert_eq!(s.post_harq_loss_rate, None);
        assert_eq!(s.mcs_histogram[0], 20.0);
    }

    #[test]
    fn summary_needs_post_warmup_frames() {
        let records: Vec<_> = (0..10).map(record).collect();
        let err = summarize(&records, 30.0).unwrap_err();
        assert_eq!(err.to_string(), "no steady-state window");
    }

    #[test]
    fn delay_weighted_by_deliveries() {
        let mut a = record(0);
        a.delivered_sdus = 3;
        a.mean_wimax_delay_s = Some(0.010);
        let mut b = record(1);
        b.delivered_sdus = 1;
        b.mean_wimax_delay_s = Some(0.030);
        let mut c = record(2);
        c.delivered_sdus = 0;
        c.mean_wimax_delay_s = None;
        let s = summarize(&[a, b, c], 0.0).unwrap();
        assert!((s.mean_wimax_delay_s.unwrap() - 0.015).abs() < 1e-12);
    }

    #[test]
    fn downsample_to_seconds() {
        let records: Vec<_> = (0..450).map(record).collect();
        let bins = downsample(&records, 0.005, 1.0);
        assert_eq!(bins.len(), 3);
        assert_eq!(bins[1].frame_index, 200);
        assert_eq!(bins[1].delivered_sdus, 200);
        assert_eq!(bins[2].mcs_histogram[0], 50 * 20);
        assert_eq!(bins[0].offered_load_bps, 480_000.0);
    }

    #[test]
    fn strict_dominance_pair() {
        let good = summary(ScenarioId::AmcAHarq, 40.0, 0.02, 0.001);
        let bad = summary(ScenarioId::Qpsk12, 81.0, 0.05, 0.01);
        let report = compare(&[bad, good]);
        assert_eq!(report.pareto_optimal(), vec![ScenarioId::AmcAHarq]);
        assert_eq!(report.rows[0].scenario, ScenarioId::AmcAHarq);
        assert_eq!(report.row(ScenarioId::Qpsk12).unwrap().dominated_by, vec![ScenarioId::AmcAHarq]);
    }

    #[test]
    fn identical_summaries_tie() {
        let a = summary(ScenarioId::AmcA, 40.0, 0.02, 0.01);
        let b = summary(ScenarioId::AmcB, 40.0, 0.02, 0.01);
        let report = compare(&[a, b]);
        assert_eq!(report.pareto_optimal().len(), 2);
        assert_eq!(report.rows[0].rank, report.rows[1].rank);
        assert_eq!(report.row(ScenarioId::AmcA).unwrap().ties_with, vec![ScenarioId::AmcB]);
        assert!(report.to_text().contains("tie with"));
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("amc-b"));
    }

    fn arb_record() -> impl Strategy<Value = StatsRecord> {
        let opt_f = || proptest::option::of(0.0f64..1.0);
        (
            0u64..1_000_000,
            0.0f64..1e7,
            0.0f64..1e7,
            0u64..100,
            proptest::option::of(0.0f64..10.0),
            0.0f64..100.0,
            opt_f(),
            opt_f(),
            proptest::array::uniform7(0u32..50),
        )
            .prop_map(|(i, o, t, d, delay, u, b, l, h)| StatsRecord {
                frame_index: i,
                time_s: i as f64 * 0.005,
                offered_load_bps: o,
                mac_throughput_bps: t,
                delivered_sdus: d,
                mean_wimax_delay_s: delay,
                ul_usage_pct: u,
                pre_harq_bler: b,
                post_harq_loss_rate: l,
                mcs_histogram: h,
            })
    }

    proptest! {
        #[test]
        fn csv_round_trip(records in proptest::collection::vec(arb_record(), 0..40)) {
            let mut buf = Vec::new();
            write_csv(&records, &mut buf).unwrap();
            prop_assert_eq!(read_csv(buf.as_slice()).unwrap(), records);
        }
    }
}
