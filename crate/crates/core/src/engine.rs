//! Frame-clocked simulation kernel.
//!
//! Each frame runs the same phases in order: traffic admission, channel
//! update, CQI feedback and AMC decision, scheduling, transmission, HARQ and
//! transport feedback, bandwidth-request snapshot, statistics.

use std::collections::{BTreeMap, VecDeque};

use crate::amc::AmcState;
use crate::channel::{BlerModel, ChannelState, MCS_PROFILES};
use crate::config::SimConfig;
use crate::error::SimError;
use crate::harq::{HarqProcess, HarqStatus};
use crate::mac::{frame_usage, schedule, BandwidthRequest};
use crate::rng::{RandomStream, StreamLabel};
use crate::stats::StatsRecord;
use crate::transport::{DelaySample, DelayWindow, MacOutcome, ReliableStream, TrafficSource};

/// Default frame length.
pub const FRAME_DURATION_S: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimClock {
    pub frame_index: u64,
    pub frame_duration_s: f64,
}

impl SimClock {
    pub fn new(frame_index: u64) -> Self {
        SimClock {
            frame_index,
            frame_duration_s: FRAME_DURATION_S,
        }
    }

    pub fn with_duration(frame_index: u64, frame_duration_s: f64) -> Self {
        SimClock {
            frame_index,
            frame_duration_s,
        }
    }

    /// Start time of the current frame.
    pub fn time_s(&self) -> f64 {
        self.frame_index as f64 * self.frame_duration_s
    }

    pub fn frame_start_s(&self, frame: u64) -> f64 {
        frame as f64 * self.frame_duration_s
    }

    fn advance(&mut self) {
        self.frame_index += 1;
    }
}

/// One transport segment as the MAC sees it.
#[derive(Debug, Clone)]
struct MacSdu {
    seq: u64,
    bits: u64,
    unsent_bits: u64,
    outstanding_blocks: u32,
    enqueue_frame: u64,
    failed: bool,
}

/// A burst in the air or awaiting retransmission.
#[derive(Debug, Clone)]
struct Burst {
    process: HarqProcess,
    mcs_index: usize,
    symbols: u32,
    pieces: Vec<(u64, u64)>,
}

#[derive(Debug, Clone)]
struct Station {
    channel: ChannelState,
    amc: AmcState,
    source: TrafficSource,
    stream: ReliableStream,
    queue: VecDeque<u64>,
    sdus: BTreeMap<u64, MacSdu>,
    bursts: Vec<Burst>,
    reported_backlog_bits: u64,
    mcs_index: usize,
}

impl Station {
    fn unsent_bits(&self) -> u64 {
        self.queue.iter().map(|id| self.sdus[id].unsent_bits).sum()
    }

    fn due_harq_symbols(&self, frame: u64) -> u32 {
        self.bursts
            .iter()
            .filter(|b| b.process.next_tx_frame == frame)
            .map(|b| b.symbols)
            .sum()
    }

    /// Cuts up to `capacity` bits off the head of the queue.
    fn take_pieces(&mut self, mut capacity: u64) -> Vec<(u64, u64)> {
        let mut pieces = Vec::new();
        while capacity > 0 {
            let Some(&id) = self.queue.front() else { break };
            let sdu = self.sdus.get_mut(&id).expect("queued SDU exists");
            let take = sdu.unsent_bits.min(capacity);
            sdu.unsent_bits -= take;
            sdu.outstanding_blocks += 1;
            capacity -= take;
            pieces.push((id, take));
            if sdu.unsent_bits == 0 {
                self.queue.pop_front();
            }
        }
        pieces
    }
}

#[derive(Debug, Default)]
struct FrameTally {
    offered_bits: u64,
    delivered_bits: u64,
    attempts: u64,
    attempt_errors: u64,
    resolved: u64,
    lost: u64,
    delays: DelayWindow,
}

/// Totals across the whole run so far.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunTotals {
    pub segments_generated: u64,
    pub segments_delivered: u64,
    /// Segments released to the application sink in sequence.
    pub sink_segments: u64,
    pub transport_retransmissions: u64,
    pub blocks_sent: u64,
    pub blocks_lost: u64,
}

/// A run in progress. Owns every piece of mutable state; nothing is shared.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: SimConfig,
    clock: SimClock,
    stations: Vec<Station>,
    channel_rng: RandomStream,
    error_rng: RandomStream,
    bler_model: BlerModel,
    max_tx: u32,
    next_sdu_id: u64,
    next_block_id: u64,
    blocks_sent: u64,
    blocks_lost: u64,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        let mut channel_rng = RandomStream::new(config.seed, StreamLabel::Channel);
        let mut traffic_rng = RandomStream::new(config.seed, StreamLabel::Traffic);
        let error_rng = RandomStream::new(config.seed, StreamLabel::BlockErrors);
        let transport = config.transport_params();

        let mut stations = Vec::with_capacity(config.ss_count);
        for distance in config.station_distances() {
            let budget = config.channel.radio.link_budget(distance)?;
            let channel = ChannelState::new(budget.mean_snr(), config.channel.fading, &mut channel_rng);
            let phase = if config.traffic.start_spread > 0.0 {
                config.traffic.start_spread * traffic_rng.uniform()
            } else {
                0.0
            };
            let source = TrafficSource::new(
                config.traffic.app_kbps * 1000.0,
                config.traffic.payload_bytes,
                config.traffic.header_bytes,
            )
            .with_phase(phase);
            stations.push(Station {
                channel,
                amc: AmcState::new(config.amc.cqi_period),
                source,
                stream: ReliableStream::new(transport),
                queue: VecDeque::new(),
                sdus: BTreeMap::new(),
                bursts: Vec::new(),
                reported_backlog_bits: 0,
                mcs_index: config.amc.table.mcs(0).index,
            });
        }

        Ok(Simulation {
            bler_model: BlerModel {
                slope_db: config.channel.bler_slope_db,
                forced: config.channel.bler_override,
            },
            max_tx: config.harq.effective_max_tx(),
            clock: SimClock::with_duration(0, config.frame_duration_s()),
            config,
            stations,
            channel_rng,
            error_rng,
            next_sdu_id: 0,
            next_block_id: 0,
            blocks_sent: 0,
            blocks_lost: 0,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn clock(&self) -> SimClock {
        self.clock
    }

    /// Instantaneous SNR of every station as of the last completed frame.
    pub fn station_snrs(&self) -> Vec<f64> {
        self.stations.iter().map(|s| s.channel.instant_snr_db).collect()
    }

    pub fn station_mean_snrs(&self) -> Vec<f64> {
        self.stations.iter().map(|s| s.channel.mean_snr_db).collect()
    }

    pub fn totals(&self) -> RunTotals {
        let mut t = RunTotals {
            blocks_sent: self.blocks_sent,
            blocks_lost: self.blocks_lost,
            ..RunTotals::default()
        };
        for s in &self.stations {
            t.segments_generated += s.stream.generated();
            t.segments_delivered += s.stream.delivered();
            t.sink_segments += s.stream.delivered_in_order();
            t.transport_retransmissions += s.stream.retransmissions();
        }
        t
    }

    pub fn is_finished(&self) -> bool {
        self.clock.frame_index >= self.config.frame_count()
    }

    /// Runs one frame and returns its record.
    pub fn step(&mut self) -> Result<StatsRecord, SimError> {
        let frame = self.clock.frame_index;
        let frame_s = self.clock.frame_duration_s;
        let mut tally = FrameTally::default();

        self.admit_traffic(frame, frame_s, &mut tally);

        for st in &mut self.stations {
            st.channel = st.channel.step_fading(&mut self.channel_rng);
        }

        let table = &self.config.amc.table;
        for st in &mut self.stations {
            let row = st.amc.update(table, st.channel.instant_snr_db);
            st.mcs_index = table.mcs(row).index;
        }

        let requests: Vec<BandwidthRequest> = self
            .stations
            .iter()
            .enumerate()
            .map(|(i, st)| BandwidthRequest {
                ss_id: i,
                backlog_bits: st.reported_backlog_bits,
                harq_symbols: st.due_harq_symbols(frame),
            })
            .collect();
        let mcs_of: Vec<usize> = self.stations.iter().map(|s| s.mcs_index).collect();
        let allocations = schedule(&requests, &mcs_of, &self.config.mac);
        let used: u64 = allocations.iter().map(|a| u64::from(a.total_symbols())).sum();
        if used > u64::from(self.config.mac.ul_data_symbols) {
            return Err(SimError::invariant(
                frame,
                format!("allocated {used} symbols over a budget of {}", self.config.mac.ul_data_symbols),
            ));
        }
        for req in &requests {
            let granted = allocations
                .iter()
                .find(|a| a.ss_id == req.ss_id)
                .map_or(0, |a| a.harq_symbols);
            if granted != req.harq_symbols {
                return Err(SimError::invariant(
                    frame,
                    format!("station {} HARQ retransmissions did not fit the frame", req.ss_id),
                ));
            }
        }
        let usage = frame_usage(&allocations, &self.config.mac);

        let mut in_air: Vec<(usize, Burst)> = Vec::new();
        for alloc in &allocations {
            let st = &mut self.stations[alloc.ss_id];
            let (due, waiting): (Vec<Burst>, Vec<Burst>) = std::mem::take(&mut st.bursts)
                .into_iter()
                .partition(|b| b.process.next_tx_frame == frame);
            st.bursts = waiting;
            in_air.extend(due.into_iter().map(|b| (alloc.ss_id, b)));

            if alloc.symbols > 0 {
                let pieces = st.take_pieces(alloc.payload_bits);
                if !pieces.is_empty() {
                    let id = self.next_block_id;
                    self.next_block_id += 1;
                    self.blocks_sent += 1;
                    in_air.push((
                        alloc.ss_id,
                        Burst {
                            process: HarqProcess::new(id, self.max_tx, self.config.harq.rtt_frames, frame),
                            mcs_index: alloc.mcs_index,
                            symbols: alloc.symbols,
                            pieces,
                        },
                    ));
                }
            }
        }

        for (ss_id, mut burst) in in_air {
            let snr = self.stations[ss_id].channel.instant_snr_db;
            let attempt = burst
                .process
                .step(snr, &MCS_PROFILES[burst.mcs_index], &self.bler_model, &mut self.error_rng, &self.clock)
                .map_err(|e| SimError::invariant(frame, e.to_string()))?;
            tally.attempts += 1;
            if attempt.errored {
                tally.attempt_errors += 1;
            }
            match burst.process.status {
                HarqStatus::Pending => self.stations[ss_id].bursts.push(burst),
                HarqStatus::Acked => {
                    tally.resolved += 1;
                    self.resolve(ss_id, &burst, true, frame, &mut tally)?;
                }
                HarqStatus::Failed => {
                    tally.resolved += 1;
                    tally.lost += 1;
                    self.blocks_lost += 1;
                    self.resolve(ss_id, &burst, false, frame, &mut tally)?;
                }
            }
        }

        for st in &mut self.stations {
            st.reported_backlog_bits = st.unsent_bits();
            let s = &st.stream;
            if s.generated() != s.delivered() + s.in_flight() as u64 + s.queued() {
                return Err(SimError::invariant(frame, "transport segment conservation broken"));
            }
        }

        let mut mcs_histogram = [0u32; 7];
        for st in &self.stations {
            mcs_histogram[st.mcs_index] += 1;
        }
        let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
        let record = StatsRecord {
            frame_index: frame,
            time_s: self.clock.time_s(),
            offered_load_bps: tally.offered_bits as f64 / frame_s,
            mac_throughput_bps: tally.delivered_bits as f64 / frame_s,
            delivered_sdus: tally.delays.count() as u64,
            mean_wimax_delay_s: tally.delays.mean(),
            ul_usage_pct: usage,
            pre_harq_bler: ratio(tally.attempt_errors, tally.attempts),
            post_harq_loss_rate: ratio(tally.lost, tally.resolved),
            mcs_histogram,
        };
        self.clock.advance();
        Ok(record)
    }

    fn admit_traffic(&mut self, frame: u64, frame_s: f64, tally: &mut FrameTally) {
        for st in &mut self.stations {
            let generated = st.source.generate(frame_s);
            st.stream.push_generated(generated);
            tally.offered_bits += u64::from(generated) * st.source.segment_bits();
            let bits = st.source.segment_bits();
            for seq in st.stream.admit(frame) {
                let id = self.next_sdu_id;
                self.next_sdu_id += 1;
                st.sdus.insert(
                    id,
                    MacSdu {
                        seq,
                        bits,
                        unsent_bits: bits,
                        outstanding_blocks: 0,
                        enqueue_frame: frame,
                        failed: false,
                    },
                );
                st.queue.push_back(id);
            }
        }
    }

    /// Applies a terminal burst outcome to the SDUs it carried.
    fn resolve(
        &mut self,
        ss_id: usize,
        burst: &Burst,
        acked: bool,
        frame: u64,
        tally: &mut FrameTally,
    ) -> Result<(), SimError> {
        let delivery_time = self.clock.frame_start_s(frame + 1);
        let clock = self.clock;
        let st = &mut self.stations[ss_id];
        for &(sdu_id, _) in &burst.pieces {
            let Some(sdu) = st.sdus.get_mut(&sdu_id) else {
                return Err(SimError::invariant(frame, format!("burst references unknown SDU {sdu_id}")));
            };
            sdu.outstanding_blocks -= 1;
            let seq = sdu.seq;
            let outcome = if acked {
                if sdu.failed || sdu.unsent_bits > 0 || sdu.outstanding_blocks > 0 {
                    None
                } else {
                    tally.delivered_bits += sdu.bits;
                    tally
                        .delays
                        .record_delay(DelaySample {
                            sdu_id,
                            mac_enqueue_time: clock.frame_start_s(sdu.enqueue_frame),
                            air_delivery_time: delivery_time,
                        })
                        .map_err(|m| SimError::invariant(frame, m))?;
                    st.sdus.remove(&sdu_id);
                    Some(MacOutcome::Delivered)
                }
            } else if sdu.failed {
                None
            } else {
                sdu.failed = true;
                if sdu.unsent_bits > 0 {
                    sdu.unsent_bits = 0;
                    st.queue.retain(|&id| id != sdu_id);
                }
                Some(MacOutcome::Dropped)
            };
            if let Some(sdu) = st.sdus.get(&sdu_id) {
                if sdu.failed && sdu.outstanding_blocks == 0 {
                    st.sdus.remove(&sdu_id);
                }
            }
            if let Some(outcome) = outcome {
                st.stream
                    .on_mac_outcome(seq, outcome, frame)
                    .map_err(|e| SimError::invariant(frame, e.to_string()))?;
            }
        }
        Ok(())
    }
}

/// Runs a whole configuration and returns one record per frame.
pub fn run(config: &SimConfig) -> Result<Vec<StatsRecord>, SimError> {
    let mut sim = Simulation::new(config.clone())?;
    let mut records = Vec::with_capacity(config.frame_count() as usize);
    while !sim.is_finished() {
        records.push(sim.step()?);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioId;

    fn short(scenario: ScenarioId, seconds: f64) -> SimConfig {
        let mut cfg = SimConfig::default_for(scenario);
        cfg.duration_s = seconds;
        cfg.warmup_s = 0.0;
        cfg
    }

    #[test]
    fn clock_time_is_index_times_duration() {
        let c = SimClock::new(200);
        assert_eq!(c.time_s(), 200.0 * 0.005);
    }

    #[test]
    fn one_second_is_two_hundred_frames() {
        let records = run(&short(ScenarioId::AmcA, 1.0)).unwrap();
        assert_eq!(records.len(), 200);
        for (i, r) in records.iter().enumerate() {
            assert_eq!(r.frame_index, i as u64);
        }
    }

    #[test]
    fn same_seed_same_records() {
        let cfg = short(ScenarioId::AmcAHarq, 5.0);
        assert_eq!(run(&cfg).unwrap(), run(&cfg).unwrap());
    }

    #[test]
    fn idle_single_station_delay() {
        let mut cfg = short(ScenarioId::Qpsk12, 20.0);
        cfg.ss_count = 1;
        cfg.channel.bler_override = Some(0.0);
        let records = run(&cfg).unwrap();
        let delays: Vec<f64> = records.iter().filter_map(|r| r.mean_wimax_delay_s).collect();
        assert!(!delays.is_empty());
        for d in delays {
            assert!((0.005 - 1e-12..=0.015 + 1e-12).contains(&d), "{d}");
        }
    }

    #[test]
    fn static_scenario_never_leaves_qpsk() {
        for r in run(&short(ScenarioId::Qpsk12, 5.0)).unwrap() {
            assert_eq!(r.mcs_histogram[0], 20);
        }
    }

    #[test]
    fn conservation_with_losses() {
        let mut cfg = short(ScenarioId::AmcA, 20.0);
        cfg.channel.bler_override = Some(0.3);
        let mut sim = Simulation::new(cfg).unwrap();
        while !sim.is_finished() {
            sim.step().unwrap();
        }
        let t = sim.totals();
        assert!(t.transport_retransmissions > 0);
        assert!(t.segments_delivered <= t.segments_generated);
    }
}
