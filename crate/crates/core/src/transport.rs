//! Constant-rate upload traffic over a simplified fixed-window transport.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

/// Constant bit-rate application feeding one station.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficSource {
    pub app_rate_bps: f64,
    pub payload_bytes: u32,
    pub header_bytes: u32,
    /// Application bits accumulated towards the next segment.
    accumulator_bits: f64,
}

impl TrafficSource {
    pub fn new(app_rate_bps: f64, payload_bytes: u32, header_bytes: u32) -> Self {
        TrafficSource {
            app_rate_bps,
            payload_bytes,
            header_bytes,
            accumulator_bits: 0.0,
        }
    }

    /// Starts part-way through the first segment; `phase` is in `[0, 1)`.
    pub fn with_phase(mut self, phase: f64) -> Self {
        self.accumulator_bits = phase * self.payload_bits() as f64;
        self
    }

    pub fn payload_bits(&self) -> u64 {
        u64::from(self.payload_bytes) * 8
    }

    /// Size of one segment on the wire, headers included.
    pub fn segment_bits(&self) -> u64 {
        u64::from(self.payload_bytes + self.header_bytes) * 8
    }

    pub fn wire_rate_bps(&self) -> f64 {
        self.app_rate_bps * f64::from(self.payload_bytes + self.header_bytes)
            / f64::from(self.payload_bytes)
    }

    /// Number of segments completed during one frame of `frame_s` seconds.
    pub fn generate(&mut self, frame_s: f64) -> u32 {
        if self.app_rate_bps <= 0.0 || self.payload_bytes == 0 {
            return 0;
        }
        self.accumulator_bits += self.app_rate_bps * frame_s;
        let payload = self.payload_bits() as f64;
        let mut count = 0;
        while self.accumulator_bits >= payload {
            self.accumulator_bits -= payload;
            count += 1;
        }
        count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MacOutcome {
    Delivered,
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("outcome for segment {0} that was never sent")]
    UnknownSegment(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SegmentState {
    /// Handed to the MAC and not yet resolved.
    AtMac,
    /// Lost on the air; waits for its timeout before going back to the MAC.
    AwaitingRetransmit { due_frame: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct InFlight {
    state: SegmentState,
    drops: u32,
}

/// Transport parameters in frame units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransportParams {
    pub window: usize,
    pub rto_frames: u64,
    pub rto_max_frames: u64,
}

/// Fixed-window reliable stream with per-segment exponential timeout backoff.
///
/// Segments move app queue -> in flight -> delivered. The MAC reports every
/// segment's fate individually, so a segment leaves the window as soon as it
/// reaches the receiver; the receiver reorders and releases to the sink in
/// sequence. Retransmission delay counts from the frame the loss is reported.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliableStream {
    params: TransportParams,
    next_seq: u64,
    /// Every sequence number below this has reached the sink in order.
    acked_seq: u64,
    app_queue: u64,
    in_flight: BTreeMap<u64, InFlight>,
    /// Received ahead of a gap.
    reorder_buffer: BTreeSet<u64>,
    generated: u64,
    retransmissions: u64,
    timeouts_fired: u64,
}

impl ReliableStream {
    pub fn new(params: TransportParams) -> Self {
        assert!(params.window > 0, "window must be positive");
        ReliableStream {
            params,
            next_seq: 0,
            acked_seq: 0,
            app_queue: 0,
            in_flight: BTreeMap::new(),
            reorder_buffer: BTreeSet::new(),
            generated: 0,
            retransmissions: 0,
            timeouts_fired: 0,
        }
    }

    pub fn params(&self) -> &TransportParams {
        &self.params
    }

    /// Queues `count` freshly generated segments.
    pub fn push_generated(&mut self, count: u32) {
        self.app_queue += u64::from(count);
        self.generated += u64::from(count);
    }

    /// Segments to hand to the MAC this frame: expired retransmissions first,
    /// then new segments while the window allows.
    pub fn admit(&mut self, frame: u64) -> Vec<u64> {
        let mut out = Vec::new();
        for (seq, seg) in self.in_flight.iter_mut() {
            if let SegmentState::AwaitingRetransmit { due_frame } = seg.state {
                if due_frame <= frame {
                    seg.state = SegmentState::AtMac;
                    out.push(*seq);
                    self.retransmissions += 1;
                    self.timeouts_fired += 1;
                }
            }
        }
        while self.app_queue > 0 && self.in_flight.len() < self.params.window {
            let seq = self.next_seq;
            self.next_seq += 1;
            self.app_queue -= 1;
            self.in_flight.insert(
                seq,
                InFlight {
                    state: SegmentState::AtMac,
                    drops: 0,
                },
            );
            out.push(seq);
        }
        out
    }

    /// Applies the MAC's verdict for one segment; returns how many segments
    /// this released to the sink in order.
    pub fn on_mac_outcome(
        &mut self,
        seq: u64,
        outcome: MacOutcome,
        frame: u64,
    ) -> Result<u64, TransportError> {
        if seq >= self.next_seq {
            return Err(TransportError::UnknownSegment(seq));
        }
        let Some(seg) = self.in_flight.get_mut(&seq) else {
            // Already delivered: duplicate verdict.
            return Ok(0);
        };
        if seg.state != SegmentState::AtMac {
            return Ok(0);
        }
        match outcome {
            MacOutcome::Dropped => {
                seg.drops += 1;
                let backoff = self.params.rto_frames.saturating_mul(1 << (seg.drops - 1).min(32));
                let wait = backoff.min(self.params.rto_max_frames);
                seg.state = SegmentState::AwaitingRetransmit {
                    due_frame: frame + wait,
                };
                Ok(0)
            }
            MacOutcome::Delivered => {
                self.in_flight.remove(&seq);
                self.reorder_buffer.insert(seq);
                let mut released = 0;
                while self.reorder_buffer.remove(&self.acked_seq) {
                    self.acked_seq += 1;
                    released += 1;
                }
                Ok(released)
            }
        }
    }

    pub fn generated(&self) -> u64 {
        self.generated
    }

    /// Segments that reached the receiver, in order or not.
    pub fn delivered(&self) -> u64 {
        self.acked_seq + self.reorder_buffer.len() as u64
    }

    /// Segments released to the sink in sequence.
    pub fn delivered_in_order(&self) -> u64 {
        self.acked_seq
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }

    pub fn queued(&self) -> u64 {
        self.app_queue
    }

    pub fn retransmissions(&self) -> u64 {
        self.retransmissions
    }

    pub fn timeouts_fired(&self) -> u64 {
        self.timeouts_fired
    }

    pub fn cumulative_ack(&self) -> u64 {
        self.acked_seq
    }
}

/// One delivered SDU's MAC-enqueue to air-delivery time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelaySample {
    pub sdu_id: u64,
    pub mac_enqueue_time: f64,
    pub air_delivery_time: f64,
}

impl DelaySample {
    pub fn wimax_delay(&self) -> f64 {
        self.air_delivery_time - self.mac_enqueue_time
    }
}

/// Delay samples collected over one frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DelayWindow {
    samples: Vec<f64>,
}

impl DelayWindow {
    /// Adds a sample; a delivery before its enqueue time is an invariant breach.
    pub fn record_delay(&mut self, sample: DelaySample) -> Result<(), String> {
        let d = sample.wimax_delay();
        if !(d >= 0.0) {
            return Err(format!("SDU {} has negative WiMAX delay {d}", sample.sdu_id));
        }
        self.samples.push(d);
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.samples.len()
    }

    pub fn mean(&self) -> Option<f64> {
        if self.samples.is_empty() {
            None
        } else {
            Some(self.samples.iter().sum::<f64>() / self.samples.len() as f64)
        }
    }

    /// Nearest-rank percentile, `q` in `[0, 100]`.
    pub fn percentile(&self, q: f64) -> Option<f64> {
        if self.samples.is_empty() {
            return None;
        }
        let mut sorted = self.samples.clone();
        sorted.sort_by(f64::total_cmp);
        let rank = ((q / 100.0) * sorted.len() as f64).ceil() as usize;
        Some(sorted[rank.clamp(1, sorted.len()) - 1])
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FRAME: f64 = 0.005;

    fn params() -> TransportParams {
        TransportParams {
            window: 8,
            rto_frames: 120,
            rto_max_frames: 1600,
        }
    }

    #[test]
    fn one_second_of_traffic() {
        let mut src = TrafficSource::new(20_000.0, 200, 40);
        assert_eq!(src.segment_bits(), 1920);
        assert!((src.wire_rate_bps() - 24_000.0).abs() < 1e-9);
        let segs: u32 = (0..200).map(|_| src.generate(FRAME)).sum();
        let bits = u64::from(segs) * src.segment_bits();
        assert!(bits.abs_diff(24_000) <= src.segment_bits(), "{bits}");
    }

    #[test]
    fn silent_source() {
        let mut src = TrafficSource::new(0.0, 200, 40);
        assert_eq!((0..1000).map(|_| src.generate(FRAME)).sum::<u32>(), 0);
    }

    #[test]
    fn twenty_sources_hundred_seconds() {
        let mut total = 0u64;
        for i in 0..20 {
            let mut src = TrafficSource::new(20_000.0, 200, 40).with_phase(i as f64 / 20.0);
            let segs: u32 = (0..20_000).map(|_| src.generate(FRAME)).sum();
            total += u64::from(segs) * 1920;
        }
        assert!(total.abs_diff(48_000_000) <= 20 * 1920, "{total}");
    }

    #[test]
    fn loss_free_delivery() {
        let mut s = ReliableStream::new(params());
        s.push_generated(20);
        let mut frame = 0;
        while s.delivered() < 20 {
            for seq in s.admit(frame) {
                s.on_mac_outcome(seq, MacOutcome::Delivered, frame).unwrap();
            }
            frame += 1;
        }
        assert_eq!(s.retransmissions(), 0);
        assert_eq!(s.timeouts_fired(), 0);
        assert_eq!(s.in_flight(), 0);
    }

    #[test]
    fn window_limits_admission() {
        let mut s = ReliableStream::new(params());
        s.push_generated(20);
        assert_eq!(s.admit(0).len(), 8);
        assert_eq!(s.admit(1).len(), 0);
        assert_eq!(s.queued(), 12);
    }

    #[test]
    fn receiver_gap_does_not_block_window() {
        let mut s = ReliableStream::new(params());
        s.push_generated(20);
        let first = s.admit(0);
        s.on_mac_outcome(first[0], MacOutcome::Dropped, 1).unwrap();
        for &seq in &first[1..] {
            s.on_mac_outcome(seq, MacOutcome::Delivered, 1).unwrap();
        }
        assert_eq!(s.admit(2).len(), 7);
        assert_eq!(s.delivered_in_order(), 0);
        assert_eq!(s.generated(), s.delivered() + s.in_flight() as u64 + s.queued());
    }

    #[test]
    fn single_drop_retransmits_after_rto() {
        let mut s = ReliableStream::new(params());
        s.push_generated(1);
        assert_eq!(s.admit(10), vec![0]);
        s.on_mac_outcome(0, MacOutcome::Dropped, 12).unwrap();
        for f in 13..132 {
            assert!(s.admit(f).is_empty(), "early retransmit at {f}");
        }
        assert_eq!(s.admit(132), vec![0]);
        assert_eq!(s.on_mac_outcome(0, MacOutcome::Delivered, 134).unwrap(), 1);
        assert_eq!(s.retransmissions(), 1);
    }

    #[test]
    fn second_drop_doubles_wait() {
        let mut s = ReliableStream::new(params());
        s.push_generated(1);
        s.admit(0);
        s.on_mac_outcome(0, MacOutcome::Dropped, 0).unwrap();
        assert_eq!(s.admit(120), vec![0]);
        s.on_mac_outcome(0, MacOutcome::Dropped, 121).unwrap();
        assert!(s.admit(120 + 1 + 239).is_empty());
        assert_eq!(s.admit(121 + 240), vec![0]);
    }

    #[test]
    fn backoff_is_capped() {
        let mut s = ReliableStream::new(params());
        s.push_generated(1);
        let mut frame = s.admit(0).len() as u64;
        let mut waits = Vec::new();
        for _ in 0..8 {
            s.on_mac_outcome(0, MacOutcome::Dropped, frame).unwrap();
            let start = frame;
            while s.admit(frame).is_empty() {
                frame += 1;
            }
            waits.push(frame - start);
        }
        assert_eq!(waits, vec![120, 240, 480, 960, 1600, 1600, 1600, 1600]);
    }

    #[test]
    fn in_order_release_and_idempotence() {
        let mut s = ReliableStream::new(params());
        s.push_generated(3);
        s.admit(0);
        assert_eq!(s.on_mac_outcome(2, MacOutcome::Delivered, 1).unwrap(), 0);
        assert_eq!(s.on_mac_outcome(1, MacOutcome::Delivered, 1).unwrap(), 0);
        assert_eq!(s.on_mac_outcome(1, MacOutcome::Delivered, 1).unwrap(), 0);
        assert_eq!(s.delivered(), 2);
        assert_eq!(s.delivered_in_order(), 0);
        assert_eq!(s.in_flight(), 1);
        assert_eq!(s.on_mac_outcome(0, MacOutcome::Delivered, 2).unwrap(), 3);
        assert_eq!(s.on_mac_outcome(0, MacOutcome::Delivered, 2).unwrap(), 0);
        assert_eq!(s.on_mac_outcome(0, MacOutcome::Dropped, 2).unwrap(), 0);
        assert_eq!(s.cumulative_ack(), 3);
        assert_eq!(
            s.on_mac_outcome(9, MacOutcome::Delivered, 3),
            Err(TransportError::UnknownSegment(9))
        );
    }

    #[test]
    fn delay_window() {
        let mut w = DelayWindow::default();
        assert_eq!(w.mean(), None);
        w.record_delay(DelaySample {
            sdu_id: 1,
            mac_enqueue_time: 1.000,
            air_delivery_time: 1.015,
        })
        .unwrap();
        assert!((w.mean().unwrap() - 0.015).abs() < 1e-12);
        assert!(w
            .record_delay(DelaySample {
                sdu_id: 2,
                mac_enqueue_time: 2.0,
                air_delivery_time: 1.9,
            })
            .is_err());
        w.record_delay(DelaySample {
            sdu_id: 3,
            mac_enqueue_time: 0.0,
            air_delivery_time: 0.05,
        })
        .unwrap();
        assert_eq!(w.percentile(100.0), Some(0.05));
        assert!((w.percentile(50.0).unwrap() - 0.015).abs() < 1e-12);
    }
}
