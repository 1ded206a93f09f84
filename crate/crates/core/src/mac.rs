//! Uplink data-burst accounting and per-frame allocation.

use crate::channel::{McsProfile, MCS_PROFILES};

/// Symbol slots available to UL data bursts in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameBudget {
    pub ul_data_symbols: u32,
    pub frame_duration_s: f64,
}

impl Default for FrameBudget {
    fn default() -> Self {
        // 0.59 Mbit/s at one information bit per symbol over a 5 ms frame.
        FrameBudget {
            ul_data_symbols: 2950,
            frame_duration_s: 0.005,
        }
    }
}

/// Capacity in bit/s if the whole budget ran at `mcs`.
pub fn uplink_capacity(budget: &FrameBudget, mcs: &McsProfile) -> f64 {
    f64::from(budget.ul_data_symbols) * mcs.efficiency() / budget.frame_duration_s
}

/// Piggybacked request from one station.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandwidthRequest {
    pub ss_id: usize,
    /// Queued new data awaiting a first transmission.
    pub backlog_bits: u64,
    /// Symbols needed this frame for HARQ retransmissions that are due.
    pub harq_symbols: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Allocation {
    pub ss_id: usize,
    /// Symbols granted for new data at `mcs_index`.
    pub symbols: u32,
    /// Symbols reserved for due HARQ retransmissions.
    pub harq_symbols: u32,
    pub mcs_index: usize,
    /// New-data bits the grant can carry.
    pub payload_bits: u64,
}

impl Allocation {
    pub fn total_symbols(&self) -> u32 {
        self.symbols + self.harq_symbols
    }
}

fn symbols_for(bits: u64, mcs: &McsProfile) -> u64 {
    (bits as f64 / mcs.efficiency()).ceil() as u64
}

/// Allocates one frame.
///
/// Due HARQ retransmissions are reserved first, in station order. The rest
/// of the budget is shared max-min fairly among stations with new data:
/// round-robin passes in station order hand every unsatisfied station an
/// equal quantum, leftovers from satisfied stations roll into the next pass,
/// and a final sub-quantum remainder goes one symbol at a time in id order.
///
/// `mcs_of[ss_id]` is the MCS index used for each station's new data.
pub fn schedule(
    requests: &[BandwidthRequest],
    mcs_of: &[usize],
    budget: &FrameBudget,
) -> Vec<Allocation> {
    let mut remaining = u64::from(budget.ul_data_symbols);
    let mut harq = vec![0u32; requests.len()];
    for (slot, req) in harq.iter_mut().zip(requests) {
        if u64::from(req.harq_symbols) <= remaining {
            *slot = req.harq_symbols;
            remaining -= u64::from(req.harq_symbols);
        }
    }

    let need: Vec<u64> = requests
        .iter()
        .map(|r| symbols_for(r.backlog_bits, &MCS_PROFILES[mcs_of[r.ss_id]]))
        .collect();
    let mut granted = vec![0u64; requests.len()];
    let mut active: Vec<usize> = (0..requests.len()).filter(|&i| need[i] > 0).collect();

    while remaining > 0 && !active.is_empty() {
        let quantum = remaining / active.len() as u64;
        if quantum == 0 {
            for &i in active.iter().take(remaining as usize) {
                granted[i] += 1;
            }
            break;
        }
        for &i in &active {
            let give = quantum.min(need[i] - granted[i]);
            granted[i] += give;
            remaining -= give;
        }
        active.retain(|&i| granted[i] < need[i]);
    }

    requests
        .iter()
        .enumerate()
        .filter(|(i, _)| granted[*i] > 0 || harq[*i] > 0)
        .map(|(i, r)| {
            let mcs = &MCS_PROFILES[mcs_of[r.ss_id]];
            let symbols = granted[i] as u32;
            Allocation {
                ss_id: r.ss_id,
                symbols,
                harq_symbols: harq[i],
                mcs_index: mcs.index,
                payload_bits: (f64::from(symbols) * mcs.efficiency()).floor() as u64,
            }
        })
        .collect()
}

/// Percentage of the UL data budget occupied by `allocations`.
pub fn frame_usage(allocations: &[Allocation], budget: &FrameBudget) -> f64 {
    let used: u64 = allocations.iter().map(|a| u64::from(a.total_symbols())).sum();
    100.0 * used as f64 / f64::from(budget.ul_data_symbols)
}
