//! Stop-and-wait HARQ with chase combining.
//!
//! Every transmission of a block adds its linear SNR to the accumulator and
//! the block is decoded at the combined SNR.

use crate::channel::{bler, db_to_linear, draw_block_error, linear_to_db, BlerModel, McsProfile};
use crate::engine::SimClock;
use crate::rng::RandomStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarqStatus {
    Pending,
    Acked,
    Failed,
}

/// Chase-combined SNR after adding one more copy received at `new_tx_snr_db`.
pub fn combine(accumulated_snr_linear: f64, new_tx_snr_db: f64) -> f64 {
    accumulated_snr_linear + db_to_linear(new_tx_snr_db)
}

/// Probability that all `max_tx` attempts at a static SNR fail.
pub fn residual_bler(mcs: &McsProfile, snr_db: f64, max_tx: u32) -> f64 {
    let per_copy = db_to_linear(snr_db);
    (1..=max_tx)
        .map(|k| bler(mcs, linear_to_db(per_copy * f64::from(k))))
        .product()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarqProcess {
    pub block_id: u64,
    pub tx_count: u32,
    pub accumulated_snr_linear: f64,
    pub max_tx: u32,
    pub rtt_frames: u64,
    pub first_tx_frame: u64,
    pub next_tx_frame: u64,
    pub status: HarqStatus,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarqError {
    #[error("block {0} is already terminal")]
    Terminal(u64),
    #[error("block {block} stepped at frame {frame}, not due before {due}")]
    NotDue { block: u64, frame: u64, due: u64 },
}

/// Result of one transmission attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attempt {
    pub errored: bool,
    pub bler: f64,
    pub effective_snr_db: f64,
}

impl HarqProcess {
    /// A block about to make its first transmission at `first_tx_frame`.
    pub fn new(block_id: u64, max_tx: u32, rtt_frames: u64, first_tx_frame: u64) -> Self {
        assert!(max_tx >= 1, "max_tx must be at least 1");
        HarqProcess {
            block_id,
            tx_count: 0,
            accumulated_snr_linear: 0.0,
            max_tx,
            rtt_frames,
            first_tx_frame,
            next_tx_frame: first_tx_frame,
            status: HarqStatus::Pending,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.status != HarqStatus::Pending
    }

    /// Effective SNR the decoder sees after the transmissions so far.
    pub fn effective_snr_db(&self) -> f64 {
        linear_to_db(self.accumulated_snr_linear)
    }

    /// Frames between the first transmission and the latest one.
    pub fn delivery_delay_frames(&self) -> u64 {
        if self.tx_count == 0 {
            return 0;
        }
        // next_tx_frame is only advanced on a non-final failure, so once the
        // process is terminal it still names the frame of the last attempt.
        let last = if self.is_terminal() {
            self.next_tx_frame
        } else {
            self.next_tx_frame - self.rtt_frames
        };
        last - self.first_tx_frame
    }

    /// Transmits the block once more at `channel_snr_db`.
    pub fn step(
        &mut self,
        channel_snr_db: f64,
        mcs: &McsProfile,
        model: &BlerModel,
        rng: &mut RandomStream,
        clock: &SimClock,
    ) -> Result<Attempt, HarqError> {
        if self.is_terminal() {
            return Err(HarqError::Terminal(self.block_id));
        }
        if clock.frame_index < self.next_tx_frame {
            return Err(HarqError::NotDue {
                block: self.block_id,
                frame: clock.frame_index,
                due: self.next_tx_frame,
            });
        }
        self.accumulated_snr_linear = combine(self.accumulated_snr_linear, channel_snr_db);
        self.tx_count += 1;
        let effective_snr_db = self.effective_snr_db();
        let p = model.probability(mcs, effective_snr_db);
        let errored = draw_block_error(p, rng);
        if !errored {
            self.status = HarqStatus::Acked;
        } else if self.tx_count >= self.max_tx {
            self.status = HarqStatus::Failed;
        } else {
            self.next_tx_frame = clock.frame_index + self.rtt_frames;
        }
        Ok(Attempt {
            errored,
            bler: p,
            effective_snr_db,
        })
    }
}
