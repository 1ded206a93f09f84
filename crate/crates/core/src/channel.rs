//! Radio abstraction for one subscriber station: free-space link budget,
//! AR(1) log-normal fading, MCS profiles and the SNR to BLER mapping.

use crate::error::ConfigError;
use crate::rng::RandomStream;

/// Thermal noise density at room temperature.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

/// One modulation and coding scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McsProfile {
    pub index: usize,
    pub name: &'static str,
    /// Bits carried per modulation symbol before coding.
    pub bits_per_symbol_raw: u32,
    pub code_rate_num: u32,
    pub code_rate_den: u32,
    /// SNR in dB at which the block error rate is 0.1.
    pub bler_anchor_db: f64,
}

impl McsProfile {
    pub fn code_rate(&self) -> f64 {
        f64::from(self.code_rate_num) / f64::from(self.code_rate_den)
    }

    /// Information bits per data symbol.
    pub fn efficiency(&self) -> f64 {
        f64::from(self.bits_per_symbol_raw * self.code_rate_num) / f64::from(self.code_rate_den)
    }

    pub fn by_index(index: usize) -> Option<&'static McsProfile> {
        MCS_PROFILES.get(index)
    }

    /// Looks up a profile by a label such as `QPSK 1/2`, `16-QAM 3/4` or `64qam2/3`.
    pub fn by_name(name: &str) -> Option<&'static McsProfile> {
        let wanted = normalize_name(name);
        MCS_PROFILES.iter().find(|p| normalize_name(p.name) == wanted)
    }
}

fn normalize_name(name: &str) -> String {
    name.chars()
        .filter(|c| !c.is_whitespace() && *c != '-' && *c != '_')
        .flat_map(char::to_lowercase)
        .collect()
}

const fn mcs(
    index: usize,
    name: &'static str,
    bits: u32,
    num: u32,
    den: u32,
    anchor: f64,
) -> McsProfile {
    McsProfile {
        index,
        name,
        bits_per_symbol_raw: bits,
        code_rate_num: num,
        code_rate_den: den,
        bler_anchor_db: anchor,
    }
}

/// The seven uplink schemes. Anchors sit on the AMC table A entry thresholds.
pub const MCS_PROFILES: [McsProfile; 7] = [
    mcs(0, "QPSK 1/2", 2, 1, 2, 2.0),
    mcs(1, "QPSK 3/4", 2, 3, 4, 5.9),
    mcs(2, "16-QAM 1/2", 4, 1, 2, 8.9),
    mcs(3, "16-QAM 3/4", 4, 3, 4, 11.9),
    mcs(4, "64-QAM 1/2", 6, 1, 2, 14.9),
    mcs(5, "64-QAM 2/3", 6, 2, 3, 17.9),
    mcs(6, "64-QAM 3/4", 6, 3, 4, 19.9),
];

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Free-space path loss in dB for a distance in meters and a carrier in MHz.
pub fn free_space_pathloss(distance_m: f64, frequency_mhz: f64) -> Result<f64, ConfigError> {
    if !(distance_m > 0.0) {
        return Err(ConfigError::invalid("distance", "must be positive"));
    }
    if !(frequency_mhz > 0.0) {
        return Err(ConfigError::invalid("frequency", "must be positive"));
    }
    Ok(20.0 * (distance_m / 1000.0).log10() + 20.0 * frequency_mhz.log10() + 32.45)
}

/// Distance at which free-space loss equals `pathloss_db`.
pub fn free_space_distance(pathloss_db: f64, frequency_mhz: f64) -> f64 {
    let d_km = 10f64.powf((pathloss_db - 32.45 - 20.0 * frequency_mhz.log10()) / 20.0);
    d_km * 1000.0
}

/// Noise power over `bandwidth_hz` with the given receiver noise figure.
pub fn noise_floor_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    THERMAL_NOISE_DBM_PER_HZ + 10.0 * bandwidth_hz.log10() + noise_figure_db
}

/// Radio parameters shared by every link in the cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioParams {
    pub tx_power_w: f64,
    pub ss_antenna_gain_dbi: f64,
    pub bs_antenna_gain_dbi: f64,
    pub frequency_mhz: f64,
    pub bandwidth_mhz: f64,
    pub noise_figure_db: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            tx_power_w: 0.05,
            ss_antenna_gain_dbi: -1.0,
            bs_antenna_gain_dbi: 15.0,
            frequency_mhz: 2500.0,
            bandwidth_mhz: 5.0,
            noise_figure_db: 7.0,
        }
    }
}

impl RadioParams {
    pub fn noise_floor_dbm(&self) -> f64 {
        noise_floor_dbm(self.bandwidth_mhz * 1e6, self.noise_figure_db)
    }

    /// SNR in dB at the given path loss, everything else fixed.
    fn snr_at_pathloss(&self, pathloss_db: f64) -> f64 {
        linear_to_db(self.tx_power_w) + 30.0 + self.ss_antenna_gain_dbi + self.bs_antenna_gain_dbi
            - pathloss_db
            - self.noise_floor_dbm()
    }

    /// Distance that yields `target_snr_db` as mean SNR.
    pub fn distance_for_snr(&self, target_snr_db: f64) -> f64 {
        let pathloss = self.snr_at_pathloss(0.0) - target_snr_db;
        free_space_distance(pathloss, self.frequency_mhz)
    }

    pub fn link_budget(&self, distance_m: f64) -> Result<LinkBudget, ConfigError> {
        LinkBudget::new(self, distance_m)
    }
}

/// Link budget of one uplink.
///
/// `gamma` is the channel SNR per watt of transmit power; it folds antenna
/// gains, path loss and receiver noise. The received SNR is always
/// `gamma_r = p_t * gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    pub gamma: f64,
    pub p_t: f64,
    pub gamma_r: f64,
    pub ss_antenna_gain_dbi: f64,
    pub bs_antenna_gain_dbi: f64,
    pub distance_m: f64,
    pub noise_floor_dbm: f64,
    pub pathloss_db: f64,
}

impl LinkBudget {
    pub fn new(radio: &RadioParams, distance_m: f64) -> Result<Self, ConfigError> {
        if !(radio.tx_power_w > 0.0) {
            return Err(ConfigError::invalid("ss.tx_power_w", "must be positive"));
        }
        let pathloss_db = free_space_pathloss(distance_m, radio.frequency_mhz)?;
        let noise_floor_dbm = radio.noise_floor_dbm();
        // Per-watt channel quality: dBm reference (+30) cancels the W unit of p_t.
        let gamma_db = 30.0 + radio.ss_antenna_gain_dbi + radio.bs_antenna_gain_dbi
            - pathloss_db
            - noise_floor_dbm;
        let gamma = db_to_linear(gamma_db);
        Ok(LinkBudget {
            gamma,
            p_t: radio.tx_power_w,
            gamma_r: radio.tx_power_w * gamma,
            ss_antenna_gain_dbi: radio.ss_antenna_gain_dbi,
            bs_antenna_gain_dbi: radio.bs_antenna_gain_dbi,
            distance_m,
            noise_floor_dbm,
            pathloss_db,
        })
    }

    pub fn with_tx_power(&self, p_t: f64) -> Self {
        LinkBudget {
            p_t,
            gamma_r: p_t * self.gamma,
            ..self.clone()
        }
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        LinkBudget {
            gamma,
            gamma_r: self.p_t * gamma,
            ..self.clone()
        }
    }

    /// Long-term SNR in dB: `10 log10(p_t) + 10 log10(gamma)`.
    pub fn mean_snr(&self) -> f64 {
        linear_to_db(self.p_t) + linear_to_db(self.gamma)
    }

    /// The same SNR summed from the budget's dB terms.
    pub fn mean_snr_from_terms(&self) -> f64 {
        linear_to_db(self.p_t) + 30.0 + self.ss_antenna_gain_dbi + self.bs_antenna_gain_dbi
            - self.pathloss_db
            - self.noise_floor_dbm
    }
}

/// Free-function form of [`LinkBudget::mean_snr`].
pub fn mean_snr(budget: &LinkBudget) -> f64 {
    budget.mean_snr()
}

/// Mean SNRs evenly spaced over `[min_db, max_db]`, weakest station first.
pub fn spaced_mean_snrs(count: usize, min_db: f64, max_db: f64) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![(min_db + max_db) / 2.0],
        n => (0..n)
            .map(|i| min_db + (max_db - min_db) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Fading parameters: per-frame correlation and log-normal spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingParams {
    pub sigma_db: f64,
    pub rho: f64,
}

impl Default for FadingParams {
    fn default() -> Self {
        FadingParams {
            sigma_db: 4.0,
            rho: 0.9,
        }
    }
}

/// Instantaneous channel of one station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelState {
    pub mean_snr_db: f64,
    pub fade_db: f64,
    pub instant_snr_db: f64,
    pub fading: FadingParams,
}

impl ChannelState {
    /// Starts with a fade drawn from the stationary distribution.
    pub fn new(mean_snr_db: f64, fading: FadingParams, rng: &mut RandomStream) -> Self {
        let fade_db = fading.sigma_db * rng.standard_normal();
        Self::with_fade(mean_snr_db, fade_db, fading)
    }

    pub fn with_fade(mean_snr_db: f64, fade_db: f64, fading: FadingParams) -> Self {
        ChannelState {
            mean_snr_db,
            fade_db,
            instant_snr_db: mean_snr_db + fade_db,
            fading,
        }
    }

    /// Advances the AR(1) fade by one frame.
    pub fn step_fading(&self, rng: &mut RandomStream) -> Self {
        let FadingParams { sigma_db, rho } = self.fading;
        // Always consume one draw so the stream position is independent of rho.
        let innovation = rng.standard_normal();
        let fade_db = rho * self.fade_db + (1.0 - rho * rho).sqrt() * sigma_db * innovation;
        Self::with_fade(self.mean_snr_db, fade_db, self.fading)
    }
}

/// Default decade slope of the BLER curves.
pub const BLER_SLOPE_DB: f64 = 3.0;

/// Block error probability at `snr_db`: 0.1 at the anchor, one decade per
/// 3 dB, clamped to 1.
pub fn bler(mcs: &McsProfile, snr_db: f64) -> f64 {
    bler_with_slope(mcs, snr_db, BLER_SLOPE_DB)
}

pub fn bler_with_slope(mcs: &McsProfile, snr_db: f64, slope_db: f64) -> f64 {
    let p = 0.1 * 10f64.powf(-(snr_db - mcs.bler_anchor_db) / slope_db);
    p.min(1.0)
}

/// SNR to BLER mapping used by a run, with an optional fixed override.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlerModel {
    pub slope_db: f64,
    pub forced: Option<f64>,
}

impl Default for BlerModel {
    fn default() -> Self {
        BlerModel {
            slope_db: BLER_SLOPE_DB,
            forced: None,
        }
    }
}

impl BlerModel {
    pub fn forced(p: f64) -> Self {
        BlerModel {
            forced: Some(p),
            ..Self::default()
        }
    }

    pub fn probability(&self, mcs: &McsProfile, snr_db: f64) -> f64 {
        match self.forced {
            Some(p) => p,
            None => bler_with_slope(mcs, snr_db, self.slope_db),
        }
    }
}

/// Bernoulli draw: `true` means the block failed to decode.
pub fn draw_block_error(bler: f64, rng: &mut RandomStream) -> bool {
    debug_assert!((0.0..=1.0).contains(&bler), "bler out of range: {bler}");
    rng.uniform() < bler
}
