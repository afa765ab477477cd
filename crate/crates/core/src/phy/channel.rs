//! BSC, BPSK/AWGN and flat Rayleigh channel models.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::bits::BitVec;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("flip probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("SNR must be finite, got {0}")]
    Snr(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChannelModel {
    /// Binary symmetric channel with flip probability `p`.
    Bsc { p: f64 },
    /// BPSK over additive white Gaussian noise; `snr_db` is Eb/N0.
    Awgn { snr_db: f64 },
    /// BPSK over flat Rayleigh fading with perfect CSI; `snr_db` is Eb/N0.
    Rayleigh { snr_db: f64 },
}

impl ChannelModel {
    pub fn bsc(p: f64) -> Result<Self, ChannelError> {
        if (0.0..=1.0).contains(&p) {
            Ok(Self::Bsc { p })
        } else {
            Err(ChannelError::Probability(p))
        }
    }

    pub fn awgn(snr_db: f64) -> Result<Self, ChannelError> {
        if snr_db.is_finite() {
            Ok(Self::Awgn { snr_db })
        } else {
            Err(ChannelError::Snr(snr_db))
        }
    }

    pub fn rayleigh(snr_db: f64) -> Result<Self, ChannelError> {
        if snr_db.is_finite() {
            Ok(Self::Rayleigh { snr_db })
        } else {
            Err(ChannelError::Snr(snr_db))
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        match *self {
            Self::Bsc { p } => Self::bsc(p).map(drop),
            Self::Awgn { snr_db } | Self::Rayleigh { snr_db } => Self::awgn(snr_db).map(drop),
        }
    }
}

/// Noise standard deviation per BPSK symbol for Eb/N0 `snr_db` at code rate `rate`:
/// σ² = 1 / (2·R·10^(snr_db/10)).
pub fn noise_sigma(snr_db: f64, rate: f64) -> f64 {
    (1.0 / (2.0 * rate * 10f64.powf(snr_db / 10.0))).sqrt()
}

/// What the receiver observes.
#[derive(Clone, Debug, PartialEq)]
pub enum Received {
    Hard(BitVec),
    /// BPSK soft values, equalized by the fade for Rayleigh.
    Soft(Vec<f64>),
}

impl Received {
    pub fn len(&self) -> usize {
        match self {
            Received::Hard(b) => b.len(),
            Received::Soft(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Hard decisions (soft values ≥ 0 map to bit 0).
    pub fn hard(&self) -> BitVec {
        match self {
            Received::Hard(b) => b.clone(),
            Received::Soft(s) => slice(s),
        }
    }
}

pub fn bpsk(bits: &BitVec) -> Vec<f64> {
    bits.iter().map(|b| if b { -1.0 } else { 1.0 }).collect()
}

pub fn slice(values: &[f64]) -> BitVec {
    values.iter().map(|&x| x < 0.0).collect()
}

/// Sends coded bits through `ch` at code rate 1/2.
pub fn transmit<R: Rng + ?Sized>(bits: &BitVec, ch: &ChannelModel, rng: &mut R) -> Received {
    transmit_at_rate(bits, ch, 0.5, rng)
}

pub fn transmit_at_rate<R: Rng + ?Sized>(
    bits: &BitVec,
    ch: &ChannelModel,
    rate: f64,
    rng: &mut R,
) -> Received {
    match *ch {
        ChannelModel::Bsc { p } => Received::Hard(
            bits.iter()
                .map(|b| {
                    // random_bool rejects p outside [0, 1]; 0 and 1 are exact.
                    b ^ rng.random_bool(p)
                })
                .collect(),
        ),
        ChannelModel::Awgn { snr_db } => {
            let sigma = noise_sigma(snr_db, rate);
            Received::Soft(
                bpsk(bits)
                    .into_iter()
                    .map(|x| x + sigma * rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            )
        }
        ChannelModel::Rayleigh { snr_db } => {
            let sigma = noise_sigma(snr_db, rate);
            Received::Soft(
                bpsk(bits)
                    .into_iter()
                    .map(|x| {
                        let a = rayleigh_fade(rng);
                        let y = a * x + sigma * rng.sample::<f64, _>(StandardNormal);
                        y / a
                    })
                    .collect(),
            )
        }
    }
}

/// Fade magnitude with E[a²] = 1.
fn rayleigh_fade<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let i: f64 = rng.sample(StandardNormal);
    let q: f64 = rng.sample(StandardNormal);
    ((i * i + q * q) / 2.0).sqrt().max(f64::MIN_POSITIVE)
}
