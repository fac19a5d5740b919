//! 5G NR numerology for the 120 kHz subcarrier-spacing slots used here.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumerologyError {
    #[error("{prbs} PRBs need {needed} subcarriers which exceeds the FFT size {fft}")]
    AllocationTooWide { prbs: usize, needed: usize, fft: usize },
    #[error("unsupported PRB count {0} (expected 132 or 264)")]
    UnsupportedPrbs(usize),
}

/// OFDM slot layout: 14 symbols, normal cyclic prefix, 120 kHz SCS.
///
/// The first symbol of the slot carries the extended cyclic prefix so the
/// slot duration is exactly 0.125 ms at the nominal sample rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfdmNumerology {
    pub scs_hz: f64,
    pub fft_size: usize,
    pub symbols_per_slot: usize,
    pub prbs: usize,
    /// Normal cyclic prefix length in samples (symbols 1..13).
    pub cp_samples: usize,
    /// Extended first-symbol cyclic prefix in samples.
    pub first_cp_samples: usize,
}

impl OfdmNumerology {
    /// Builds the slot layout for a 132 or 264 PRB allocation at 120 kHz.
    pub fn for_prbs(prbs: usize) -> Result<Self, NumerologyError> {
        let fft_size = match prbs {
            132 => 2048,
            264 => 4096,
            _ => return Err(NumerologyError::UnsupportedPrbs(prbs)),
        };
        let needed = prbs * 12;
        if needed > fft_size {
            return Err(NumerologyError::AllocationTooWide { prbs, needed, fft: fft_size });
        }
        // Normal CP scales as 144/2048 of the FFT; the first symbol gets an
        // extra 16/1024 so 14 symbols close the 0.125 ms slot exactly.
        let cp_samples = 144 * fft_size / 2048;
        let first_cp_samples = cp_samples + fft_size / 64;
        Ok(Self {
            scs_hz: 120e3,
            fft_size,
            symbols_per_slot: 14,
            prbs,
            cp_samples,
            first_cp_samples,
        })
    }

    pub fn subcarriers(&self) -> usize {
        self.prbs * 12
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.fft_size as f64 * self.scs_hz
    }

    pub fn cp_duration_s(&self) -> f64 {
        self.cp_samples as f64 / self.sample_rate_hz()
    }

    /// Samples in the whole slot including cyclic prefixes.
    pub fn slot_samples(&self) -> usize {
        self.symbols_per_slot * self.fft_size
            + self.first_cp_samples
            + (self.symbols_per_slot - 1) * self.cp_samples
    }

    pub fn slot_duration_s(&self) -> f64 {
        self.slot_samples() as f64 / self.sample_rate_hz()
    }

    /// Start sample of a symbol's useful (post-CP) part within the slot.
    pub fn symbol_start(&self, symbol: usize) -> usize {
        self.first_cp_samples + symbol * (self.cp_samples + self.fft_size)
    }

    /// Average OFDM symbol duration including CP, s.
    pub fn symbol_duration_s(&self) -> f64 {
        self.slot_duration_s() / self.symbols_per_slot as f64
    }
}
