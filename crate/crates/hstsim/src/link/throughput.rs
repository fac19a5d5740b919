//! SINR-to-throughput abstraction: exponential effective SINR mapping and
//! a per-MCS AWGN BLER threshold curve instead of full channel coding.

use super::numerology::OfdmNumerology;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum McsError {
    #[error("unsupported MCS index {0} (evaluated indices are 18 and 24)")]
    UnsupportedIndex(u32),
}

/// Fraction of the raw resource-element rate left after DMRS/PTRS/control
/// overhead.
pub const OVERHEAD_FACTOR: f64 = 0.75;

/// Evaluated modulation and coding schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mcs {
    /// 64-QAM, R = 822/1024.
    Index18,
    /// 256-QAM, R = 841/1024.
    Index24,
}

impl Mcs {
    pub fn from_index(index: u32) -> Result<Self, McsError> {
        match index {
            18 => Ok(Mcs::Index18),
            24 => Ok(Mcs::Index24),
            other => Err(McsError::UnsupportedIndex(other)),
        }
    }

    pub fn index(&self) -> u32 {
        match self {
            Mcs::Index18 => 18,
            Mcs::Index24 => 24,
        }
    }

    /// Bits per modulation symbol.
    pub fn bits_per_symbol(&self) -> u32 {
        match self {
            Mcs::Index18 => 6,
            Mcs::Index24 => 8,
        }
    }

    pub fn code_rate(&self) -> f64 {
        match self {
            Mcs::Index18 => 822.0 / 1024.0,
            Mcs::Index24 => 841.0 / 1024.0,
        }
    }
}

/// EESM and BLER-curve constants, calibrated once on the AWGN pipeline and
/// carried in the campaign configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkCalibration {
    pub eesm_beta_mcs18: f64,
    pub eesm_beta_mcs24: f64,
    /// Effective SINR where BLER crosses 0.5, dB.
    pub bler_threshold_db_mcs18: f64,
    pub bler_threshold_db_mcs24: f64,
    /// Logistic slope of the BLER curve, dB.
    pub bler_slope_db: f64,
}

impl Default for LinkCalibration {
    fn default() -> Self {
        Self {
            eesm_beta_mcs18: 60.0,
            eesm_beta_mcs24: 250.0,
            bler_threshold_db_mcs18: 16.8,
            bler_threshold_db_mcs24: 23.7,
            bler_slope_db: 0.3,
        }
    }
}

impl LinkCalibration {
    pub fn beta(&self, mcs: Mcs) -> f64 {
        match mcs {
            Mcs::Index18 => self.eesm_beta_mcs18,
            Mcs::Index24 => self.eesm_beta_mcs24,
        }
    }

    pub fn threshold_db(&self, mcs: Mcs) -> f64 {
        match mcs {
            Mcs::Index18 => self.bler_threshold_db_mcs18,
            Mcs::Index24 => self.bler_threshold_db_mcs24,
        }
    }
}

/// Exponential effective SINR over per-RE linear SINRs:
/// -beta * ln(mean(exp(-sinr/beta))).
pub fn effective_sinr_db(per_re_sinr_linear: &[f64], beta: f64) -> f64 {
    assert!(!per_re_sinr_linear.is_empty());
    let mean_exp = per_re_sinr_linear
        .iter()
        .map(|&s| (-s / beta).exp())
        .sum::<f64>()
        / per_re_sinr_linear.len() as f64;
    let eff = -beta * mean_exp.ln().max(-700.0);
    10.0 * eff.max(1e-12).log10()
}

/// Logistic AWGN BLER curve: 0.5 exactly at the threshold.
pub fn bler(effective_sinr_db: f64, threshold_db: f64, slope_db: f64) -> f64 {
    1.0 / (1.0 + ((effective_sinr_db - threshold_db) / slope_db).exp())
}

/// Transport block size per slot, bits (full grid; PTRS/DMRS/control live
/// inside the overhead factor).
pub fn transport_block_bits(numerology: &OfdmNumerology, rank: usize, mcs: Mcs) -> f64 {
    numerology.subcarriers() as f64
        * numerology.symbols_per_slot as f64
        * rank as f64
        * mcs.bits_per_symbol() as f64
        * mcs.code_rate()
        * OVERHEAD_FACTOR
}

/// Delivered bits for one slot given the effective SINR.
pub fn slot_throughput_bits(
    numerology: &OfdmNumerology,
    rank: usize,
    mcs: Mcs,
    effective_sinr_db: f64,
    calib: &LinkCalibration,
) -> f64 {
    let b = bler(effective_sinr_db, calib.threshold_db(mcs), calib.bler_slope_db);
    (1.0 - b) * transport_block_bits(numerology, rank, mcs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn plateau_is_3_5_gbps() {
        // 264 PRB, rank 2, 256-QAM R=841/1024, 0.75 overhead, 0.125 ms slot.
        let n = OfdmNumerology::for_prbs(264).unwrap();
        let raw = transport_block_bits(&n, 2, Mcs::Index24) / OVERHEAD_FACTOR;
        assert_abs_diff_eq!(raw / n.slot_duration_s() / 1e9, 4.6625, epsilon = 1e-3);

        let calib = LinkCalibration::default();
        let bits = slot_throughput_bits(&n, 2, Mcs::Index24, 80.0, &calib);
        let gbps = bits / n.slot_duration_s() / 1e9;
        assert!((gbps - 3.497).abs() < 0.01, "plateau {gbps} Gbps");
        assert!((gbps - 3.5).abs() < 0.2);
    }

    #[test]
    fn zero_sinr_gives_zero_throughput() {
        let n = OfdmNumerology::for_prbs(264).unwrap();
        let calib = LinkCalibration::default();
        let bits = slot_throughput_bits(&n, 2, Mcs::Index24, -30.0, &calib);
        assert!(bits / transport_block_bits(&n, 2, Mcs::Index24) < 1e-9);
    }

    #[test]
    fn threshold_crossing_halves_the_rate() {
        let n = OfdmNumerology::for_prbs(264).unwrap();
        let calib = LinkCalibration::default();
        let bits = slot_throughput_bits(
            &n,
            2,
            Mcs::Index18,
            calib.bler_threshold_db_mcs18,
            &calib,
        );
        assert_abs_diff_eq!(bits / transport_block_bits(&n, 2, Mcs::Index18), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn eesm_of_constant_sinr_is_identity() {
        let sinrs = vec![100.0; 1000];
        assert_abs_diff_eq!(effective_sinr_db(&sinrs, 30.0), 20.0, epsilon = 1e-9);
    }

    #[test]
    fn eesm_penalizes_dispersion() {
        let uniform = vec![100.0; 100];
        let mut split = vec![10.0; 50];
        split.extend(vec![190.0; 50]);
        assert!(effective_sinr_db(&split, 20.0) < effective_sinr_db(&uniform, 20.0));
    }

    #[test]
    fn unknown_mcs_is_rejected() {
        assert!(Mcs::from_index(11).is_err());
        assert_eq!(Mcs::from_index(18).unwrap(), Mcs::Index18);
        assert_eq!(Mcs::from_index(24).unwrap().bits_per_symbol(), 8);
    }

    #[test]
    fn bler_is_monotone_decreasing() {
        let calib = LinkCalibration::default();
        let mut prev = 1.0;
        for i in 0..100 {
            let s = i as f64 * 0.5;
            let b = bler(s, calib.bler_threshold_db_mcs24, calib.bler_slope_db);
            assert!(b <= prev);
            prev = b;
        }
    }
}
