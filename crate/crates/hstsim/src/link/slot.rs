//! SFN downlink slot simulation.
//!
//! Both serving RRHs transmit the same precompensated slot; the train
//! receives the superposition through per-link Ricean channels with
//! per-oscillator transmit phase noise, a common receive phase noise, the
//! per-link residual Doppler left by the precompensation, and AWGN. The
//! receiver knows the nominal composite channel (ideal estimation apart
//! from the PN/Doppler impairments under study) and optionally applies
//! PTRS-based CPE or de-ICI compensation before zero-forcing equalization.
//!
//! Rank 2 is polarization-based: the two layers ride independent channel
//! realizations with negligible cross-talk, so the slot is simulated as two
//! parallel streams sharing the same oscillators.

use super::numerology::OfdmNumerology;
use super::phase_noise::PhaseNoiseTrace;
use super::ptrs::PtrsLayout;
use super::throughput::{
    effective_sinr_db, slot_throughput_bits, LinkCalibration, Mcs,
};
use crate::channel::ChannelResponse;
use crate::rng::{stream_rng, Stream};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use std::f64::consts::TAU;
use std::sync::Arc;

/// Guard shift applied to every channel tap so small negative residual
/// delays stay representable, samples.
const GUARD_SAMPLES: i64 = 32;

/// Receiver compensation mode for one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compensation {
    /// No PTRS processing at all.
    None,
    /// Distributed-PTRS common phase error removal per symbol.
    Cpe,
    /// Block-PTRS de-ICI filter with the given half-width (taps = 2u+1).
    Ici { half_width: usize },
}

impl Compensation {
    pub fn label(&self) -> &'static str {
        match self {
            Compensation::None => "none",
            Compensation::Cpe => "cpe",
            Compensation::Ici { .. } => "ici",
        }
    }
}

/// One serving RRH's contribution to the slot.
#[derive(Debug, Clone)]
pub struct RrhSignal<'a> {
    /// One channel realization per spatial layer.
    pub channels: Vec<&'a ChannelResponse>,
    /// Relative linear voltage gain of this link (path loss and beam gains).
    pub amplitude: f64,
    /// Doppler left uncompensated on this link, Hz.
    pub residual_doppler_hz: f64,
    /// Timing misalignment left by the network timing alignment, s.
    pub residual_delay_s: f64,
    /// Transmit oscillator phase trace covering the whole slot.
    pub tx_pn: &'a PhaseNoiseTrace,
}

/// Slot-level configuration.
#[derive(Debug, Clone, Copy)]
pub struct SlotParams<'a> {
    pub numerology: &'a OfdmNumerology,
    pub mcs: Mcs,
    pub ptrs: &'a PtrsLayout,
    /// Average post-FFT SNR of the nominal composite, dB. `INFINITY`
    /// disables noise.
    pub snr_db: f64,
    pub rank: usize,
    pub calib: &'a LinkCalibration,
}

/// Outcome of one compensation mode applied to one received slot.
#[derive(Debug, Clone)]
pub struct SlotResult {
    pub mode: Compensation,
    /// Post-equalization SINR per data resource element (linear), all layers.
    pub per_re_sinr: Vec<f64>,
    pub effective_sinr_db: f64,
    pub throughput_bits: f64,
    /// Mean post-equalization error power over data REs, dB.
    pub evm_db: f64,
    /// Residual inter-RRH skew exceeded the cyclic prefix.
    pub isi_flagged: bool,
    /// The de-ICI system was ill-conditioned and fell back to CPE-only.
    pub ici_fallback: bool,
    /// Total received grid power (diagnostics; equals the nominal grid
    /// power in impairment-free passes).
    pub rx_grid_power: f64,
    /// Grid power the nominal composite channel would deliver.
    pub nominal_grid_power: f64,
}

/// `grid[symbol][subcarrier]`.
pub type Grid = Vec<Vec<Complex64>>;

fn bin_for_subcarrier(k: usize, n_sc: usize, fft: usize) -> usize {
    ((k as isize - (n_sc / 2) as isize).rem_euclid(fft as isize)) as usize
}

/// Frequency-shifts a waveform by `-doppler_hz` and advances it by
/// `advance_s` (exact fractional shift in the frequency domain). This is the
/// transmit-side precompensation primitive; in the slot simulation the two
/// effects appear pre-differenced as residuals.
pub fn precompensate(
    waveform: &mut Vec<Complex64>,
    sample_rate_hz: f64,
    doppler_hz: f64,
    advance_s: f64,
) {
    let n = waveform.len();
    for (i, v) in waveform.iter_mut().enumerate() {
        let t = i as f64 / sample_rate_hz;
        *v *= Complex64::from_polar(1.0, -TAU * doppler_hz * t);
    }
    if advance_s != 0.0 {
        let mut planner = FftPlanner::<f64>::new();
        planner.plan_fft_forward(n).process(waveform);
        for (k, v) in waveform.iter_mut().enumerate() {
            let f = if k < n / 2 { k as f64 } else { k as f64 - n as f64 } * sample_rate_hz
                / n as f64;
            *v *= Complex64::from_polar(1.0, TAU * f * advance_s) / n as f64;
        }
        planner.plan_fft_inverse(n).process(waveform);
    }
}

struct SparseFir {
    taps: Vec<(usize, Complex64)>,
}

impl SparseFir {
    fn from_channel(
        channel: &ChannelResponse,
        amplitude: f64,
        extra_delay_s: f64,
        sample_rate_hz: f64,
    ) -> Self {
        let mut map: std::collections::BTreeMap<usize, Complex64> = std::collections::BTreeMap::new();
        for &(delay, gain) in &channel.taps {
            let idx = ((delay + extra_delay_s) * sample_rate_hz).round() as i64 + GUARD_SAMPLES;
            let idx = idx.max(0) as usize;
            *map.entry(idx).or_insert(Complex64::new(0.0, 0.0)) += gain * amplitude;
        }
        Self { taps: map.into_iter().collect() }
    }

    fn apply(&self, input: &[Complex64], output: &mut [Complex64]) {
        let n = output.len();
        for &(idx, coeff) in &self.taps {
            let limit = n.saturating_sub(idx);
            for i in 0..limit.min(input.len()) {
                output[i + idx] += coeff * input[i];
            }
        }
    }

    /// Frequency response on the allocation bins.
    fn frequency_response(&self, numerology: &OfdmNumerology) -> Vec<Complex64> {
        let fft = numerology.fft_size;
        let n_sc = numerology.subcarriers();
        let mut impulse = vec![Complex64::new(0.0, 0.0); fft];
        for &(idx, coeff) in &self.taps {
            impulse[idx % fft] += coeff;
        }
        FftPlanner::<f64>::new().plan_fft_forward(fft).process(&mut impulse);
        (0..n_sc).map(|k| impulse[bin_for_subcarrier(k, n_sc, fft)]).collect()
    }
}

/// Random constellation symbol with unit average power.
fn random_qam(rng: &mut impl Rng, bits: u32) -> Complex64 {
    let m_side = 1 << (bits / 2); // 8 for 64-QAM, 16 for 256-QAM
    let norm = match bits {
        6 => 42.0_f64,
        8 => 170.0_f64,
        _ => (2 * (m_side * m_side - 1)) as f64 / 3.0,
    }
    .sqrt();
    let level = |r: &mut dyn rand::RngCore| {
        let i = (r.next_u32() as usize) % m_side;
        (2.0 * i as f64 - (m_side as f64 - 1.0)) / norm
    };
    Complex64::new(level(rng), level(rng))
}

fn random_qpsk(rng: &mut impl Rng) -> Complex64 {
    let re = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    let im = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    Complex64::new(re, im) / 2.0_f64.sqrt()
}

struct TxLayer {
    grid: Grid,
    time: Vec<Complex64>,
}

fn modulate_layer(
    numerology: &OfdmNumerology,
    grid: &Grid,
    ifft: &Arc<dyn rustfft::Fft<f64>>,
) -> Vec<Complex64> {
    let fft = numerology.fft_size;
    let n_sc = numerology.subcarriers();
    let scale = 1.0 / (fft as f64).sqrt();
    let mut time = vec![Complex64::new(0.0, 0.0); numerology.slot_samples()];
    let mut buf = vec![Complex64::new(0.0, 0.0); fft];
    for (s, row) in grid.iter().enumerate() {
        buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (k, &x) in row.iter().enumerate() {
            buf[bin_for_subcarrier(k, n_sc, fft)] = x;
        }
        ifft.process(&mut buf);
        let start = numerology.symbol_start(s);
        let cp = if s == 0 { numerology.first_cp_samples } else { numerology.cp_samples };
        for i in 0..fft {
            time[start + i] = buf[i] * scale;
        }
        for i in 0..cp {
            time[start - cp + i] = buf[fft - cp + i] * scale;
        }
    }
    time
}

fn demodulate(
    numerology: &OfdmNumerology,
    time: &[Complex64],
    fft_plan: &Arc<dyn rustfft::Fft<f64>>,
) -> Grid {
    let fft = numerology.fft_size;
    let n_sc = numerology.subcarriers();
    let scale = 1.0 / (fft as f64).sqrt();
    let mut grid = Vec::with_capacity(numerology.symbols_per_slot);
    let mut buf = vec![Complex64::new(0.0, 0.0); fft];
    for s in 0..numerology.symbols_per_slot {
        let start = numerology.symbol_start(s);
        buf.copy_from_slice(&time[start..start + fft]);
        fft_plan.process(&mut buf);
        grid.push((0..n_sc).map(|k| buf[bin_for_subcarrier(k, n_sc, fft)] * scale).collect());
    }
    grid
}

// ---------------------------------------------------------------------------
// PTRS estimators
// ---------------------------------------------------------------------------

/// Per-symbol least-squares common phase over the PTRS REs, pooled across
/// layers. `nominal` is the expected impairment-free grid (channel times
/// pilots).
pub fn estimate_cpe(received: &[Grid], nominal: &[Grid], layout: &PtrsLayout) -> Vec<f64> {
    let symbols = received[0].len();
    (0..symbols)
        .map(|s| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (rx, nom) in received.iter().zip(nominal) {
                for &k in &layout.subcarriers {
                    acc += rx[s][k] * nom[s][k].conj();
                }
            }
            acc.arg()
        })
        .collect()
}

/// Per-symbol de-ICI filters estimated from the block PTRS.
#[derive(Debug, Clone)]
pub struct IciEstimate {
    /// 2u+1 taps per symbol, centered (index u is the CPE tap).
    pub taps: Vec<Vec<Complex64>>,
    /// Some symbol's system was ill-conditioned; taps fell back to CPE-only.
    pub fallback: bool,
}

/// Maximum acceptable condition number of the de-ICI system.
const ICI_CONDITION_LIMIT: f64 = 1e6;

/// Least-squares solve of the convolution system relating the known block
/// PTRS (through the known channel) to the received REs.
pub fn estimate_ici(
    received: &[Grid],
    nominal: &[Grid],
    layout: &PtrsLayout,
    half_width: usize,
) -> IciEstimate {
    let u = half_width;
    let n_taps = 2 * u + 1;
    let block = &layout.subcarriers;
    assert!(block.len() >= n_taps + 2 * u, "block too short for 2u+1 unknowns");
    let symbols = received[0].len();
    let layers = received.len();
    let rows_per_layer = block.len() - 2 * u;

    let mut taps = Vec::with_capacity(symbols);
    let mut fallback = false;
    for s in 0..symbols {
        let mut a = nalgebra::DMatrix::<Complex64>::zeros(rows_per_layer * layers, n_taps);
        let mut y = nalgebra::DVector::<Complex64>::zeros(rows_per_layer * layers);
        for (l, (rx, nom)) in received.iter().zip(nominal).enumerate() {
            for (r, &k) in block[u..block.len() - u].iter().enumerate() {
                let row = l * rows_per_layer + r;
                for m in 0..n_taps {
                    // Tap m shifts by (m - u) subcarriers.
                    let src = (k as isize - (m as isize - u as isize)) as usize;
                    a[(row, m)] = nom[s][src];
                }
                y[row] = rx[s][k];
            }
        }
        let svd = nalgebra::SVD::new(a, true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smin <= 0.0 || smax / smin > ICI_CONDITION_LIMIT {
            // CPE-only fallback for this symbol.
            fallback = true;
            let mut acc = Complex64::new(0.0, 0.0);
            for (rx, nom) in received.iter().zip(nominal) {
                for &k in block {
                    acc += rx[s][k] * nom[s][k].conj();
                }
            }
            let mut t = vec![Complex64::new(0.0, 0.0); n_taps];
            t[u] = Complex64::from_polar(1.0, acc.arg());
            taps.push(t);
        } else {
            let sol = svd.solve(&y, 1e-12).expect("SVD solve after condition check");
            taps.push(sol.iter().copied().collect());
        }
    }
    IciEstimate { taps, fallback }
}

// ---------------------------------------------------------------------------
// Slot simulation
// ---------------------------------------------------------------------------

/// Simulates one SFN slot and evaluates every requested compensation mode
/// against the same received samples, enabling paired comparisons.
pub fn sfn_ofdm_slot(
    params: &SlotParams,
    rrhs: &[RrhSignal],
    rx_pn: &PhaseNoiseTrace,
    modes: &[Compensation],
    seed: u64,
) -> Vec<SlotResult> {
    let num = params.numerology;
    let fft = num.fft_size;
    let n_sc = num.subcarriers();
    let symbols = num.symbols_per_slot;
    let slot_len = num.slot_samples();
    let fs = num.sample_rate_hz();

    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(fft);
    let fft_plan = planner.plan_fft_forward(fft);

    // Transmit grids: known PTRS pilots plus random data.
    let mut rng = stream_rng(seed, Stream::DataSymbols, 0, 0, 0);
    let mut tx_layers: Vec<TxLayer> = Vec::with_capacity(params.rank);
    for _ in 0..params.rank {
        let mut grid: Grid = Vec::with_capacity(symbols);
        for _ in 0..symbols {
            let row: Vec<Complex64> = (0..n_sc)
                .map(|k| {
                    if params.ptrs.is_ptrs_subcarrier(k) {
                        random_qpsk(&mut rng)
                    } else {
                        random_qam(&mut rng, params.mcs.bits_per_symbol())
                    }
                })
                .collect();
            grid.push(row);
        }
        let time = modulate_layer(num, &grid, &ifft);
        tx_layers.push(TxLayer { grid, time });
    }

    // Per-link FIRs with the residual delay baked in. The receiver's known
    // channel is the static composite response of exactly these taps:
    // data-channel estimation is ideal, so timing skews are part of what it
    // measures; only the time-varying PN/Doppler phasors stay unknown.
    let mut isi_flagged = false;
    let mut nominal_h: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); n_sc]; params.rank];
    let mut firs: Vec<Vec<SparseFir>> = Vec::with_capacity(rrhs.len());
    for rrh in rrhs {
        if rrh.residual_delay_s.abs() > num.cp_duration_s() {
            isi_flagged = true;
        }
        let mut per_layer = Vec::with_capacity(params.rank);
        for l in 0..params.rank {
            let fir = SparseFir::from_channel(rrh.channels[l], rrh.amplitude, rrh.residual_delay_s, fs);
            for (k, h) in fir.frequency_response(num).into_iter().enumerate() {
                nominal_h[l][k] += h;
            }
            per_layer.push(fir);
        }
        firs.push(per_layer);
    }

    // Composite received time signal per layer.
    let mut rx_time: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); slot_len]; params.rank];
    let mut modulated = vec![Complex64::new(0.0, 0.0); slot_len];
    for (rrh, fir_set) in rrhs.iter().zip(&firs) {
        for l in 0..params.rank {
            for i in 0..slot_len {
                let t = i as f64 / fs;
                let phasor = Complex64::from_polar(
                    1.0,
                    rrh.tx_pn.phase_rad[i] + TAU * rrh.residual_doppler_hz * t,
                );
                modulated[i] = tx_layers[l].time[i] * phasor;
            }
            fir_set[l].apply(&modulated, &mut rx_time[l]);
        }
    }

    // Receive phase noise and AWGN.
    let mean_h_power = nominal_h
        .iter()
        .flat_map(|row| row.iter().map(|h| h.norm_sqr()))
        .sum::<f64>()
        / (params.rank * n_sc) as f64;
    let noise_sigma = if params.snr_db.is_finite() {
        (mean_h_power / 10.0_f64.powf(params.snr_db / 10.0) / 2.0).sqrt()
    } else {
        0.0
    };
    for layer in rx_time.iter_mut() {
        for (i, v) in layer.iter_mut().enumerate() {
            *v *= rx_pn.phasor(i);
            if noise_sigma > 0.0 {
                *v += Complex64::new(
                    noise_sigma * rng.sample::<f64, _>(StandardNormal),
                    noise_sigma * rng.sample::<f64, _>(StandardNormal),
                );
            }
        }
    }

    // Uncompensated received grids, used by the estimators.
    let rx_grids: Vec<Grid> = rx_time.iter().map(|t| demodulate(num, t, &fft_plan)).collect();

    // Expected impairment-free grids (known channel times known symbols).
    let nominal_grids: Vec<Grid> = (0..params.rank)
        .map(|l| {
            (0..symbols)
                .map(|s| {
                    (0..n_sc).map(|k| nominal_h[l][k] * tx_layers[l].grid[s][k]).collect()
                })
                .collect()
        })
        .collect();

    let rx_grid_power: f64 =
        rx_grids.iter().flatten().flatten().map(|v| v.norm_sqr()).sum();
    let nominal_grid_power: f64 =
        nominal_grids.iter().flatten().flatten().map(|v| v.norm_sqr()).sum();

    modes
        .iter()
        .map(|&mode| {
            // Per-symbol multiplicative estimate w(t) as a short Fourier
            // series; compensation divides it out of the time signal.
            let (taps, ici_fallback): (Vec<Vec<Complex64>>, bool) = match mode {
                Compensation::None => {
                    (vec![vec![Complex64::new(1.0, 0.0)]; symbols], false)
                }
                Compensation::Cpe => {
                    let phases = estimate_cpe(&rx_grids, &nominal_grids, params.ptrs);
                    (
                        phases.iter().map(|&p| vec![Complex64::from_polar(1.0, p)]).collect(),
                        false,
                    )
                }
                Compensation::Ici { half_width } => {
                    let est = estimate_ici(&rx_grids, &nominal_grids, params.ptrs, half_width);
                    (est.taps, est.fallback)
                }
            };

            // Per-RE SINR from the time-averaged post-equalization error
            // power per subcarrier (the channel and impairment statistics
            // are stationary within the slot).
            let mut per_sc_err: Vec<Vec<f64>> = vec![vec![0.0; n_sc]; params.rank];
            let mut err_acc = 0.0;
            let mut n_data = 0usize;
            let mut comp = vec![Complex64::new(0.0, 0.0); fft];
            for l in 0..params.rank {
                for s in 0..symbols {
                    let start = num.symbol_start(s);
                    let t = &taps[s];
                    let u = t.len() / 2;
                    for i in 0..fft {
                        // w(t) = sum_m g_m e^{j 2 pi (m-u) i / fft}
                        let mut w = Complex64::new(0.0, 0.0);
                        for (m, &g) in t.iter().enumerate() {
                            let shift = m as f64 - u as f64;
                            w += g * Complex64::from_polar(1.0, TAU * shift * i as f64 / fft as f64);
                        }
                        let w = if w.norm() < 0.05 {
                            w / w.norm() * 0.05
                        } else {
                            w
                        };
                        comp[i] = rx_time[l][start + i] / w;
                    }
                    fft_plan.process(&mut comp);
                    let scale = 1.0 / (fft as f64).sqrt();
                    for k in 0..n_sc {
                        if params.ptrs.is_ptrs_subcarrier(k) {
                            continue;
                        }
                        let h = nominal_h[l][k];
                        if h.norm_sqr() < 1e-18 {
                            continue;
                        }
                        let y = comp[bin_for_subcarrier(k, n_sc, fft)] * scale;
                        let e = y / h - tx_layers[l].grid[s][k];
                        let e2 = e.norm_sqr();
                        err_acc += e2;
                        n_data += 1;
                        per_sc_err[l][k] += e2;
                    }
                }
            }
            let mut per_re_sinr = Vec::with_capacity(params.rank * n_sc);
            for (l, row) in per_sc_err.iter().enumerate() {
                for (k, &acc) in row.iter().enumerate() {
                    if params.ptrs.is_ptrs_subcarrier(k) || nominal_h[l][k].norm_sqr() < 1e-18 {
                        continue;
                    }
                    per_re_sinr.push(1.0 / (acc / symbols as f64).max(1e-12));
                }
            }

            let eff = effective_sinr_db(&per_re_sinr, params.calib.beta(params.mcs));
            let throughput_bits =
                slot_throughput_bits(num, params.rank, params.mcs, eff, params.calib);
            SlotResult {
                mode,
                effective_sinr_db: eff,
                throughput_bits,
                evm_db: 10.0 * (err_acc / n_data.max(1) as f64).log10(),
                isi_flagged,
                ici_fallback,
                per_re_sinr,
                rx_grid_power,
                nominal_grid_power,
            }
        })
        .collect()
}
