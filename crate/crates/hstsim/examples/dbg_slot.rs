use hstsim::campaign::CampaignConfig;
use hstsim::channel::{doppler_shift_hz, path_loss_db, ricean_channel, ChannelResponse};
use hstsim::link::*;
use hstsim::rng::{derive_seed, stream_rng, Stream};
use hstsim::Vec2;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() {
    let cfg = CampaignConfig::default();
    let num = OfdmNumerology::for_prbs(264).unwrap();
    let calib = cfg.link.calibration();
    let block = PtrsLayout::new(PtrsKind::Block, num.subcarriers());
    let mask = cfg.link.pn_mask();
    let n = num.slot_samples();
    let fs = num.sample_rate_hz();
    // 290 m geometry amplitudes
    let amp = 1.0 / 2.0f64.sqrt();

    // Sweep components on/off at 38 dB SNR
    for (label, use_pn, dopp, delay_b) in [
        ("pn only          ", true, 0.0, 0.0),
        ("pn + dopp 95     ", true, 95.0, 0.0),
        ("pn + delay 2ns   ", true, 0.0, 2e-9),
        ("pn + dopp + delay", true, 95.0, 2e-9),
        ("clean            ", false, 0.0, 0.0),
    ] {
        let mut effs: Vec<f64> = Vec::new();
        for seed in 0..60u64 {
            let chans: Vec<Vec<ChannelResponse>> = (0..2).map(|r| (0..2).map(|l| ricean_channel(0.0, 13.3, 100e-9, derive_seed(1, Stream::ChannelTaps, seed, 0, (r*4+l) as u64)).unwrap()).collect()).collect();
            let silent = PhaseNoiseTrace::silent(n, fs);
            let tx: Vec<PhaseNoiseTrace> = (0..2).map(|r| if use_pn { phase_noise_trace(&mask, n, fs, derive_seed(2, Stream::PhaseNoise, seed, 0, r)) } else { silent.clone() }).collect();
            let rx = if use_pn { phase_noise_trace(&mask, n, fs, derive_seed(2, Stream::PhaseNoise, seed, 0, 9)) } else { silent.clone() };
            let params = SlotParams { numerology: &num, mcs: Mcs::Index24, ptrs: &block, snr_db: 38.0, rank: 2, calib: &calib };
            let rrhs: Vec<RrhSignal> = (0..2).map(|r| RrhSignal {
                channels: chans[r].iter().collect(), amplitude: amp,
                residual_doppler_hz: if r == 0 { dopp } else { -dopp },
                residual_delay_s: if r == 1 { delay_b } else { 0.0 }, tx_pn: &tx[r],
            }).collect();
            let out = sfn_ofdm_slot(&params, &rrhs, &rx, &[Compensation::Ici{half_width:1}], derive_seed(3, Stream::LinkSlot, seed, 0, 0));
            effs.push(out[0].effective_sinr_db);
        }
        effs.sort_by(|a,b| a.partial_cmp(b).unwrap());
        let mean = effs.iter().sum::<f64>()/effs.len() as f64;
        println!("{label}: mean={mean:6.2} p5={:6.2} p25={:6.2} p50={:6.2} p95={:6.2}", effs[3], effs[15], effs[30], effs[57]);
    }
}
