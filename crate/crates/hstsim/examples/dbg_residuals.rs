use hstsim::campaign::CampaignConfig;
use hstsim::channel::doppler_shift_hz;
use hstsim::beam::point_beam;
use hstsim::scenario::{beam_gain_db, train_codebook, ArrayGeometry, Rrh};
use hstsim::rng::{stream_rng, Stream};
use hstsim::{wrap_angle, Vec2, SPEED_OF_LIGHT};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

fn main() {
    let cfg = CampaignConfig::default();
    let off = 5.0;
    let isd = 580.0;
    let rrh_array = ArrayGeometry::new(8, 4);
    let a = Rrh { id: 0, position: Vec2::new(0.0, off), arc_m: 0.0,
        panels: [wrap_angle(-FRAC_PI_2 - FRAC_PI_4), wrap_angle(-FRAC_PI_2 + FRAC_PI_4)], array: rrh_array };
    let b = Rrh { id: 1, position: Vec2::new(isd, -off), arc_m: isd,
        panels: [wrap_angle(FRAC_PI_2 - FRAC_PI_4), wrap_angle(FRAC_PI_2 + FRAC_PI_4)], array: rrh_array };
    let train_array = ArrayGeometry::new(4, 4);
    let codebook = train_codebook(&train_array);
    let carrier = cfg.channel.carrier_ghz * 1e9;
    let interval = cfg.measurement.srs_interval_ms / 1e3;
    let (sp, sv) = (0.25, 0.3);

    for d in [10.0f64, 290.0] {
        let x0 = (d*d - off*off).sqrt();
        let p_true = Vec2::new(x0, 0.0);
        let v_true = Vec2::new(cfg.scenario.max_speed_kmh/3.6, 0.0);
        let mut worst_dopp = [0.0f64; 2];
        let mut worst_delay = 0.0f64;
        let mut worst_loss = [0.0f64; 2];
        let mut mean_loss = [0.0f64; 2];
        let n = 200;
        for real in 0..n {
            let mut rng = stream_rng(1, Stream::ErrorDraw, 0, real, 0);
            let tau: f64 = rng.gen::<f64>() * interval;
            let p_epoch = p_true - v_true * tau;
            let ep = Vec2::new(sp * rng.sample::<f64,_>(StandardNormal), sp * rng.sample::<f64,_>(StandardNormal));
            let ev = Vec2::new(sv * rng.sample::<f64,_>(StandardNormal), sv * rng.sample::<f64,_>(StandardNormal));
            let p_est = p_epoch + ep;
            let v_est = v_true + ev;
            let mut offs = [0.0f64; 2];
            for (i, rrh) in [&a, &b].into_iter().enumerate() {
                let u_true = (rrh.position - p_true).normalize();
                let u_est = (rrh.position - p_est).normalize();
                let f_true = doppler_shift_hz(v_true, u_true, carrier);
                let f_est = doppler_shift_hz(v_est, u_est, carrier);
                if (f_true - f_est).abs() > worst_dopp[i].abs() { worst_dopp[i] = f_true - f_est; }
                offs[i] = (rrh.position - p_true).norm()/SPEED_OF_LIGHT - (rrh.position - p_est).norm()/SPEED_OF_LIGHT;
                let assignment = point_beam(rrh, p_est, 0.0);
                let boresight = rrh.panels[assignment.panel_index];
                let bearing_now = rrh.bearing_to(p_true);
                let gain = beam_gain_db(&rrh.array, wrap_angle(assignment.steer_azimuth - boresight), wrap_angle(bearing_now - boresight));
                let peak = 10.0 * 32f64.log10();
                let mut loss = (peak - gain).max(0.0);
                let bearing_epoch = (rrh.position - p_epoch).y.atan2((rrh.position - p_epoch).x);
                let pb = if bearing_epoch.abs() <= FRAC_PI_2 { 0.0 } else { PI };
                let rel_epoch = wrap_angle(bearing_epoch - pb);
                let best = codebook.iter().map(|&o| beam_gain_db(&train_array, o, rel_epoch)).zip(&codebook)
                    .max_by(|x, y| x.0.partial_cmp(&y.0).unwrap()).map(|(_, &o)| o).unwrap();
                let bearing_now_t = (rrh.position - p_true).y.atan2((rrh.position - p_true).x);
                let rel_now = wrap_angle(bearing_now_t - pb);
                let tgain = beam_gain_db(&train_array, best, rel_now);
                let tpeak = 10.0 * 16f64.log10();
                loss += (tpeak - tgain).max(0.0);
                if loss > worst_loss[i] { worst_loss[i] = loss; }
                mean_loss[i] += loss / n as f64;
            }
            let rd = offs[1] - offs[0];
            if rd.abs() > worst_delay.abs() { worst_delay = rd; }
        }
        println!("d={d}: worst |residual doppler| A={:.0} B={:.0} Hz | worst delta-delay={:.2} ns | beam loss mean A={:.2} B={:.2} worst A={:.2} B={:.2} dB",
            worst_dopp[0], worst_dopp[1], worst_delay*1e9, mean_loss[0], mean_loss[1], worst_loss[0], worst_loss[1]);
    }
}
