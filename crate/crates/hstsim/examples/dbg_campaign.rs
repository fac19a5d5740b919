use hstsim::campaign::CampaignConfig;
use hstsim::measurements::*;
use hstsim::scenario::*;
use hstsim::tracking::*;
use hstsim::channel::ShadowingField;
use hstsim::beam::point_beam;
use hstsim::Vec2;

fn main() {
    let cfg = CampaignConfig::default();
    let spec = CurvatureSpec { segments: 4, max_curvature: 1.5e-4, correlation_m: 5000.0 };
    let track = build_track(2320.0, &spec, cfg.scenario.track_seed).unwrap();
    let profile = SpeedProfile::plan(2320.0, 500.0/3.6, 0.5, 290.0/3.6).unwrap();
    let deployment = deploy_rrhs(&track, 580.0, 5.0, ArrayGeometry::new(8,4)).unwrap();
    let positions: Vec<Vec2> = deployment.rrhs.iter().map(|r| r.position).collect();
    let train_array = ArrayGeometry::new(4,4);
    let codebook = train_codebook(&train_array);
    let srs = SrsParams { radio: cfg.uplink_radio(), snr_floor_db: -5.0, snr_estimate_sigma_db: 1.0, crlb_snr_cap_db: 30.0, noise_enabled: false };
    let shadow: Vec<ShadowingField> = deployment.rrhs.iter().map(|r| ShadowingField::new(r.id as u64, 2321.0, 4.0, 10.0)).collect();
    let model = ProcessModel { q: 1.0 };
    let mut filter: Option<EkfEstimate> = None;
    let mut fails = 0;
    for epoch in 0..12000u64 {
        let t = epoch as f64 * 0.1;
        if t > profile.duration() { break; }
        let truth = train_state_at(&track, &profile, t).unwrap();
        let aim = filter.as_ref().map(|e| predict_position(e, t - e.epoch_time)).unwrap_or(truth.position);
        let serving = deployment.nearest(truth.position, 5);
        let links: Vec<SrsLink> = serving.iter().map(|&i| {
            let rrh = &deployment.rrhs[i];
            let a = point_beam(rrh, aim, t);
            SrsLink { rrh_index: i, steer_azimuth: a.steer_azimuth, panel: a.panel_index, shadowing_db: shadow[i].sample(truth.arc_position) }
        }).collect();
        let beams = build_train_beams(truth.heading, &codebook, true);
        let key = EpochKey { master_seed: 1, replication: 0, epoch_index: epoch };
        let obs = sweep_srs(&truth, &deployment, &links, &train_array, &beams, &srs, 0.0, &key);
        if obs.len() < 3 { println!("t={t:.1} only {} obs", obs.len()); continue; }
        let batch = form_tdoa(&obs, t).unwrap();
        filter = match filter.take() {
            None => match ekf_init(&batch, &positions, &InitParams::default()) {
                Ok(e) => { println!("t={t:.1} INIT err={:.3}", (e.position()-truth.position).norm()); Some(e) }
                Err(e) => { println!("t={t:.1} init FAILED {e}"); None }
            },
            Some(est) => {
                let pred = ekf_predict(&est, t - est.epoch_time, &model);
                match ekf_update(&pred, &batch, &positions, 0.997) {
                    Ok(UpdateOutcome::Updated(u)) => { fails = 0; Some(u) }
                    Ok(UpdateOutcome::Gated { mahalanobis_sq, threshold }) => {
                        println!("t={t:.1} GATED m2={mahalanobis_sq:.1} thr={threshold:.1} err={:.3}", (pred.position()-truth.position).norm());
                        fails += 1;
                        if fails >= 5 { fails = 0; None } else { Some(pred) }
                    }
                    Err(e) => { println!("t={t:.1} update error {e}"); None }
                }
            }
        };
        if let Some(e) = &filter {
            let err = (e.position()-truth.position).norm();
            if err > 1.0 && epoch % 10 == 0 {
                println!("t={t:.1} arc={:.0} err={err:.2} lat_cov={:.2e} obs={} servings={:?}", truth.arc_position, e.covariance[(1,1)], obs.len(), serving);
            }
        }
    }
}
