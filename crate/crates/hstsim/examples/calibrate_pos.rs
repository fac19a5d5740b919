use hstsim::campaign::{run_positioning_campaign, CampaignConfig};

fn main() {
    let base = CampaignConfig::default();
    let mut variants: Vec<(&str, CampaignConfig)> = vec![("base 400MHz/10ms/5rrh/sweep", base.clone())];
    let mut c = base.clone(); c.measurement.bandwidth_mhz = 200.0; variants.push(("200 MHz", c));
    let mut c = base.clone(); c.measurement.srs_interval_ms = 100.0; variants.push(("100 ms", c));
    let mut c = base.clone(); c.measurement.rrh_count = 3; variants.push(("3 RRH", c));
    let mut c = base.clone(); c.beam.train_beam_mode = "fixed".into(); variants.push(("fixed beams", c));
    let mut c = base.clone(); c.scenario.rrh_array_horizontal = 32; c.scenario.train_array_horizontal = 8; variants.push(("32x4/8x4 arrays", c));
    for (name, cfg) in variants {
        let out = run_positioning_campaign(&cfg).unwrap();
        let p = &out.position_error_m;
        let v = &out.velocity_error_mps;
        println!("{name:28} pos p95={:.4} p99={:.4} | vel p95={:.4} p99={:.4} | beam p95={:.3}",
            p.percentile(95.0), p.percentile(99.0), v.percentile(95.0), v.percentile(99.0),
            out.beam_error_deg.percentile(95.0));
    }
}
