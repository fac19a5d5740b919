use hstsim::campaign::link_run::{run_link_campaign, ErrorStatistics};
use hstsim::campaign::CampaignConfig;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let mut cfg = CampaignConfig::default();
    cfg.link.mcs_indices = vec![18];
    cfg.link.realizations_per_point = 60;
    cfg.link.snr_sweep_db = vec![12.0, 15.0, 18.0, 21.0, 24.0, 30.0];
    let stats = ErrorStatistics { position_sigma_m: 0.07, velocity_sigma_mps: 0.25 };
    let table = run_link_campaign(&cfg, &stats).unwrap();
    println!("{:>6} {:>6} {:>6} | {:>9} {:>8}", "snr", "mode", "dist", "eff_sinr", "thr_gbps");
    for r in &table.rows {
        println!("{:6.0} {:>6} {:6.0} | {:9.2} {:8.3}", r.snr_db, r.mode, r.distance_m, r.mean_effective_sinr_db, r.throughput_gbps);
    }
    let plateau = table.plateau_gbps("ici", 24, 10.0).min(table.plateau_gbps("ici", 24, 290.0));
    println!("\nici plateau (min of both) = {plateau:.3} Gbps");
    println!("cpe max @10m  = {:.3} ({:.1}% of plateau)", table.plateau_gbps("cpe",24,10.0), 100.0*table.plateau_gbps("cpe",24,10.0)/plateau);
    println!("cpe max @290m = {:.3} ({:.1}%)", table.plateau_gbps("cpe",24,290.0), 100.0*table.plateau_gbps("cpe",24,290.0)/plateau);
    println!("none max      = {:.3} / {:.3}", table.plateau_gbps("none",24,10.0), table.plateau_gbps("none",24,290.0));
    println!("[{:.0} s]", t0.elapsed().as_secs_f64());
}
