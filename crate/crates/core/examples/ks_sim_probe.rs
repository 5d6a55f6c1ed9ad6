// probe simulation-side benchmarks: aberration, log-linear fit, dispersion
use hamlab_core::io::presets::load_preset;
use hamlab_core::ksaffine::{bootstrap_solve, BackwardOptions, BootstrapOptions, KsModel};
use hamlab_core::simlab;
use std::time::Instant;

fn main() {
    let cfg = load_preset("ks-benchmark").unwrap();
    let model = KsModel::from_model(&cfg.model).unwrap();
    let t0 = Instant::now();
    let eq = bootstrap_solve(&model, &BackwardOptions::default(), &BootstrapOptions::default()).unwrap();
    println!("solve: {:.1?}", t0.elapsed());

    let t0 = Instant::now();
    let sim = simlab::simulate(&eq, 1_100_000, 7, &[0.8, 0.7], 0, 100_000).unwrap();
    println!("simulate 1.1e6: {:.1?}", t0.elapsed());

    let t0 = Instant::now();
    let (ab_means, ab_thresh) = simlab::aberration_scan(&sim, &eq).unwrap();
    println!("aberration at means {ab_means:.3e}, at thresholds {ab_thresh:.3e} ({:.1?})", t0.elapsed());

    let k_path = simlab::capital_path(&sim, &eq);
    let fit = simlab::loglinear_fit_compare(&k_path, &sim.x_path, &eq, sim.burn_in).unwrap();
    println!("fit kappa0 {:?} kappa1 {:?}", fit.kappa0, fit.kappa1);
    println!("deviation sim-range from-high: into-high {:.4} into-low {:.4}", fit.deviation[0][0], fit.deviation[0][1]);
    println!("deviation plot-domain from-high into-high (\u{2248}0.051): {:.4}", fit.deviation_plot[0][0]);
    println!("deviation plot-domain from-high into-low  (\u{2248}0.032): {:.4}", fit.deviation_plot[0][1]);
    println!("pooled sse {:.6e} split sse {:.6e}", fit.pooled_sse, fit.split_sse);
    // published benchmark law of motion (Krusell-Smith 1998, III):
    // good state: log k' = 0.095 + 0.962 log k ; bad: log k' = 0.085 + 0.965 log k
    let dev_good = simlab::reference_line_deviation(&eq, 0, 0, 0.095, 0.962).unwrap();
    let dev_bad = simlab::reference_line_deviation(&eq, 0, 1, 0.085, 0.965).unwrap();
    println!("published-line deviation into-high (\u{2248}0.051): {dev_good:.4}");
    println!("published-line deviation into-low  (\u{2248}0.032): {dev_bad:.4}");

    let disp = simlab::dispersion_report(&sim, 10_000, 1e-6);
    println!("dispersion distinct {:?} std {:?}", disp.distinct, disp.std_dev);
    println!("ranges {:?}", disp.range);

    // initial-value independence
    let (p1, _) = simlab::simulate_total_mean(&sim.x_path[..200_000], &eq, 0.6).unwrap();
    let (p2, _) = simlab::simulate_total_mean(&sim.x_path[..200_000], &eq, 1.0).unwrap();
    let max_diff = p1.iter().zip(p2.iter()).skip(10_000).map(|(a,b)| (a-b).abs()).fold(0.0, f64::max);
    println!("initial-value independence after burn-in 1e4: {max_diff:.3e}");

    // group vs total recombination along a path
    let (_, total_recombined) = simlab::simulate_group_means(&sim.x_path[..100_000], &eq, &[0.8, 0.7]).unwrap();
    let a0 = eq.model.pi_x[0][0] * 0.8 + eq.model.pi_x[0][1] * 0.7;
    let (total, _) = simlab::simulate_total_mean(&sim.x_path[..100_000], &eq, a0).unwrap();
    let max_rec = total.iter().zip(total_recombined.iter()).map(|(a,b)| (a-b).abs()).fold(0.0, f64::max);
    println!("recombination identity along path: {max_rec:.3e}");
}
