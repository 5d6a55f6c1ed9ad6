// scratch probe: KS benchmark solve on a fixed grid, print convergence + figure distances
use hamlab_core::io::presets::load_preset;
use hamlab_core::ksaffine::{backward_solve, bootstrap_solve, BackwardOptions, BootstrapOptions, KsModel};
use std::time::Instant;

fn main() {
    let cfg = load_preset("ks-benchmark").unwrap();
    let model = KsModel::from_model(&cfg.model).unwrap();
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(48);
    let lo: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let hi: f64 = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(1.4);
    let steps: usize = std::env::args().nth(4).and_then(|s| s.parse().ok()).unwrap_or(1500);
    let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let opts = BackwardOptions { max_steps: steps, ..Default::default() };
    let boot = std::env::args().nth(5).map(|s| s == "boot").unwrap_or(false);
    let t0 = Instant::now();
    let result = if boot {
        bootstrap_solve(&model, &opts, &BootstrapOptions { grid_points: n, ..Default::default() })
    } else {
        backward_solve(&model, &grid, &opts)
    };
    match result {
        Ok(eq) => {
            let r = &eq.report;
            println!("converged={} steps={} in {:.1?}", r.converged, r.steps, t0.elapsed());
            println!("dist_a={:.6e} dist_g={:.6e} dist_k={:.6e} dist_theta={:.6e}", r.dist_a, r.dist_g, r.dist_k, r.dist_theta);
            println!("extrapolation_events={}", r.extrapolation_events);
            // figure distances
            let mut k_gap = 0.0f64;
            let mut th_into_high = 0.0f64;  // from-high vs from-low into high
            let mut th_into_low = 0.0f64;
            let mut th_from_high = 0.0f64;  // between the two from-high maps
            for &s in &eq.grid {
                k_gap = k_gap.max((eq.layer.k_fn[0].eval(s) - eq.layer.k_fn[1].eval(s)).abs());
                let t00 = eq.layer.theta_mean(&model, 0, 0, s).unwrap();
                let t10 = eq.layer.theta_mean(&model, 1, 0, s).unwrap();
                let t01 = eq.layer.theta_mean(&model, 0, 1, s).unwrap();
                let t11 = eq.layer.theta_mean(&model, 1, 1, s).unwrap();
                th_into_high = th_into_high.max((t00 - t10).abs());
                th_into_low = th_into_low.max((t01 - t11).abs());
                th_from_high = th_from_high.max((t00 - t01).abs());
            }
            println!("K gap (fig11 ~0.08574): {k_gap:.6}");
            println!("theta into high (fig12 ~0.00354): {th_into_high:.6}");
            println!("theta into low  (fig12 ~0.00353): {th_into_low:.6}");
            println!("theta from-high pair (fig12 ~0.00663): {th_from_high:.6}");
            // capital transports (fig13)
            let (klo, khi) = eq.layer.k_fn[0].range();
            println!("K range on grid: [{klo:.4}, {khi:.4}]");
            let mut cap_into_high = 0.0f64;
            let mut cap_into_low = 0.0f64;
            let mut cap_dest_gap = 0.0f64;
            for i in 0..=100 {
                let k = klo + (khi - klo) * i as f64 / 100.0;
                let (h00, _) = eq.capital_transport(0, 0, k).unwrap();
                let (h10, _) = eq.capital_transport(1, 0, k).unwrap();
                let (h01, _) = eq.capital_transport(0, 1, k).unwrap();
                let (h11, _) = eq.capital_transport(1, 1, k).unwrap();
                cap_into_high = cap_into_high.max((h00 - h10).abs());
                cap_into_low = cap_into_low.max((h01 - h11).abs());
                cap_dest_gap = cap_dest_gap.max((h00 - h01).abs());
            }
            println!("cap into high (fig13 ~0.00076): {cap_into_high:.6}");
            println!("cap into low  (fig13 ~0.00083): {cap_into_low:.6}");
            println!("cap dest gap  (fig13 ~0.06952): {cap_dest_gap:.6}");
        }
        Err(e) => println!("FAILED: {e}"),
    }
}
