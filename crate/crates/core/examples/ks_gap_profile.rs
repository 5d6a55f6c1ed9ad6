// profile of the within-destination capital-transport gap over K
use hamlab_core::io::presets::load_preset;
use hamlab_core::ksaffine::{bootstrap_solve, BackwardOptions, BootstrapOptions, KsModel};

fn main() {
    let cfg = load_preset("ks-benchmark").unwrap();
    let model = KsModel::from_model(&cfg.model).unwrap();
    let eq = bootstrap_solve(&model, &BackwardOptions::default(), &BootstrapOptions::default()).unwrap();
    println!("grid hull: {:?}", eq.layer.hull());
    let (klo0, khi0) = eq.layer.k_fn[0].range();
    let (klo1, khi1) = eq.layer.k_fn[1].range();
    println!("K ranges: high [{klo0:.4},{khi0:.4}] low [{klo1:.4},{khi1:.4}]");
    for factor in [1.0f64, 1.5, 2.0, 3.0] {
        let mid = 0.5 * (klo0.max(klo1) + khi0.min(khi1));
        let half = 0.5 * (khi0.min(khi1) - klo0.max(klo1)) * factor;
        let (lo, hi) = (mid - half, mid + half);
        let mut gap_h = 0.0f64; let mut gap_l = 0.0f64;
        let mut at_h = 0.0; let mut at_l = 0.0;
        for i in 0..=200 {
            let k = lo + (hi - lo) * i as f64 / 200.0;
            let (h00,_) = eq.capital_transport(0,0,k).unwrap();
            let (h10,_) = eq.capital_transport(1,0,k).unwrap();
            let (h01,_) = eq.capital_transport(0,1,k).unwrap();
            let (h11,_) = eq.capital_transport(1,1,k).unwrap();
            if (h00-h10).abs() > gap_h { gap_h = (h00-h10).abs(); at_h = k; }
            if (h01-h11).abs() > gap_l { gap_l = (h01-h11).abs(); at_l = k; }
        }
        println!("domain x{factor}: [{lo:.3},{hi:.3}] gap into-high {gap_h:.6} at K={at_h:.3} | into-low {gap_l:.6} at K={at_l:.3}");
    }
    // union-of-domains measurement (the figure window)
    {
        let lo = klo0.min(klo1); let hi = khi0.max(khi1);
        let mut gap_h = 0.0f64; let mut gap_l = 0.0f64; let mut dest = 0.0f64;
        for i in 0..=400 {
            let k = lo + (hi - lo) * i as f64 / 400.0;
            let (h00,_) = eq.capital_transport(0,0,k).unwrap();
            let (h10,_) = eq.capital_transport(1,0,k).unwrap();
            let (h01,_) = eq.capital_transport(0,1,k).unwrap();
            let (h11,_) = eq.capital_transport(1,1,k).unwrap();
            gap_h = gap_h.max((h00-h10).abs());
            gap_l = gap_l.max((h01-h11).abs());
            dest = dest.max((h00-h01).abs());
        }
        println!("union domain [{lo:.3},{hi:.3}]: into-high {gap_h:.6} into-low {gap_l:.6} dest {dest:.6}");
    }
    // profile on the common range
    let lo = klo0.max(klo1); let hi = khi0.min(khi1);
    println!("profile on common range:");
    for i in 0..=10 {
        let k = lo + (hi - lo) * i as f64 / 10.0;
        let (h00,_) = eq.capital_transport(0,0,k).unwrap();
        let (h10,_) = eq.capital_transport(1,0,k).unwrap();
        println!("  K={k:.3}: H_high={h00:.6} H_low={h10:.6} diff={:.2e}", h00-h10);
    }
}
