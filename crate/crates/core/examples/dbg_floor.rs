// measure the transport-iteration floor directly inside a realistic trial
use hamlab_core::fn1d::{Cdf, MonotoneFn1D};
use hamlab_core::huggett::{transport_apply, HuggettSpec};
use hamlab_core::io::presets::load_preset;

fn main() {
    let cfg = load_preset("huggett-2state").unwrap();
    let spec = HuggettSpec::from_model(&cfg.model).unwrap();
    for n in [48usize, 128, 256] {
        let cbar = 2.0;
        let grid: Vec<f64> = (1..=n).map(|i| cbar * i as f64 / n as f64).collect();
        // transitions resembling a persistent equilibrium (slopes near 1)
        let mk = |a: f64, s: f64| {
            let ys: Vec<f64> = grid.iter().map(|&c| a + s * c).collect();
            MonotoneFn1D::build(&grid, &ys).unwrap()
        };
        // wiggle the transitions slightly so they are not exactly affine
        let mk2 = |a: f64, s: f64, w: f64| {
            let ys: Vec<f64> = grid.iter().map(|&c| a + s * c + w * (c * 3.0).sin() * 0.01).collect();
            MonotoneFn1D::build(&grid, &ys).unwrap()
        };
        let t00 = mk2(0.08, 0.97, 1.0);
        let t01 = mk(0.02, 0.96);
        let t10 = mk2(0.12, 0.955, 0.8);
        let t11 = mk(0.01, 0.965);
        let tinv = vec![
            vec![t00.invert_with_grid(2*n).unwrap(), t01.invert_with_grid(2*n).unwrap()],
            vec![t10.invert_with_grid(2*n).unwrap(), t11.invert_with_grid(2*n).unwrap()],
        ];
        let vals: Vec<f64> = grid.iter().map(|&c| c / cbar).collect();
        let mut f: Vec<Cdf> = (0..2).map(|_| Cdf::new(&grid, &vals).unwrap()).collect();
        let mut floor = f64::INFINITY;
        let mut last = 0.0;
        for it in 0..30_000 {
            let next = transport_apply(&f, &tinv, &spec.pi, &spec.p, &grid).unwrap();
            let mut sup = 0.0f64;
            for (a, b) in f.iter().zip(next.iter()) {
                for (&pa, &pb) in a.knots_p().iter().zip(b.knots_p().iter()) {
                    sup = sup.max((pa - pb).abs());
                }
            }
            f = next;
            floor = floor.min(sup);
            last = sup;
            let _ = it;
        }
        println!("n={n}: floor {floor:.3e} last {last:.3e}");
    }
}
