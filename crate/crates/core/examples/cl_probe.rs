use hamlab_core::classical::{self, ClassicalGrid};
use hamlab_core::io::presets::load_preset;

fn main() {
    let cfg = load_preset("huggett-2state").unwrap();
    let cl = cfg.classical.unwrap();
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2001);
    let grid = ClassicalGrid::new(
        cl.asset_min, cl.asset_max, n,
        cfg.model.employment.states.clone(),
        cfg.model.employment.p_matrices[0][0].clone(),
        cfg.model.wage.unwrap(),
        cfg.model.preferences,
    ).unwrap();
    for r in [0.036f64, 0.038, 0.0395, 0.041, 0.0415] {
        match classical::solve_at_rate(&grid, r, None) {
            Ok((sol, d)) => {
                // mass near floor and ceiling
                let na = grid.asset_grid.len();
                let floor_mass: f64 = sol.lambda[..na/50].iter().flatten().sum();
                let top_mass: f64 = sol.lambda[na - na/50..].iter().flatten().sum();
                // mean asset
                println!("r={r:.4}: demand={d:+.5} floor2%mass={floor_mass:.4} top2%mass={top_mass:.4}");
            }
            Err(e) => println!("r={r:.4}: {e}"),
        }
    }
}
