// probe the pure-credit solver on a preset, compare with the classical root
use hamlab_core::classical::{self, ClassicalGrid};
use hamlab_core::huggett::{solve_equilibrium, HuggettSpec, SolverOptions};
use hamlab_core::io::presets::load_preset;
use std::time::Instant;

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "huggett-2state".into());
    let grid_points: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(48);
    let cfg = load_preset(&name).unwrap();
    let spec = HuggettSpec::from_model(&cfg.model).unwrap();
    println!("A = {}", spec.face_value);
    let opts = SolverOptions { grid_points, ..Default::default() };
    let ansatz_slope: f64 = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(40.0);
    let ansatz_icept: f64 = std::env::args().nth(4).and_then(|s| s.parse().ok()).unwrap_or(-8.0);
    let t0 = Instant::now();
    match solve_equilibrium(&spec, spec.face_value, |_, c| ansatz_slope * c + ansatz_icept, &opts) {
        Ok(eq) => {
            let d = &eq.diagnostics;
            println!("solved in {:.1?}: converged={} outer={} (err {:.3e}) price_trials={}",
                t0.elapsed(), d.converged, d.outer_iterations, d.outer_error, d.price_trials);
            println!("B={:.6} r={:.6} c_bar={:.4}", eq.bond_price, eq.rate, eq.c_bar);
            println!("clearing={:.3e} kernel={:.3e} budget={:.3e} transport={:.3e}",
                d.clearing, d.kernel_residual, d.budget_residual, d.transport_residual);
            println!("borrowing_limit={:.5} investment_bound={:.5}", eq.borrowing_limit, eq.investment_bound);
            println!("damping={}", d.damping_events);

            // classical comparison on the same model
            if let Some(cl) = cfg.classical {
                let t1 = Instant::now();
                let grid = ClassicalGrid::new(
                    cl.asset_min, cl.asset_max, 2001,
                    cfg.model.employment.states.clone(),
                    cfg.model.employment.p_matrices[0][0].clone(),
                    cfg.model.wage.unwrap(),
                    cfg.model.preferences,
                ).unwrap();
                let r0 = eq.rate;
                match classical::equilibrium_bisection(&grid, [r0 - 0.008, r0 + 0.0015, r0], 40) {
                    Ok(trace) => {
                        let (r_last, d_last) = trace.last().unwrap();
                        println!("classical root after {} trials: r={:.6} demand={:.3e} ({:.1?})",
                            trace.len(), r_last, d_last, t1.elapsed());
                        println!("|r_classical - r_transport| = {:.3e}", (r_last - eq.rate).abs());
                    }
                    Err(e) => println!("classical bisection failed: {e}"),
                }
            }
        }
        Err(e) => println!("FAILED in {:.1?}: {e}", t0.elapsed()),
    }
}
