// calibration probe for the 7-state reconstruction: prints every anchor
use hamlab_core::fn1d::stieltjes_quantile;
use hamlab_core::huggett::{solve_equilibrium, wealth_distributions, HuggettSpec, SolverOptions};
use hamlab_core::io::presets::tauchen_chain;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let rho: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.6);
    let sigma_y: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.3);
    let r_aversion: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1.5);
    let beta: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.96);
    let n_grid: usize = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(24);
    let w_smin: f64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(0.0602435);

    let sigma_u = sigma_y * (1.0 - rho * rho).sqrt();
    let (states, p) = tauchen_chain(7, rho, sigma_u, 3.0);
    let wage = w_smin / states[0];
    println!("rho={rho} sigma_y={sigma_y} R={r_aversion} beta={beta} wage={wage:.6}");
    println!("incomes: {:?}", states.iter().map(|s| s * wage).collect::<Vec<_>>());
    let spec = HuggettSpec::new(states, p, wage, beta, r_aversion).unwrap();
    println!("A = {:.6}", spec.face_value);
    let opts = SolverOptions { grid_points: n_grid, ..Default::default() };
    let t0 = Instant::now();
    match solve_equilibrium(&spec, spec.face_value, |_, c| 40.0 * c - 8.0, &opts) {
        Ok(eq) => {
            println!("solved in {:.0?}: outer={} converged={}", t0.elapsed(), eq.diagnostics.outer_iterations, eq.diagnostics.converged);
            println!("r = {:.6}  (target 0.03702)", eq.rate);
            println!("natural limit = {:.5}  (target -1.62726)", -w_smin / eq.rate);
            println!("borrowing_limit = {:.5}  (target -1.62826)", eq.borrowing_limit);
            println!("investment_bound = {:.5}  (target 17.93751)", eq.investment_bound);
            println!("c_bar = {:.5}", eq.c_bar);
            // per-state consumption and entering-wealth standard deviations
            let (entering, _) = wealth_distributions(&eq).unwrap();
            let mut c_stds = Vec::new();
            let mut w_stds = Vec::new();
            for u in 0..spec.n_states() {
                let mean_c = stieltjes_quantile(&eq.dist[u], |c| c, 256);
                let var_c = stieltjes_quantile(&eq.dist[u], |c| (c - mean_c) * (c - mean_c), 256);
                c_stds.push(var_c.sqrt());
                let mean_w = stieltjes_quantile(&entering[u], |w| w, 256);
                let var_w = stieltjes_quantile(&entering[u], |w| (w - mean_w) * (w - mean_w), 256);
                w_stds.push(var_w.sqrt());
            }
            let fmt = |v: &Vec<f64>| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(",");
            println!("sigma_c by state = [{}]  (target range 0.038..0.046)", fmt(&c_stds));
            println!("sigma_w by state = [{}]  (target range 0.971..0.979)", fmt(&w_stds));
        }
        Err(e) => println!("FAILED after {:.0?}: {e}", t0.elapsed()),
    }
}
