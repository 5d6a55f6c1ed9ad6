//! Long-run simulation in the random environment of productivity
//! transitions.  Nothing here simulates individual households: the affine
//! layer transports the population means directly, so a path is just the
//! productivity chain plus consecutive applications of the transport maps.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::ksaffine::AffineEquilibrium;

/// Simulated path state: productivity indices, total means, and
/// employment-specific mean vectors.
#[derive(Debug, Clone)]
pub struct SimPath {
    pub seed: u64,
    pub x_path: Vec<u32>,
    pub a_star_path: Vec<f64>,
    pub group_path: Vec<Vec<f64>>,
    pub burn_in: usize,
}

impl SimPath {
    pub fn len(&self) -> usize {
        self.x_path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_path.is_empty()
    }
}

/// Markov path of the productivity index, deterministic given the seed
/// (ChaCha8 keystream; the crate version is pinned so seeds reproduce).
pub fn simulate_chain(q: &[Vec<f64>], n_periods: usize, seed: u64, start: usize) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut path = Vec::with_capacity(n_periods);
    let mut state = start;
    path.push(state as u32);
    for _ in 1..n_periods {
        let draw: f64 = rng.gen();
        let row = &q[state];
        let mut acc = 0.0;
        let mut next = row.len() - 1;
        for (j, &p) in row.iter().enumerate() {
            acc += p;
            if draw < acc {
                next = j;
                break;
            }
        }
        state = next;
        path.push(state as u32);
    }
    path
}

/// Total-mean path `A*_{t+1} = Θ^{x_{t+1}}_{x_t}(A*_t)`, evaluated through
/// the layer coefficients.  Returns the path and the count of periods in
/// which the mean left the interpolation hull.
pub fn simulate_total_mean(
    x_path: &[u32],
    eq: &AffineEquilibrium,
    a0: f64,
) -> Result<(Vec<f64>, usize)> {
    let (lo, hi) = eq.layer.hull();
    let mut warnings = 0usize;
    let mut path = Vec::with_capacity(x_path.len());
    let mut a = a0;
    if a < lo || a > hi {
        warnings += 1;
    }
    path.push(a);
    for w in x_path.windows(2) {
        a = eq
            .layer
            .theta_mean(&eq.model, w[0] as usize, w[1] as usize, a)?;
        if a < lo || a > hi {
            warnings += 1;
        }
        path.push(a);
    }
    Ok((path, warnings))
}

/// Employment-specific mean paths via the group transport, with the
/// recombined total emitted alongside for cross-checking.
pub fn simulate_group_means(
    x_path: &[u32],
    eq: &AffineEquilibrium,
    a0_vec: &[f64],
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let model = &eq.model;
    let mut group = Vec::with_capacity(x_path.len());
    let mut total = Vec::with_capacity(x_path.len());
    let mut a_vec = a0_vec.to_vec();
    let recombine = |x: usize, v: &[f64]| -> f64 {
        model.pi_x[x]
            .iter()
            .zip(v.iter())
            .map(|(p, a)| p * a)
            .sum()
    };
    group.push(a_vec.clone());
    total.push(recombine(x_path[0] as usize, &a_vec));
    for w in x_path.windows(2) {
        a_vec = eq
            .layer
            .group_transport(model, w[0] as usize, w[1] as usize, &a_vec)?;
        group.push(a_vec.clone());
        total.push(recombine(w[1] as usize, &a_vec));
    }
    Ok((group, total))
}

/// Full path build: chain, group means, and recombined totals.
pub fn simulate(
    eq: &AffineEquilibrium,
    n_periods: usize,
    seed: u64,
    a0_vec: &[f64],
    start_state: usize,
    burn_in: usize,
) -> Result<SimPath> {
    if n_periods == 0 {
        return Err(Error::validation("simulation needs at least one period"));
    }
    let x_path = simulate_chain(&eq.model.q, n_periods, seed, start_state);
    let (group_path, a_star_path) = simulate_group_means(&x_path, eq, a0_vec)?;
    Ok(SimPath {
        seed,
        x_path,
        a_star_path,
        group_path,
        burn_in: burn_in.min(n_periods),
    })
}

/// Pooled log-linear least-squares fit of next-period capital on current
/// capital, one line per destination productivity state (departure state
/// pooled), compared against the exact from-state transports.
#[derive(Debug, Clone)]
pub struct LogLinearFit {
    /// Intercepts `κ₀(y)` of the pooled two-line fit.
    pub kappa0: Vec<f64>,
    /// Slopes `κ₁(y)`.
    pub kappa1: Vec<f64>,
    /// Sup deviation of the fitted line from the exact transport out of each
    /// departure state: `deviation[x][y]` over the simulated capital range.
    pub deviation: Vec<Vec<f64>>,
    /// Same deviation measured over the full grid-induced capital domain
    /// (the plotted window, which extends beyond the simulated range).
    pub deviation_plot: Vec<Vec<f64>>,
    /// Pooled (two-line) total squared residual.
    pub pooled_sse: f64,
    /// Per-(x,y) (four-line) total squared residual.
    pub split_sse: f64,
}

/// Capital path implied by a simulated mean path: `K_t = K(x_t, A*_t)`.
pub fn capital_path(sim: &SimPath, eq: &AffineEquilibrium) -> Vec<f64> {
    sim.x_path
        .iter()
        .zip(sim.a_star_path.iter())
        .map(|(&x, &a)| eq.layer.k_fn[x as usize].eval(a))
        .collect()
}

pub fn loglinear_fit_compare(
    k_path: &[f64],
    x_path: &[u32],
    eq: &AffineEquilibrium,
    burn_in: usize,
) -> Result<LogLinearFit> {
    let nx = eq.model.n_x();
    if k_path.len() != x_path.len() || k_path.len() < burn_in + 100 {
        return Err(Error::validation(
            "need matching paths comfortably longer than the burn-in",
        ));
    }
    // gather (log K_t, log K_{t+1}) by destination and by (departure, destination)
    let mut pooled: Vec<Vec<(f64, f64)>> = vec![Vec::new(); nx];
    let mut split: Vec<Vec<Vec<(f64, f64)>>> = vec![vec![Vec::new(); nx]; nx];
    for t in burn_in..k_path.len() - 1 {
        let x = x_path[t] as usize;
        let y = x_path[t + 1] as usize;
        let pair = (k_path[t].ln(), k_path[t + 1].ln());
        pooled[y].push(pair);
        split[x][y].push(pair);
    }
    let fit = |pts: &[(f64, f64)]| -> Result<(f64, f64, f64)> {
        let n = pts.len() as f64;
        if pts.len() < 2 {
            return Err(Error::validation("not enough observations for a fit"));
        }
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let var = sxx - sx * sx / n;
        if var <= 1e-15 {
            return Err(Error::validation(
                "degenerate regressor variance in the log-linear fit",
            ));
        }
        let slope = (sxy - sx * sy / n) / var;
        let intercept = (sy - slope * sx) / n;
        let sse: f64 = pts
            .iter()
            .map(|p| {
                let e = p.1 - intercept - slope * p.0;
                e * e
            })
            .sum();
        Ok((intercept, slope, sse))
    };

    let mut kappa0 = Vec::with_capacity(nx);
    let mut kappa1 = Vec::with_capacity(nx);
    let mut pooled_sse = 0.0;
    for pts in &pooled {
        let (b0, b1, sse) = fit(pts)?;
        kappa0.push(b0);
        kappa1.push(b1);
        pooled_sse += sse;
    }
    let mut split_sse = 0.0;
    for row in &split {
        for pts in row {
            let (_, _, sse) = fit(pts)?;
            split_sse += sse;
        }
    }

    // sup deviation of each pooled fit from the exact departure-specific
    // transports over the simulated capital range
    let k_lo = k_path[burn_in..].iter().cloned().fold(f64::INFINITY, f64::min);
    let k_hi = k_path[burn_in..]
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let n_probe = 512;
    let sup_dev = |lo: f64, hi: f64, x: usize, y: usize| -> Result<f64> {
        let mut worst = 0.0f64;
        for i in 0..n_probe {
            let k = lo + (hi - lo) * i as f64 / (n_probe - 1) as f64;
            let fitted = (kappa0[y] + kappa1[y] * k.ln()).exp();
            let (exact, _) = eq.capital_transport(x, y, k)?;
            worst = worst.max((fitted - exact).abs());
        }
        Ok(worst)
    };
    let mut deviation = vec![vec![0.0f64; nx]; nx];
    let mut deviation_plot = vec![vec![0.0f64; nx]; nx];
    for x in 0..nx {
        let (plot_lo, plot_hi) = eq.layer.k_fn[x].range();
        for y in 0..nx {
            deviation[x][y] = sup_dev(k_lo, k_hi, x, y)?;
            deviation_plot[x][y] = sup_dev(plot_lo, plot_hi, x, y)?;
        }
    }

    Ok(LogLinearFit {
        kappa0,
        kappa1,
        deviation,
        deviation_plot,
        pooled_sse,
        split_sse,
    })
}

/// Sup deviation of a given log-linear law of motion `log K' = κ₀ + κ₁ log K`
/// from the exact capital transport out of state `x` into state `y`,
/// measured over the plotted capital domain of the departure state.
pub fn reference_line_deviation(
    eq: &AffineEquilibrium,
    x: usize,
    y: usize,
    kappa0: f64,
    kappa1: f64,
) -> Result<f64> {
    let (lo, hi) = eq.layer.k_fn[x].range();
    let mut worst = 0.0f64;
    for i in 0..512 {
        let k = lo + (hi - lo) * i as f64 / 511.0;
        let fitted = (kappa0 + kappa1 * k.ln()).exp();
        let (exact, _) = eq.capital_transport(x, y, k)?;
        worst = worst.max((fitted - exact).abs());
    }
    Ok(worst)
}

/// Max kernel aberration `|R − 1|` over the simulated sample, evaluated at
/// the employment-group means and at the investment thresholds.
pub fn aberration_scan(sim: &SimPath, eq: &AffineEquilibrium) -> Result<(f64, f64)> {
    let ne = eq.model.n_e();
    let idx: Vec<usize> = (sim.burn_in..sim.len()).collect();
    let worst = idx
        .par_chunks(8192)
        .map(|chunk| {
            let mut at_means = 0.0f64;
            let mut at_thresholds = 0.0f64;
            for &t in chunk {
                let x = sim.x_path[t] as usize;
                let a_star = sim.a_star_path[t];
                for u in 0..ne {
                    let c_mean = sim.group_path[t][u];
                    if c_mean > 0.0 {
                        let r = eq.kernel_aberration(x, u, a_star, c_mean)?;
                        at_means = at_means.max((r - 1.0).abs());
                    }
                    let c_bar = eq.investment_threshold(x, u, a_star);
                    if c_bar > 0.0 {
                        let r = eq.kernel_aberration(x, u, a_star, c_bar)?;
                        at_thresholds = at_thresholds.max((r - 1.0).abs());
                    }
                }
            }
            Ok::<(f64, f64), Error>((at_means, at_thresholds))
        })
        .try_reduce(
            || (0.0f64, 0.0f64),
            |a, b| Ok((a.0.max(b.0), a.1.max(b.1))),
        )?;
    Ok(worst)
}

/// Per-productivity-state dispersion evidence over a trailing window.
#[derive(Debug, Clone)]
pub struct DispersionReport {
    /// Distinct visited total means at the stated resolution, per state.
    pub distinct: Vec<usize>,
    pub std_dev: Vec<f64>,
    pub range: Vec<(f64, f64)>,
    pub resolution: f64,
    pub window: usize,
}

pub fn dispersion_report(sim: &SimPath, window: usize, resolution: f64) -> DispersionReport {
    let nx = 1 + sim.x_path.iter().copied().max().unwrap_or(0) as usize;
    let start = sim.len().saturating_sub(window);
    let mut by_state: Vec<Vec<f64>> = vec![Vec::new(); nx];
    for t in start..sim.len() {
        by_state[sim.x_path[t] as usize].push(sim.a_star_path[t]);
    }
    let mut distinct = Vec::with_capacity(nx);
    let mut std_dev = Vec::with_capacity(nx);
    let mut range = Vec::with_capacity(nx);
    for vals in &by_state {
        let mut keys: HashSet<i64> = HashSet::new();
        for &v in vals {
            keys.insert((v / resolution).round() as i64);
        }
        distinct.push(keys.len());
        if vals.is_empty() {
            std_dev.push(0.0);
            range.push((f64::NAN, f64::NAN));
        } else {
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / vals.len() as f64;
            std_dev.push(var.sqrt());
            range.push((
                vals.iter().cloned().fold(f64::INFINITY, f64::min),
                vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            ));
        }
    }
    DispersionReport {
        distinct,
        std_dev,
        range,
        resolution,
        window,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_chain_constant_path() {
        let q = vec![vec![1.0 - 1e-15, 1e-15], vec![1e-15, 1.0 - 1e-15]];
        let path = simulate_chain(&q, 10_000, 7, 1);
        assert!(path.iter().all(|&x| x == 1));
    }

    #[test]
    fn chain_is_deterministic_given_seed() {
        let q = vec![vec![0.875, 0.125], vec![0.125, 0.875]];
        let a = simulate_chain(&q, 50_000, 42, 0);
        let b = simulate_chain(&q, 50_000, 42, 0);
        assert_eq!(a, b);
        let c = simulate_chain(&q, 50_000, 43, 0);
        assert_ne!(a, c);
    }

    #[test]
    fn symmetric_chain_long_run_frequency_half() {
        let q = vec![vec![0.875, 0.125], vec![0.125, 0.875]];
        let n = 1_000_000usize;
        let path = simulate_chain(&q, n, 2024, 0);
        let high = path.iter().filter(|&&x| x == 0).count() as f64 / n as f64;
        // 3-sigma bound for a mixing binary chain: the asymptotic variance of
        // the mean frequency is (1/n) * (1-q)/(4q^2) with q = 0.125 the flip
        // probability; sigma ~ sqrt(14)/ (2*0.125*...)  — use a generous bound
        let sigma = ((1.0 - 0.125) / (4.0 * 0.125 * 0.125) / n as f64).sqrt();
        assert!(
            (high - 0.5).abs() < 3.0 * sigma + 1e-3,
            "frequency {high}, sigma {sigma}"
        );
    }

    #[test]
    fn empirical_transitions_match_q_at_3_sigma() {
        let q = vec![vec![0.875, 0.125], vec![0.125, 0.875]];
        let n = 1_000_000usize;
        let path = simulate_chain(&q, n, 99, 0);
        let mut counts = [[0usize; 2]; 2];
        for w in path.windows(2) {
            counts[w[0] as usize][w[1] as usize] += 1;
        }
        for i in 0..2 {
            let row_total: usize = counts[i].iter().sum();
            for j in 0..2 {
                let p_hat = counts[i][j] as f64 / row_total as f64;
                let p = q[i][j];
                let sigma = (p * (1.0 - p) / row_total as f64).sqrt();
                assert!(
                    (p_hat - p).abs() < 3.0 * sigma + 1e-6,
                    "entry ({i},{j}): {p_hat} vs {p}"
                );
            }
        }
    }
}
