//! Time-invariant equilibrium for the pure-credit economy.
//!
//! The solver alternates three nested loops: an innermost fixed point of the
//! distribution transport (one CDF per employment state, carried over the
//! range of consumption), an inner price loop that adjusts the bond price
//! until the market clears, and an outer loop that feeds the accepted
//! portfolio mappings back in as the next period's policies until successive
//! copies agree in uniform distance.  Everything is carried by monotone
//! splines over an endogenous consumption grid `]0, c̄]`; both the upper
//! bound on consumption and the borrowing limit come out of the iterations
//! rather than being imposed.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fn1d::{stieltjes_quantile, Cdf, MonotoneFn1D};
use crate::model::{stationary_distribution_rows, ModelSpec};

/// Pure-credit economy parameterization.
#[derive(Debug, Clone)]
pub struct HuggettSpec {
    /// Employment states (labor units).
    pub states: Vec<f64>,
    /// Employment transition matrix.
    pub p: Vec<Vec<f64>>,
    /// Stationary distribution of `p`.
    pub pi: Vec<f64>,
    /// Fixed wage per labor unit.
    pub wage: f64,
    pub beta: f64,
    pub risk_aversion: f64,
    /// Bond face value: the average cross-sectional income `ε Σ_u u π(u)`.
    pub face_value: f64,
}

impl HuggettSpec {
    pub fn new(
        states: Vec<f64>,
        p: Vec<Vec<f64>>,
        wage: f64,
        beta: f64,
        risk_aversion: f64,
    ) -> Result<Self> {
        if wage <= 0.0 {
            return Err(Error::validation("wage must be positive"));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::validation("beta must be in (0,1)"));
        }
        if risk_aversion < 1.0 {
            return Err(Error::validation("risk aversion must be >= 1"));
        }
        let pi = stationary_distribution_rows(&p)?;
        let face_value = wage
            * states
                .iter()
                .zip(pi.iter())
                .map(|(u, q)| u * q)
                .sum::<f64>();
        if face_value <= 0.0 {
            return Err(Error::validation(
                "average income (bond face value) must be positive",
            ));
        }
        Ok(HuggettSpec {
            states,
            p,
            pi,
            wage,
            beta,
            risk_aversion,
            face_value,
        })
    }

    pub fn from_model(model: &ModelSpec) -> Result<Self> {
        model.validate()?;
        let wage = model
            .wage
            .ok_or_else(|| Error::validation("model has no fixed wage (not a pure-credit economy)"))?;
        if model.employment.p_matrices.len() != 1 {
            return Err(Error::validation(
                "pure-credit solver expects a single employment chain",
            ));
        }
        HuggettSpec::new(
            model.employment.states.clone(),
            model.employment.p_matrices[0][0].clone(),
            wage,
            model.preferences.beta,
            model.preferences.risk_aversion,
        )
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    /// Income of employment state `v`.
    pub fn income(&self, v: usize) -> f64 {
        self.wage * self.states[v]
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Points of the uniform consumption grid on `]0, c̄]`.
    pub grid_points: usize,
    /// Log-spaced probe points used before `c̄` is known.
    pub probe_points: usize,
    /// Quantile-space quadrature points for the clearing integral.
    pub quad_points: usize,
    /// Market-clearing tolerance, relative to the face value.
    pub clearing_tol_rel: f64,
    /// Distribution-transport fixed-point tolerance and cap.
    pub dist_tol: f64,
    pub dist_cap: usize,
    /// Outer policy-loop tolerance and cap.
    pub outer_tol: f64,
    pub outer_cap: usize,
    /// Price trials allowed per outer iteration.
    pub price_cap: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            grid_points: 128,
            probe_points: 33,
            quad_points: 64,
            clearing_tol_rel: 1e-5,
            // tighter than the headline 1e-8 so the clearing integral is
            // evaluation-deterministic: quantile-space quadrature amplifies
            // CDF error by the reciprocal density in the tails
            dist_tol: 1e-10,
            dist_cap: 10_000,
            outer_tol: 1e-4,
            outer_cap: 500,
            price_cap: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HuggettDiagnostics {
    pub converged: bool,
    pub outer_iterations: usize,
    /// Final sup-distance between successive portfolio/transition mappings.
    pub outer_error: f64,
    pub clearing: f64,
    /// Max relative kernel residual over the grid.
    pub kernel_residual: f64,
    /// Max budget-identity residual over the grid (with the policy pair the
    /// transitions were built from).
    pub budget_residual: f64,
    /// Final sup-change of the transport fixed point.
    pub transport_residual: f64,
    pub damping_events: usize,
    pub price_trials: usize,
}

/// Converged time-invariant equilibrium with its verification residuals.
#[derive(Debug, Clone)]
pub struct HuggettEquilibrium {
    pub spec: HuggettSpec,
    pub bond_price: f64,
    pub rate: f64,
    pub c_bar: f64,
    pub c_grid: Vec<f64>,
    /// Bond holdings as a function of consumption, one per employment state.
    pub theta: Vec<MonotoneFn1D>,
    /// `transitions[u][v]` maps present consumption to future consumption.
    pub transitions: Vec<Vec<MonotoneFn1D>>,
    pub transitions_inv: Vec<Vec<MonotoneFn1D>>,
    /// Stationary consumption distribution per employment state.
    pub dist: Vec<Cdf>,
    /// `min_u lim_{c→0} θ_u(c)·B`.
    pub borrowing_limit: f64,
    /// `max_u θ_u(c̄)·B`.
    pub investment_bound: f64,
    pub diagnostics: HuggettDiagnostics,
}

/// Consumption implied by a bond holding through the explicit inversion of
/// the kernel condition:
/// `c = [B / (βA Σ_v Ĥ_v(θA + εv)^{−R} P(u,v))]^{1/R}`.
pub fn consumption_from_theta(
    theta: f64,
    u: usize,
    bond_price: f64,
    inv_h: &[MonotoneFn1D],
    spec: &HuggettSpec,
) -> Result<f64> {
    let a = spec.face_value;
    let mut sum = 0.0;
    for (v, h) in inv_h.iter().enumerate() {
        let arg = theta * a + spec.income(v);
        let t = h.eval(arg);
        if t <= 0.0 {
            return Err(Error::Infeasible(format!(
                "future resources infeasible at employment {v}: inverse budget map gives {t}"
            )));
        }
        sum += t.powf(-spec.risk_aversion) * spec.p[u][v];
    }
    Ok((bond_price / (spec.beta * a * sum)).powf(1.0 / spec.risk_aversion))
}

fn consumption_or_zero(
    theta: f64,
    u: usize,
    bond_price: f64,
    inv_h: &[MonotoneFn1D],
    spec: &HuggettSpec,
) -> f64 {
    consumption_from_theta(theta, u, bond_price, inv_h, spec).unwrap_or(0.0)
}

/// Smallest bond holding for which all future budgets stay feasible.
fn feasibility_floor(u: usize, inv_h: &[MonotoneFn1D], spec: &HuggettSpec) -> f64 {
    let _ = u;
    let a = spec.face_value;
    inv_h
        .iter()
        .enumerate()
        .map(|(v, h)| (h.solve_for(0.0) - spec.income(v)) / a)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Solve the kernel condition for the bond holding at a prescribed
/// consumption level (montone 1D root find on a hunted bracket).
fn solve_theta_at(
    c: f64,
    u: usize,
    bond_price: f64,
    inv_h: &[MonotoneFn1D],
    spec: &HuggettSpec,
) -> Result<f64> {
    let floor = feasibility_floor(u, inv_h, spec);
    let scale = (spec.face_value / bond_price).max(1.0);
    let mut lo = floor + 1e-12 * (1.0 + floor.abs());
    let mut f_lo = consumption_or_zero(lo, u, bond_price, inv_h, spec) - c;
    // nudge off the boundary until the map is evaluable
    let mut bump = 1e-10 * (1.0 + floor.abs());
    while f_lo.is_nan() && bump < 1.0 {
        lo = floor + bump;
        f_lo = consumption_or_zero(lo, u, bond_price, inv_h, spec) - c;
        bump *= 10.0;
    }
    if f_lo >= 0.0 {
        // the requested consumption sits below the feasible range; the root
        // is pinned to the boundary
        return Ok(lo);
    }
    let mut hi = lo + 1.0;
    let mut f_hi = consumption_or_zero(hi, u, bond_price, inv_h, spec) - c;
    let mut span = 1.0;
    let mut tries = 0;
    while f_hi < 0.0 {
        span *= 2.0;
        hi += span * scale;
        f_hi = consumption_or_zero(hi, u, bond_price, inv_h, spec) - c;
        tries += 1;
        if tries > 200 {
            return Err(Error::Bracket(format!(
                "could not bracket the portfolio solving c={c} in state {u}"
            )));
        }
    }
    // bisection: the map is strictly increasing in theta
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = consumption_or_zero(mid, u, bond_price, inv_h, spec) - c;
        if f_mid < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Budget maps `H_v(t) = t + θ_v(t)·B` and their inverses for the current
/// policy iterate.  Non-monotone data signals a bad iterate.
fn build_budget_maps(
    theta: &[MonotoneFn1D],
    bond_price: f64,
) -> Result<(Vec<MonotoneFn1D>, Vec<MonotoneFn1D>)> {
    let mut hs = Vec::with_capacity(theta.len());
    let mut inv = Vec::with_capacity(theta.len());
    for th in theta {
        let xs = th.knots_x();
        let ys: Vec<f64> = xs
            .iter()
            .zip(th.knots_y())
            .map(|(c, t)| c + t * bond_price)
            .collect();
        let h = MonotoneFn1D::build(xs, &ys).map_err(|e| {
            Error::Construction(format!("budget map not increasing (bad policy iterate): {e}"))
        })?;
        let hinv = h.invert_with_grid(2 * xs.len())?;
        hs.push(h);
        inv.push(hinv);
    }
    Ok((hs, inv))
}

/// State transitions `𝒯^v(u,·)` and inverses from a solved portfolio family:
/// `𝒯^v(u,c) = Ĥ_v(θ_u(c)·A + εv)`.
pub fn build_transitions(
    theta_new: &[MonotoneFn1D],
    inv_h: &[MonotoneFn1D],
    spec: &HuggettSpec,
    c_grid: &[f64],
) -> Result<(Vec<Vec<MonotoneFn1D>>, Vec<Vec<MonotoneFn1D>>)> {
    let ne = spec.n_states();
    let a = spec.face_value;
    let mut trans = Vec::with_capacity(ne);
    let mut trans_inv = Vec::with_capacity(ne);
    for th in theta_new.iter().take(ne) {
        let mut row = Vec::with_capacity(ne);
        let mut row_inv = Vec::with_capacity(ne);
        for (v, hinv) in inv_h.iter().enumerate() {
            let ys: Vec<f64> = c_grid
                .iter()
                .map(|&c| hinv.eval(th.eval(c) * a + spec.income(v)))
                .collect();
            let t = MonotoneFn1D::build(c_grid, &ys)?;
            let tinv = t.invert_with_grid(c_grid.len())?;
            row.push(t);
            row_inv.push(tinv);
        }
        trans.push(row);
        trans_inv.push(row_inv);
    }
    Ok((trans, trans_inv))
}

/// Outcome of the endogenous consumption-bound search.
#[derive(Debug, Clone, Copy)]
enum CbarOutcome {
    /// The diagonal crossing: smallest `c` with `c ≥ maxT(c)`.
    Crossing(f64),
    /// Consumption contracts already at the bottom of the search range —
    /// the bound collapses toward 0 (price too high).
    Collapsed,
    /// No crossing below the ceiling — consumption grows without bound
    /// (price too low).
    Unbounded,
}

fn cbar_outcome(
    max_transition: impl Fn(f64) -> f64,
    c_min: f64,
    search_ceiling: f64,
) -> CbarOutcome {
    let phi = |c: f64| max_transition(c) - c;
    let mut lo = c_min;
    if phi(lo) <= 0.0 {
        return CbarOutcome::Collapsed;
    }
    let mut hi = lo;
    loop {
        hi *= 1.5;
        if hi > search_ceiling {
            return CbarOutcome::Unbounded;
        }
        if phi(hi) <= 0.0 {
            break;
        }
        lo = hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    CbarOutcome::Crossing(0.5 * (lo + hi))
}

/// Smallest `c` with `c ≥ maxT(c)`, where `maxT(c)` is the largest next-period
/// consumption over all employment pairs.  Root-bracketing on `maxT(c) − c`.
pub fn endogenize_cbar(
    max_transition: impl Fn(f64) -> f64,
    c_min: f64,
    search_ceiling: f64,
) -> Result<f64> {
    match cbar_outcome(max_transition, c_min, search_ceiling) {
        CbarOutcome::Crossing(c) => Ok(c),
        CbarOutcome::Collapsed => Err(Error::domain(format!(
            "degenerate: consumption already contracts at the bottom of the \
             search range near {c_min}; the endogenous bound collapses to 0"
        ))),
        CbarOutcome::Unbounded => Err(Error::domain(format!(
            "unbounded consumption: no c <= {search_ceiling} satisfies c >= maxT(c)"
        ))),
    }
}

/// One application of the self-aware transport rule
/// `*F^v(c) = Σ_u [π(u)P(u,v)/π(v)] F^u(𝒯̂^v(u,c))`, clamped to `[0,1]`.
pub fn transport_apply(
    f: &[Cdf],
    trans_inv: &[Vec<MonotoneFn1D>],
    pi: &[f64],
    p: &[Vec<f64>],
    c_grid: &[f64],
) -> Result<Vec<Cdf>> {
    let ne = pi.len();
    let mut out = Vec::with_capacity(ne);
    for v in 0..ne {
        let mut values = Vec::with_capacity(c_grid.len());
        for &c in c_grid {
            let mut acc = 0.0;
            for u in 0..ne {
                let w = pi[u] * p[u][v] / pi[v];
                acc += w * f[u].eval(trans_inv[u][v].eval(c));
            }
            values.push(acc.clamp(0.0, 1.0));
        }
        out.push(Cdf::with_floor(c_grid, &values, 0.0)?);
    }
    Ok(out)
}

/// Iterate [`transport_apply`] to its fixed point.  Returns the family, the
/// iteration count, and the final sup-change.
pub struct TransportResult {
    pub family: Vec<Cdf>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// One transport pass expressed on precomputed arguments:
/// `out[v][i] = clamp(Σ_u w[v][u]·F^u(args[v][u][i]))`.
fn transport_pass(
    f: &[Cdf],
    args: &[Vec<Vec<f64>>],
    weights: &[Vec<f64>],
    c_grid: &[f64],
) -> Result<Vec<Cdf>> {
    let ne = f.len();
    let out: Result<Vec<Cdf>> = (0..ne)
        .into_par_iter()
        .map(|v| {
            let mut values = Vec::with_capacity(c_grid.len());
            for i in 0..c_grid.len() {
                let mut acc = 0.0;
                for u in 0..ne {
                    acc += weights[v][u] * f[u].eval(args[v][u][i]);
                }
                values.push(acc.clamp(0.0, 1.0));
            }
            Cdf::with_floor(c_grid, &values, 0.0)
        })
        .collect();
    out
}

pub fn transport_fixed_point(
    f0: Vec<Cdf>,
    trans_inv: &[Vec<MonotoneFn1D>],
    pi: &[f64],
    p: &[Vec<f64>],
    c_grid: &[f64],
    tol: f64,
    cap: usize,
) -> Result<TransportResult> {
    let ne = pi.len();
    // the transition maps are fixed for the whole solve: evaluate their
    // inverses on the grid once
    let args: Vec<Vec<Vec<f64>>> = (0..ne)
        .map(|v| {
            (0..ne)
                .map(|u| c_grid.iter().map(|&c| trans_inv[u][v].eval(c)).collect())
                .collect()
        })
        .collect();
    let weights: Vec<Vec<f64>> = (0..ne)
        .map(|v| (0..ne).map(|u| pi[u] * p[u][v] / pi[v]).collect())
        .collect();

    let mut f = f0;
    let mut last = f64::INFINITY;
    let mut sup_window: Vec<f64> = Vec::new();
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;
    let mut averaged = false;
    for it in 0..cap {
        let next = transport_pass(&f, &args, &weights, c_grid)?;
        let mut sup = 0.0f64;
        for (a, b) in f.iter().zip(next.iter()) {
            for (&pa, &pb) in a.knots_p().iter().zip(b.knots_p().iter()) {
                sup = sup.max((pa - pb).abs());
            }
        }
        if sup < tol {
            return Ok(TransportResult {
                family: next,
                iterations: it + 1,
                residual: sup,
                converged: true,
            });
        }
        // single-mode geometric completion: when the sup-change decays at a
        // steady ratio rho, the remaining distance to the fixed point is the
        // last step scaled by rho/(1-rho)
        sup_window.push(sup);
        let extrapolate = sup_window.len() >= 48 && it % 16 == 0;
        if extrapolate {
            let w = &sup_window[sup_window.len() - 48..];
            let rho = (w[47] / w[0]).powf(1.0 / 47.0);
            if rho > 0.5 && rho < 0.9999 {
                let gain = rho / (1.0 - rho);
                let fext: Result<Vec<Cdf>> = f
                    .iter()
                    .zip(next.iter())
                    .map(|(a, b)| {
                        let vals: Vec<f64> = a
                            .knots_p()
                            .iter()
                            .zip(b.knots_p().iter())
                            .map(|(&pa, &pb)| (pb + gain * (pb - pa)).clamp(0.0, 1.0))
                            .collect();
                        Cdf::with_floor(c_grid, &vals, 0.0)
                    })
                    .collect();
                if let Ok(fext) = fext {
                    f = fext;
                    sup_window.clear();
                    last = sup;
                    continue;
                }
            }
        }
        if sup < best * 0.999 {
            best = sup;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > 150 {
                averaged = true;
            }
        }
        f = if averaged {
            // Krasnosel'skii-Mann averaging: converges where the plain
            // iteration sustains a small limit cycle
            f.iter()
                .zip(next.iter())
                .map(|(a, b)| {
                    let vals: Vec<f64> = a
                        .knots_p()
                        .iter()
                        .zip(b.knots_p().iter())
                        .map(|(&pa, &pb)| 0.5 * (pa + pb))
                        .collect();
                    Cdf::with_floor(c_grid, &vals, 0.0)
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            next
        };
        last = sup;
    }
    // cap reached: hand back the partial family so the caller can still read
    // a clearing signal off it (only accepted trials require convergence)
    Ok(TransportResult {
        family: f,
        iterations: cap,
        residual: last,
        converged: false,
    })
}

/// Market clearing value `Σ_u π(u) ∫ θ_u dF^u` via quantile-space quadrature.
pub fn market_clearing_value(
    theta: &[MonotoneFn1D],
    f: &[Cdf],
    pi: &[f64],
    quad_points: usize,
) -> f64 {
    let mut acc = 0.0;
    for ((th, cdf), &w) in theta.iter().zip(f.iter()).zip(pi.iter()) {
        acc += w * stieltjes_quantile(cdf, |c| th.eval(c), quad_points);
    }
    acc
}

enum TrialOutcome {
    Solved(Box<Trial>),
    /// Consumption bound collapsed: the bond price is too high.
    Collapsed,
    /// Consumption unbounded: the bond price is too low.
    Unbounded,
}

struct Trial {
    theta: Vec<MonotoneFn1D>,
    theta_dagger: Vec<MonotoneFn1D>,
    trans: Vec<Vec<MonotoneFn1D>>,
    trans_inv: Vec<Vec<MonotoneFn1D>>,
    c_bar: f64,
    c_grid: Vec<f64>,
    dist: Vec<Cdf>,
    clearing: f64,
    transport_residual: f64,
    transport_converged: bool,
}

/// Steps 1–6 of the iteration at a fixed bond price: budget maps, portfolio
/// solves on the endogenous grid, transitions, transport fixed point, and
/// the clearing value.
fn run_price_trial(
    spec: &HuggettSpec,
    dagger_theta: &[MonotoneFn1D],
    bond_price: f64,
    dist_state: &Option<Vec<Cdf>>,
    opts: &SolverOptions,
) -> Result<TrialOutcome> {
    let ne = spec.n_states();
    let (_h, inv_h) = build_budget_maps(dagger_theta, bond_price)?;

    // endogenous upper bound on consumption: the top of the recurrent range,
    // where the best-income agent who keeps that income stops accumulating
    // (the largest diagonal crossing of the transitions).  Off-diagonal
    // branches cross far above, outside the recurrent class: using them
    // would push the grid top to a transient region no population ever
    // occupies and starve the support of resolution.
    let eps = spec.wage;
    let diagonal_transition = |c: f64| -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for v in 0..ne {
            if let Ok(theta) = solve_theta_at(c, v, bond_price, &inv_h, spec) {
                let t = inv_h[v].eval(theta * spec.face_value + spec.income(v));
                worst = worst.max(t);
            }
        }
        worst
    };
    let c_bar = match cbar_outcome(&diagonal_transition, 1e-3 * eps, 1e6 * eps) {
        CbarOutcome::Crossing(c) => c,
        CbarOutcome::Collapsed => return Ok(TrialOutcome::Collapsed),
        CbarOutcome::Unbounded => return Ok(TrialOutcome::Unbounded),
    };

    // uniform grid on ]0, c_bar]
    let n = opts.grid_points;
    let c_grid: Vec<f64> = (1..=n).map(|i| c_bar * i as f64 / n as f64).collect();

    // portfolio solves on the grid, in parallel across (u, c)
    let cells: Vec<(usize, usize)> = (0..ne)
        .flat_map(|u| (0..c_grid.len()).map(move |i| (u, i)))
        .collect();
    let solved: Result<Vec<((usize, usize), f64)>> = cells
        .par_iter()
        .map(|&(u, i)| {
            solve_theta_at(c_grid[i], u, bond_price, &inv_h, spec).map(|t| ((u, i), t))
        })
        .collect();
    let solved = solved?;
    let mut theta_vals = vec![vec![0.0f64; c_grid.len()]; ne];
    for ((u, i), t) in solved {
        theta_vals[u][i] = t;
    }
    let mut theta = Vec::with_capacity(ne);
    for vals in &theta_vals {
        theta.push(MonotoneFn1D::build(&c_grid, vals)?);
    }

    let (trans, trans_inv) = build_transitions(&theta, &inv_h, spec, &c_grid)?;

    // transport fixed point, warm-started from the persistent family
    let f0: Vec<Cdf> = match dist_state {
        Some(prev) => prev
            .iter()
            .map(|cdf| {
                let vals: Vec<f64> = c_grid.iter().map(|&c| cdf.eval(c)).collect();
                Cdf::with_floor(&c_grid, &vals, 0.0)
            })
            .collect::<Result<Vec<_>>>()?,
        None => {
            let vals: Vec<f64> = c_grid.iter().map(|&c| c / c_bar).collect();
            (0..ne)
                .map(|_| Cdf::with_floor(&c_grid, &vals, 0.0))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let transport = transport_fixed_point(
        f0,
        &trans_inv,
        &spec.pi,
        &spec.p,
        &c_grid,
        opts.dist_tol,
        opts.dist_cap,
    )?;
    let dist = transport.family;
    let transport_residual = transport.residual;
    let transport_converged = transport.converged;
    if !transport_converged && std::env::var("HAMLAB_DEBUG_TRANSPORT").is_ok() {
        let n = c_grid.len();
        for (u, cdf) in dist.iter().enumerate() {
            let ps = cdf.knots_p();
            eprintln!(
                "  [trial dbg] u={u}: F(head)={:.3e},{:.3e} F(tail)={:.6},{:.6},{:.6}",
                ps[0], ps[1], ps[n - 3], ps[n - 2], ps[n - 1]
            );
        }
    }

    let clearing = market_clearing_value(&theta, &dist, &spec.pi, opts.quad_points);

    Ok(TrialOutcome::Solved(Box::new(Trial {
        theta,
        theta_dagger: dagger_theta.to_vec(),
        trans,
        trans_inv,
        c_bar,
        c_grid,
        dist,
        clearing,
        transport_residual,
        transport_converged,
    })))
}

/// Price loop: hold the policy family fixed and move the bond price until
/// clearing passes.  Maintains a sign bracket on the clearing value; secant
/// steps clipped to the bracket with bisection fallback.  A collapsed
/// consumption bound reads as a price far too high and an unbounded one as a
/// price far too low, so both still steer the bracket.
#[allow(clippy::too_many_arguments)]
fn price_loop(
    spec: &HuggettSpec,
    dagger_theta: &[MonotoneFn1D],
    b_start: f64,
    hint_step: f64,
    dist_state: &mut Option<Vec<Cdf>>,
    opts: &SolverOptions,
    trials_used: &mut usize,
) -> Result<(f64, Trial)> {
    let tol = opts.clearing_tol_rel * spec.face_value;
    let pseudo = 1e100;
    let debug = std::env::var("HAMLAB_DEBUG_PRICE").is_ok();
    let mut eval = |b: f64| -> Result<(f64, Option<Box<Trial>>)> {
        *trials_used += 1;
        match run_price_trial(spec, dagger_theta, b, dist_state, opts)? {
            TrialOutcome::Solved(trial) => {
                *dist_state = Some(trial.dist.clone());
                if debug {
                    eprintln!(
                        "  [price dbg] B={b:.9} clearing={:+.6e} c_bar={:.4} transport(conv={}, res={:.2e})",
                        trial.clearing, trial.c_bar, trial.transport_converged, trial.transport_residual
                    );
                }
                Ok((trial.clearing, Some(trial)))
            }
            // bound collapse = price far above equilibrium = excess supply
            TrialOutcome::Collapsed => {
                if debug {
                    eprintln!("  [price dbg] B={b:.9} collapsed bound");
                }
                Ok((-pseudo, None))
            }
            TrialOutcome::Unbounded => {
                if debug {
                    eprintln!("  [price dbg] B={b:.9} unbounded bound");
                }
                Ok((pseudo, None))
            }
        }
    };

    let mut b0 = b_start;
    let (mut f0, t0) = eval(b0)?;
    if let Some(trial) = t0 {
        if f0.abs() < tol && trial.transport_converged {
            return Ok((b0, *trial));
        }
    }

    // hunt for a sign change; clearing falls as the price rises, so excess
    // demand for bonds (positive clearing) pushes the price up
    let mut step = hint_step.clamp(1e-9 * b_start, 0.01 * b_start);
    let dir = if f0 > 0.0 { 1.0 } else { -1.0 };
    let mut b1 = b0;
    let mut f1 = f0;
    let mut bracketed = false;
    for _ in 0..opts.price_cap {
        b1 = b0 + dir * step;
        if b1 <= 0.0 {
            return Err(Error::Bracket("bond price driven nonpositive".into()));
        }
        let (fb, tb) = eval(b1)?;
        f1 = fb;
        if let Some(trial) = tb {
            if fb.abs() < tol && trial.transport_converged {
                return Ok((b1, *trial));
            }
        }
        if f1.signum() != f0.signum() {
            bracketed = true;
            break;
        }
        b0 = b1;
        f0 = f1;
        step *= 2.0;
    }
    if !bracketed {
        return Err(Error::Bracket(format!(
            "no sign change in market clearing near bond price {b1}"
        )));
    }

    // (b0, f0) and (b1, f1) bracket the root
    let mut best: Option<(f64, Box<Trial>)> = None;
    for _ in 0..opts.price_cap {
        let span = (b1 - b0).abs();
        // secant only when both endpoints carry real clearing values
        let mut b_next = if f0.abs() < pseudo && f1.abs() < pseudo {
            b1 - f1 * (b1 - b0) / (f1 - f0)
        } else {
            0.5 * (b0 + b1)
        };
        let margin = 0.05 * span;
        let (lo, hi) = if b0 < b1 { (b0, b1) } else { (b1, b0) };
        if !(b_next > lo + margin && b_next < hi - margin) {
            b_next = 0.5 * (b0 + b1);
        }
        let (fn_, tn) = eval(b_next)?;
        if let Some(trial) = tn {
            if fn_.abs() < tol && trial.transport_converged {
                return Ok((b_next, *trial));
            }
            match &best {
                Some((fb, _)) if fb.abs() <= fn_.abs() => {}
                _ => best = Some((fn_, trial)),
            }
        }
        if fn_.signum() == f0.signum() {
            b0 = b_next;
            f0 = fn_;
        } else {
            b1 = b_next;
            f1 = fn_;
        }
        if (b1 - b0).abs() < 1e-15 * b1.abs() {
            break;
        }
    }
    Err(Error::NonConvergence {
        what: "market clearing price loop".into(),
        residual: best.map(|(f, _)| f.abs()).unwrap_or(f64::NAN),
        iterations: opts.price_cap,
    })
}

/// Full nested solve: metaprogram steps 0–7.
pub fn solve_equilibrium(
    spec: &HuggettSpec,
    b0: f64,
    theta0: impl Fn(usize, f64) -> f64,
    opts: &SolverOptions,
) -> Result<HuggettEquilibrium> {
    if b0 <= 0.0 {
        return Err(Error::validation("initial bond price must be positive"));
    }
    let ne = spec.n_states();

    // identical incomes across employment states leave nothing to insure:
    // the equilibrium is no-trade and the iterative machinery degenerates
    // (the endogenous consumption bound exists only at B = βA exactly)
    let inc0 = spec.income(0);
    if (0..ne).all(|v| (spec.income(v) - inc0).abs() <= 1e-12 * (1.0 + inc0.abs())) {
        return autarky_equilibrium(spec, opts);
    }

    // materialize the ansatz on a log-spaced probe grid
    let eps = spec.wage;
    let probe: Vec<f64> = (0..opts.probe_points)
        .map(|i| {
            let t = i as f64 / (opts.probe_points - 1) as f64;
            1e-3 * eps * (1e6f64).powf(t)
        })
        .collect();
    let mut dagger_theta: Vec<MonotoneFn1D> = (0..ne)
        .map(|u| {
            let ys: Vec<f64> = probe.iter().map(|&c| theta0(u, c)).collect();
            MonotoneFn1D::build(&probe, &ys)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut prev_dagger: Option<Vec<MonotoneFn1D>> = None;

    let mut bond_price = b0;
    let mut price_step_hint = 0.01 * b0;
    let mut dist_state: Option<Vec<Cdf>> = None;
    let mut dagger_trans: Option<Vec<Vec<MonotoneFn1D>>> = None;
    let mut damping_events = 0usize;
    let mut price_trials = 0usize;
    let mut outer_error = f64::INFINITY;
    let mut last_trial: Option<Trial> = None;

    let mut outer_done = 0usize;
    let mut converged = false;
    while outer_done < opts.outer_cap {
        outer_done += 1;
        let attempt = price_loop(
            spec,
            &dagger_theta,
            bond_price,
            price_step_hint,
            &mut dist_state,
            opts,
            &mut price_trials,
        );
        let (b_accept, trial) = match attempt {
            Ok(ok) => ok,
            Err(Error::Construction(_)) | Err(Error::Domain(_)) => {
                // degenerate policy iterate: damp toward the previous one
                if let Some(prev) = &prev_dagger {
                    damping_events += 1;
                    dagger_theta = blend_policies(&dagger_theta, prev, 0.5)?;
                    continue;
                } else {
                    return Err(Error::Construction(
                        "initial policy ansatz produced a degenerate budget map".into(),
                    ));
                }
            }
            Err(e) => return Err(e),
        };
        price_step_hint = ((b_accept - bond_price).abs() * 4.0).max(1e-7 * b_accept);
        bond_price = b_accept;

        // step 7: compare successive policy and transition families
        if let Some(prev_trial) = &last_trial {
            let mut err = 0.0f64;
            for u in 0..ne {
                for &c in &trial.c_grid {
                    err = err.max((trial.theta[u].eval(c) - prev_trial.theta[u].eval(c)).abs());
                }
            }
            if let Some(dt) = &dagger_trans {
                for u in 0..ne {
                    for v in 0..ne {
                        for &c in &trial.c_grid {
                            err = err
                                .max((trial.trans[u][v].eval(c) - dt[u][v].eval(c)).abs());
                        }
                    }
                }
            }
            outer_error = err;
            if err < opts.outer_tol {
                converged = true;
                last_trial = Some(trial);
                break;
            }
        }
        prev_dagger = Some(dagger_theta.clone());
        dagger_theta = trial.theta.clone();
        dagger_trans = Some(trial.trans.clone());
        last_trial = Some(trial);
    }

    let trial = last_trial.ok_or_else(|| Error::NonConvergence {
        what: "outer policy loop".into(),
        residual: outer_error,
        iterations: outer_done,
    })?;

    let eq = finalize(spec, bond_price, trial, HuggettDiagnostics {
        converged,
        outer_iterations: outer_done,
        outer_error,
        clearing: 0.0,
        kernel_residual: 0.0,
        budget_residual: 0.0,
        transport_residual: 0.0,
        damping_events,
        price_trials,
    })?;
    Ok(eq)
}

/// Closed-form no-trade equilibrium for identical incomes: `B = βA`, zero
/// bond holdings, identity transitions, and a point-mass distribution at the
/// common income.  The reported residuals verify the equilibrium conditions
/// directly.  The zero policy is carried with a vanishing tilt because the
/// policy carrier requires strict monotonicity.
fn autarky_equilibrium(spec: &HuggettSpec, opts: &SolverOptions) -> Result<HuggettEquilibrium> {
    let ne = spec.n_states();
    let c_bar = spec.income(0);
    let bond_price = spec.beta * spec.face_value;
    let n = opts.grid_points;
    let c_grid: Vec<f64> = (1..=n).map(|i| c_bar * i as f64 / n as f64).collect();

    let tilt = 1e-13;
    let theta: Vec<MonotoneFn1D> = (0..ne)
        .map(|_| {
            let ys: Vec<f64> = c_grid.iter().map(|&c| tilt * (c - c_bar)).collect();
            MonotoneFn1D::build(&c_grid, &ys)
        })
        .collect::<Result<Vec<_>>>()?;
    let identity = MonotoneFn1D::build(&c_grid, &c_grid)?;
    let transitions: Vec<Vec<MonotoneFn1D>> =
        (0..ne).map(|_| vec![identity.clone(); ne]).collect();
    let transitions_inv = transitions.clone();
    let point_mass: Vec<f64> = c_grid
        .iter()
        .map(|&c| if c + 1e-12 >= c_bar { 1.0 } else { 0.0 })
        .collect();
    let dist: Vec<Cdf> = (0..ne)
        .map(|_| Cdf::new(&c_grid, &point_mass))
        .collect::<Result<Vec<_>>>()?;

    // verification residuals straight from the equilibrium conditions
    let mut kernel = 0.0f64;
    for u in 0..ne {
        for &c in &c_grid {
            let mut sum = 0.0;
            for v in 0..ne {
                sum += (c / transitions[u][v].eval(c)).powf(spec.risk_aversion) * spec.p[u][v];
            }
            kernel = kernel.max((bond_price - spec.beta * spec.face_value * sum).abs() / bond_price);
        }
    }
    // the budget identity holds on the support {c_bar}
    let mut budget = 0.0f64;
    for u in 0..ne {
        for v in 0..ne {
            let t = transitions[u][v].eval(c_bar);
            let lhs = theta[u].eval(c_bar) * spec.face_value + spec.income(v);
            let rhs = t + theta[v].eval(t) * bond_price;
            budget = budget.max((lhs - rhs).abs());
        }
    }
    let clearing = market_clearing_value(&theta, &dist, &spec.pi, opts.quad_points);

    Ok(HuggettEquilibrium {
        spec: spec.clone(),
        bond_price,
        rate: spec.face_value / bond_price - 1.0,
        c_bar,
        c_grid: c_grid.clone(),
        borrowing_limit: (0..ne)
            .map(|u| theta[u].eval(0.0) * bond_price)
            .fold(f64::INFINITY, f64::min),
        investment_bound: (0..ne)
            .map(|u| theta[u].eval(c_bar) * bond_price)
            .fold(f64::NEG_INFINITY, f64::max),
        theta,
        transitions,
        transitions_inv,
        dist,
        diagnostics: HuggettDiagnostics {
            converged: true,
            outer_iterations: 0,
            outer_error: 0.0,
            clearing,
            kernel_residual: kernel,
            budget_residual: budget,
            transport_residual: 0.0,
            damping_events: 0,
            price_trials: 0,
        },
    })
}

fn blend_policies(
    new: &[MonotoneFn1D],
    old: &[MonotoneFn1D],
    w: f64,
) -> Result<Vec<MonotoneFn1D>> {
    let mut out = Vec::with_capacity(new.len());
    for (n, o) in new.iter().zip(old.iter()) {
        let xs = n.knots_x();
        let ys: Vec<f64> = xs
            .iter()
            .zip(n.knots_y())
            .map(|(&c, &t)| w * t + (1.0 - w) * o.eval(c))
            .collect();
        out.push(MonotoneFn1D::build(xs, &ys)?);
    }
    Ok(out)
}

fn finalize(
    spec: &HuggettSpec,
    bond_price: f64,
    trial: Trial,
    mut diag: HuggettDiagnostics,
) -> Result<HuggettEquilibrium> {
    let ne = spec.n_states();
    let a = spec.face_value;
    let rate = a / bond_price - 1.0;

    // kernel residual: |B − βA Σ_v (c/𝒯)^R P| over the grid, relative to B
    let mut kernel = 0.0f64;
    for u in 0..ne {
        for &c in &trial.c_grid {
            let mut sum = 0.0;
            for v in 0..ne {
                let t = trial.trans[u][v].eval(c);
                sum += (c / t).powf(spec.risk_aversion) * spec.p[u][v];
            }
            kernel = kernel.max((bond_price - spec.beta * a * sum).abs() / bond_price);
        }
    }
    // budget residual with the generating pair: θ_new on the left, the
    // previous-iterate θ on the right, exactly as the transitions were built
    let mut budget = 0.0f64;
    for u in 0..ne {
        for v in 0..ne {
            for &c in &trial.c_grid {
                let t = trial.trans[u][v].eval(c);
                let lhs = trial.theta[u].eval(c) * a + spec.income(v);
                let rhs = t + trial.theta_dagger[v].eval(t) * bond_price;
                budget = budget.max((lhs - rhs).abs());
            }
        }
    }
    diag.clearing = trial.clearing;
    diag.kernel_residual = kernel;
    diag.budget_residual = budget;
    diag.transport_residual = trial.transport_residual;

    let borrowing_limit = (0..ne)
        .map(|u| trial.theta[u].eval(0.0) * bond_price)
        .fold(f64::INFINITY, f64::min);
    // top of the recurrent wealth range: the bound belongs to the state
    // whose diagonal transition pins c_bar (the income-richest agents; at a
    // given consumption they carry the least wealth)
    let investment_bound = (0..ne)
        .map(|u| trial.theta[u].eval(trial.c_bar) * bond_price)
        .fold(f64::INFINITY, f64::min);

    Ok(HuggettEquilibrium {
        spec: spec.clone(),
        bond_price,
        rate,
        c_bar: trial.c_bar,
        c_grid: trial.c_grid,
        theta: trial.theta,
        transitions: trial.trans,
        transitions_inv: trial.trans_inv,
        dist: trial.dist,
        borrowing_limit,
        investment_bound,
        diagnostics: diag,
    })
}

/// Exiting and entering wealth distributions implied by an equilibrium:
/// exiting wealth is `θ_u(c)·B`, entering wealth is `c + θ_u(c)·B − εu`;
/// each family is the pushforward of the consumption CDF through the
/// corresponding strictly increasing map.
pub fn wealth_distributions(eq: &HuggettEquilibrium) -> Result<(Vec<Cdf>, Vec<Cdf>)> {
    let ne = eq.spec.n_states();
    let mut entering = Vec::with_capacity(ne);
    let mut exiting = Vec::with_capacity(ne);
    for u in 0..ne {
        let exit_knots: Vec<f64> = eq
            .c_grid
            .iter()
            .map(|&c| eq.theta[u].eval(c) * eq.bond_price)
            .collect();
        let enter_knots: Vec<f64> = eq
            .c_grid
            .iter()
            .map(|&c| c + eq.theta[u].eval(c) * eq.bond_price - eq.spec.income(u))
            .collect();
        let ps: Vec<f64> = eq
            .c_grid
            .iter()
            .map(|&c| eq.dist[u].eval(c))
            .collect();
        exiting.push(Cdf::new(&exit_knots, &ps)?);
        entering.push(Cdf::new(&enter_knots, &ps)?);
    }
    Ok((entering, exiting))
}

#[derive(Debug, Clone, Copy)]
pub struct UIndependence {
    pub deviation: f64,
    /// True when the check is meaningless (degenerate asset maps).
    pub vacuous: bool,
}

/// Future consumption written against entering future wealth must not depend
/// on the departing employment state: with `α_u(c) = θ_u(c)·A`, the curves
/// `a ↦ 𝒯^v(u, α̂_u(a))` must coincide across `u` on the common wealth hull.
pub fn u_independence_check(eq: &HuggettEquilibrium) -> Result<UIndependence> {
    let ne = eq.spec.n_states();
    if ne < 2 {
        return Ok(UIndependence {
            deviation: 0.0,
            vacuous: false,
        });
    }
    let a = eq.spec.face_value;
    let mut alpha_inv = Vec::with_capacity(ne);
    let mut hulls = Vec::with_capacity(ne);
    for u in 0..ne {
        let ys: Vec<f64> = eq
            .c_grid
            .iter()
            .map(|&c| eq.theta[u].eval(c) * a)
            .collect();
        let width = ys.last().unwrap() - ys[0];
        if width < 1e-10 * (1.0 + ys[0].abs()) {
            return Ok(UIndependence {
                deviation: 0.0,
                vacuous: true,
            });
        }
        let alpha = MonotoneFn1D::build(&eq.c_grid, &ys)?;
        hulls.push(alpha.range());
        alpha_inv.push(alpha.invert_with_grid(eq.c_grid.len())?);
    }
    let lo = hulls.iter().map(|h| h.0).fold(f64::NEG_INFINITY, f64::max);
    let hi = hulls.iter().map(|h| h.1).fold(f64::INFINITY, f64::min);
    if hi <= lo {
        return Err(Error::domain(
            "empty common wealth hull in the u-independence check",
        ));
    }
    let n_probe = 101;
    let mut worst = 0.0f64;
    for v in 0..ne {
        for k in 0..n_probe {
            let w = lo + (hi - lo) * k as f64 / (n_probe - 1) as f64;
            let vals: Vec<f64> = (0..ne)
                .map(|u| eq.transitions[u][v].eval(alpha_inv[u].eval(w)))
                .collect();
            for i in 0..ne {
                for j in i + 1..ne {
                    worst = worst.max((vals[i] - vals[j]).abs());
                }
            }
        }
    }
    Ok(UIndependence {
        deviation: worst,
        vacuous: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_fn(lo: f64, hi: f64, n: usize) -> MonotoneFn1D {
        let xs: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect();
        MonotoneFn1D::build(&xs, &xs).unwrap()
    }

    fn two_state_spec() -> HuggettSpec {
        HuggettSpec::new(
            vec![1.0, 0.4],
            vec![vec![0.9, 0.1], vec![0.5, 0.5]],
            1.0,
            0.95,
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn consumption_single_state_closed_form() {
        let spec = HuggettSpec::new(
            vec![1.0, 1.0],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            1.0,
            0.9,
            1.0,
        )
        .unwrap();
        // A = 1; identity inverse budget maps; theta = 0; income 1
        assert!((spec.face_value - 1.0).abs() < 1e-12);
        let inv_h = vec![identity_fn(-2.0, 10.0, 13), identity_fn(-2.0, 10.0, 13)];
        let c = consumption_from_theta(0.0, 0, 0.9, &inv_h, &spec).unwrap();
        assert!((c - 1.0).abs() < 1e-12, "c = {c}");
    }

    #[test]
    fn consumption_satisfies_kernel_residual() {
        let spec = two_state_spec();
        let inv_h = vec![identity_fn(-2.0, 30.0, 33), identity_fn(-1.0, 25.0, 27)];
        let b = 0.9 * spec.face_value;
        for &theta in &[0.1, 0.5, 2.0, 7.0] {
            let c = consumption_from_theta(theta, 0, b, &inv_h, &spec).unwrap();
            // plug back: B = beta*A*sum_v (c / Hinv(theta A + eps v))^R P(u,v)
            let mut sum = 0.0;
            for v in 0..2 {
                let t = inv_h[v].eval(theta * spec.face_value + spec.income(v));
                sum += (c / t).powf(spec.risk_aversion) * spec.p[0][v];
            }
            let residual = (b - spec.beta * spec.face_value * sum).abs();
            assert!(residual < 1e-10, "residual {residual} at theta {theta}");
        }
    }

    #[test]
    fn consumption_increasing_in_theta() {
        let spec = two_state_spec();
        let inv_h = vec![identity_fn(-2.0, 30.0, 33), identity_fn(-1.0, 25.0, 27)];
        let b = 0.9 * spec.face_value;
        let mut prev = 0.0;
        for k in 0..40 {
            let theta = 0.05 + 0.25 * k as f64;
            let c = consumption_from_theta(theta, 1, b, &inv_h, &spec).unwrap();
            assert!(c > prev, "not increasing at theta={theta}");
            prev = c;
        }
    }

    #[test]
    fn transitions_reduce_to_budget_when_old_policy_zero() {
        let spec = two_state_spec();
        // dagger theta == 0 -> H identity -> T = theta_u(c) A + eps v
        let grid: Vec<f64> = (1..=24).map(|i| 0.05 * i as f64).collect();
        let theta_vals: Vec<f64> = grid.iter().map(|&c| 0.3 * c - 0.1).collect();
        let theta = vec![
            MonotoneFn1D::build(&grid, &theta_vals).unwrap(),
            MonotoneFn1D::build(&grid, &theta_vals).unwrap(),
        ];
        let inv_h = vec![identity_fn(-5.0, 40.0, 46), identity_fn(-5.0, 40.0, 46)];
        let (trans, _) = build_transitions(&theta, &inv_h, &spec, &grid).unwrap();
        for u in 0..2 {
            for v in 0..2 {
                for &c in &grid {
                    let expect = theta[u].eval(c) * spec.face_value + spec.income(v);
                    let got = trans[u][v].eval(c);
                    assert!((got - expect).abs() < 1e-9, "{got} vs {expect}");
                }
            }
        }
    }

    #[test]
    fn budget_identity_holds_at_random_triples() {
        let spec = two_state_spec();
        let grid: Vec<f64> = (1..=48).map(|i| 0.04 * i as f64).collect();
        // a nontrivial increasing previous policy
        let dag_vals: Vec<f64> = grid.iter().map(|&c| 0.8 * c - 0.4).collect();
        let dagger: Vec<MonotoneFn1D> = (0..2)
            .map(|_| MonotoneFn1D::build(&grid, &dag_vals).unwrap())
            .collect();
        let b = 0.9 * spec.face_value;
        let (_h, inv_h) = build_budget_maps(&dagger, b).unwrap();
        let new_vals: Vec<f64> = grid.iter().map(|&c| 0.5 * c - 0.2).collect();
        let theta: Vec<MonotoneFn1D> = (0..2)
            .map(|_| MonotoneFn1D::build(&grid, &new_vals).unwrap())
            .collect();
        let (trans, _) = build_transitions(&theta, &inv_h, &spec, &grid).unwrap();
        // identity (e): theta_u(c) A + eps v = T + dagger_theta_v(T) B
        let mut state = 7u64;
        let mut rand01 = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let u = if rand01() < 0.5 { 0 } else { 1 };
            let v = if rand01() < 0.5 { 0 } else { 1 };
            let c = 0.04 + rand01() * (grid.last().unwrap() - 0.05);
            let t = trans[u][v].eval(c);
            let lhs = theta[u].eval(c) * spec.face_value + spec.income(v);
            let rhs = t + dagger[v].eval(t) * b;
            worst = worst.max((lhs - rhs).abs());
        }
        assert!(worst < 1e-8, "budget identity residual {worst}");
    }

    #[test]
    fn cbar_analytic_crossing() {
        // T(c) = 0.9c + 1 crosses the diagonal at 10
        let cbar = endogenize_cbar(|c| 0.9 * c + 1.0, 1e-3, 1e6).unwrap();
        assert!((cbar - 10.0).abs() < 1e-8, "cbar {cbar}");
    }

    #[test]
    fn cbar_contraction_is_degenerate() {
        let err = endogenize_cbar(|c| 0.5 * c, 1e-3, 1e6).unwrap_err();
        assert!(err.to_string().contains("degenerate"));
    }

    fn uniform_family(grid: &[f64], ne: usize) -> Vec<Cdf> {
        let hi = *grid.last().unwrap();
        let vals: Vec<f64> = grid.iter().map(|&c| c / hi).collect();
        (0..ne).map(|_| Cdf::new(grid, &vals).unwrap()).collect()
    }

    #[test]
    fn transport_identity_fixes_family() {
        let grid: Vec<f64> = (1..=32).map(|i| i as f64 / 32.0).collect();
        let f = uniform_family(&grid, 2);
        let id = identity_fn(0.0, 1.2, 25);
        let tinv = vec![vec![id.clone(), id.clone()], vec![id.clone(), id.clone()]];
        let eye = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let pi = vec![0.5, 0.5];
        let out = transport_apply(&f, &tinv, &pi, &eye, &grid).unwrap();
        for (a, b) in f.iter().zip(out.iter()) {
            for (&pa, &pb) in a.knots_p().iter().zip(b.knots_p().iter()) {
                assert!((pa - pb).abs() < 1e-12);
            }
        }
        // and the fixed point detects this in one iteration
        let res = transport_fixed_point(f, &tinv, &pi, &eye, &grid, 1e-9, 10).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 1);
    }

    #[test]
    fn transport_conserves_mass() {
        let spec = two_state_spec();
        let grid: Vec<f64> = (1..=40).map(|i| 0.05 * i as f64).collect();
        let f = uniform_family(&grid, 2);
        // transitions that shift consumption around but stay within range
        let t0: Vec<f64> = grid.iter().map(|&c| 0.7 * c + 0.3).collect();
        let t1: Vec<f64> = grid.iter().map(|&c| 0.8 * c + 0.1).collect();
        let m0 = MonotoneFn1D::build(&grid, &t0).unwrap();
        let m1 = MonotoneFn1D::build(&grid, &t1).unwrap();
        let tinv = vec![
            vec![m0.invert().unwrap(), m1.invert().unwrap()],
            vec![m1.invert().unwrap(), m0.invert().unwrap()],
        ];
        let out = transport_apply(&f, &tinv, &spec.pi, &spec.p, &grid).unwrap();
        for cdf in &out {
            let total = cdf.eval(*grid.last().unwrap());
            assert!((total - 1.0).abs() < 1e-9, "total mass {total}");
        }
    }

    #[test]
    fn transport_two_state_hand_mixture() {
        let pi = vec![0.6, 0.4];
        let p = vec![vec![0.8, 0.2], vec![0.3, 0.7]];
        let grid: Vec<f64> = (1..=20).map(|i| 0.1 * i as f64).collect();
        // piecewise-linear CDFs: F0 uniform on ]0,2], F1 = sqrt-shaped
        let f0_vals: Vec<f64> = grid.iter().map(|&c| (c / 2.0).min(1.0)).collect();
        let f1_vals: Vec<f64> = grid.iter().map(|&c| (c / 2.0).sqrt().min(1.0)).collect();
        let f = vec![
            Cdf::new(&grid, &f0_vals).unwrap(),
            Cdf::new(&grid, &f1_vals).unwrap(),
        ];
        // inverse transitions: shifts by a constant
        let shift = |d: f64| {
            let ys: Vec<f64> = grid.iter().map(|&c| c + d).collect();
            MonotoneFn1D::build(&grid, &ys).unwrap()
        };
        let tinv = vec![
            vec![shift(-0.1), shift(0.05)],
            vec![shift(0.0), shift(-0.05)],
        ];
        let out = transport_apply(&f, &tinv, &pi, &p, &grid).unwrap();
        // hand evaluation at five abscissas
        for &c in &[0.3, 0.7, 1.0, 1.4, 1.9] {
            for v in 0..2 {
                let mut expect = 0.0;
                for u in 0..2 {
                    let w = pi[u] * p[u][v] / (pi[0] * p[0][v] + pi[1] * p[1][v]);
                    let arg = tinv[u][v].eval(c);
                    expect += w * f[u].eval(arg);
                }
                let got = out[v].eval(c);
                assert!(
                    (got - expect.clamp(0.0, 1.0)).abs() < 1e-9,
                    "v={v} c={c}: {got} vs {expect}"
                );
            }
        }
        // note: the weights in transport_apply use pi(v) of the stationary
        // vector; for this synthetic instance pi P != pi, so recompute with
        // the same convention to keep the oracle honest
        let _ = out;
    }

    #[test]
    fn transport_contraction_reaches_point_mass() {
        // transitions pulling consumption toward 1.0 => CDF converges to step
        let grid: Vec<f64> = (1..=50).map(|i| 0.04 * i as f64).collect();
        let pull = |_: ()| {
            let ys: Vec<f64> = grid.iter().map(|&c| 1.0 + 0.5 * (c - 1.0)).collect();
            MonotoneFn1D::build(&grid, &ys).unwrap()
        };
        let t = pull(());
        let tinv = vec![vec![t.invert_with_grid(100).unwrap()]];
        let pi = vec![1.0];
        let p = vec![vec![1.0]];
        let f0 = uniform_family(&grid, 1);
        let res = transport_fixed_point(f0, &tinv, &pi, &p, &grid, 1e-10, 20_000).unwrap();
        let f = res.family;
        // limit: all mass at 1.0
        assert!(f[0].eval(0.9) < 0.02, "mass below: {}", f[0].eval(0.9));
        assert!(f[0].eval(1.1) > 0.98, "mass above: {}", f[0].eval(1.1));
    }

    #[test]
    fn clearing_constant_policy_integrates_to_constant() {
        let grid: Vec<f64> = (1..=30).map(|i| 0.05 * i as f64).collect();
        let f = uniform_family(&grid, 2);
        let c_end = *grid.last().unwrap();
        let k = 0.37;
        let theta: Vec<MonotoneFn1D> = (0..2)
            .map(|_| {
                let ys: Vec<f64> = grid.iter().map(|&c| k + 1e-12 * c / c_end).collect();
                MonotoneFn1D::build(&grid, &ys).unwrap()
            })
            .collect();
        let got = market_clearing_value(&theta, &f, &[0.3, 0.7], 128);
        assert!((got - k).abs() < 1e-6, "got {got}");
    }

    #[test]
    fn clearing_linear_policy_uniform_cdf_analytic() {
        // theta(c) = 2c - 0.5 against uniform on ]0,1]: integral = 2*E[c] - 0.5
        let n = 400;
        let grid: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
        let vals: Vec<f64> = grid.iter().map(|&c| c).collect();
        let f = vec![Cdf::new(&grid, &vals).unwrap()];
        let ys: Vec<f64> = grid.iter().map(|&c| 2.0 * c - 0.5).collect();
        let theta = vec![MonotoneFn1D::build(&grid, &ys).unwrap()];
        let got = market_clearing_value(&theta, &f, &[1.0], 256);
        assert!((got - 0.5).abs() < 3e-3, "got {got}");
    }

    #[test]
    fn autarky_solves_to_no_trade() {
        // identical incomes in both employment states: B = beta*A, theta ~ 0
        let spec = HuggettSpec::new(
            vec![1.0, 1.0],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            1.0,
            0.9,
            2.0,
        )
        .unwrap();
        let opts = SolverOptions {
            grid_points: 48,
            outer_cap: 60,
            ..Default::default()
        };
        let eq = solve_equilibrium(&spec, spec.face_value, |_, c| 0.5 * c - 0.25, &opts)
            .unwrap();
        let beta_a = spec.beta * spec.face_value;
        assert!(
            (eq.bond_price - beta_a).abs() < 2e-4 * beta_a,
            "B = {} vs beta*A = {}",
            eq.bond_price,
            beta_a
        );
        assert!(eq.diagnostics.clearing.abs() < 1e-5 * spec.face_value);
        // the population sits at the top of the consumption grid; no trade there
        let c_top = eq.c_bar;
        assert!(
            eq.theta.iter().all(|t| t.eval(c_top).abs() < 5e-3),
            "theta at support: {:?}",
            eq.theta.iter().map(|t| t.eval(c_top)).collect::<Vec<_>>()
        );
        let u_check = u_independence_check(&eq).unwrap();
        assert!(u_check.vacuous || u_check.deviation < 1e-6);
    }
}
