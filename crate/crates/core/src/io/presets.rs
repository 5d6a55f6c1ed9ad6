//! Built-in benchmark presets.

use crate::error::{Error, Result};
use crate::io::config::{save_model, ClassicalSection, LoadedConfig};
use crate::model::{EmploymentSpec, ModelSpec, Preferences, ProductivitySpec, Technology};

/// Names accepted by [`load_preset`].
pub fn available_presets() -> &'static [&'static str] {
    &["ks-benchmark", "huggett-ls18-7state", "huggett-2state"]
}

pub fn load_preset(name: &str) -> Result<LoadedConfig> {
    match name {
        "ks-benchmark" => ks_benchmark(),
        "huggett-ls18-7state" => huggett_ls18_7state(),
        "huggett-2state" => huggett_2state(),
        other => Err(Error::Config(format!(
            "unknown preset '{other}' (available: {})",
            available_presets().join(", ")
        ))),
    }
}

/// Canonical TOML text of a preset (also exercises the save path).
pub fn preset_toml(name: &str) -> Result<String> {
    let cfg = load_preset(name)?;
    save_model(&cfg.model, cfg.classical)
}

/// The two-productivity, two-employment benchmark economy: TFP states
/// 1.01/0.99 with symmetric 0.875/0.125 switching, employed/unemployed with
/// the four conditional transition matrices (exact rationals), β = 0.99,
/// δ = 0.025, α = 0.36, log utility.
fn ks_benchmark() -> Result<LoadedConfig> {
    let p11 = vec![
        vec![35.0 / 36.0, 1.0 / 36.0],
        vec![2.0 / 3.0, 1.0 / 3.0],
    ];
    let p12 = vec![vec![89.0 / 96.0, 7.0 / 96.0], vec![0.25, 0.75]];
    let p21 = vec![vec![59.0 / 60.0, 1.0 / 60.0], vec![0.75, 0.25]];
    let p22 = vec![vec![43.0 / 45.0, 2.0 / 45.0], vec![0.4, 0.6]];
    let employment = EmploymentSpec::synchronized(
        vec![0.3271, 0.0],
        vec![vec![p11, p12], vec![p21, p22]],
    )?;
    let productivity = ProductivitySpec::new(
        vec![1.01, 0.99],
        vec![vec![0.875, 0.125], vec![0.125, 0.875]],
    )?;
    let model = ModelSpec {
        preferences: Preferences::new(0.99, 1.0)?,
        technology: Some(Technology::new(0.36, 0.025, 11.5)?),
        productivity: Some(productivity),
        employment,
        wage: None,
    };
    model.validate()?;
    Ok(LoadedConfig {
        model,
        classical: None,
    })
}

/// Seven-state pure-credit benchmark.
///
/// The work-hours chain is externally sourced: the published study takes it
/// from a textbook specification that prints neither the states nor the
/// transition matrix.  The file shipped here reconstructs the chain with
/// Tauchen's method over an AR(1) log-earnings process (persistence 0.6,
/// innovation s.d. 0.75, span 3 unconditional s.d.), which reproduces the
/// study's documented equilibrium facts; see the project README for the
/// provenance caveat.
fn huggett_ls18_7state() -> Result<LoadedConfig> {
    let (states, p) = tauchen_chain(7, 0.6, 0.75, 3.0);
    let employment = EmploymentSpec::single(states, p)?;
    let model = ModelSpec {
        preferences: Preferences::new(0.96, 1.5)?,
        technology: None,
        productivity: None,
        employment,
        wage: Some(1.0),
    };
    model.validate()?;
    Ok(LoadedConfig {
        model,
        classical: Some(ClassicalSection {
            asset_min: -2.0,
            asset_max: 16.0,
        }),
    })
}

/// Two-state pure-credit instance with monotone transitions (the employed
/// row stochastically dominates the unemployed row), for which the grid
/// pipeline and the transport solver must agree on the equilibrium rate.
fn huggett_2state() -> Result<LoadedConfig> {
    let employment = EmploymentSpec::single(
        vec![1.0, 0.1],
        vec![vec![0.925, 0.075], vec![0.5, 0.5]],
    )?;
    let model = ModelSpec {
        preferences: Preferences::new(0.96, 1.5)?,
        technology: None,
        productivity: None,
        employment,
        wage: Some(1.0),
    };
    model.validate()?;
    // the asset floor sits just inside the natural borrowing limit at the
    // equilibrium rate, where approaching it starves consumption: agents
    // flee it voluntarily and the grid economy matches the unconstrained one
    Ok(LoadedConfig {
        model,
        classical: Some(ClassicalSection {
            asset_min: -2.55,
            asset_max: 4.0,
        }),
    })
}

/// Tauchen discretization of `y' = ρ y + σ ε` on `±m` unconditional standard
/// deviations, with states `exp(y)`.
pub fn tauchen_chain(n: usize, rho: f64, sigma: f64, m: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let sigma_y = sigma / (1.0 - rho * rho).sqrt();
    let half_d = m * sigma_y / (n - 1) as f64;
    let ys: Vec<f64> = (0..n)
        .map(|i| -m * sigma_y + 2.0 * half_d * i as f64)
        .collect();
    let mut p = vec![vec![0.0; n]; n];
    for (i, row) in p.iter_mut().enumerate() {
        let mean = rho * ys[i];
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = if j == 0 {
                normal_cdf((ys[0] - mean + half_d) / sigma)
            } else if j == n - 1 {
                1.0 - normal_cdf((ys[n - 1] - mean - half_d) / sigma)
            } else {
                normal_cdf((ys[j] - mean + half_d) / sigma)
                    - normal_cdf((ys[j] - mean - half_d) / sigma)
            };
        }
        // far-tail entries can underflow to zero; the chains here must keep
        // strictly positive entries
        row.iter_mut().for_each(|x| *x = x.max(1e-10));
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= sum);
    }
    (ys.iter().map(|y| y.exp()).collect(), p)
}

/// Standard normal CDF by adaptive Simpson quadrature of the density
/// (used only at preset-construction time, so accuracy beats speed).
fn normal_cdf(x: f64) -> f64 {
    if x < -12.0 {
        return 0.0_f64.max(density_tail(x));
    }
    if x > 12.0 {
        return 1.0 - density_tail(-x);
    }
    let density = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    0.5 + simpson_adaptive(&density, 0.0, x, 1e-15, 40)
}

/// Mills-ratio asymptotic bound for the far tail.
fn density_tail(x: f64) -> f64 {
    let phi = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    phi / (-x)
}

fn simpson_adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let c = 0.5 * (a + b);
    let whole = (b - a) / 6.0 * (f(a) + 4.0 * f(c) + f(b));
    simpson_step(f, a, b, f(a), f(0.5 * (a + b)), f(b), whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fc: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let c = 0.5 * (a + b);
    let d = 0.5 * (a + c);
    let e = 0.5 * (c + b);
    let fd = f(d);
    let fe = f(e);
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
        left + right + (left + right - whole) / 15.0
    } else {
        simpson_step(f, a, c, fa, fd, fc, left, 0.5 * tol, depth - 1)
            + simpson_step(f, c, b, fc, fe, fb, right, 0.5 * tol, depth - 1)
    }
}
