//! CSV result emission with a run manifest alongside every file set.
//! Numeric columns are printed with 17 significant digits so emitted values
//! round-trip exactly; identical inputs reproduce byte-identical columns.

use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::classical::ClassicalSolution;
use crate::error::{Error, Result};
use crate::fn1d::MonotoneFn1D;
use crate::huggett::{wealth_distributions, HuggettEquilibrium};
use crate::ksaffine::AffineEquilibrium;
use crate::simlab::SimPath;

/// Everything needed to re-run and audit one solver invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub solver: String,
    pub model_hash: String,
    pub schema_version: u32,
    pub seed: Option<u64>,
    pub grid: String,
    pub tolerances: BTreeMap<String, f64>,
    pub caps: BTreeMap<String, u64>,
    pub wall_ms: u64,
    pub residuals: BTreeMap<String, f64>,
    pub warnings: BTreeMap<String, u64>,
    pub files: Vec<String>,
}

impl RunManifest {
    pub fn new(solver: &str, model_hash: &str) -> Self {
        RunManifest {
            solver: solver.to_string(),
            model_hash: model_hash.to_string(),
            schema_version: crate::io::config::SCHEMA_VERSION,
            seed: None,
            grid: String::new(),
            tolerances: BTreeMap::new(),
            caps: BTreeMap::new(),
            wall_ms: 0,
            residuals: BTreeMap::new(),
            warnings: BTreeMap::new(),
            files: Vec::new(),
        }
    }

    pub fn write(&self, out_dir: impl AsRef<Path>) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("manifest serialize: {e}")))?;
        std::fs::write(out_dir.as_ref().join("manifest.toml"), text)?;
        Ok(())
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

fn write_file(
    out_dir: &Path,
    manifest: &mut RunManifest,
    name: &str,
    content: String,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join(name), content)?;
    manifest.files.push(name.to_string());
    Ok(())
}

pub fn emit_huggett(
    eq: &HuggettEquilibrium,
    out_dir: impl AsRef<Path>,
    manifest: &mut RunManifest,
) -> Result<()> {
    let out_dir = out_dir.as_ref();
    let ne = eq.spec.n_states();

    let mut s = String::from("key,value\n");
    for (k, v) in [
        ("bond_price", eq.bond_price),
        ("rate", eq.rate),
        ("c_bar", eq.c_bar),
        ("borrowing_limit", eq.borrowing_limit),
        ("investment_bound", eq.investment_bound),
        ("clearing", eq.diagnostics.clearing),
        ("kernel_residual", eq.diagnostics.kernel_residual),
        ("budget_residual", eq.diagnostics.budget_residual),
        ("transport_residual", eq.diagnostics.transport_residual),
        ("outer_error", eq.diagnostics.outer_error),
        ("outer_iterations", eq.diagnostics.outer_iterations as f64),
    ] {
        let _ = writeln!(s, "{k},{}", fmt(v));
    }
    write_file(out_dir, manifest, "equilibrium.csv", s)?;

    let mut s = String::from("c");
    for u in 0..ne {
        let _ = write!(s, ",theta_{u},invest_{u}");
    }
    s.push('\n');
    for &c in &eq.c_grid {
        let _ = write!(s, "{}", fmt(c));
        for u in 0..ne {
            let th = eq.theta[u].eval(c);
            let _ = write!(s, ",{},{}", fmt(th), fmt(th * eq.bond_price));
        }
        s.push('\n');
    }
    write_file(out_dir, manifest, "policy_by_state.csv", s)?;

    let mut s = String::from("c");
    for u in 0..ne {
        let _ = write!(s, ",F_{u}");
    }
    s.push('\n');
    for &c in &eq.c_grid {
        let _ = write!(s, "{}", fmt(c));
        for u in 0..ne {
            let _ = write!(s, ",{}", fmt(eq.dist[u].eval(c)));
        }
        s.push('\n');
    }
    write_file(out_dir, manifest, "cdf_by_state.csv", s)?;

    let mut s = String::from("c");
    for u in 0..ne {
        for v in 0..ne {
            let _ = write!(s, ",T_{u}_to_{v}");
        }
    }
    s.push('\n');
    for &c in &eq.c_grid {
        let _ = write!(s, "{}", fmt(c));
        for u in 0..ne {
            for v in 0..ne {
                let _ = write!(s, ",{}", fmt(eq.transitions[u][v].eval(c)));
            }
        }
        s.push('\n');
    }
    write_file(out_dir, manifest, "transitions.csv", s)?;

    let (entering, exiting) = wealth_distributions(eq)?;
    let mut s = String::from("state,kind,wealth,cdf\n");
    for u in 0..ne {
        for (kind, fam) in [("entering", &entering), ("exiting", &exiting)] {
            for (w, p) in fam[u].knots_x().iter().zip(fam[u].knots_p().iter()) {
                let _ = writeln!(s, "{u},{kind},{},{}", fmt(*w), fmt(*p));
            }
        }
    }
    write_file(out_dir, manifest, "wealth_dists.csv", s)?;

    // consumption against total wealth, and its gradient (marginal propensity)
    let mut s = String::from("state,total_wealth,consumption,mpc\n");
    for u in 0..ne {
        let w_total: Vec<f64> = eq
            .c_grid
            .iter()
            .map(|&c| c + eq.theta[u].eval(c) * eq.bond_price)
            .collect();
        let c_of_w = MonotoneFn1D::build(&w_total, &eq.c_grid)?;
        for &w in &w_total {
            let _ = writeln!(
                s,
                "{u},{},{},{}",
                fmt(w),
                fmt(c_of_w.eval(w)),
                fmt(c_of_w.derivative(w))
            );
        }
    }
    write_file(out_dir, manifest, "mpc_by_state.csv", s)?;

    manifest
        .residuals
        .insert("clearing".into(), eq.diagnostics.clearing);
    manifest
        .residuals
        .insert("kernel".into(), eq.diagnostics.kernel_residual);
    manifest
        .residuals
        .insert("budget".into(), eq.diagnostics.budget_residual);
    manifest
        .residuals
        .insert("outer".into(), eq.diagnostics.outer_error);
    manifest
        .warnings
        .insert("damping_events".into(), eq.diagnostics.damping_events as u64);
    Ok(())
}

pub fn emit_affine(
    eq: &AffineEquilibrium,
    out_dir: impl AsRef<Path>,
    manifest: &mut RunManifest,
) -> Result<()> {
    let out_dir = out_dir.as_ref();
    let nx = eq.model.n_x();
    let ne = eq.model.n_e();

    let mut s = String::from("a_star");
    for x in 0..nx {
        for u in 0..ne {
            let _ = write!(s, ",a_x{x}_u{u}");
        }
    }
    s.push('\n');
    for (i, &a) in eq.grid.iter().enumerate() {
        let _ = write!(s, "{}", fmt(a));
        for x in 0..nx {
            for u in 0..ne {
                let _ = write!(s, ",{}", fmt(eq.layer.a_fns[x][u].knots_y()[i]));
            }
        }
        s.push('\n');
    }
    write_file(out_dir, manifest, "intercepts.csv", s)?;

    let mut s = String::from("a_star");
    for x in 0..nx {
        let _ = write!(s, ",k_x{x}");
    }
    s.push('\n');
    for (i, &a) in eq.grid.iter().enumerate() {
        let _ = write!(s, "{}", fmt(a));
        for x in 0..nx {
            let _ = write!(s, ",{}", fmt(eq.layer.k_fn[x].knots_y()[i]));
        }
        s.push('\n');
    }
    write_file(out_dir, manifest, "capital.csv", s)?;

    let mut s = String::from("a_star");
    for x in 0..nx {
        for y in 0..nx {
            let _ = write!(s, ",theta_x{x}_to_y{y}");
        }
    }
    s.push('\n');
    for (i, &a) in eq.grid.iter().enumerate() {
        let _ = write!(s, "{}", fmt(a));
        for x in 0..nx {
            for y in 0..nx {
                let _ = write!(s, ",{}", fmt(eq.transports[x][y].knots_y()[i]));
            }
        }
        s.push('\n');
    }
    write_file(out_dir, manifest, "transports.csv", s)?;

    let mut s = String::from("step,dist_a,dist_g,dist_k,dist_theta\n");
    for &(n, da, dg, dk, dth) in &eq.report.trace {
        let _ = writeln!(s, "{n},{},{},{},{}", fmt(da), fmt(dg), fmt(dk), fmt(dth));
    }
    write_file(out_dir, manifest, "convergence.csv", s)?;

    manifest.residuals.insert("dist_a".into(), eq.report.dist_a);
    manifest.residuals.insert("dist_g".into(), eq.report.dist_g);
    manifest.residuals.insert("dist_k".into(), eq.report.dist_k);
    manifest
        .residuals
        .insert("dist_theta".into(), eq.report.dist_theta);
    manifest.warnings.insert(
        "extrapolation_events".into(),
        eq.report.extrapolation_events as u64,
    );
    Ok(())
}

pub fn emit_simpath(
    sim: &SimPath,
    out_dir: impl AsRef<Path>,
    manifest: &mut RunManifest,
) -> Result<()> {
    let out_dir = out_dir.as_ref();
    let ne = sim.group_path.first().map(|g| g.len()).unwrap_or(0);
    let mut s = String::from("t,x_index,a_star");
    for u in 0..ne {
        let _ = write!(s, ",a_u{u}");
    }
    s.push('\n');
    for t in 0..sim.len() {
        let _ = write!(s, "{t},{},{}", sim.x_path[t], fmt(sim.a_star_path[t]));
        for u in 0..ne {
            let _ = write!(s, ",{}", fmt(sim.group_path[t][u]));
        }
        s.push('\n');
    }
    write_file(out_dir, manifest, "path.csv", s)?;
    manifest.seed = Some(sim.seed);
    Ok(())
}

/// Bisection trace plus (optionally) the stationary distributions of the
/// final solution.
pub fn emit_classical_trace(
    trace: &[(f64, f64)],
    solution: Option<&ClassicalSolution>,
    asset_grid: &[f64],
    out_dir: impl AsRef<Path>,
    manifest: &mut RunManifest,
) -> Result<()> {
    let out_dir = out_dir.as_ref();
    let mut s = String::from("trial,rate,demand\n");
    for (i, (r, d)) in trace.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{}", fmt(*r), fmt(*d));
    }
    write_file(out_dir, manifest, "trials.csv", s)?;

    if let Some(sol) = solution {
        let ns = sol.lambda[0].len();
        let mut s = String::from("asset");
        for si in 0..ns {
            let _ = write!(s, ",lambda_s{si}");
        }
        s.push('\n');
        for (ai, &a) in asset_grid.iter().enumerate() {
            let _ = write!(s, "{}", fmt(a));
            for si in 0..ns {
                let _ = write!(s, ",{}", fmt(sol.lambda[ai][si]));
            }
            s.push('\n');
        }
        write_file(out_dir, manifest, "distribution.csv", s)?;
    }
    Ok(())
}
