//! Exogenous model structure: preferences, technology, and the Markov shock
//! primitives shared by every solver, plus the Jacobian-positivity utility
//! used to certify strict monotonicity of consumption in entering wealth.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ROW_STOCHASTIC_TOL: f64 = 1e-12;
pub const PSI_STATIONARY_TOL: f64 = 1e-10;
pub const SYNC_TOL: f64 = 1e-6;

/// CRRA preferences.  `risk_aversion = 1` means logarithmic utility; utility
/// evaluates to −∞ for nonpositive consumption by convention.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Preferences {
    pub beta: f64,
    pub risk_aversion: f64,
}

impl Preferences {
    pub fn new(beta: f64, risk_aversion: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::validation(format!("beta must be in (0,1), got {beta}")));
        }
        if risk_aversion < 1.0 {
            return Err(Error::validation(format!(
                "risk_aversion must be >= 1, got {risk_aversion}"
            )));
        }
        Ok(Preferences {
            beta,
            risk_aversion,
        })
    }

    pub fn utility(&self, c: f64) -> f64 {
        if c <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if (self.risk_aversion - 1.0).abs() < 1e-14 {
            c.ln()
        } else {
            (c.powf(1.0 - self.risk_aversion) - 1.0) / (1.0 - self.risk_aversion)
        }
    }

    /// Marginal utility `∂U(c) = c^{-R}`.
    pub fn marginal_utility(&self, c: f64) -> f64 {
        if c <= 0.0 {
            f64::INFINITY
        } else {
            c.powf(-self.risk_aversion)
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Technology {
    /// Capital share of output.
    pub alpha: f64,
    /// Depreciation per period.
    pub delta: f64,
    /// Primordial average capital endowment, used to seed period-0 paychecks.
    pub k_primordial: f64,
}

impl Technology {
    pub fn new(alpha: f64, delta: f64, k_primordial: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::validation(format!("alpha must be in (0,1), got {alpha}")));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::validation(format!("delta must be in (0,1], got {delta}")));
        }
        if k_primordial <= 0.0 {
            return Err(Error::validation(format!(
                "k_primordial must be positive, got {k_primordial}"
            )));
        }
        Ok(Technology {
            alpha,
            delta,
            k_primordial,
        })
    }
}

/// Aggregate productivity chain: TFP values with their transition matrix and
/// the derived steady-state probabilities (always computed, never supplied,
/// so the pair cannot disagree).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProductivitySpec {
    pub states: Vec<f64>,
    pub q_matrix: Vec<Vec<f64>>,
    pub psi: Vec<f64>,
}

impl ProductivitySpec {
    pub fn new(states: Vec<f64>, q_matrix: Vec<Vec<f64>>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::validation("productivity states empty"));
        }
        if states.iter().any(|&x| x <= 0.0) {
            return Err(Error::validation("productivity states must be positive"));
        }
        validate_row_stochastic(&q_matrix, states.len(), "Q")?;
        let psi = stationary_distribution_rows(&q_matrix)?;
        Ok(ProductivitySpec {
            states,
            q_matrix,
            psi,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Idiosyncratic employment chain(s).  `p_matrices[x][y]` governs individual
/// transitions when productivity moves from state `x` to state `y`;
/// `pi_by_x[x]` is the synchronized population distribution attached to `x`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EmploymentSpec {
    pub states: Vec<f64>,
    pub p_matrices: Vec<Vec<Vec<Vec<f64>>>>,
    pub pi_by_x: Vec<Vec<f64>>,
}

impl EmploymentSpec {
    /// Single-chain constructor (no aggregate risk): one transition matrix,
    /// its stationary vector attached to the single pseudo productivity state.
    pub fn single(states: Vec<f64>, p: Vec<Vec<f64>>) -> Result<Self> {
        validate_employment_states(&states)?;
        validate_row_stochastic(&p, states.len(), "P")?;
        let pi = stationary_distribution_rows(&p)?;
        Ok(EmploymentSpec {
            states,
            p_matrices: vec![vec![p]],
            pi_by_x: vec![pi],
        })
    }

    /// Full constructor with per-(x,y) matrices; `pi_by_x` is derived from the
    /// synchronization requirement: pi_x is the stationary vector of P_{x,x}.
    pub fn synchronized(states: Vec<f64>, p_matrices: Vec<Vec<Vec<Vec<f64>>>>) -> Result<Self> {
        validate_employment_states(&states)?;
        let nx = p_matrices.len();
        let mut pi_by_x = Vec::with_capacity(nx);
        for (x, row) in p_matrices.iter().enumerate() {
            if row.len() != nx {
                return Err(Error::validation(format!(
                    "P matrix table is not square: row {x} has {} entries, expected {nx}",
                    row.len()
                )));
            }
            for (y, p) in row.iter().enumerate() {
                validate_row_stochastic(p, states.len(), &format!("P[{x}][{y}]"))?;
            }
            pi_by_x.push(stationary_distribution_rows(&row[x])?);
        }
        let spec = EmploymentSpec {
            states,
            p_matrices,
            pi_by_x,
        };
        let residual = sync_consistency_residual(&spec)?;
        if residual > SYNC_TOL {
            return Err(Error::validation(format!(
                "employment chains not synchronized: max |pi_x P_xy - pi_y| = {residual:e} > {SYNC_TOL:e}"
            )));
        }
        Ok(spec)
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn p(&self, x: usize, y: usize) -> &Vec<Vec<f64>> {
        &self.p_matrices[x][y]
    }
}

fn validate_employment_states(states: &[f64]) -> Result<()> {
    if states.is_empty() {
        return Err(Error::validation("employment states empty"));
    }
    if states.iter().any(|&u| u < 0.0) {
        return Err(Error::validation("employment states must be nonnegative"));
    }
    Ok(())
}

/// Full economy parameterization.  Exactly one of `technology` (production
/// economies, §-with-capital solvers) and `wage` (pure-credit economies) is
/// present.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelSpec {
    pub preferences: Preferences,
    pub technology: Option<Technology>,
    pub productivity: Option<ProductivitySpec>,
    pub employment: EmploymentSpec,
    pub wage: Option<f64>,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match (&self.technology, &self.wage) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => {
                return Err(Error::validation(
                    "exactly one of technology and wage must be present",
                ))
            }
        }
        if let Some(w) = self.wage {
            if w <= 0.0 {
                return Err(Error::validation(format!("wage must be positive, got {w}")));
            }
        }
        if let Some(prod) = &self.productivity {
            if self.employment.p_matrices.len() != prod.len() {
                return Err(Error::validation(format!(
                    "P matrix table size {} does not match productivity states {}",
                    self.employment.p_matrices.len(),
                    prod.len()
                )));
            }
        } else if self.employment.p_matrices.len() != 1 {
            return Err(Error::validation(
                "no productivity chain, but more than one employment transition matrix",
            ));
        }
        Ok(())
    }
}

fn validate_row_stochastic(m: &[Vec<f64>], n: usize, name: &str) -> Result<()> {
    if m.len() != n {
        return Err(Error::validation(format!(
            "{name}: expected {n} rows, got {}",
            m.len()
        )));
    }
    for (i, row) in m.iter().enumerate() {
        if row.len() != n {
            return Err(Error::validation(format!(
                "{name}: row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        if row.iter().any(|&p| p <= 0.0) {
            return Err(Error::validation(format!(
                "{name}: row {i} has a nonpositive entry"
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_STOCHASTIC_TOL {
            return Err(Error::validation(format!(
                "{name}: row {i} sums to {sum}, not 1"
            )));
        }
    }
    Ok(())
}

/// Stationary probabilities of a row-stochastic matrix: direct linear solve
/// of `(Pᵀ − I)π = 0` with the normalization `Σπ = 1` replacing one row;
/// falls back to power iteration if the solve degenerates.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = p.nrows();
    if p.ncols() != n || n == 0 {
        return Err(Error::validation("stationary_distribution: matrix not square"));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| p[(i, j)]).collect())
        .collect();
    validate_row_stochastic(&rows, n, "P")?;
    stationary_distribution_rows(&rows)
}

pub fn stationary_distribution_rows(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = p.len();
    validate_row_stochastic(p, n, "P")?;
    // (Pᵀ − I) with the last row replaced by the normalization
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = p[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = nalgebra::DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    if let Some(sol) = a.lu().solve(&b) {
        let pi: Vec<f64> = sol.iter().copied().collect();
        if pi.iter().all(|&x| x > 0.0) && residual_stationary(p, &pi) < PSI_STATIONARY_TOL {
            return Ok(pi);
        }
    }
    // power iteration fallback
    let mut pi = vec![1.0 / n as f64; n];
    for it in 0..200_000 {
        let mut next = vec![0.0; n];
        for (u, row) in p.iter().enumerate() {
            for (v, &pv) in row.iter().enumerate() {
                next[v] += pi[u] * pv;
            }
        }
        let sum: f64 = next.iter().sum();
        for x in next.iter_mut() {
            *x /= sum;
        }
        let diff = next
            .iter()
            .zip(pi.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        pi = next;
        if diff < 1e-15 {
            return Ok(pi);
        }
        if it == 199_999 {
            return Err(Error::NonConvergence {
                what: "stationary distribution power iteration".into(),
                residual: diff,
                iterations: it + 1,
            });
        }
    }
    Ok(pi)
}

fn residual_stationary(p: &[Vec<f64>], pi: &[f64]) -> f64 {
    let n = p.len();
    let mut worst = 0.0f64;
    for v in 0..n {
        let mut acc = 0.0;
        for u in 0..n {
            acc += pi[u] * p[u][v];
        }
        worst = worst.max((acc - pi[v]).abs());
    }
    worst
}

/// Max-norm of `pi_x P_{x,y} − pi_y` over all ordered pairs `(x, y)`.
/// Zero means the population employment distribution stays pinned to `pi_x`
/// whenever productivity is `x`.
pub fn sync_consistency_residual(employment: &EmploymentSpec) -> Result<f64> {
    let nx = employment.p_matrices.len();
    let ne = employment.n_states();
    if employment.pi_by_x.len() != nx {
        return Err(Error::validation(format!(
            "pi table has {} rows, expected {nx}",
            employment.pi_by_x.len()
        )));
    }
    let mut worst = 0.0f64;
    for x in 0..nx {
        if employment.pi_by_x[x].len() != ne {
            return Err(Error::validation(format!("pi[{x}] has wrong length")));
        }
        for y in 0..nx {
            let p = employment.p(x, y);
            for v in 0..ne {
                let mut acc = 0.0;
                for u in 0..ne {
                    acc += employment.pi_by_x[x][u] * p[u][v];
                }
                worst = worst.max((acc - employment.pi_by_x[y][v]).abs());
            }
        }
    }
    Ok(worst)
}

/// Average labor `L(π) = Σ_u u·π(u)`.
pub fn average_labor(pi: &[f64], states: &[f64]) -> f64 {
    pi.iter().zip(states.iter()).map(|(p, u)| p * u).sum()
}

/// Cobb–Douglas factor returns realized on average capital `k` at TFP `y`
/// with average labor `l`:
/// `rho = y·α·(k/l)^{α−1}`, `eps = y·(1−α)·(k/l)^{α}`.
pub fn factor_returns(k: f64, y: f64, l: f64, tech: &Technology) -> Result<(f64, f64)> {
    if k <= 0.0 {
        return Err(Error::domain(format!("capital must be positive, got {k}")));
    }
    if l <= 0.0 {
        return Err(Error::domain(format!("labor must be positive, got {l}")));
    }
    if y <= 0.0 {
        return Err(Error::domain(format!("TFP must be positive, got {y}")));
    }
    let ratio = k / l;
    let rho = y * tech.alpha * ratio.powf(tech.alpha - 1.0);
    let eps = y * (1.0 - tech.alpha) * ratio.powf(tech.alpha);
    Ok((rho, eps))
}

/// Determinant of the 3×3 KKT Jacobian block:
/// `(Σa²)(Σb²) − (Σab)² − ∂²U(c)·Σ(a−b)²`.
///
/// Nonnegative whenever `∂²U < 0`, with equality exactly when the two payoff
/// lists coincide elementwise (the degenerate case excluded by the model).
pub fn kkt_jacobian_det(a_terms: &[f64], b_terms: &[f64], d2u: f64) -> Result<f64> {
    if a_terms.is_empty() || a_terms.len() != b_terms.len() {
        return Err(Error::validation(format!(
            "payoff lists must be nonempty and equal length, got {} and {}",
            a_terms.len(),
            b_terms.len()
        )));
    }
    if d2u >= 0.0 {
        return Err(Error::validation(format!("d2u must be negative, got {d2u}")));
    }
    let sa2: f64 = a_terms.iter().map(|a| a * a).sum();
    let sb2: f64 = b_terms.iter().map(|b| b * b).sum();
    let sab: f64 = a_terms.iter().zip(b_terms).map(|(a, b)| a * b).sum();
    let sdiff2: f64 = a_terms
        .iter()
        .zip(b_terms)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sa2 * sb2 - sab * sab - d2u * sdiff2)
}
