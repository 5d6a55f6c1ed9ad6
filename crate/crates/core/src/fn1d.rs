//! Monotone one-dimensional function machinery.
//!
//! Every policy function, state transition, CDF and inverse in this crate is
//! carried by the same representation: a shape-preserving piecewise-cubic
//! interpolant (Fritsch–Carlson slope limiting) through strictly increasing
//! knots, continued linearly beyond both ends with the one-sided boundary
//! derivative.  Plain cubic splines can overshoot and lose monotonicity
//! between knots, which would break inversion; the limited slopes cannot.

use crate::error::{Error, Result};

/// Shape-preserving piecewise-cubic interpolant over arbitrary ordinates.
///
/// Preserves the local monotonicity of the data (never overshoots between
/// knots) but places no global monotonicity requirement on it.  Extrapolates
/// linearly with the one-sided derivative at each boundary knot.
#[derive(Debug, Clone)]
pub struct CubicCurve {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl CubicCurve {
    pub fn new(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(Error::validation(format!(
                "interpolant needs two abscissas and matching ordinates, got {} and {}",
                n,
                ys.len()
            )));
        }
        if xs.iter().any(|v| !v.is_finite()) || ys.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("non-finite knot data"));
        }
        for i in 1..n {
            if xs[i] <= xs[i - 1] {
                return Err(Error::validation(format!(
                    "abscissas not strictly increasing at index {i}: {} <= {}",
                    xs[i],
                    xs[i - 1]
                )));
            }
        }
        let slopes = fritsch_carlson_slopes(xs, ys);
        Ok(CubicCurve {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            slopes,
        })
    }

    pub fn knots_x(&self) -> &[f64] {
        &self.xs
    }

    pub fn knots_y(&self) -> &[f64] {
        &self.ys
    }

    /// Abscissa hull `[x_0, x_{n-1}]`.
    pub fn hull(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0] + self.slopes[0] * (x - self.xs[0]);
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1] + self.slopes[n - 1] * (x - self.xs[n - 1]);
        }
        let k = self.segment(x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[k]
            + h10 * h * self.slopes[k]
            + h01 * self.ys[k + 1]
            + h11 * h * self.slopes[k + 1]
    }

    /// First derivative of the interpolant (constant in the extrapolation zones).
    pub fn derivative(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.slopes[0];
        }
        if x >= self.xs[n - 1] {
            return self.slopes[n - 1];
        }
        let k = self.segment(x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let t2 = t * t;
        let dh00 = (6.0 * t2 - 6.0 * t) / h;
        let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
        let dh01 = (-6.0 * t2 + 6.0 * t) / h;
        let dh11 = 3.0 * t2 - 2.0 * t;
        dh00 * self.ys[k]
            + dh10 * self.slopes[k]
            + dh01 * self.ys[k + 1]
            + dh11 * self.slopes[k + 1]
    }

    fn segment(&self, x: f64) -> usize {
        // invariant: xs[0] < x < xs[n-1]
        self.xs.partition_point(|&xi| xi <= x).saturating_sub(1)
    }
}

/// Shape-preserving limited tangents: fourth-order local estimates (the
/// derivative of the cubic through the four nearest knots) clamped into the
/// Fritsch–Carlson monotone region of the adjacent secants.  The clamp keeps
/// every segment free of overshoot; away from extrema it rarely binds, so
/// smooth data keeps near-spline accuracy.
fn fritsch_carlson_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let delta: Vec<f64> = (0..n - 1)
        .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
        .collect();

    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
        return d;
    }
    for i in 0..n {
        d[i] = if n >= 5 {
            // 5-point stencil roughly centered on i (one-sided at the ends)
            let s = i.saturating_sub(2).min(n - 5);
            lagrange_derivative(&xs[s..s + 5], &ys[s..s + 5], xs[i])
        } else if n == 4 {
            lagrange_derivative(xs, ys, xs[i])
        } else {
            // n == 3: parabola through all knots
            parabola_derivative(xs, ys, xs[i])
        };
    }
    // limiter: slope sign must match the adjacent secants, magnitude capped
    // at three times the smaller one
    for i in 0..n {
        let dl = if i > 0 { delta[i - 1] } else { delta[0] };
        let dr = if i + 1 < n { delta[i] } else { delta[n - 2] };
        if dl == 0.0 || dr == 0.0 || dl.signum() != dr.signum() {
            d[i] = 0.0;
        } else {
            let cap = 3.0 * dl.abs().min(dr.abs());
            if d[i].signum() != dl.signum() {
                d[i] = 0.0;
            } else if d[i].abs() > cap {
                d[i] = dl.signum() * cap;
            }
        }
    }
    d
}

/// Derivative at `x` of the Lagrange polynomial through the given points.
fn lagrange_derivative(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let m = xs.len();
    let mut acc = 0.0;
    for j in 0..m {
        let mut denom = 1.0;
        for k in 0..m {
            if k != j {
                denom *= xs[j] - xs[k];
            }
        }
        let mut dl = 0.0;
        for p in 0..m {
            if p == j {
                continue;
            }
            let mut term = 1.0;
            for k in 0..m {
                if k != j && k != p {
                    term *= x - xs[k];
                }
            }
            dl += term;
        }
        acc += ys[j] * dl / denom;
    }
    acc
}

fn parabola_derivative(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let (x0, x1, x2) = (xs[0], xs[1], xs[2]);
    let (y0, y1, y2) = (ys[0], ys[1], ys[2]);
    y0 * (2.0 * x - x1 - x2) / ((x0 - x1) * (x0 - x2))
        + y1 * (2.0 * x - x0 - x2) / ((x1 - x0) * (x1 - x2))
        + y2 * (2.0 * x - x0 - x1) / ((x2 - x0) * (x2 - x1))
}

/// Grid-sampled strictly increasing function of one variable.
///
/// Strict monotonicity holds everywhere on the real line, not only at knots:
/// the limited interpolant cannot overshoot, and the linear continuation uses
/// a strictly positive boundary slope (falling back to the boundary secant
/// when the limiter returns zero there).
#[derive(Debug, Clone)]
pub struct MonotoneFn1D {
    curve: CubicCurve,
}

impl MonotoneFn1D {
    /// Build from strictly increasing `xs` and strictly increasing `ys`.
    /// Rejects non-monotone ordinates naming the first offending index.
    pub fn build(xs: &[f64], ys: &[f64]) -> Result<Self> {
        for i in 1..ys.len() {
            if ys[i] <= ys[i - 1] {
                return Err(Error::Construction(format!(
                    "ordinates not strictly increasing at index {i}: {} <= {}",
                    ys[i],
                    ys[i - 1]
                )));
            }
        }
        let mut curve = CubicCurve::new(xs, ys)?;
        // Strict monotonicity needs the derivative bounded away from zero
        // everywhere, not just nonnegative.  Two adjustments to the limited
        // tangents achieve that: floor knot slopes at 0.01 of the adjacent
        // secants (a zero knot tangent gives the inverse a cube-root point),
        // and cap them at 2.5 of the secant instead of 3 — at the (3,3)
        // corner of the monotone region the cubic's derivative touches zero
        // mid-segment, while slopes within 2.5 of the secant keep it above a
        // quarter of the secant throughout.
        let n = curve.xs.len();
        let secant =
            |i: usize| (curve.ys[i + 1] - curve.ys[i]) / (curve.xs[i + 1] - curve.xs[i]);
        for i in 0..n {
            let bound = if i == 0 {
                secant(0)
            } else if i + 1 == n {
                secant(n - 2)
            } else {
                secant(i - 1).min(secant(i))
            };
            curve.slopes[i] = curve.slopes[i].clamp(0.01 * bound, 2.5 * bound);
        }
        Ok(MonotoneFn1D { curve })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.curve.eval(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.curve.derivative(x)
    }

    pub fn knots_x(&self) -> &[f64] {
        self.curve.knots_x()
    }

    pub fn knots_y(&self) -> &[f64] {
        self.curve.knots_y()
    }

    pub fn hull(&self) -> (f64, f64) {
        self.curve.hull()
    }

    /// Range `[f(x_0), f(x_{n-1})]` spanned over the abscissa hull.
    pub fn range(&self) -> (f64, f64) {
        (self.curve.ys[0], *self.curve.ys.last().unwrap())
    }

    /// Inverse function sampled on a uniform grid over this function's range.
    /// The grid has as many points as the source grid.
    pub fn invert(&self) -> Result<MonotoneFn1D> {
        self.invert_with_grid(self.curve.xs.len())
    }

    /// Inverse on a uniform range grid of `n` points, merged with the swapped
    /// original knots `(f(x_i), x_i)` and adaptively refined until the
    /// round-trip error clears the monotone-inversion contract.  All inverse
    /// ordinates are solved to near machine precision, so the knots are exact
    /// and refinement only fights interpolation error between them.
    pub fn invert_with_grid(&self, n: usize) -> Result<MonotoneFn1D> {
        let n = n.max(2);
        let (y_lo, y_hi) = self.range();
        let (x_lo, x_hi) = self.hull();
        let gap = 1e-9 * (y_hi - y_lo);
        // exact swapped knots first, then uniform fill-ins away from them
        let mut pairs: Vec<(f64, f64)> = self
            .curve
            .ys
            .iter()
            .copied()
            .zip(self.curve.xs.iter().copied())
            .collect();
        let step = (y_hi - y_lo) / (n - 1) as f64;
        for i in 1..n - 1 {
            let y = y_lo + step * i as f64;
            if pairs.iter().all(|&(yk, _)| (yk - y).abs() > gap) {
                pairs.push((y, self.solve_for(y)));
            }
        }
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        // refine where the interpolated inverse misses the exact one
        let tol = 1e-7 * (x_hi - x_lo);
        let knot_budget = 64 * pairs.len();
        for _ in 0..16 {
            let xs_inv: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let ys_inv: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let inv = MonotoneFn1D::build(&xs_inv, &ys_inv)?;
            let mut inserts: Vec<(f64, f64)> = Vec::new();
            for w in pairs.windows(2) {
                if w[1].0 - w[0].0 < gap {
                    continue;
                }
                for frac in [0.5, 0.25, 0.75] {
                    let ym = w[0].0 + frac * (w[1].0 - w[0].0);
                    let exact = self.solve_for(ym);
                    if (inv.eval(ym) - exact).abs() > 0.25 * tol {
                        inserts.push((ym, exact));
                        break;
                    }
                }
            }
            if inserts.is_empty() || pairs.len() + inserts.len() > knot_budget {
                break;
            }
            pairs.extend(inserts);
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        }

        let xs_inv: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let ys_inv: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        MonotoneFn1D::build(&xs_inv, &ys_inv)
    }

    /// Solve `f(x) = y` exactly (bisection to ~1 ulp of the hull width).
    /// Values beyond the range resolve through the linear continuation.
    pub fn solve_for(&self, y: f64) -> f64 {
        let (y_lo, y_hi) = self.range();
        let n = self.curve.xs.len();
        if y <= y_lo {
            return self.curve.xs[0] + (y - y_lo) / self.curve.slopes[0];
        }
        if y >= y_hi {
            return self.curve.xs[n - 1] + (y - y_hi) / self.curve.slopes[n - 1];
        }
        // locate the knot segment by ordinate, then bisect within it
        let k = self.curve.ys.partition_point(|&yi| yi <= y).saturating_sub(1);
        let (mut lo, mut hi) = (self.curve.xs[k], self.curve.xs[k + 1]);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.curve.eval(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Access the underlying curve (shared plotting/export path).
    pub fn as_curve(&self) -> &CubicCurve {
        &self.curve
    }
}

/// Nondecreasing grid function clamped to `[0, 1]` — the CDF carrier.
///
/// Distribution functions routinely flatten where the density vanishes, so
/// ties between consecutive ordinates are allowed; the limited interpolant
/// keeps the flat stretches flat.  Evaluation clamps to `[0, 1]` and treats
/// everything outside the hull as constant head/tail mass.
#[derive(Debug, Clone)]
pub struct Cdf {
    curve: CubicCurve,
    /// Abscissa at which the head mass is anchored to zero.  When absent the
    /// head fades over one knot spacing below the hull.
    floor_x: Option<f64>,
}

impl Cdf {
    /// CDF with its head anchored at `floor_x`: below the first knot the
    /// function falls linearly to zero at the anchor (the natural carrier
    /// for distributions supported on an interval with a known left end).
    pub fn with_floor(xs: &[f64], ps: &[f64], floor_x: f64) -> Result<Self> {
        if floor_x >= xs[0] {
            return Err(Error::validation(format!(
                "floor {floor_x} must sit strictly below the first knot {}",
                xs[0]
            )));
        }
        let mut cdf = Cdf::new(xs, ps)?;
        cdf.floor_x = Some(floor_x);
        Ok(cdf)
    }

    pub fn new(xs: &[f64], ps: &[f64]) -> Result<Self> {
        for (i, &p) in ps.iter().enumerate() {
            if !(-1e-9..=1.0 + 1e-9).contains(&p) {
                return Err(Error::validation(format!(
                    "CDF ordinate {p} out of [0,1] at index {i}"
                )));
            }
            if i > 0 && p < ps[i - 1] - 1e-12 {
                return Err(Error::validation(format!(
                    "CDF ordinates decrease at index {i}"
                )));
            }
        }
        // collapse tiny negative steps introduced by rounding
        let mut clean = ps.to_vec();
        for i in 1..clean.len() {
            if clean[i] < clean[i - 1] {
                clean[i] = clean[i - 1];
            }
        }
        for p in clean.iter_mut() {
            *p = p.clamp(0.0, 1.0);
        }
        Ok(Cdf {
            curve: CubicCurve::new(xs, &clean)?,
            floor_x: None,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.curve.hull();
        if x < lo {
            // below the hull the head fades linearly: down to the anchored
            // floor when one is set, otherwise over one knot spacing (the
            // limit semantics of an atom at the first knot, kept continuous
            // so transition maps landing a rounding error below the hull do
            // not see a jump)
            let w = match self.floor_x {
                Some(fx) => lo - fx,
                None => self.curve.xs[1] - self.curve.xs[0],
            };
            let ramp = 1.0 - (lo - x) / w;
            return (self.curve.ys[0] * ramp.max(0.0)).clamp(0.0, 1.0);
        }
        if x >= hi {
            return self.curve.ys.last().unwrap().min(1.0).max(0.0);
        }
        self.curve.eval(x).clamp(0.0, 1.0)
    }

    pub fn knots_x(&self) -> &[f64] {
        self.curve.knots_x()
    }

    pub fn knots_p(&self) -> &[f64] {
        self.curve.knots_y()
    }

    pub fn hull(&self) -> (f64, f64) {
        self.curve.hull()
    }

    /// Generalized inverse (quantile function) at probability `p`,
    /// clamped to the abscissa hull.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let (lo, hi) = self.curve.hull();
        let ps = self.curve.knots_y();
        let n = ps.len();
        if p <= ps[0] {
            return lo;
        }
        if p >= ps[n - 1] {
            return hi;
        }
        let k = ps.partition_point(|&pi| pi <= p).saturating_sub(1);
        // skip flat stretches: find the next knot with a strictly larger ordinate
        let mut j = k + 1;
        while j < n - 1 && ps[j] <= ps[k] {
            j += 1;
        }
        let (mut a, mut b) = (self.curve.xs[k], self.curve.xs[j]);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if self.curve.eval(mid) < p {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    /// Mean of the distribution via quantile-space quadrature.
    pub fn mean(&self, quad_points: usize) -> f64 {
        stieltjes_quantile(self, |c| c, quad_points)
    }
}

/// Composite trapezoid in quantile space: `∫ g dF = ∫_0^1 g(F⁻¹(p)) dp`.
/// Robust to steep CDF segments because the p-grid is uniform regardless of
/// how the mass is packed.
pub fn stieltjes_quantile(cdf: &Cdf, g: impl Fn(f64) -> f64, points: usize) -> f64 {
    let n = points.max(2);
    let h = 1.0 / (n - 1) as f64;
    let mut sum = 0.0;
    for i in 0..n {
        let p = if i + 1 == n { 1.0 } else { h * i as f64 };
        let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
        sum += w * g(cdf.quantile(p));
    }
    sum * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_knots_exact_and_linear_extrapolation() {
        let f = MonotoneFn1D::build(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]).unwrap();
        for (i, &x) in f.knots_x().iter().enumerate() {
            assert_eq!(f.eval(x), f.knots_y()[i]);
        }
        assert!((f.eval(1.5) - 1.5).abs() < 1e-14);
        // slope-1 extrapolation on both sides
        assert!((f.eval(-3.0) + 3.0).abs() < 1e-14);
        assert!((f.eval(5.0) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_monotone_ordinates_with_index() {
        let err = MonotoneFn1D::build(&[0.0, 1.0, 2.0], &[0.0, 2.0, 1.0]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("index 2"), "unexpected message: {msg}");
    }

    #[test]
    fn cubic_data_strictly_monotone_between_knots() {
        // x^3 sampled coarsely; dense sampling must stay strictly increasing
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [0.0, 1.0, 8.0, 27.0];
        let f = MonotoneFn1D::build(&xs, &ys).unwrap();
        for (x, y) in xs.iter().zip(ys.iter()) {
            assert!((f.eval(*x) - y).abs() < 1e-12);
        }
        let mut prev = f.eval(-1.0);
        for i in 1..=1000 {
            let x = -1.0 + 5.0 * i as f64 / 1000.0;
            let y = f.eval(x);
            assert!(y > prev, "not strictly increasing at x={x}");
            prev = y;
        }
    }

    #[test]
    fn exp_samples_interpolate_to_1e5() {
        // 21 samples of exp on [0,2]; compare against exp on a dense grid
        let n = 21;
        let xs: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 / (n - 1) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        let f = MonotoneFn1D::build(&xs, &ys).unwrap();
        let mut worst = 0.0f64;
        for i in 0..=2000 {
            let x = 2.0 * i as f64 / 2000.0;
            worst = worst.max((f.eval(x) - x.exp()).abs());
        }
        assert!(worst < 1e-5, "max interpolation error {worst}");
    }

    #[test]
    fn invert_linear_is_exact() {
        let xs: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let f = MonotoneFn1D::build(&xs, &ys).unwrap();
        let inv = f.invert().unwrap();
        for i in 0..=20 {
            let y = 2.0 * i as f64 / 20.0;
            assert!((inv.eval(y) - y / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn invert_identity_is_identity() {
        let xs: Vec<f64> = (0..9).map(|i| 0.5 + i as f64).collect();
        let f = MonotoneFn1D::build(&xs, &xs).unwrap();
        let inv = f.invert().unwrap();
        for i in 0..=50 {
            let x = 0.5 + 8.0 * i as f64 / 50.0;
            assert!((inv.eval(x) - x).abs() < 1e-10);
        }
    }

    #[test]
    fn round_trip_through_random_monotone_data() {
        // deterministic "random" increasing data
        let mut xs = vec![0.0];
        let mut ys = vec![1.0];
        let mut state = 0x9e3779b97f4a7c15u64;
        for _ in 0..24 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let dx = 0.05 + (state >> 40) as f64 / (1u64 << 24) as f64;
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let dy = 0.05 + (state >> 40) as f64 / (1u64 << 24) as f64;
            xs.push(xs.last().unwrap() + dx);
            ys.push(ys.last().unwrap() + dy);
        }
        let f = MonotoneFn1D::build(&xs, &ys).unwrap();
        let inv = f.invert_with_grid(4 * xs.len()).unwrap();
        let (lo, hi) = f.hull();
        let width = hi - lo;
        let mut worst = 0.0f64;
        for i in 0..=1000 {
            let x = lo + width * i as f64 / 1000.0;
            worst = worst.max((inv.eval(f.eval(x)) - x).abs());
        }
        assert!(worst < 1e-6 * width, "round-trip error {worst}");
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let xs: Vec<f64> = (0..15).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (0.5 * x).exp()).collect();
        let f = MonotoneFn1D::build(&xs, &ys).unwrap();
        for i in 0..=40 {
            let x = 0.2 + 4.0 * i as f64 / 40.0;
            let h = 1e-6;
            let fd = (f.eval(x + h) - f.eval(x - h)) / (2.0 * h);
            assert!((f.derivative(x) - fd).abs() < 1e-5);
        }
    }

    #[test]
    fn cdf_clamps_and_quantile_inverts() {
        let xs: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let ps: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let cdf = Cdf::new(&xs, &ps).unwrap();
        assert_eq!(cdf.eval(0.0), 0.0);
        assert_eq!(cdf.eval(0.1), 0.1);
        assert_eq!(cdf.eval(99.0), 1.0);
        for i in 2..=9 {
            let p = i as f64 / 10.0;
            assert!((cdf.quantile(p) - p).abs() < 1e-9);
        }
        // uniform on ~]0,1]: mean approaches 0.55 for this knot set (head mass at 0.1)
        let mean = cdf.mean(512);
        assert!((mean - 0.505).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn cdf_tolerates_flat_segments() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ps = [0.0, 0.4, 0.4, 0.4, 1.0];
        let cdf = Cdf::new(&xs, &ps).unwrap();
        assert!((cdf.eval(2.0) - 0.4).abs() < 1e-12);
        assert!(cdf.eval(2.5) >= 0.4 - 1e-12);
        assert!(cdf.eval(3.5) <= 1.0);
        // quantile at 0.4 lands inside the flat stretch; both ends acceptable
        let q = cdf.quantile(0.4);
        assert!((1.0..=3.0).contains(&q));
    }
}
