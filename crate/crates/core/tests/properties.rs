//! Property suites that need no presets: transport mass conservation,
//! monotone inversion round trips, Jacobian positivity, the recombination
//! identity between group and total mean transports, and the no-trade
//! equilibrium.

use proptest::prelude::*;

use hamlab_core::fn1d::{Cdf, MonotoneFn1D};
use hamlab_core::huggett::{self, transport_apply, HuggettSpec, SolverOptions};
use hamlab_core::ksaffine::{group_mean_transport, mean_transport, solve_intercepts, KsModel};
use hamlab_core::model::{kkt_jacobian_det, stationary_distribution_rows, Technology};

fn increasing_vec(seed: &[f64], lo_step: f64) -> Vec<f64> {
    let mut acc = 0.0;
    seed.iter()
        .map(|&s| {
            acc += lo_step + s.abs();
            acc
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn monotone_round_trip_inversion(
        raw_x in prop::collection::vec(0.01f64..1.0, 8..24),
        raw_y in prop::collection::vec(0.01f64..1.0, 8..24),
    ) {
        let n = raw_x.len().min(raw_y.len());
        let xs = increasing_vec(&raw_x[..n], 0.02);
        let ys = increasing_vec(&raw_y[..n], 0.02);
        let f = MonotoneFn1D::build(&xs, &ys).unwrap();
        let inv = f.invert().unwrap();
        let (lo, hi) = f.hull();
        let width = hi - lo;
        for i in 0..=200 {
            let x = lo + width * i as f64 / 200.0;
            let back = inv.eval(f.eval(x));
            prop_assert!(
                (back - x).abs() < 1e-6 * width,
                "round trip error {} at x={}", (back - x).abs(), x
            );
        }
    }

    #[test]
    fn jacobian_determinant_positive_unless_degenerate(
        a in prop::collection::vec(0.05f64..10.0, 2..12),
        b_shift in prop::collection::vec(-3.0f64..3.0, 2..12),
        d2u in -50.0f64..-1e-3,
    ) {
        let n = a.len().min(b_shift.len());
        let a = &a[..n];
        let b: Vec<f64> = a.iter().zip(&b_shift[..n]).map(|(x, s)| (x + s).abs() + 1e-3).collect();
        let det = kkt_jacobian_det(a, &b, d2u).unwrap();
        prop_assert!(det >= 0.0, "negative determinant {det}");
        let degenerate = a.iter().zip(&b).all(|(x, y)| x == y);
        if !degenerate {
            prop_assert!(det > 0.0, "zero determinant for distinct payoffs");
        }
    }

    #[test]
    fn transport_conserves_mass_every_iterate(
        p_raw in prop::collection::vec(0.05f64..1.0, 4),
        shifts in prop::collection::vec(0.0f64..0.3, 4),
        slopes in prop::collection::vec(0.55f64..0.95, 4),
    ) {
        // 2-state chain, strictly positive rows
        let p = vec![
            vec![p_raw[0] / (p_raw[0] + p_raw[1]), p_raw[1] / (p_raw[0] + p_raw[1])],
            vec![p_raw[2] / (p_raw[2] + p_raw[3]), p_raw[3] / (p_raw[2] + p_raw[3])],
        ];
        let pi = stationary_distribution_rows(&p).unwrap();
        let n = 64;
        let c_bar = 2.0;
        let grid: Vec<f64> = (1..=n).map(|i| c_bar * i as f64 / n as f64).collect();
        // transitions fixing the grid top from above: T(c_bar) <= c_bar
        let mk = |a: f64, s: f64| {
            let ys: Vec<f64> = grid.iter().map(|&c| a + s * c).collect();
            MonotoneFn1D::build(&grid, &ys).unwrap()
        };
        let mut tinv = Vec::new();
        for u in 0..2 {
            let mut row = Vec::new();
            for v in 0..2 {
                let slope = slopes[2 * u + v];
                let icept = shifts[2 * u + v].min((1.0 - slope) * c_bar);
                row.push(mk(icept, slope).invert_with_grid(n).unwrap());
            }
            tinv.push(row);
        }
        let vals: Vec<f64> = grid.iter().map(|&c| c / c_bar).collect();
        let mut f: Vec<Cdf> = (0..2).map(|_| Cdf::with_floor(&grid, &vals, 0.0).unwrap()).collect();
        for _ in 0..5 {
            f = transport_apply(&f, &tinv, &pi, &p, &grid).unwrap();
            for cdf in &f {
                let total = cdf.eval(c_bar);
                prop_assert!((total - 1.0).abs() < 1e-9, "mass {total}");
            }
        }
    }

    #[test]
    fn recombination_identity_total_vs_groups(
        k in 5.0f64..30.0,
        a_vec in prop::collection::vec(0.4f64..1.4, 2),
        b_next in 0.0f64..90.0,
        a_next_base in -60.0f64..0.0,
    ) {
        let model = ks_like_model();
        let x = 0;
        let a_next = |y: usize, v: usize| a_next_base - 3.0 * y as f64 - 7.0 * v as f64;
        let (_, g) = solve_intercepts(x, k, &a_next, b_next, &model).unwrap();
        let a_star: f64 = model.pi_x[x].iter().zip(&a_vec).map(|(p, a)| p * a).sum();
        let total = mean_transport(x, a_star, k, &g, &model).unwrap();
        for y in 0..model.n_x() {
            let h = model.beta * model.gross_return(y, k).unwrap();
            let groups = group_mean_transport(x, y, &a_vec, &g, h, &model);
            let recombined: f64 = model.pi_x[y].iter().zip(&groups).map(|(p, a)| p * a).sum();
            prop_assert!(
                (recombined - total[y]).abs() < 1e-10 * total[y].abs().max(1.0),
                "y={y}: {recombined} vs {}", total[y]
            );
        }
    }
}

fn ks_like_model() -> KsModel {
    let p11 = vec![vec![35.0 / 36.0, 1.0 / 36.0], vec![2.0 / 3.0, 1.0 / 3.0]];
    let p12 = vec![vec![89.0 / 96.0, 7.0 / 96.0], vec![0.25, 0.75]];
    let p21 = vec![vec![59.0 / 60.0, 1.0 / 60.0], vec![0.75, 0.25]];
    let p22 = vec![vec![43.0 / 45.0, 2.0 / 45.0], vec![0.4, 0.6]];
    KsModel {
        beta: 0.99,
        tech: Technology::new(0.36, 0.025, 11.5).unwrap(),
        x_states: vec![1.01, 0.99],
        q: vec![vec![0.875, 0.125], vec![0.125, 0.875]],
        e_states: vec![0.3271, 0.0],
        p: vec![vec![p11, p12], vec![p21, p22]],
        pi_x: vec![vec![0.96, 0.04], vec![0.9, 0.1]],
        labor: vec![0.314016, 0.29439],
    }
}

#[test]
fn autarky_no_trade_equilibrium() {
    let spec = HuggettSpec::new(
        vec![0.7, 0.7, 0.7],
        vec![
            vec![0.5, 0.3, 0.2],
            vec![0.25, 0.5, 0.25],
            vec![0.2, 0.3, 0.5],
        ],
        1.0,
        0.93,
        2.0,
    )
    .unwrap();
    let eq = huggett::solve_equilibrium(
        &spec,
        spec.face_value,
        |_, c| 2.0 * c - 0.7,
        &SolverOptions::default(),
    )
    .unwrap();
    let beta_a = spec.beta * spec.face_value;
    assert!(
        (eq.bond_price - beta_a).abs() <= 1e-9 * beta_a,
        "B = {} vs beta*A = {beta_a}",
        eq.bond_price
    );
    assert!(eq.diagnostics.clearing.abs() <= 1e-9);
    assert!(eq
        .theta
        .iter()
        .all(|t| t.eval(eq.c_bar).abs() <= 1e-9), "theta not ~0");
    assert!(eq.diagnostics.kernel_residual <= 1e-9);
    assert!(eq.diagnostics.budget_residual <= 1e-9);
}
