//! Structural properties of the mesh, the operators, the solver and the
//! config format, checked on randomly generated inputs.

#![allow(clippy::needless_range_loop)]

use std::sync::Arc;

use proptest::prelude::*;

use relaxrd::findiff::{fill_ghosts, gradient, StencilTable};
use relaxrd::harness::{convergence_study, error_norm, Norm, Reference};
use relaxrd::mesh::restrict_to_coarse;
use relaxrd::models::{frog_reaction, genfk_exact, genfk_speed, heat_problem, FrogParameters};
use relaxrd::reconstruct::{weno_weights, Reconstructor, WENO3_LINEAR_WEIGHTS, WENO5_LINEAR_WEIGHTS};
use relaxrd::relax::characteristic_split;
use relaxrd::{
    make_grid, parse_config, BoundaryPair, Field, Grid1D, PhiPolicy, Problem, ReconstructionKind, SchemeConfig,
    Simulation, Solver, Tableau,
};

const EPS: f64 = f64::EPSILON;

fn all_kinds() -> Vec<ReconstructionKind> {
    let mut kinds = vec![ReconstructionKind::Constant];
    kinds.extend((2..=6).map(ReconstructionKind::Eno));
    kinds.extend([ReconstructionKind::Weno(3), ReconstructionKind::Weno(5)]);
    kinds
}

fn kind_strategy() -> impl Strategy<Value = ReconstructionKind> {
    prop::sample::select(all_kinds())
}

/// Smooth periodic data on [0, 1]: a constant plus a few random modes.
fn fourier(coeffs: &[(f64, f64)], mean: f64) -> impl Fn(f64) -> f64 + Send + Sync + Clone {
    let coeffs = coeffs.to_vec();
    move |x: f64| {
        let tau = 2.0 * std::f64::consts::PI;
        mean + coeffs
            .iter()
            .enumerate()
            .map(|(k, (a, b))| {
                let w = tau * (k + 1) as f64 * x;
                a * w.sin() + b * w.cos()
            })
            .sum::<f64>()
    }
}

fn modes() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-0.5..0.5f64, -0.5..0.5f64), 1..4)
}

/// `u_t = D ((a0 + a2 u²) u_x)_x + r u (1 - u)` on the periodic unit interval.
fn periodic_problem(d: f64, a0: f64, a2: f64, r: f64, u0: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Problem {
    let reaction: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>> =
        (r != 0.0).then(|| Arc::new(move |u: f64| r * u * (1.0 - u)) as _);
    Problem::scalar(
        "periodic",
        vec![(0.0, 1.0)],
        vec![BoundaryPair::periodic()],
        d,
        Some(Arc::new(move |s: &[f64]| a0 + a2 * s[0] * s[0])),
        reaction,
        Arc::new(move |x: &[f64]| u0(x[0])),
    )
}

fn scheme(kind: ReconstructionKind, rk: usize, phi: PhiPolicy) -> SchemeConfig {
    SchemeConfig::new(kind, rk).unwrap().with_phi(phi)
}

/// Cell averages of the polynomial `c` over `[x - h/2, x + h/2]`, by
/// four-point Gauss quadrature (exact up to degree 7).
fn cell_average(c: &[f64], x: f64, h: f64) -> f64 {
    let s = (3.0 / 7.0 + 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
    let t = (3.0 / 7.0 - 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
    let ws = (18.0 - 30.0f64.sqrt()) / 36.0;
    let wt = (18.0 + 30.0f64.sqrt()) / 36.0;
    let nodes = [(-s, ws), (-t, wt), (t, wt), (s, ws)];
    nodes.iter().map(|(n, w)| 0.5 * w * poly(c, x + 0.5 * h * n)).sum()
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * x + a)
}

fn poly_derivative(c: &[f64], x: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, a)| acc * x + k as f64 * a)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

// ---------------------------------------------------------------- mesh

proptest! {
    #[test]
    fn cell_widths_sum_to_the_domain_length(a in -10.0..10.0f64, len in 0.1..20.0f64, m in 1usize..2000) {
        let g = make_grid(a, a + len, m, 0).unwrap();
        let total: f64 = (0..m).map(|_| g.h).sum();
        let k = m as f64;
        prop_assert!((total - (g.b - g.a)).abs() <= k * EPS * (g.b - g.a), "{total} vs {}", g.b - g.a);
    }

    #[test]
    fn restriction_of_samples_is_coarse_sampling(
        a in -3.0..3.0f64,
        len in 0.5..4.0f64,
        coarse in 1usize..40,
        levels in 1u32..3,
        k in 0.1..5.0f64,
    ) {
        let fine = make_grid(a, a + len, coarse * 3usize.pow(levels), 2).unwrap();
        let cg = make_grid(a, a + len, coarse, 2).unwrap();
        let f = |x: &[f64]| (k * x[0]).sin() + 0.5 * (0.3 * k * x[0]).cos();
        let restricted = restrict_to_coarse(&Field::sample(fine, f), &cg).unwrap();
        let direct = Field::sample(cg, f);
        for j in 1..=coarse {
            let err = (restricted.at(j) - direct.at(j)).abs();
            // Centres agree up to the rounding of `a + (j - 1/2) h` on each grid.
            let x = cg.center(j);
            prop_assert!(err <= 8.0 * EPS * (1.0 + k * (a.abs() + x.abs() + len)), "cell {j}: {err:e}");
        }
    }
}

// ------------------------------------------------------- reconstruction

fn random_kind_and_poly() -> impl Strategy<Value = (ReconstructionKind, Vec<f64>)> {
    kind_strategy().prop_flat_map(|kind| {
        // WENO is exact only on what every sub-stencil reproduces.
        let degree = match kind {
            ReconstructionKind::Weno(r) => r.div_ceil(2) - 1,
            other => other.order() - 1,
        };
        (Just(kind), prop::collection::vec(-1.0..1.0f64, degree + 1))
    })
}

proptest! {
    #[test]
    fn reconstruction_reproduces_polynomials((kind, c) in random_kind_and_poly(), m in 8usize..24) {
        // Cell averages of a polynomial of degree < order on [-1, 1].
        let grid = make_grid(-1.0, 1.0, m, kind.ghost_width()).unwrap();
        let line: Vec<f64> = (0..grid.len()).map(|i| cell_average(&c, grid.storage_center(i), grid.h)).collect();
        let mut rec = Reconstructor::new(kind).unwrap();
        let mut minus = vec![0.0; m + 1];
        let mut plus = vec![0.0; m + 1];
        rec.minus_edges(&line, grid.ghost, &mut minus);
        rec.plus_edges(&line, grid.ghost, &mut plus);
        let tol = 100.0 * EPS * max_abs(&line);
        for k in 0..=m {
            let exact = poly(&c, grid.a + k as f64 * grid.h);
            prop_assert!((minus[k] - exact).abs() <= tol, "{kind} minus at {k}: {} vs {exact}", minus[k]);
            prop_assert!((plus[k] - exact).abs() <= tol, "{kind} plus at {k}: {} vs {exact}", plus[k]);
        }
    }

    #[test]
    fn eno_stencils_ignore_shifts_and_scaling(
        order in 2usize..=6,
        values in prop::collection::vec(-64i32..64, 20..40),
        shift in -1000i32..1000,
        scale_exp in -8i32..8,
    ) {
        // Integers and power-of-two scales keep every difference exact.
        let base: Vec<f64> = values.iter().map(|&v| v as f64).collect();
        let shifted: Vec<f64> = base.iter().map(|v| v + shift as f64).collect();
        let scaled: Vec<f64> = base.iter().map(|v| v * 2f64.powi(scale_exp)).collect();
        let mut rec = Reconstructor::new(ReconstructionKind::Eno(order)).unwrap();
        let starts = rec.eno_stencil_starts(&base);
        prop_assert_eq!(&starts, &rec.eno_stencil_starts(&shifted));
        prop_assert_eq!(&starts, &rec.eno_stencil_starts(&scaled));
    }

    #[test]
    fn weno_weights_form_a_convex_combination(beta in prop::collection::vec(0.0..10.0f64, 3), equal in 0.0..10.0f64) {
        for (b, d) in [(&beta[..2], &WENO3_LINEAR_WEIGHTS[..]), (&beta[..], &WENO5_LINEAR_WEIGHTS[..])] {
            let w = weno_weights(b, d);
            prop_assert!(w.iter().all(|x| *x >= 0.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 4.0 * EPS);
            let same = weno_weights(&vec![equal; d.len()], d);
            for (x, y) in same.iter().zip(d) {
                prop_assert!((x - y).abs() < 4.0 * EPS);
            }
        }
    }

    #[test]
    fn eno_adds_no_extrema_to_monotone_data(
        order in 2usize..=6,
        steps in prop::collection::vec(0.0..1.0f64, 24..40),
        jump in 0usize..20,
        increasing in any::<bool>(),
    ) {
        // Monotone data with one large jump somewhere in the middle.
        let mut line = Vec::with_capacity(steps.len());
        let mut acc = 0.0;
        for (i, s) in steps.iter().enumerate() {
            acc += s * 0.01 + if i == jump + 2 { 1.0 } else { 0.0 };
            line.push(if increasing { acc } else { -acc });
        }
        let ghost = order;
        let m = line.len() - 2 * ghost;
        let mut rec = Reconstructor::new(ReconstructionKind::Eno(order)).unwrap();
        let starts = rec.eno_stencil_starts(&line);
        let mut minus = vec![0.0; m + 1];
        let mut plus = vec![0.0; m + 1];
        rec.minus_edges(&line, ghost, &mut minus);
        rec.plus_edges(&line, ghost, &mut plus);
        // The edge may leave the selected stencil's range towards the cell
        // across the interface (ENO2 on u = 0, 1, 3: the middle cell takes
        // the flatter pair {0, 1} and its right edge is 1.5), but never by
        // more than the small increments: the jump itself is never overshot.
        let slack = 2.0 * 0.01;
        let range = |cells: &[usize]| {
            let vals: Vec<f64> = cells.iter().map(|&i| line[i]).collect();
            (vals.iter().cloned().fold(f64::INFINITY, f64::min), vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        };
        for k in 0..=m {
            for (cell, across, value) in [(ghost - 1 + k, ghost + k, minus[k]), (ghost + k, ghost - 1 + k, plus[k])] {
                let mut cells: Vec<usize> = (starts[cell]..starts[cell] + order).collect();
                cells.push(across);
                let (lo, hi) = range(&cells);
                prop_assert!(value >= lo - slack && value <= hi + slack, "edge {k} cell {cell}: {value} not in [{lo}, {hi}]");
            }
        }
    }
}

// --------------------------------------------------- finite differences

proptest! {
    #[test]
    fn gradient_is_exact_on_polynomials(p in 1usize..=3, m in 10usize..30, c in prop::collection::vec(-1.0..1.0f64, 7)) {
        let order = 2 * p;
        let c = &c[..=order];
        let grid = make_grid(-1.0, 1.0, m, p + 1).unwrap();
        let line: Vec<f64> = (0..grid.len()).map(|i| poly(c, grid.storage_center(i))).collect();
        let table = StencilTable::new(order).unwrap();
        let mut out = vec![0.0; line.len()];
        table.apply_line(&line, grid.h, grid.ghost, false, &mut out);
        let scale = max_abs(&line) / grid.h;
        for i in grid.ghost - 1..=grid.ghost + m {
            let exact = poly_derivative(c, grid.storage_center(i));
            prop_assert!((out[i] - exact).abs() <= 1e3 * EPS * scale, "order {order} point {i}: {} vs {exact}", out[i]);
        }
    }

    #[test]
    fn periodic_gradient_is_antisymmetric(p in 1usize..=3, u in prop::collection::vec(-1.0..1.0f64, 8..40)) {
        let order = 2 * p;
        let grid = make_grid(0.0, 1.0, u.len(), p).unwrap();
        let bc = [BoundaryPair::periodic()];
        let mut f = Field::from_interior(grid, &u).unwrap();
        let rev: Vec<f64> = u.iter().rev().cloned().collect();
        let mut r = Field::from_interior(grid, &rev).unwrap();
        fill_ghosts(&mut f, &bc, order).unwrap();
        fill_ghosts(&mut r, &bc, order).unwrap();
        let gf = gradient(&f, order, 0, &bc).unwrap().interior();
        let gr = gradient(&r, order, 0, &bc).unwrap().interior();
        for (a, b) in gr.iter().zip(gf.iter().rev()) {
            prop_assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn ghost_filling_is_idempotent(
        u in prop::collection::vec(-1.0..1.0f64, 12..30),
        degree in 1usize..=6,
        which in 0usize..3,
        wall in -1.0..1.0f64,
    ) {
        let bc = [match which {
            0 => BoundaryPair::periodic(),
            1 => BoundaryPair::free_flow(),
            _ => BoundaryPair::dirichlet(wall, -wall),
        }];
        let mut f = Field::from_interior(make_grid(0.0, 1.0, u.len(), 4).unwrap(), &u).unwrap();
        fill_ghosts(&mut f, &bc, degree).unwrap();
        let once = f.values().to_vec();
        fill_ghosts(&mut f, &bc, degree).unwrap();
        prop_assert_eq!(f.values(), &once[..]);
        prop_assert_eq!(f.interior(), u);
    }
}

// --------------------------------------------------------------- solver

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn periodic_mass_is_conserved(
        kind in kind_strategy(),
        rk in 1usize..=3,
        m in 16usize..64,
        c in modes(),
        mean in -1.0..1.0f64,
        a2 in 0.0..2.0f64,
        phi in prop::option::of(1.0..30.0f64),
    ) {
        let policy = phi.map_or(PhiPolicy::Auto { kappa: 1.0 }, PhiPolicy::Fixed);
        let problem = periodic_problem(0.5, 1.0, a2, 0.0, fourier(&c, mean));
        let mut sim = Simulation::new(problem, m, scheme(kind, rk, policy)).unwrap();
        let mass0 = sim.state().fields[0].integral();
        let steps = 5;
        let mut budget = 0.0;
        for _ in 0..steps {
            let norm1: f64 = {
                let f = &sim.state().fields[0];
                f.grid().cell_volume() * f.interior().iter().map(|x| x.abs()).sum::<f64>()
            };
            budget += 100.0 * EPS * norm1;
            sim.step(1.0).unwrap();
        }
        let drift = (sim.state().fields[0].integral() - mass0).abs();
        prop_assert!(drift <= budget, "{kind}+rk{rk}: drift {drift:e} > {budget:e}");
    }

    #[test]
    fn constant_diffusivity_commutes_with_shifts(
        kind in kind_strategy(),
        rk in 1usize..=3,
        m in 16usize..48,
        c in modes(),
        shift in -4.0..4.0f64,
        phi in 2.0..40.0f64,
    ) {
        let u0 = fourier(&c, 0.0);
        let shifted = {
            let u0 = u0.clone();
            move |x: f64| u0(x) + shift
        };
        let cfg = scheme(kind, rk, PhiPolicy::Fixed(phi));
        let mut a = Solver::new(periodic_problem(1.0, 1.0, 0.0, 0.0, u0), m, cfg.clone()).unwrap();
        let mut b = Solver::new(periodic_problem(1.0, 1.0, 0.0, 0.0, shifted), m, cfg).unwrap();
        let mut sa = a.initial_state().unwrap();
        let mut sb = b.initial_state().unwrap();
        let (dt, phi) = a.plan_step(&sa.fields, 1.0, None).unwrap();
        a.step(&mut sa, dt, phi).unwrap();
        b.step(&mut sb, dt, phi).unwrap();
        let (ua, ub) = (sa.fields[0].interior(), sb.fields[0].interior());
        let tol = 64.0 * EPS * (max_abs(&ua) + shift.abs() + 1.0);
        for (j, (x, y)) in ua.iter().zip(&ub).enumerate() {
            prop_assert!((y - x - shift).abs() <= tol, "{kind}+rk{rk} cell {j}: {:e}", y - x - shift);
        }
    }

    #[test]
    fn characteristic_split_is_invertible(
        u in prop::collection::vec(-10.0..10.0f64, 4..32),
        vseed in prop::collection::vec(-10.0..10.0f64, 32),
        phi in 0.01..100.0f64,
    ) {
        let grid = make_grid(0.0, 1.0, u.len(), 1).unwrap();
        let v: Vec<f64> = vseed[..u.len()].to_vec();
        let uf = Field::from_interior(grid, &u).unwrap();
        let vf = Field::from_interior(grid, &v).unwrap();
        let (bu, bv) = characteristic_split(&uf, &vf, phi).unwrap();
        let (bu, bv) = (bu.interior(), bv.interior());
        for j in 0..u.len() {
            let scale = u[j].abs() + v[j].abs() / phi;
            prop_assert!((bu[j] + bv[j] - u[j]).abs() <= 4.0 * EPS * scale);
            prop_assert!((phi * (bu[j] - bv[j]) - v[j]).abs() <= 4.0 * EPS * phi * scale);
        }
    }

    #[test]
    fn first_order_step_matches_explicit_flux_formula(
        m in 4usize..=32,
        c in modes(),
        mean in 0.0..1.0f64,
        d in 0.1..2.0f64,
        a0 in 0.0..1.0f64,
        a2 in 0.0..1.0f64,
        r in -2.0..2.0f64,
        phi in 1.0..50.0f64,
        dt_frac in 0.05..1.0f64,
    ) {
        let problem = periodic_problem(d, a0, a2, r, fourier(&c, mean));
        let cfg = SchemeConfig {
            reconstruction: ReconstructionKind::Constant,
            tableau: Tableau::forward_euler(),
            cfl_parabolic: 0.25,
            phi_policy: PhiPolicy::Fixed(phi),
            gradient_order: 2,
        };
        let mut solver = Solver::new(problem, m, cfg).unwrap();
        let mut state = solver.initial_state().unwrap();
        let u = state.fields[0].interior();
        let h = 1.0 / m as f64;
        let dt = dt_frac * 0.5 * h / phi;

        // u_j^{n+1} = u_j - dt/h (F_{j+1/2} - F_{j-1/2}) + dt g(u_j), with
        // F_{j+1/2} = φ U_j - φ V_{j+1}: U travels right, V travels left.
        let at = |j: isize| u[j.rem_euclid(m as isize) as usize];
        let v = |j: isize| -d * (a0 + a2 * at(j) * at(j)) * (at(j + 1) - at(j - 1)) / (2.0 * h);
        let big_u = |j: isize| (v(j) + phi * at(j)) / (2.0 * phi);
        let big_v = |j: isize| (phi * at(j) - v(j)) / (2.0 * phi);
        let flux = |j: isize| phi * big_u(j) - phi * big_v(j + 1);
        let expected: Vec<f64> = (0..m as isize)
            .map(|j| at(j) - dt / h * (flux(j) - flux(j - 1)) + dt * r * at(j) * (1.0 - at(j)))
            .collect();

        solver.step(&mut state, dt, phi).unwrap();
        let got = state.fields[0].interior();
        let vmax = (0..m as isize).map(|j| v(j).abs()).fold(0.0, f64::max);
        let scale = max_abs(&u) + vmax / phi + dt * r.abs() * max_abs(&u) * (1.0 + max_abs(&u));
        for j in 0..m {
            prop_assert!((got[j] - expected[j]).abs() <= 10.0 * EPS * scale,
                "cell {j}: {} vs {} ({} ulp)", got[j], expected[j], (got[j] - expected[j]).abs() / (EPS * scale));
        }
    }
}

// ---------------------------------------------------------------- norms

proptest! {
    #[test]
    fn error_norms_are_norms(
        e1 in prop::collection::vec(-1e3..1e3f64, 1..50),
        seed in prop::collection::vec(-1e3..1e3f64, 50),
        a in -100.0..100.0f64,
    ) {
        let n = e1.len();
        let e2 = &seed[..n];
        let grid: Grid1D = make_grid(0.0, 2.0, n, 0).unwrap();
        let field = |v: Vec<f64>| Field::from_interior(grid, &v).unwrap();
        let zero = field(vec![0.0; n]);
        for norm in Norm::ALL {
            let n1 = error_norm(&field(e1.clone()), &zero, norm).unwrap();
            let n2 = error_norm(&field(e2.to_vec()), &zero, norm).unwrap();
            let scaled = error_norm(&field(e1.iter().map(|x| a * x).collect()), &zero, norm).unwrap();
            prop_assert!((scaled - a.abs() * n1).abs() <= 1e-13 * a.abs() * n1 + 1e-300, "{norm:?}");
            let sum = error_norm(&field(e1.iter().zip(e2).map(|(x, y)| x + y).collect()), &zero, norm).unwrap();
            prop_assert!(sum <= (n1 + n2) * (1.0 + 1e-13), "{norm:?}: {sum} > {n1} + {n2}");
            // The difference form agrees with the zero-reference form.
            let diff = error_norm(&field(e1.clone()), &field(e2.iter().map(|y| -y).collect()), norm).unwrap();
            prop_assert!((diff - sum).abs() <= 1e-12 * sum.max(1e-300));
        }
    }
}

// --------------------------------------------------------------- models

proptest! {
    #[test]
    fn travelling_wave_translates(alpha in 1.0..6.0f64, t in 0.0..5.0f64, x in -6.0..6.0f64) {
        let c = genfk_speed(alpha);
        let moved = genfk_exact(t, x, alpha);
        let start = genfk_exact(0.0, x - c * t, alpha);
        prop_assert!((moved - start).abs() <= 4.0 * EPS * (1.0 + start.abs()));
    }

    #[test]
    fn frog_reactions_only_transfer(state in prop::collection::vec(0.0..1.0f64, 5)) {
        let p = FrogParameters::default();
        let mut out = [0.0; 5];
        frog_reaction(&p, &state, &mut out);
        prop_assert!((out[0] + out[1]).abs() <= 8.0 * EPS * (out[0].abs() + 1.0));
        prop_assert!((out[3] + out[4]).abs() <= 8.0 * EPS * (out[3].abs() + 1.0));
    }
}

// --------------------------------------------------------------- config

fn config_text() -> impl Strategy<Value = String> {
    let problem = prop_oneof![
        Just((String::from("heat"), String::new())),
        (1.0..6.0f64).prop_map(|a| ("genfk".into(), format!("[genfk]\nalpha = {a}\n"))),
        (1.5..3.0f64, 0.1..0.9f64, 0.0..0.3f64, 0.1..1.0f64).prop_map(|(m, p, d, h)| (
            "extinction".into(),
            format!("[extinction]\nm = {m}\np = {p}\nc = 1.0\nperturbation = {d}\nheight = {h}\n")
        )),
        (0.5..2.0f64, 1.0..10.0f64)
            .prop_map(|(mu, t)| ("frog".into(), format!("[frog]\nmu = {mu}\nrelease_time = {t}\n"))),
    ];
    let scheme = prop::sample::select(vec![
        "constant", "eno2", "eno3", "eno4", "eno5", "eno6", "weno3", "weno5",
    ]);
    let phi = prop_oneof![
        Just(String::new()),
        (0.5..50.0f64).prop_map(|p| format!("phi = {p}\n")),
        (1.0..4.0f64).prop_map(|k| format!("phi = \"auto\"\nkappa = {k}\n")),
    ];
    let study = prop_oneof![
        Just(String::new()),
        Just(String::from(
            "[study]\nm = [16, 48]\nreference = \"exact\"\nschemes = [\"eno3+rk2\", \"weno5+rk3\"]\n"
        )),
        Just(String::from(
            "[study]\nm = [16, 48]\nreference = \"fine\"\nm_ref = 432\n"
        )),
    ];
    (
        problem,
        16usize..200,
        scheme,
        1usize..=3,
        0.01..2.0f64,
        0.05..0.5f64,
        phi,
        prop::option::of(0usize..3),
        prop::option::of((-5.0..0.0f64, 0.5..5.0f64)),
        study,
        any::<bool>(),
    )
        .prop_map(
            |((name, section), m, rec, rk, t_end, cfl, phi, grad, domain, study, oracle)| {
                let mut s = format!("problem = \"{name}\"\nm = {m}\nreconstruction = \"{rec}\"\nrk = {rk}\n");
                s += &format!("t_end = {t_end}\ncfl = {cfl}\n{phi}");
                s += &format!("snapshots = [0.0, {}, {t_end}]\n", t_end / 2.0);
                if let Some(extra) = grad {
                    // It applies to every study scheme too; the list above tops out at RK3.
                    let highest = if study.contains("schemes") { 3 } else { rk };
                    let g = (2 * highest + 2 * extra).min(6);
                    s += &format!("gradient_order = {g}\n");
                }
                if let Some((a, b)) = domain {
                    s += &format!("domain = [{a}, {b}]\n");
                }
                s += "out = \"results/run\"\n";
                s += &section;
                s += &study;
                if oracle {
                    s += "[oracle]\nsteps = 3\n";
                }
                s
            },
        )
}

proptest! {
    #[test]
    fn rendered_configs_parse_back_unchanged(text in config_text()) {
        let cfg = parse_config(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        let rendered = cfg.render();
        let again = parse_config(&rendered).map_err(|e| TestCaseError::fail(format!("{e}\n{rendered}")))?;
        prop_assert_eq!(&again, &cfg);
        prop_assert_eq!(again.render(), rendered);
    }
}

// ---------------------------------------------------------------- study

#[test]
fn fine_grid_and_exact_references_give_the_same_rates() {
    let problem = heat_problem();
    let cfg = SchemeConfig::new(ReconstructionKind::Eno(3), 2)
        .unwrap()
        .with_phi(PhiPolicy::Fixed(24.0));
    let grids = [12, 36, 108];
    let exact = convergence_study(&problem, &cfg, &grids, 0.01, Reference::Exact).unwrap();
    let fine = convergence_study(&problem, &cfg, &grids, 0.01, Reference::FineGrid(972)).unwrap();
    for (a, b) in exact.rates(Norm::L1).iter().zip(fine.rates(Norm::L1)) {
        assert!((a - b).abs() < 0.2, "exact rate {a}, fine-grid rate {b}");
    }
}
