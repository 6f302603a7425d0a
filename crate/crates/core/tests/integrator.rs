use nalgebra::{DMatrix, DVector};
use obreshkov::coefficients::ObreshkovScheme;
use obreshkov::dae::{builtin_system, BuiltinKind, LinearDae, Sinusoid};
use obreshkov::integrator::{
    assemble, initial_state_from_steady_state, initial_state_from_value, march, step, StepState,
};
use obreshkov::steady_state::ac_solve;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))
}

/// Nonsingular C = I + E, G random, random sinusoid.
fn random_ode(n: usize, seed: u64) -> LinearDae {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = DMatrix::identity(n, n) + random_matrix(n, &mut rng) * 0.3;
    let g = random_matrix(n, &mut rng) + DMatrix::identity(n, n) * 2.0;
    let bc = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let bs = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    LinearDae::new(c, g, Sinusoid::new(bc, bs, rng.gen_range(0.5..5.0))).unwrap()
}

fn random_state(n: usize, blocks: usize, h: f64, seed: u64) -> StepState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    StepState {
        t: rng.gen_range(0.0..1.0),
        h,
        scaled: (0..blocks)
            .map(|_| DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)))
            .collect(),
    }
}

proptest! {
    #[test]
    fn block_structure(n in 1usize..=5, l in 0usize..=3, m in 1usize..=4, seed in any::<u64>(), h in 1e-3f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_matrix(n, &mut rng);
        let g = random_matrix(n, &mut rng);
        let dae = LinearDae::new(c.clone(), g.clone(), Sinusoid::zeros(n, 1.0)).unwrap();
        let scheme = ObreshkovScheme::new(l, m).unwrap();
        let sys = assemble(&dae, &scheme, h).unwrap();
        prop_assert_eq!(sys.matrix.shape(), ((m + 1) * n, (m + 1) * n));
        for row in 0..(m + 1) * n {
            for col in 0..(m + 1) * n {
                let (bi, ri) = (row / n, row % n);
                let (bj, cj) = (col / n, col % n);
                let expected = if bi < m {
                    if bj == bi {
                        g[(ri, cj)]
                    } else if bj == bi + 1 {
                        c[(ri, cj)] / h
                    } else {
                        0.0
                    }
                } else if ri == cj {
                    let a = scheme.current_weights()[bj];
                    if bj % 2 == 0 { a } else { -a }
                } else {
                    0.0
                };
                prop_assert_eq!(sys.matrix[(row, col)], expected);
            }
        }
    }

    #[test]
    fn step_satisfies_every_block_row(n in 1usize..=4, l in 0usize..=3, m in 1usize..=4, seed in any::<u64>()) {
        let dae = random_ode(n, seed);
        let scheme = ObreshkovScheme::new(l, m).unwrap();
        let h = 0.05;
        let prev = random_state(n, l + 1, h, seed ^ 1);
        let next = step(&dae, &scheme, &prev, h).unwrap();
        prop_assert_eq!(next.scaled.len(), m + 1);
        for i in 0..m {
            let lhs = dae.c() * &next.scaled[i + 1] / h + dae.g() * &next.scaled[i];
            let rhs = dae.source_derivative(i, next.t) * h.powi(i as i32);
            let scale = rhs.norm() + (dae.c().norm() / h) * next.scaled[i + 1].norm()
                + dae.g().norm() * next.scaled[i].norm();
            prop_assert!((lhs - rhs).norm() <= 1e-10 * scale);
        }
        let mut lhs = DVector::zeros(n);
        for (i, w) in scheme.current_weights().iter().enumerate() {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            lhs += &next.scaled[i] * (sign * w);
        }
        let mut rhs = DVector::zeros(n);
        for (i, w) in scheme.past_weights().iter().enumerate() {
            rhs += &prev.scaled[i] * *w;
        }
        prop_assert!((lhs - &rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
    }
}

/// Trapezoidal and backward-Euler steps on `x' = A x + f(t)`.
fn classical_steps(dae: &LinearDae, x0: &DVector<f64>, t0: f64, h: f64) -> (DVector<f64>, DVector<f64>) {
    let n = dae.dim();
    let c_inv = dae.c().clone().try_inverse().unwrap();
    let a = -&c_inv * dae.g();
    let f = |t: f64| &c_inv * dae.source_value(t);
    let id = DMatrix::<f64>::identity(n, n);
    let trap = (&id - &a * (h / 2.0))
        .lu()
        .solve(&((&id + &a * (h / 2.0)) * x0 + (f(t0) + f(t0 + h)) * (h / 2.0)))
        .unwrap();
    let be = (&id - &a * h).lu().solve(&(x0 + f(t0 + h) * h)).unwrap();
    (trap, be)
}

#[test]
fn classical_method_equivalence() {
    for seed in 0..40u64 {
        let n = 1 + (seed as usize % 5);
        let dae = random_ode(n, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
        let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let (t0, h) = (0.3, 0.07);
        let (trap, be) = classical_steps(&dae, &x0, t0, h);

        let s01 = ObreshkovScheme::new(0, 1).unwrap();
        let start = initial_state_from_value(&dae, &x0, &s01, h, t0).unwrap();
        let x_be = step(&dae, &s01, &start, h).unwrap();
        assert!((x_be.value() - &be).amax() <= 1e-10, "seed {seed}");

        let s11 = ObreshkovScheme::new(1, 1).unwrap();
        let start = initial_state_from_value(&dae, &x0, &s11, h, t0).unwrap();
        let x_tr = step(&dae, &s11, &start, h).unwrap();
        assert!((x_tr.value() - &trap).amax() <= 1e-10, "seed {seed}");
    }
}

#[test]
fn scalar_decay_is_monotone() {
    let dae = LinearDae::new(
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 3.0),
        Sinusoid::zeros(1, 1.0),
    )
    .unwrap();
    for (l, m) in [(0, 1), (1, 1), (1, 2), (2, 2), (2, 3)] {
        let scheme = ObreshkovScheme::new(l, m).unwrap();
        let h = 0.5;
        let x0 = DVector::from_element(1, 1.0);
        let start = initial_state_from_value(&dae, &x0, &scheme, h, 0.0).unwrap();
        let traj = march(&dae, &scheme, &start, h, 1000).unwrap();
        let mut last = 1.0;
        for s in &traj {
            assert!(s.value()[0].abs() <= last, "({l},{m})");
            last = s.value()[0].abs();
        }
        let r = scheme.amplification((-1.5).into()).unwrap().re;
        assert!((traj[9].value()[0] - r.powi(10)).abs() <= 1e-12);
    }
}

#[test]
fn index2_march_tracks_the_steady_state() {
    let sys = builtin_system(BuiltinKind::Index2, 42);
    let ph = ac_solve(&sys.dae).unwrap();
    let scheme = ObreshkovScheme::new(1, 2).unwrap();
    let mut errs = Vec::new();
    for steps in [50usize, 100] {
        let h = 5.0 / steps as f64;
        let start = initial_state_from_steady_state(&ph, &scheme, h);
        let traj = march(&sys.dae, &scheme, &start, h, steps).unwrap();
        let err = traj
            .iter()
            .map(|s| (s.value() - ph.value(s.t)).amax())
            .fold(0.0, f64::max);
        errs.push(err);
    }
    // local order 3, global order 2
    assert!(errs[1] < errs[0] / 3.0, "{errs:?}");
}

#[test]
fn rescaled_history_matches_direct_start() {
    let sys = builtin_system(BuiltinKind::Ode, 5);
    let ph = ac_solve(&sys.dae).unwrap();
    let scheme = ObreshkovScheme::new(2, 2).unwrap();
    let coarse = initial_state_from_steady_state(&ph, &scheme, 0.1);
    let fine = initial_state_from_steady_state(&ph, &scheme, 0.05);
    let a = step(&sys.dae, &scheme, &coarse, 0.05).unwrap();
    let b = step(&sys.dae, &scheme, &fine, 0.05).unwrap();
    assert!((a.value() - b.value()).amax() < 1e-14);
}
