use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use liftrnn::solvers::{
    multinomial_fit, multinomial_objective, nnls_objective, nnls_solve, ridge_solve, simplex_entropy_objective,
    simplex_entropy_prox, MultinomialOptions, NnlsOptions, SimplexEntropyProblem, WeightedFactorTerm,
    DEFAULT_BISECTION_TOL,
};
use liftrnn::{DenseMatrix, Rng};

fn random_matrix(rng: &mut Rng, r: usize, c: usize) -> DenseMatrix {
    DenseMatrix::from_fn(r, c, |_, _| rng.normal())
}

fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ridge_matches_dense_lu(seed in any::<u64>(), d in 1usize..7, extra in 0usize..20, c in 1usize..4, lambda in 0.01f64..5.0) {
        let mut rng = Rng::new(seed);
        let n = d + extra;
        let a = random_matrix(&mut rng, n, d);
        let b = random_matrix(&mut rng, n, c);
        let reg: Vec<f64> = (0..d).map(|_| 0.01 + rng.uniform()).collect();
        let theta = to_na(&ridge_solve(&a, &b, lambda, &reg).unwrap());
        let (a, b) = (to_na(&a), to_na(&b));
        let lhs = a.transpose() * &a * lambda + DMatrix::from_diagonal(&DVector::from_vec(reg));
        let want = lhs.lu().solve(&(a.transpose() * &b * lambda)).unwrap();
        prop_assert!((&theta - &want).amax() <= 1e-9 * (1.0 + want.amax()));
    }

    #[test]
    fn nnls_beats_every_nonnegative_probe(seed in any::<u64>(), rows in 1usize..5, k in 1usize..5) {
        let mut rng = Rng::new(seed);
        let right = random_matrix(&mut rng, k, k + 2);
        let target = random_matrix(&mut rng, rows, k + 2);
        let anchor = random_matrix(&mut rng, rows, k);
        let terms = vec![
            WeightedFactorTerm::new(right, target, 1.0).unwrap(),
            WeightedFactorTerm::new(DenseMatrix::identity(k), anchor, 0.3).unwrap(),
        ];
        let sol = nnls_solve(&terms, &DenseMatrix::zeros(rows, k), NnlsOptions { max_iters: 200_000, tol: 1e-10 }).unwrap();
        prop_assert!(sol.converged);
        prop_assert!(sol.h.min_entry() >= 0.0);
        let best = nnls_objective(&terms, &sol.h);
        for _ in 0..20 {
            let probe = DenseMatrix::from_fn(rows, k, |i, j| (sol.h[(i, j)] + 0.1 * rng.normal()).max(0.0));
            prop_assert!(nnls_objective(&terms, &probe) >= best - 1e-9 * (1.0 + best));
        }
    }

    #[test]
    fn nnls_is_positively_homogeneous_in_targets(seed in any::<u64>(), scale in 0.1f64..10.0) {
        let mut rng = Rng::new(seed);
        let right = random_matrix(&mut rng, 3, 4);
        let target = random_matrix(&mut rng, 2, 4);
        let opts = NnlsOptions { max_iters: 200_000, tol: 1e-12 };
        let base = nnls_solve(&[WeightedFactorTerm::new(right.clone(), target.clone(), 1.0).unwrap()], &DenseMatrix::zeros(2, 3), opts).unwrap();
        let scaled = nnls_solve(&[WeightedFactorTerm::new(right, target.scale(scale), 1.0).unwrap()], &DenseMatrix::zeros(2, 3), opts).unwrap();
        prop_assert!(scaled.h.sub(&base.h.scale(scale)).max_abs() <= 1e-7 * scale * (1.0 + base.h.max_abs()));
    }

    #[test]
    fn prox_is_feasible_and_beats_simplex_samples(seed in any::<u64>(), p in 1usize..11, lambda in 0.02f64..3.0, spread in 0.1f64..6.0) {
        let mut rng = Rng::new(seed);
        let x0: Vec<f64> = (0..p).map(|_| spread * rng.normal()).collect();
        let mut y = vec![0.0; p];
        y[rng.below(p)] = 1.0;
        let prob = SimplexEntropyProblem::new(x0.clone(), y.clone(), lambda).unwrap();
        let (lo, hi) = prob.bracket();
        prop_assert!(lo <= hi);
        let sol = simplex_entropy_prox(&prob, DEFAULT_BISECTION_TOL).unwrap();
        prop_assert!(sol.z.iter().all(|&v| v >= 0.0));
        prop_assert!((sol.z.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        prop_assert!(lo <= sol.nu && sol.nu <= hi);
        let best = simplex_entropy_objective(&x0, &y, lambda, &sol.z);
        for _ in 0..50 {
            // exponential weights give a uniform draw on the simplex
            let w: Vec<f64> = (0..p).map(|_| -(1.0 - rng.uniform()).ln()).collect();
            let total: f64 = w.iter().sum();
            let z: Vec<f64> = w.iter().map(|v| v / total).collect();
            prop_assert!(simplex_entropy_objective(&x0, &y, lambda, &z) >= best - 1e-8);
        }
    }

    #[test]
    fn prox_shifts_unlabelled_coordinates_uniformly(seed in any::<u64>(), p in 2usize..8, lambda in 0.05f64..2.0) {
        let mut rng = Rng::new(seed);
        let x0: Vec<f64> = (0..p).map(|_| rng.normal()).collect();
        let k = rng.below(p);
        let mut y = vec![0.0; p];
        y[k] = 1.0;
        let sol = simplex_entropy_prox(&SimplexEntropyProblem::new(x0.clone(), y, lambda).unwrap(), DEFAULT_BISECTION_TOL).unwrap();
        for i in (0..p).filter(|&i| i != k) {
            prop_assert!((sol.z[i] - (x0[i] + sol.nu).max(0.0)).abs() <= 1e-9);
        }
        // the log term pushes the labelled coordinate above the common shift
        prop_assert!(sol.z[k] > 0.0 && sol.z[k] >= x0[k] + sol.nu - 1e-12);
    }

    #[test]
    fn multinomial_fit_is_a_stationary_descent(seed in any::<u64>(), h in 1usize..5, o in 2usize..4, rho1 in 0.01f64..1.0) {
        let mut rng = Rng::new(seed);
        let blocks = 2;
        let (mut hs, mut ys) = (Vec::new(), Vec::new());
        for _ in 0..blocks {
            hs.push(DenseMatrix::from_fn(12, h, |_, _| rng.uniform()));
            let mut y = DenseMatrix::zeros(12, o);
            for r in 0..12 {
                y[(r, rng.below(o))] = 1.0;
            }
            ys.push(y);
        }
        let u0 = DenseMatrix::zeros(h, o);
        let b0 = vec![0.0; o];
        let fit = multinomial_fit(&hs, &ys, rho1, (&u0, &b0), MultinomialOptions { max_iters: 5000, tol: 1e-10 }).unwrap();
        prop_assert!(fit.trace.windows(2).all(|w| w[1] <= w[0]));
        let f = |u: &DenseMatrix, b: &[f64]| multinomial_objective(&hs, &ys, rho1, u, b);
        prop_assert!((f(&fit.u1, &fit.b1) - fit.objective).abs() <= 1e-12 * (1.0 + fit.objective.abs()));
        // convex objective: no small move in any direction helps
        for _ in 0..20 {
            let du = DenseMatrix::from_fn(h, o, |_, _| 1e-3 * rng.normal());
            let db: Vec<f64> = (0..o).map(|_| 1e-3 * rng.normal()).collect();
            let b: Vec<f64> = fit.b1.iter().zip(&db).map(|(x, d)| x + d).collect();
            prop_assert!(f(&fit.u1.add(&du), &b) >= fit.objective - 1e-9);
        }
    }
}
