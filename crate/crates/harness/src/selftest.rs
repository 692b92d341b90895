//! Quick numerical checks runnable from the installed binary.

use liftrnn::baseline::{grad_bptt, loss};
use liftrnn::datasets::{sum_threshold_labels, timer_labels};
use liftrnn::lifted::init_model;
use liftrnn::solvers::{
    nnls_solve, ridge_solve, simplex_entropy_prox, NnlsOptions, SimplexEntropyProblem, WeightedFactorTerm,
    DEFAULT_BISECTION_TOL,
};
use liftrnn::{DenseMatrix, Rng, SeqTensor};

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_matrix(rng: &mut Rng, r: usize, c: usize) -> DenseMatrix {
    DenseMatrix::from_fn(r, c, |_, _| rng.normal())
}

fn ridge_check(rng: &mut Rng) -> Check {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let a = random_matrix(rng, 12, 5);
        let b = random_matrix(rng, 12, 3);
        let reg: Vec<f64> = (0..5).map(|_| rng.uniform()).collect();
        let lambda = 0.1 + rng.uniform();
        let theta = match ridge_solve(&a, &b, lambda, &reg) {
            Ok(t) => t,
            Err(e) => {
                return Check { name: "ridge normal equations", passed: false, detail: e.to_string() };
            }
        };
        let mut lhs = a.t_matmul(&a.matmul(&theta)).scale(lambda);
        for i in 0..5 {
            for j in 0..3 {
                lhs[(i, j)] += reg[i] * theta[(i, j)];
            }
        }
        let rhs = a.t_matmul(&b).scale(lambda);
        worst = worst.max(lhs.sub(&rhs).max_abs() / (1.0 + rhs.max_abs()));
    }
    Check {
        name: "ridge normal equations",
        passed: worst <= 1e-8,
        detail: format!("max relative residual {worst:.2e}"),
    }
}

fn nnls_check(rng: &mut Rng) -> Check {
    let mut worst = 0.0f64;
    let mut negative = false;
    for _ in 0..20 {
        let terms = vec![
            WeightedFactorTerm::new(DenseMatrix::identity(3), random_matrix(rng, 4, 3), 1.0).unwrap(),
            WeightedFactorTerm::new(random_matrix(rng, 3, 2), random_matrix(rng, 4, 2), 0.5).unwrap(),
        ];
        let opts = NnlsOptions { max_iters: 100_000, tol: 1e-9 };
        match nnls_solve(&terms, &DenseMatrix::zeros(4, 3), opts) {
            Ok(sol) => {
                negative |= sol.h.min_entry() < 0.0;
                worst = worst.max(sol.kkt_residual / (1.0 + sol.grad_norm));
            }
            Err(e) => return Check { name: "nnls KKT", passed: false, detail: e.to_string() },
        }
    }
    Check {
        name: "nnls KKT",
        passed: !negative && worst <= 1e-6,
        detail: format!("max scaled KKT residual {worst:.2e}"),
    }
}

fn prox_check(rng: &mut Rng) -> Check {
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let p = 1 + rng.below(8);
        let x0: Vec<f64> = (0..p).map(|_| 2.0 * rng.normal()).collect();
        let mut y = vec![0.0; p];
        y[rng.below(p)] = 1.0;
        let lambda = 0.05 + rng.uniform();
        let outcome = SimplexEntropyProblem::new(x0, y, lambda)
            .and_then(|prob| simplex_entropy_prox(&prob, DEFAULT_BISECTION_TOL));
        match outcome {
            Ok(sol) if sol.z.iter().all(|&v| v >= 0.0) => {
                worst = worst.max((sol.z.iter().sum::<f64>() - 1.0).abs());
            }
            Ok(_) => return Check { name: "simplex prox", passed: false, detail: "negative entry".into() },
            Err(e) => return Check { name: "simplex prox", passed: false, detail: e.to_string() },
        }
    }
    Check {
        name: "simplex prox",
        passed: worst <= 1e-10,
        detail: format!("max |1ᵀz − 1| {worst:.2e}"),
    }
}

fn bptt_check(rng: &mut Rng) -> Check {
    let (m, t_len) = (3, 4);
    let mut model = init_model(2, 3, 2, 11);
    model.u0 = model.u0.scale(5.0);
    model.b0 = vec![0.1, 0.2, 0.3];
    let mut x = SeqTensor::zeros(m, 2, t_len);
    let mut y = SeqTensor::zeros(m, 2, t_len);
    for s in 0..m {
        for t in 0..t_len {
            x.set(s, 0, t, rng.normal());
            x.set(s, 1, t, rng.normal());
            y.set(s, rng.below(2), t, 1.0);
        }
    }
    let rho = 1e-3;
    let grad = grad_bptt(&model, &x, &y, rho).expect("consistent shapes");
    let eps = 1e-5;
    let mut worst = 0.0f64;
    for r in 0..2 {
        for c in 0..3 {
            let mut plus = model.clone();
            plus.u0[(r, c)] += eps;
            let mut minus = model.clone();
            minus.u0[(r, c)] -= eps;
            let fd = (loss(&plus, &x, &y, rho).unwrap() - loss(&minus, &x, &y, rho).unwrap()) / (2.0 * eps);
            worst = worst.max((fd - grad.u0[(r, c)]).abs() / fd.abs().max(grad.u0[(r, c)].abs()).max(1e-8));
        }
    }
    Check {
        name: "bptt finite differences",
        passed: worst <= 1e-5,
        detail: format!("max relative error on U0 {worst:.2e}"),
    }
}

fn dataset_check() -> Check {
    let rs = sum_threshold_labels(&[-0.26, 0.55, -0.78, 0.05, 0.89, 0.12]);
    let rs_ok = rs.iter().map(|r| r[0]).eq([0.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
    let (labels, trace) = timer_labels(&[3, 2, 5, 4, 2, 4], &[false, true, false, false, true, false]);
    let timer_ok = trace == [0, 2, 1, 0, 2, 1] && labels.iter().map(|r| r[0]).eq([0.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
    Check {
        name: "dataset label goldens",
        passed: rs_ok && timer_ok,
        detail: format!("running sum {rs_ok}, timer {timer_ok}"),
    }
}

pub fn run_all() -> Vec<Check> {
    let mut rng = Rng::new(20_240_601);
    vec![
        ridge_check(&mut rng),
        nnls_check(&mut rng),
        prox_check(&mut rng),
        bptt_check(&mut rng),
        dataset_check(),
    ]
}
