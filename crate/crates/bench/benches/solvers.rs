use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;
use rer_core::estimate::BankSpec;
use rer_core::lti::{self, solve_discrete_lyapunov};
use rer_core::rer::DualProblem;
use rer_core::{gamma, gamma_apply, solve_dare, solve_rer, SolverOptions, SpectralDensity, StateSpace};

fn scalar(x: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, x)
}

fn bank(pairs: usize, m: usize) -> StateSpace {
    let angles: Vec<f64> = (1..=pairs).map(|k| k as f64 * std::f64::consts::PI / (pairs + 1) as f64).collect();
    BankSpec::pairs(0.8, &angles).build(m).unwrap()
}

fn arma() -> StateSpace {
    StateSpace::new(scalar(0.7), scalar(1.0), scalar(1.2), scalar(1.0)).unwrap()
}

fn lyapunov(c: &mut Criterion) {
    let mut group = c.benchmark_group("lyapunov");
    for n in [8, 32, 128] {
        let f = DMatrix::from_fn(n, n, |i, j| 0.9 / n as f64 * (((i * 7 + j * 3) % 11) as f64 - 5.0) / 5.0);
        let q = DMatrix::identity(n, n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| solve_discrete_lyapunov(&f, &q).unwrap())
        });
    }
    group.finish();
}

fn dare(c: &mut Criterion) {
    let mut group = c.benchmark_group("dare");
    for pairs in [2, 4, 8] {
        let g = bank(pairs, 1);
        let sigma = lti::reachability_gramian(&g.a, &g.b).unwrap();
        let norm = gamma::normalize_problem(&g.a, &g.b, &sigma).unwrap();
        let problem = DualProblem::new(&norm.bank().unwrap(), &StateSpace::static_gain(scalar(1.0))).unwrap();
        let lambda = DMatrix::identity(g.states(), g.states()) * 0.1;
        group.bench_with_input(BenchmarkId::from_parameter(g.states()), &lambda, |b, l| {
            b.iter(|| solve_dare(&problem.g1, l).unwrap())
        });
    }
    group.finish();
}

fn rer_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_rer");
    group.sample_size(20);
    for pairs in [2, 4, 8] {
        let g = bank(pairs, 1);
        let sigma = gamma_apply(&g, &SpectralDensity::from_factor(arma()).unwrap()).unwrap();
        let prior = StateSpace::static_gain(scalar(1.0));
        let opts = SolverOptions::default();
        group.bench_with_input(BenchmarkId::from_parameter(g.states()), &sigma, |b, s| {
            b.iter(|| solve_rer(&g, &prior, s, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, lyapunov, dare, rer_solve);
criterion_main!(benches);
