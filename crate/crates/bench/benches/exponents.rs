//! Criterion benchmarks for the hot paths: divergence sweeps, saddle
//! solves, and the exact hypothesis-testing oracle.

use criterion::{criterion_group, criterion_main, Criterion};
use cqexp_core::channel::CQChannel;
use cqexp_core::divergence::{d_alpha_petz, q_alpha_flat};
use cqexp_core::oracle::alpha_hat;
use cqexp_core::solver::saddle_solve;
use cqexp_core::verify::{fixed_channels, random_density};
use cqexp_core::{Prior, Tolerances};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn channel() -> CQChannel {
    fixed_channels(&Tolerances::default()).remove(0)
}

fn bench_divergence(c: &mut Criterion) {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rho = random_density(&mut rng, 3, &tol);
    let sig = random_density(&mut rng, 3, &tol);
    c.bench_function("petz_divergence_sweep", |b| {
        b.iter(|| {
            for k in 1..20 {
                let a = k as f64 / 20.0;
                std::hint::black_box(d_alpha_petz(&rho, &sig, a, &tol).unwrap());
            }
        })
    });
    c.bench_function("flat_q_sweep", |b| {
        b.iter(|| {
            for k in 1..20 {
                let a = k as f64 / 20.0;
                std::hint::black_box(q_alpha_flat(&rho, &sig, a, &tol).unwrap());
            }
        })
    });
}

fn bench_saddle(c: &mut Criterion) {
    let tol = Tolerances::default();
    let w = channel();
    let p = Prior::uniform(2);
    let cap = cqexp_core::channel::capacity(&w, &tol).unwrap().value;
    c.bench_function("saddle_solve_mid_rate", |b| {
        b.iter(|| std::hint::black_box(saddle_solve(0.6 * cap, &p, &w, &tol).unwrap()))
    });
}

fn bench_oracle(c: &mut Criterion) {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rho = random_density(&mut rng, 2, &tol);
    let sig = random_density(&mut rng, 2, &tol);
    c.bench_function("alpha_hat_qubit", |b| {
        b.iter(|| std::hint::black_box(alpha_hat(&rho, &sig, 0.25, &tol).unwrap()))
    });
}

criterion_group!(benches, bench_divergence, bench_saddle, bench_oracle);
criterion_main!(benches);
