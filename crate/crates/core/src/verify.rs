//! Self-contained verification battery: twelve property suites exercising
//! every module against exact small-instance oracles. Each suite returns a
//! single pass/fail result with a human-readable detail line; the CLI
//! `verify` command and the acceptance tests both run these.

use crate::bounds::{
    build_symmetric, chebyshev_converse, refined_sp_bound, sharp_converse,
    symmetric_sigma_closed_form, uniform_optimality_check,
};
use crate::channel::{maximize_over_simplex, CQChannel, Prior};
use crate::config::Tolerances;
use crate::divergence::{d_alpha_petz, q_alpha_flat, q_alpha_petz};
use crate::error::Result;
use crate::extreal::ExtReal;
use crate::ns::{
    bahadur_ranga_rao, cgf_build, exact_tail_iid, exact_tail_product, legendre_fenchel,
    ns_distributions, phi_weighted, NSPair, SymbolCGF,
};
use crate::operator::{trace_distance, CMat, DensityOperator, C64};
use crate::oracle::{hoeffding_exponent_estimate, product_oracle};
use crate::solver::{
    e0_gallager, e_sp_max, e_sp_strong, e_sp_variational_1, e_sp_weak, exponent_curve,
    golden_max, saddle_solve, subgradient_check, Regime,
};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Outcome of one verification suite.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2}. {} ({:.1}s) — {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

fn run(id: usize, name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    let start = std::time::Instant::now();
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f));
    let (passed, detail) = match outcome {
        Ok(Ok(pd)) => pd,
        Ok(Err(e)) => (false, format!("error: {e}")),
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| p.downcast_ref::<&str>().copied())
                .unwrap_or("panic");
            (false, format!("panicked: {msg}"))
        }
    };
    CheckResult {
        id,
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

// ---------- random instance generators ----------

fn random_unitary(rng: &mut ChaCha8Rng, d: usize) -> CMat {
    let g = DMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let qr = g.qr();
    qr.q()
}

pub fn random_density(rng: &mut ChaCha8Rng, d: usize, tol: &Tolerances) -> DensityOperator {
    let u = random_unitary(rng, d);
    let mut evs: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let s: f64 = evs.iter().sum();
    evs.iter_mut().for_each(|v| *v /= s);
    let diag = DMatrix::from_fn(d, d, |r, c| {
        if r == c {
            C64::new(evs[r], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    DensityOperator::new(&u * diag * u.adjoint(), tol).expect("random density is valid")
}

pub fn random_prior(rng: &mut ChaCha8Rng, n: usize) -> Prior {
    let mut w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.05).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    Prior::new(w).expect("random prior is valid")
}

fn qubit(tol: &Tolerances, m: [[(f64, f64); 2]; 2]) -> DensityOperator {
    let mat = DMatrix::from_fn(2, 2, |r, c| C64::new(m[r][c].0, m[r][c].1));
    DensityOperator::new(mat, tol).expect("valid qubit state")
}

/// The three fixed binary-input qubit channels used by the consistency and
/// soundness suites.
pub fn fixed_channels(tol: &Tolerances) -> Vec<CQChannel> {
    let mk = |a: [[(f64, f64); 2]; 2], b: [[(f64, f64); 2]; 2]| {
        CQChannel::new(vec![qubit(tol, a), qubit(tol, b)]).expect("valid channel")
    };
    vec![
        mk(
            [[(0.85, 0.0), (0.05, 0.1)], [(0.05, -0.1), (0.15, 0.0)]],
            [[(0.3, 0.0), (-0.2, 0.05)], [(-0.2, -0.05), (0.7, 0.0)]],
        ),
        mk(
            [[(0.9, 0.0), (0.0, 0.2)], [(0.0, -0.2), (0.1, 0.0)]],
            [[(0.2, 0.0), (0.1, 0.0)], [(0.1, 0.0), (0.8, 0.0)]],
        ),
        mk(
            [[(0.6, 0.0), (0.25, 0.0)], [(0.25, 0.0), (0.4, 0.0)]],
            [[(0.5, 0.0), (-0.1, -0.15)], [(-0.1, 0.15), (0.5, 0.0)]],
        ),
    ]
}

fn mid_rates(w: &CQChannel, tol: &Tolerances, count: usize) -> Result<Vec<f64>> {
    let r_inf = crate::channel::r_infinity(w, tol)?.value;
    let cap = crate::channel::capacity(w, tol)?.value;
    Ok((1..=count)
        .map(|k| r_inf + (cap - r_inf) * k as f64 / (count as f64 + 1.0))
        .collect())
}

// ---------- the twelve suites ----------

/// 1. Trace-inequality ordering of the two Rényi families: Q♭ ≤ Q with
/// equality on commuting pairs.
pub fn check_gt_ordering(seed: u64, tol: &Tolerances) -> CheckResult {
    run(1, "log-Euclidean vs Petz Q ordering", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x01);
        let mut worst_gap = f64::INFINITY;
        let mut n_pairs = 0;
        for k in 0..1000 {
            let d = if k % 2 == 0 { 2 } else { 3 };
            let rho = random_density(&mut rng, d, tol);
            let sig = random_density(&mut rng, d, tol);
            for j in 1..=20 {
                let a = j as f64 / 21.0;
                let qp = q_alpha_petz(&rho, &sig, a, tol)?;
                let qf = q_alpha_flat(&rho, &sig, a, tol)?.value;
                let gap = qp - qf;
                worst_gap = worst_gap.min(gap);
                if gap < -1e-9 {
                    return Ok((false, format!("ordering violated: gap {gap:.3e}")));
                }
            }
            n_pairs += 1;
        }
        // commuting pairs: equality
        let mut worst_eq = 0.0f64;
        for k in 0..100 {
            let d = if k % 2 == 0 { 2 } else { 3 };
            let u = random_unitary(&mut rng, d);
            let diag = |rng: &mut ChaCha8Rng| {
                let mut evs: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() + 1e-3).collect();
                let s: f64 = evs.iter().sum();
                evs.iter_mut().for_each(|v| *v /= s);
                let m = DMatrix::from_fn(d, d, |r, c| {
                    if r == c {
                        C64::new(evs[r], 0.0)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                });
                DensityOperator::new(&u * m * u.adjoint(), tol).expect("valid state")
            };
            let rho = diag(&mut rng);
            let sig = diag(&mut rng);
            for j in 1..=20 {
                let a = j as f64 / 21.0;
                let qp = q_alpha_petz(&rho, &sig, a, tol)?;
                let qf = q_alpha_flat(&rho, &sig, a, tol)?.value;
                worst_eq = worst_eq.max((qp - qf).abs());
            }
        }
        let pass = worst_eq <= 1e-10;
        Ok((
            pass,
            format!(
                "{n_pairs} pairs x 20 alphas: min gap {worst_gap:.2e} >= -1e-9; commuting max |gap| {worst_eq:.2e}"
            ),
        ))
    })
}

/// 2. Faithfulness of the classical reduction: D_α agrees between the
/// quantum pair and its induced classical pair.
pub fn check_ns_faithfulness(seed: u64, tol: &Tolerances) -> CheckResult {
    run(2, "classical-reduction divergence faithfulness", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x02);
        let mut worst = 0.0f64;
        for k in 0..200 {
            let d = if k % 2 == 0 { 2 } else { 3 };
            let rho = random_density(&mut rng, d, tol);
            let sig = random_density(&mut rng, d, tol);
            let pair = ns_distributions(&rho, &sig, tol);
            for j in 0..=20 {
                let a = j as f64 / 20.0;
                let dq = d_alpha_petz(&rho, &sig, a, tol)?;
                let dc = pair.d_alpha(a);
                match (dq, dc) {
                    (ExtReal::Finite(x), ExtReal::Finite(y)) => worst = worst.max((x - y).abs()),
                    (ExtReal::Infinite, ExtReal::Infinite) => {}
                    _ => return Ok((false, format!("finiteness mismatch at alpha {a}"))),
                }
            }
        }
        Ok((worst <= 1e-9, format!("200 pairs x 21 alphas: max |D_q - D_c| = {worst:.2e}")))
    })
}

/// 3. The Gallager form sup_s {E₀(s) − sR} matches the first variational
/// exponent, and the two prior-maximized exponents agree.
pub fn check_gallager_consistency(_seed: u64, tol: &Tolerances) -> CheckResult {
    run(3, "Gallager/variational exponent consistency", || {
        let mut worst1 = 0.0f64;
        let mut worst2 = 0.0f64;
        for w in fixed_channels(tol) {
            let p = Prior::uniform(2);
            for r in mid_rates(&w, tol, 10)? {
                let mut f = |s: f64| e0_gallager(s, &p, &w, tol).map_or(f64::NEG_INFINITY, |e0| e0 - s * r);
                // E₀ − sR is concave in s; bracket the sup on a widening grid
                let (_, g1) = golden_max(0.0, 8.0, 200, &mut f);
                let (_, g2) = golden_max(0.0, 80.0, 200, &mut f);
                let gall = g1.max(g2).max(0.0);
                let v1 = match e_sp_variational_1(r, &p, &w, tol)? {
                    ExtReal::Finite(v) => v,
                    ExtReal::Infinite => continue,
                };
                worst1 = worst1.max((gall - v1).abs());
                let (_, m1, _) = maximize_over_simplex(2, &|q: &[f64]| {
                    Prior::new(q.to_vec())
                        .ok()
                        .and_then(|pr| e_sp_variational_1(r, &pr, &w, tol).ok())
                        .map_or(f64::NEG_INFINITY, |v| v.expect_finite("E1"))
                });
                let m2 = e_sp_max(r, &w, tol)?.0;
                worst2 = worst2.max((m1 - m2).abs());
            }
        }
        let pass = worst1 <= 1e-6 && worst2 <= 1e-5;
        Ok((
            pass,
            format!("max |Gallager - variational| = {worst1:.2e}; max |max_P spread| = {worst2:.2e}"),
        ))
    })
}

/// 4. Saddle-point quality: minimax gap below tolerance; ten random
/// restarts of the outer optimization agree on the value.
pub fn check_saddle(seed: u64, tol: &Tolerances) -> CheckResult {
    run(4, "saddle-point gap and uniqueness surrogate", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x04);
        let channels = fixed_channels(tol);
        let mut worst_gap = 0.0f64;
        let mut worst_spread = 0.0f64;
        for w in &channels {
            let rates = mid_rates(w, tol, 2)?;
            for &r in &rates {
                let p = random_prior(&mut rng, 2);
                let saddle = saddle_solve(r, &p, w, tol)?;
                worst_gap = worst_gap.max(saddle.minimax_gap);
                let base = saddle.value.expect_finite("E_sp^(2)");
                // restarts: local golden searches seeded at random points
                let mut obj = |a: f64| {
                    let a = a.clamp(1e-4, 1.0);
                    if a >= 1.0 - 1e-12 {
                        return 0.0;
                    }
                    crate::solver::inner_min_sigma(a, &p, w, tol)
                        .map_or(f64::NEG_INFINITY, |(_, i2)| (1.0 - a) / a * (i2 - r))
                };
                for _ in 0..10 {
                    let x0: f64 = rng.gen::<f64>() * (1.0 - 2e-4) + 1e-4;
                    let (mut lo, mut hi) = ((x0 - 0.05).max(1e-4), (x0 + 0.05).min(1.0));
                    // expand the window while the max sits on its edge
                    for _ in 0..30 {
                        let (xm, _) = golden_max(lo, hi, 40, &mut obj);
                        let edge = (xm - lo).abs() < 1e-3 || (hi - xm).abs() < 1e-3;
                        if !edge || (lo <= 1e-4 + 1e-9 && hi >= 1.0 - 1e-9) {
                            break;
                        }
                        lo = (lo - 0.1).max(1e-4);
                        hi = (hi + 0.1).min(1.0);
                    }
                    let (_, v) = golden_max(lo, hi, 80, &mut obj);
                    worst_spread = worst_spread.max((v - base).abs());
                }
            }
        }
        let pass = worst_gap <= 1e-6 && worst_spread <= 1e-6;
        Ok((
            pass,
            format!("max minimax gap = {worst_gap:.2e}; max restart spread = {worst_spread:.2e}"),
        ))
    })
}

/// 5. Exponent ordering: strong ≤ weak everywhere, with equality on
/// commuting (diagonal) channels.
pub fn check_exponent_ordering(seed: u64, tol: &Tolerances) -> CheckResult {
    run(5, "strong/weak exponent ordering", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x05);
        let mut worst_violation = 0.0f64;
        for w in fixed_channels(tol) {
            for r in mid_rates(&w, tol, 4)? {
                let p = random_prior(&mut rng, 2);
                let strong = e_sp_strong(r, &p, &w, tol)?;
                let weak = e_sp_weak(r, &p, &w, tol)?;
                if let (ExtReal::Finite(s), ExtReal::Finite(v)) = (strong, weak) {
                    worst_violation = worst_violation.max(s - v);
                }
            }
        }
        if worst_violation > 1e-6 {
            return Ok((false, format!("ordering violated by {worst_violation:.2e}")));
        }
        // diagonal channels: the two families coincide
        let mut worst_eq = 0.0f64;
        for _ in 0..3 {
            let states: Vec<DensityOperator> = (0..2)
                .map(|_| {
                    let a = 0.1 + 0.8 * rng.gen::<f64>();
                    DensityOperator::from_probabilities(&[a, 1.0 - a], tol).expect("valid")
                })
                .collect();
            let w = CQChannel::new(states)?;
            for r in mid_rates(&w, tol, 3)? {
                let p = random_prior(&mut rng, 2);
                if let (ExtReal::Finite(s), ExtReal::Finite(v)) =
                    (e_sp_strong(r, &p, &w, tol)?, e_sp_weak(r, &p, &w, tol)?)
                {
                    worst_eq = worst_eq.max((s - v).abs());
                }
            }
        }
        let pass = worst_eq <= 1e-6;
        Ok((
            pass,
            format!(
                "max (strong - weak) = {worst_violation:.2e}; commuting max |diff| = {worst_eq:.2e}"
            ),
        ))
    })
}

/// 6. Derivative identity: the finite difference of the fixed-composition
/// exponent in R matches −s*.
pub fn check_derivative_identity(seed: u64, tol: &Tolerances) -> CheckResult {
    run(6, "exponent slope matches saddle parameter", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x06);
        let channels = fixed_channels(tol);
        let mut worst = 0.0f64;
        let mut count = 0;
        'outer: for k in 0.. {
            let w = &channels[k % channels.len()];
            let rates = mid_rates(w, tol, 5)?;
            for &r in &rates {
                if count >= 30 {
                    break 'outer;
                }
                let p = random_prior(&mut rng, 2);
                let rep = subgradient_check(r, &p, w, tol)?;
                worst = worst.max(rep.deviation);
                count += 1;
            }
        }
        Ok((worst <= 1e-3, format!("{count} instances: max |FD + s*| = {worst:.2e}")))
    })
}

/// 7. Legendre-Fenchel regularity: the transform identities tying Λ*₀, Λ*₁,
/// t*, and the curvature to the exponent function φ.
pub fn check_lf_regularity(seed: u64, tol: &Tolerances) -> CheckResult {
    run(7, "Legendre-Fenchel regularity identities", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x07);
        let mut worst_lf = 0.0f64;
        let mut worst_t = 0.0f64;
        let mut worst_curv = 0.0f64;
        let mut tested = 0;
        for _ in 0..6 {
            let rho = random_density(&mut rng, 2, tol);
            let sig = random_density(&mut rng, 2, tol);
            let pair = ns_distributions(&rho, &sig, tol);
            let pairs = [pair];
            let comp = [1.0];
            let d1 = match pairs[0].d_alpha(1.0) {
                ExtReal::Finite(v) => v,
                ExtReal::Infinite => continue,
            };
            let r = 0.5 * d1;
            let phi = match phi_weighted(&pairs, &comp, r) {
                ExtReal::Finite(v) if v > 0.0 => v,
                _ => continue,
            };
            let record = cgf_build(&pairs, &comp)?;
            let lf0 = legendre_fenchel(&record, 0, phi - r);
            let lf1 = legendre_fenchel(&record, 1, r - phi);
            worst_lf = worst_lf.max((lf0.value - phi).abs()).max((lf1.value - r).abs());
            // α* to high precision: bisection on the FD derivative of the
            // concave objective α ↦ (1−α)/α (D_α − r)
            // φ and α* to high precision: bisection on the FD derivative of
            // the concave objective α ↦ (1−α)/α (D_α − x); the returned value
            // is stationarity-insensitive to the residual location error
            let terms: Vec<(f64, f64)> = pairs[0]
                .p
                .iter()
                .zip(&pairs[0].q)
                .filter(|&(&pi, &qi)| pi > 0.0 && qi > 0.0)
                .map(|(&pi, &qi)| (pi, qi))
                .collect();
            let precise = |x: f64| -> Option<(f64, f64)> {
                // (1−α)/α (D_α − x) = −ln Q_α/α − x(1−α)/α with
                // Q_α = Σ pᵢ^α qᵢ^{1−α}, so the derivative is analytic:
                // obj′(α) = −Q′/(Qα) + ln Q/α² + x/α²
                let q_and_dq = |a: f64| {
                    let (mut qv, mut dq) = (0.0, 0.0);
                    for &(pi, qi) in &terms {
                        let w = pi.powf(a) * qi.powf(1.0 - a);
                        qv += w;
                        dq += w * (pi / qi).ln();
                    }
                    (qv, dq)
                };
                let obj = |a: f64| {
                    let (qv, _) = q_and_dq(a);
                    -qv.ln() / a - x * (1.0 - a) / a
                };
                let dobj = |a: f64| {
                    let (qv, dq) = q_and_dq(a);
                    -dq / (qv * a) + qv.ln() / (a * a) + x / (a * a)
                };
                let (mut lo, mut hi) = (1e-3, 1.0 - 1e-12);
                if dobj(lo) <= 0.0 || dobj(hi) >= 0.0 {
                    return None;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if dobj(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let a = 0.5 * (lo + hi);
                Some((obj(a), a))
            };
            let Some((phi_r, alpha_star)) = precise(r) else {
                continue;
            };
            // t* = s*/(1+s*) = 1 − α*
            worst_t = worst_t.max((lf0.t_star - (1.0 - alpha_star)).abs());
            // curvature: Richardson-extrapolated second difference of φ
            // against (1+s*)³/Λ″₀(t*)
            let second = |hh: f64| -> Option<f64> {
                let (pp, _) = precise(r + hh)?;
                let (pm, _) = precise(r - hh)?;
                Some((pp - 2.0 * phi_r + pm) / (hh * hh))
            };
            let (Some(c1), Some(c2)) = (second(1e-4), second(2e-4)) else {
                continue;
            };
            let curv_fd = (4.0 * c1 - c2) / 3.0;
            let s_star = (1.0 - alpha_star) / alpha_star;
            let curv_pred = (1.0 + s_star).powi(3) / record.lambda_d2(0, lf0.t_star);
            worst_curv = worst_curv.max((curv_fd - curv_pred).abs() / curv_pred.abs().max(1.0));
            tested += 1;
        }
        let pass = tested >= 3 && worst_lf <= 1e-7 && worst_t <= 1e-8 && worst_curv <= 1e-4;
        Ok((
            pass,
            format!(
                "{tested} instances: max LF identity dev {worst_lf:.2e}; max |t* - (1-alpha*)| {worst_t:.2e}; max curvature dev {worst_curv:.2e}"
            ),
        ))
    })
}

/// 8. Concentration lower bound soundness: the bound never exceeds the
/// exact tail, and is within a factor 10 at the largest guarded n.
pub fn check_brr_soundness(_seed: u64, tol: &Tolerances) -> CheckResult {
    run(8, "concentration bound vs exact tails", || {
        // i.i.d. binary instances
        let binary = |p: [f64; 2], q: [f64; 2]| NSPair {
            atoms: vec![(0, 0), (1, 1)],
            p: p.to_vec(),
            q: q.to_vec(),
        };
        let instances = [
            binary([0.5, 0.5], [0.25, 0.75]),
            binary([0.4, 0.6], [0.25, 0.75]),
            binary([0.3, 0.7], [0.6, 0.4]),
        ];
        let mut violations = 0usize;
        let mut best_ratio = f64::INFINITY;
        let mut guarded = 0usize;
        for pair in &instances {
            let pairs = [pair.clone()];
            let record = cgf_build(&pairs, &[1.0])?;
            let symbol = SymbolCGF::new(pair);
            for side in 0..2 {
                let z = record.lambda_d1(side, 0.8); // interior of the regime
                let mut largest: Option<(usize, f64)> = None;
                for n in (100..=1000).step_by(100) {
                    let brr = match bahadur_ranga_rao(&record, side, z, n) {
                        Ok(b) => b,
                        Err(_) => continue,
                    };
                    guarded += 1;
                    let exact = exact_tail_iid(&symbol, side, z, n)?;
                    if brr.bound > exact * (1.0 + 1e-12) {
                        violations += 1;
                    }
                    largest = Some((n, exact / brr.bound));
                }
                if let Some((_, ratio)) = largest {
                    best_ratio = best_ratio.min(ratio);
                }
            }
        }
        // qubit products at small n against the exact product tail
        let t0 = Tolerances::default();
        let rho = qubit(&t0, [[(0.7, 0.0), (0.1, 0.2)], [(0.1, -0.2), (0.3, 0.0)]]);
        let sig = qubit(&t0, [[(0.4, 0.0), (-0.15, 0.05)], [(-0.15, -0.05), (0.6, 0.0)]]);
        let pair = ns_distributions(&rho, &sig, tol);
        let pairs = [pair.clone()];
        let record = cgf_build(&pairs, &[1.0])?;
        let symbol = SymbolCGF::new(&pair);
        let mut small_checked = 0usize;
        for side in 0..2 {
            let z = record.lambda_d1(side, 0.7);
            for n in 2..=12 {
                // the product of n identical symbols is an i.i.d. sum, so the
                // type-class tail applies; cross-check the product-path tail
                // at sizes its atom enumeration can afford
                let exact = exact_tail_iid(&symbol, side, z, n)?;
                if n <= 8 {
                    let prod = exact_tail_product(&[(SymbolCGF::new(&pair), n)], side, z)?;
                    if (prod - exact).abs() > 1e-10 * exact.max(1e-300) {
                        return Ok((false, format!("product/iid tail mismatch at n = {n}")));
                    }
                }
                if let Ok(brr) = bahadur_ranga_rao(&record, side, z, n) {
                    if brr.bound > exact * (1.0 + 1e-12) {
                        violations += 1;
                    }
                    small_checked += 1;
                }
            }
        }
        let factor_ok = best_ratio <= 10.0;
        let pass = violations == 0 && factor_ok && guarded > 0;
        Ok((
            pass,
            format!(
                "{guarded} guarded iid cells + {small_checked} product cells: {violations} violations; tightest exact/bound ratio at largest n = {best_ratio:.2}"
            ),
        ))
    })
}

/// 9. Converse soundness: the exact hypothesis-testing oracle dominates
/// every reported bound at n ∈ {6, 8, 10}, and the polynomial-prefactor
/// bound beats the Chebyshev bound at the largest n where its guards hold.
pub fn check_converse_soundness(_seed: u64, tol: &Tolerances) -> CheckResult {
    run(9, "converse bounds vs exact oracle", || {
        let w = &fixed_channels(tol)[0];
        let cap = crate::channel::capacity(w, tol)?.value;
        let r = 0.6 * cap;
        let p = Prior::uniform(2);
        let saddle = saddle_solve(r, &p, w, tol)?;
        let e2 = saddle.value.expect_finite("E_sp^(2)");
        let mut violations = 0usize;
        let mut applicable = 0usize;
        let mut lines = Vec::new();
        for n in [6usize, 8, 10] {
            // constant-composition codeword with the uniform composition
            let xn: Vec<usize> = (0..n).map(|i| i % 2).collect();
            let mu = 2.0 * (-(n as f64) * r).exp();
            let oracle = product_oracle(w, &xn, &saddle.sigma_star, mu, tol)?;
            let cheby = chebyshev_converse(w, &p, r, n, 2.0, tol)?;
            let sharp = sharp_converse(w, &p, r, n, 0.5 * e2, 2.0, tol)?;
            let refined = refined_sp_bound(w, r, n, &p, 0.0, None, tol)?;
            for rep in [&cheby, &sharp, &refined] {
                // a bound applies only when its finite-n preconditions hold
                if !rep.is_valid() {
                    continue;
                }
                applicable += 1;
                if rep.bound > oracle * (1.0 + 1e-9) {
                    violations += 1;
                    lines.push(format!("n={n} {}: {:.3e} > oracle {:.3e}", rep.name, rep.bound, oracle));
                }
            }
        }
        // sharp vs Chebyshev at the largest n where the sharp guards hold
        let mut comparison: Option<(usize, f64, f64)> = None;
        for n in [50usize, 100, 200, 400, 800, 1600, 3200] {
            let sharp = sharp_converse(w, &p, r, n, 0.5 * e2, 2.0, tol)?;
            if sharp.is_valid() {
                let cheby = chebyshev_converse(w, &p, r, n, 2.0, tol)?;
                comparison = Some((n, sharp.prefactor, cheby.prefactor));
            }
        }
        let (cmp_pass, cmp_line) = match comparison {
            Some((n, s, c)) => (
                s > c,
                format!("at n={n}: sharp prefactor {s:.3e} vs Chebyshev {c:.3e}"),
            ),
            None => (false, "no n with sharp guards satisfied".into()),
        };
        let pass = violations == 0 && cmp_pass;
        let mut detail = format!(
            "{applicable} applicable bound cells at n in {{6,8,10}}, {violations} soundness violations; {cmp_line}"
        );
        if !lines.is_empty() {
            detail.push_str(&format!("; {}", lines.join("; ")));
        }
        Ok((pass, detail))
    })
}

/// 10. The finite-n hypothesis-testing exponent approaches φ(r) at speed
/// O(log n / n).
pub fn check_hoeffding_convergence(_seed: u64, tol: &Tolerances) -> CheckResult {
    run(10, "finite-n exponent convergence", || {
        // commuting pair: the exact oracle reduces to fast type-class counting
        let rho = DensityOperator::from_probabilities(&[0.65, 0.35], tol)?;
        let sig = DensityOperator::from_probabilities(&[0.3, 0.7], tol)?;
        let pair = ns_distributions(&rho, &sig, tol);
        let d = pair.relative_entropy().expect_finite("D");
        let r = 0.5 * d;
        let phi = phi_weighted(std::slice::from_ref(&pair), &[1.0], r).expect_finite("phi");
        let ests = hoeffding_exponent_estimate(&rho, &sig, r, &[4, 12], tol)?;
        let gap4 = (ests[0].1 - phi).abs();
        let gap12 = (ests[1].1 - phi).abs();
        let c4 = gap4 * 4.0 / 4.0f64.ln();
        let c12 = gap12 * 12.0 / 12.0f64.ln();
        let c = c4.max(c12);
        let pass = gap12 < gap4 && c < 20.0;
        Ok((
            pass,
            format!("gap(n=4) = {gap4:.3}, gap(n=12) = {gap12:.3}, fitted C = {c:.2} < 20"),
        ))
    })
}

/// 11. Symmetric-channel exactness on the bit-flip orbit channel.
pub fn check_symmetric_exactness(seed: u64, tol: &Tolerances) -> CheckResult {
    run(11, "symmetric channel exactness", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0b);
        let x = DMatrix::from_fn(2, 2, |r, c| {
            if r != c {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let w1 = qubit(tol, [[(0.8, 0.0), (0.1, 0.05)], [(0.1, -0.05), (0.2, 0.0)]]);
        let w = build_symmetric(&w1, &x, 2, tol)?;
        // optimality condition with equality on the support
        let mut worst_opt = 0.0f64;
        for s in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let rep = uniform_optimality_check(&w, &Prior::uniform(2), s, tol)?;
            if !rep.optimal {
                return Ok((false, format!("optimality condition failed at s = {s}")));
            }
            worst_opt = worst_opt.max(rep.max_support_deviation);
        }
        // σ*_R closed form
        let r_inf = crate::channel::r_infinity(&w, tol)?.value;
        let cap = crate::channel::capacity(&w, tol)?.value;
        let r = r_inf + 0.5 * (cap - r_inf);
        let saddle = saddle_solve(r, &Prior::uniform(2), &w, tol)?;
        let cf = symmetric_sigma_closed_form(&w, saddle.alpha_star, tol)?;
        let sigma_dev = trace_distance(&cf, &saddle.sigma_star);
        // prior-independence: at the uniform-orbit state σ*_R the exponent
        // sup_α F_{R,P}(α, σ*_R) is the same for every composition P
        let e_sp = e_sp_max(r, &w, tol)?.0;
        let mut worst_prior = 0.0f64;
        for _ in 0..20 {
            let p = random_prior(&mut rng, 2);
            let mut obj = |a: f64| {
                crate::solver::f_r_p(a.clamp(1e-4, 1.0), &saddle.sigma_star, r, &p, &w, tol)
                    .map_or(f64::NEG_INFINITY, |v| match v {
                        ExtReal::Finite(x) => x,
                        ExtReal::Infinite => f64::NEG_INFINITY,
                    })
            };
            let (_, e2) = crate::solver::golden_max(1e-4, 1.0, 120, &mut obj);
            worst_prior = worst_prior.max((e2.max(0.0) - e_sp).abs());
        }
        let pass = worst_opt <= 1e-8 && sigma_dev <= 1e-7 && worst_prior <= 1e-6;
        Ok((
            pass,
            format!(
                "optimality dev {worst_opt:.2e}; sigma* closed-form dev {sigma_dev:.2e}; max |E^(2)(R,P) - E_sp(R)| over 20 priors = {worst_prior:.2e}"
            ),
        ))
    })
}

/// 12. Regime structure of the exponent curve: non-increasing,
/// midpoint-convex, zero above capacity, infinite below the cutoff rate.
pub fn check_regime_structure(_seed: u64, tol: &Tolerances) -> CheckResult {
    run(12, "exponent-curve regime structure", || {
        let w = &fixed_channels(tol)[0];
        let r_inf = crate::channel::r_infinity(w, tol)?.value;
        let cap = crate::channel::capacity(w, tol)?.value;
        let lo = (r_inf * 0.2).max(1e-4);
        let hi = cap * 1.3;
        let m = 25usize;
        let rates: Vec<f64> = (0..m).map(|k| lo + (hi - lo) * k as f64 / (m - 1) as f64).collect();
        let curve = exponent_curve(w, &rates, false, tol)?;
        let mut prev: Option<f64> = None;
        let mut finite: Vec<(f64, f64)> = Vec::new();
        for pt in &curve.points {
            match pt.e_sp {
                ExtReal::Infinite => {
                    if pt.rate > r_inf - 1e-6 {
                        return Ok((false, format!("infinite regime above cutoff at R = {}", pt.rate)));
                    }
                    if pt.regime != Regime::Infinite {
                        return Ok((false, "infinite value without infinite flag".into()));
                    }
                }
                ExtReal::Finite(v) => {
                    if pt.rate >= cap + 1e-6 && v.abs() > 1e-9 {
                        return Ok((false, format!("nonzero exponent {v:.2e} above capacity")));
                    }
                    if let Some(pv) = prev {
                        if v > pv + 1e-8 {
                            return Ok((false, format!("curve increases at R = {}", pt.rate)));
                        }
                    }
                    prev = Some(v);
                    finite.push((pt.rate, v));
                }
            }
        }
        // midpoint convexity on consecutive finite triples
        let mut worst_mid = f64::NEG_INFINITY;
        for tri in finite.windows(3) {
            let mid = 0.5 * (tri[0].1 + tri[2].1) - tri[1].1;
            worst_mid = worst_mid.max(-mid);
        }
        let pass = worst_mid <= 1e-7;
        Ok((
            pass,
            format!(
                "{} points: monotone, zero above C, infinite below cutoff; worst midpoint-convexity defect {worst_mid:.2e}",
                curve.points.len()
            ),
        ))
    })
}

/// Run the requested suites (1–12); `which` empty means all.
pub fn run_battery(which: &[usize], seed: u64, tol: &Tolerances) -> Vec<CheckResult> {
    let all: Vec<fn(u64, &Tolerances) -> CheckResult> = vec![
        check_gt_ordering,
        check_ns_faithfulness,
        check_gallager_consistency,
        check_saddle,
        check_exponent_ordering,
        check_derivative_identity,
        check_lf_regularity,
        check_brr_soundness,
        check_converse_soundness,
        check_hoeffding_convergence,
        check_symmetric_exactness,
        check_regime_structure,
    ];
    let ids: Vec<usize> = if which.is_empty() {
        (1..=12).collect()
    } else {
        which.to_vec()
    };
    ids.iter()
        .filter(|&&k| (1..=12).contains(&k))
        .map(|&k| all[k - 1](seed, tol))
        .collect()
}
