//! Channel-level information quantities for classical-quantum channels:
//! conditional divergences, mutual information, the two α-Rényi mutual
//! informations I^(1) (closed form) and I^(2) (inner minimization over the
//! output state), the Rényi radius C_α, capacity, and R_∞ = C_0.

use crate::config::Tolerances;
use crate::divergence::{d_alpha_petz, overlap_data, relative_entropy};
use crate::error::{Error, Result};
use crate::extreal::ExtReal;
use crate::operator::{
    power_from_spectral, trace_re, trace_distance, CMat, DensityOperator,
    HermitianMatrix,
};

/// Probability distribution over the input alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    p: Vec<f64>,
}

impl Prior {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidParameter("empty prior".into()));
        }
        if p.iter().any(|&v| v < -1e-12 || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "prior has negative or non-finite weights: {p:?}"
            )));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "prior sums to {s}, not 1"
            )));
        }
        let p = p.into_iter().map(|v| v.max(0.0)).collect();
        Ok(Prior { p })
    }

    pub fn uniform(n: usize) -> Self {
        Prior {
            p: vec![1.0 / n as f64; n],
        }
    }

    /// All mass on one symbol.
    pub fn point(n: usize, x: usize) -> Self {
        let mut p = vec![0.0; n];
        p[x] = 1.0;
        Prior { p }
    }

    pub fn weights(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Indices with strictly positive mass.
    pub fn support(&self) -> Vec<usize> {
        self.p
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// A classical-quantum channel: one output state per input symbol, all on a
/// shared space.
#[derive(Debug, Clone)]
pub struct CQChannel {
    states: Vec<DensityOperator>,
    dim: usize,
}

impl CQChannel {
    pub fn new(states: Vec<DensityOperator>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidChannel("empty alphabet".into()));
        }
        let dim = states[0].dim();
        if states.iter().any(|s| s.dim() != dim) {
            return Err(Error::InvalidChannel(
                "output states live on different spaces".into(),
            ));
        }
        Ok(CQChannel { states, dim })
    }

    pub fn size(&self) -> usize {
        self.states.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self, x: usize) -> &DensityOperator {
        &self.states[x]
    }

    pub fn states(&self) -> &[DensityOperator] {
        &self.states
    }
}

/// The joint c-q state Σ_x P(x)|x⟩⟨x| ⊗ W_x induced by a prior and a channel.
#[derive(Debug, Clone)]
pub struct CQState {
    pub prior: Prior,
    pub channel: CQChannel,
}

impl CQState {
    pub fn new(prior: Prior, channel: CQChannel) -> Result<Self> {
        if prior.len() != channel.size() {
            return Err(Error::InvalidChannel(format!(
                "prior over {} symbols, channel over {}",
                prior.len(),
                channel.size()
            )));
        }
        Ok(CQState { prior, channel })
    }

    /// Materialized block-diagonal joint density matrix.
    pub fn joint_matrix(&self) -> CMat {
        let d = self.channel.dim();
        let n = self.channel.size();
        let mut m = CMat::zeros(n * d, n * d);
        for x in 0..n {
            let block = self.channel.state(x).matrix().scale(self.prior.weights()[x]);
            m.view_mut((x * d, x * d), (d, d)).copy_from(&block);
        }
        m
    }
}

fn check_compat(w: &CQChannel, p: &Prior) -> Result<()> {
    if w.size() != p.len() {
        return Err(Error::InvalidChannel(format!(
            "prior over {} symbols, channel over {}",
            p.len(),
            w.size()
        )));
    }
    Ok(())
}

/// Σ_x P(x) D(V_x‖W_x); +∞ propagates.
pub fn conditional_divergence(
    v: &CQChannel,
    w: &CQChannel,
    p: &Prior,
    tol: &Tolerances,
) -> Result<ExtReal> {
    check_compat(v, p)?;
    check_compat(w, p)?;
    if v.dim() != w.dim() {
        return Err(Error::InvalidChannel("output dimensions differ".into()));
    }
    let mut acc = 0.0;
    for (x, &px) in p.weights().iter().enumerate() {
        if px == 0.0 {
            continue;
        }
        match relative_entropy(v.state(x), w.state(x), tol) {
            ExtReal::Finite(d) => acc += px * d,
            ExtReal::Infinite => return Ok(ExtReal::Infinite),
        }
    }
    Ok(ExtReal::Finite(acc))
}

/// Which Rényi family a conditional divergence uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenyiFamily {
    Petz,
    Flat,
}

/// Σ_x P(x) D_α(W_x‖σ) in the requested family; +∞ propagates.
pub fn conditional_renyi(
    w: &CQChannel,
    sigma: &DensityOperator,
    p: &Prior,
    alpha: f64,
    family: RenyiFamily,
    tol: &Tolerances,
) -> Result<ExtReal> {
    check_compat(w, p)?;
    if w.dim() != sigma.dim() {
        return Err(Error::InvalidChannel("sigma dimension differs".into()));
    }
    let mut acc = 0.0;
    for (x, &px) in p.weights().iter().enumerate() {
        if px == 0.0 {
            continue;
        }
        let d = match family {
            RenyiFamily::Petz => d_alpha_petz(w.state(x), sigma, alpha, tol)?,
            RenyiFamily::Flat => crate::divergence::d_alpha_flat(w.state(x), sigma, alpha, tol)?,
        };
        match d {
            ExtReal::Finite(v) => acc += px * v,
            ExtReal::Infinite => return Ok(ExtReal::Infinite),
        }
    }
    Ok(ExtReal::Finite(acc))
}

/// The averaged output state P𝒲 = Σ_x P(x) W_x.
pub fn average_output(w: &CQChannel, p: &Prior, tol: &Tolerances) -> Result<DensityOperator> {
    check_compat(w, p)?;
    let d = w.dim();
    let mut m = CMat::zeros(d, d);
    for (x, &px) in p.weights().iter().enumerate() {
        if px > 0.0 {
            m += w.state(x).matrix().scale(px);
        }
    }
    DensityOperator::new(m, tol)
}

/// Mutual information I(P,𝒲) = Σ_x P(x) D(W_x‖P𝒲) (closed-form minimizer).
pub fn mutual_information(p: &Prior, w: &CQChannel, tol: &Tolerances) -> Result<f64> {
    let pw = average_output(w, p, tol)?;
    let v = conditional_renyi(w, &pw, p, 1.0, RenyiFamily::Petz, tol)?;
    Ok(v.expect_finite("mutual information").max(0.0))
}

/// The Sibson minimizer σ ∝ (Σ_x P(x) W_x^α)^{1/α}.
pub fn sibson_center(
    p: &Prior,
    w: &CQChannel,
    alpha: f64,
    tol: &Tolerances,
) -> Result<DensityOperator> {
    check_compat(w, p)?;
    let d = w.dim();
    let mut m = CMat::zeros(d, d);
    for (x, &px) in p.weights().iter().enumerate() {
        if px > 0.0 {
            let wa = power_from_spectral(w.state(x).spectral(), alpha, tol)?;
            m += wa.matrix().scale(px);
        }
    }
    let root = crate::operator::mat_power(&HermitianMatrix::from_exact(m), 1.0 / alpha, tol)?;
    DensityOperator::normalized(root.into_matrix(), tol)
}

/// I_α^(1)(P,𝒲) = inf_σ D_α(P∘𝒲‖P⊗σ), in closed form
/// (α/(α−1))·log Tr[(Σ_x P(x) W_x^α)^{1/α}]; α = 1 gives I(P,𝒲).
pub fn i_alpha_1(p: &Prior, w: &CQChannel, alpha: f64, tol: &Tolerances) -> Result<f64> {
    check_compat(w, p)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0,1], got {alpha}"
        )));
    }
    if alpha == 1.0 {
        return mutual_information(p, w, tol);
    }
    let d = w.dim();
    let mut m = CMat::zeros(d, d);
    for (x, &px) in p.weights().iter().enumerate() {
        if px > 0.0 {
            let wa = power_from_spectral(w.state(x).spectral(), alpha, tol)?;
            m += wa.matrix().scale(px);
        }
    }
    let root = crate::operator::mat_power(&HermitianMatrix::from_exact(m), 1.0 / alpha, tol)?;
    let tr = trace_re(root.matrix());
    Ok((alpha / (alpha - 1.0)) * tr.ln())
}

/// D_α(P∘𝒲‖P⊗σ) = (1/(α−1)) log Σ_x P(x) Tr[W_x^α σ^{1−α}] — the quantity
/// I^(1) minimizes; exposed for cross-checks.
pub fn joint_renyi_vs_product(
    p: &Prior,
    w: &CQChannel,
    sigma: &DensityOperator,
    alpha: f64,
    tol: &Tolerances,
) -> Result<ExtReal> {
    check_compat(w, p)?;
    let mut q = 0.0;
    for (x, &px) in p.weights().iter().enumerate() {
        if px > 0.0 {
            let ov = overlap_data(w.state(x), sigma, tol);
            q += px * crate::divergence::q_alpha_petz_overlap(&ov, alpha);
        }
    }
    if q <= 0.0 {
        return Ok(ExtReal::Infinite);
    }
    Ok(ExtReal::Finite(q.ln() / (alpha - 1.0)))
}

/// Outcome of the I^(2) inner minimization.
#[derive(Debug, Clone)]
pub struct AugustinResult {
    pub value: f64,
    pub sigma: DensityOperator,
    pub iterations: usize,
    /// Trace-norm distance between the last iterate and its image under the
    /// fixed-point map (first-order stationarity surrogate).
    pub residual: f64,
    /// Set when an α-boundary was evaluated through a small-α proxy.
    pub proxy_alpha: Option<f64>,
}

/// Value of the proxy α used for the α = 0 endpoint when no closed form
/// applies.
pub const ALPHA_ZERO_PROXY: f64 = 1e-4;

/// I_α^(2)(P,𝒲) = inf_σ Σ_x P(x) D_α(W_x‖σ) by damped fixed-point iteration
/// of σ ← normalize[(Σ_x P(x) W_x^α / Tr[W_x^α σ^{1−α}])^{1/α}].
pub fn i_alpha_2(p: &Prior, w: &CQChannel, alpha: f64, tol: &Tolerances) -> Result<AugustinResult> {
    check_compat(w, p)?;
    if !(alpha >= 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in [0,1], got {alpha}"
        )));
    }
    if alpha == 1.0 {
        let sigma = average_output(w, p, tol)?;
        let value = mutual_information(p, w, tol)?;
        return Ok(AugustinResult {
            value,
            sigma,
            iterations: 0,
            residual: 0.0,
            proxy_alpha: None,
        });
    }
    let (alpha_eff, proxy) = if alpha == 0.0 {
        (ALPHA_ZERO_PROXY, Some(ALPHA_ZERO_PROXY))
    } else {
        (alpha, None)
    };
    let mut r = augustin_fixed_point(p, w, alpha_eff, tol)?;
    r.proxy_alpha = proxy;
    Ok(r)
}

fn augustin_fixed_point(
    p: &Prior,
    w: &CQChannel,
    alpha: f64,
    tol: &Tolerances,
) -> Result<AugustinResult> {
    let lambda = 0.5;
    let max_iters = 500;
    // precompute W_x^α for the supported symbols
    let mut terms: Vec<(f64, CMat)> = Vec::new();
    for (x, &px) in p.weights().iter().enumerate() {
        if px > 0.0 {
            let wa = power_from_spectral(w.state(x).spectral(), alpha, tol)?;
            terms.push((px, wa.into_matrix()));
        }
    }
    let mut sigma = sibson_center(p, w, alpha, tol)?;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    for k in 0..max_iters {
        iterations = k + 1;
        let s1a = power_from_spectral(sigma.spectral(), 1.0 - alpha, tol)?;
        let d = w.dim();
        let mut m = CMat::zeros(d, d);
        for (px, wa) in &terms {
            let qx = trace_re(&(wa * s1a.matrix()));
            if qx <= 0.0 || !qx.is_finite() {
                return Err(Error::NumericalFailure {
                    context: "inner minimization fixed point".into(),
                    detail: format!("trace weight {qx} at iteration {k}"),
                });
            }
            m += wa.scale(px / qx);
        }
        let mapped = crate::operator::mat_power(&HermitianMatrix::from_exact(m), 1.0 / alpha, tol)?;
        let mapped = DensityOperator::normalized(mapped.into_matrix(), tol)?;
        residual = trace_distance(&sigma, &mapped);
        let next_m = sigma.matrix().scale(1.0 - lambda) + mapped.matrix().scale(lambda);
        let next = DensityOperator::normalized(next_m, tol)?;
        let step = trace_distance(&sigma, &next);
        sigma = next;
        if step <= tol.fixed_point && residual <= tol.first_order {
            break;
        }
    }
    if residual > tol.first_order {
        return Err(Error::NumericalFailure {
            context: "inner minimization fixed point".into(),
            detail: format!(
                "first-order residual {residual:.3e} after {iterations} iterations"
            ),
        });
    }
    let value = conditional_renyi(w, &sigma, p, alpha, RenyiFamily::Petz, tol)?
        .expect_finite("conditional Renyi at fixed point")
        .max(0.0);
    Ok(AugustinResult {
        value,
        sigma,
        iterations,
        residual,
        proxy_alpha: None,
    })
}

/// Result of a prior maximization.
#[derive(Debug, Clone)]
pub struct RadiusResult {
    pub value: f64,
    pub prior: Prior,
    /// Improvement found by the final polish step; a small value certifies
    /// local stationarity of the reported prior.
    pub certificate_gap: f64,
    pub proxy_alpha: Option<f64>,
}

/// Maximize a function over the probability simplex.
///
/// Alphabets of size ≤ 3 use multi-resolution grid refinement down to step
/// 1e-3 followed by a pattern-search polish; larger alphabets use projected
/// gradient ascent from 20 deterministic-seeded random restarts.
pub fn maximize_over_simplex(
    n: usize,
    f: &dyn Fn(&[f64]) -> f64,
) -> (Vec<f64>, f64, f64) {
    assert!(n >= 1);
    if n == 1 {
        let p = vec![1.0];
        let v = f(&p);
        return (p, v, 0.0);
    }
    let (mut best_p, mut best_v) = if n <= 3 {
        grid_refine(n, f)
    } else {
        projected_gradient_restarts(n, f)
    };
    // pattern-search polish: pairwise mass transfers with shrinking step
    let before = best_v;
    let mut step = 1e-3;
    while step >= 1e-7 {
        let mut improved = false;
        for i in 0..n {
            for j in 0..n {
                if i == j || best_p[i] < step {
                    continue;
                }
                let mut cand = best_p.clone();
                cand[i] -= step;
                cand[j] += step;
                let v = f(&cand);
                if v > best_v {
                    best_v = v;
                    best_p = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    let gap = best_v - before;
    (best_p, best_v, gap)
}

fn grid_refine(n: usize, f: &dyn Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
    // coarse pass at step 1/20, then local grids halving the step to < 1e-3
    let mut best_p = vec![1.0 / n as f64; n];
    let mut best_v = f(&best_p);
    let coarse = 20usize;
    for p in simplex_grid(n, coarse) {
        let v = f(&p);
        if v > best_v {
            best_v = v;
            best_p = p;
        }
    }
    let mut step = 1.0 / coarse as f64;
    while step > 1e-3 {
        step *= 0.5;
        // local grid: perturb best point by multiples of step in a small box
        let offsets: Vec<i32> = vec![-2, -1, 0, 1, 2];
        let mut local_best = (best_p.clone(), best_v);
        let mut stack = vec![(Vec::<f64>::new(), 0usize)];
        while let Some((partial, k)) = stack.pop() {
            if k == n - 1 {
                let s: f64 = partial.iter().sum();
                let last = best_p[n - 1] + (1.0 - s - best_p[..n - 1].iter().sum::<f64>());
                let mut cand = partial.clone();
                cand.push(last);
                if cand.iter().all(|&v| v >= -1e-12) {
                    let total: f64 = cand.iter().sum();
                    if (total - 1.0).abs() < 1e-9 {
                        let cand: Vec<f64> = cand.iter().map(|&v| v.max(0.0)).collect();
                        let v = f(&cand);
                        if v > local_best.1 {
                            local_best = (cand, v);
                        }
                    }
                }
                continue;
            }
            for &o in &offsets {
                let val = best_p[k] + o as f64 * step;
                if val >= -1e-12 && val <= 1.0 + 1e-12 {
                    let mut next = partial.clone();
                    next.push(val.clamp(0.0, 1.0));
                    stack.push((next, k + 1));
                }
            }
        }
        best_p = local_best.0;
        best_v = local_best.1;
    }
    (best_p, best_v)
}

/// All points of the simplex grid with denominator `m`.
pub fn simplex_grid(n: usize, m: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut counts = vec![0usize; n];
    fn rec(counts: &mut Vec<usize>, k: usize, rem: usize, m: usize, out: &mut Vec<Vec<f64>>) {
        if k == counts.len() - 1 {
            counts[k] = rem;
            out.push(counts.iter().map(|&c| c as f64 / m as f64).collect());
            return;
        }
        for c in 0..=rem {
            counts[k] = c;
            rec(counts, k + 1, rem - c, m, out);
        }
    }
    rec(&mut counts, 0, m, m, &mut out);
    out
}

fn projected_gradient_restarts(n: usize, f: &dyn Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let mut best_p = vec![1.0 / n as f64; n];
    let mut best_v = f(&best_p);
    for restart in 0..20 {
        let mut p: Vec<f64> = if restart == 0 {
            vec![1.0 / n as f64; n]
        } else {
            let raw: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().max(1e-12).ln()).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect()
        };
        let mut v = f(&p);
        let h = 1e-6;
        for _ in 0..200 {
            // numerical gradient
            let mut g = vec![0.0; n];
            for i in 0..n {
                let mut q = p.clone();
                q[i] += h;
                let s: f64 = q.iter().sum();
                for w in q.iter_mut() {
                    *w /= s;
                }
                g[i] = (f(&q) - v) / h;
            }
            // ascent with backtracking and simplex projection
            let mut stepsize = 0.1;
            let mut advanced = false;
            while stepsize > 1e-9 {
                let cand: Vec<f64> = p.iter().zip(&g).map(|(&pi, &gi)| pi + stepsize * gi).collect();
                let cand = project_to_simplex(&cand);
                let cv = f(&cand);
                if cv > v + 1e-14 {
                    p = cand;
                    v = cv;
                    advanced = true;
                    break;
                }
                stepsize *= 0.5;
            }
            if !advanced {
                break;
            }
        }
        if v > best_v {
            best_v = v;
            best_p = p;
        }
    }
    (best_p, best_v)
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let _n = v.len();
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut css = 0.0;
    let mut rho = 0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            rho = i + 1;
            theta = t;
        }
    }
    let _ = rho;
    v.iter().map(|&vi| (vi - theta).max(0.0)).collect()
}

/// Rényi radius C_α = max_P I_α^(2)(P,𝒲).
pub fn renyi_radius(w: &CQChannel, alpha: f64, tol: &Tolerances) -> Result<RadiusResult> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in [0,1], got {alpha}"
        )));
    }
    let n = w.size();
    let proxy = if alpha == 0.0 {
        Some(ALPHA_ZERO_PROXY)
    } else {
        None
    };
    let alpha_eff = if alpha == 0.0 { ALPHA_ZERO_PROXY } else { alpha };
    let eval = |p: &[f64]| -> f64 {
        let prior = match Prior::new(p.to_vec()) {
            Ok(pr) => pr,
            Err(_) => return f64::NEG_INFINITY,
        };
        match i_alpha_2(&prior, w, alpha_eff, tol) {
            Ok(r) => r.value,
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let (p, v, gap) = maximize_over_simplex(n, &eval);
    Ok(RadiusResult {
        value: v,
        prior: Prior::new(p).expect("optimizer returns a valid prior"),
        certificate_gap: gap,
        proxy_alpha: proxy,
    })
}

/// Channel capacity C_𝒲 = C_1.
pub fn capacity(w: &CQChannel, tol: &Tolerances) -> Result<RadiusResult> {
    renyi_radius(w, 1.0, tol)
}

/// R_∞ = C_0 (evaluated through the small-α proxy; recorded in the result).
pub fn r_infinity(w: &CQChannel, tol: &Tolerances) -> Result<RadiusResult> {
    renyi_radius(w, 0.0, tol)
}
