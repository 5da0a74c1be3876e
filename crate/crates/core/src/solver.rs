//! Sphere-packing exponents and the associated saddle point.
//!
//! Central objects: the auxiliary function E₀(s,P), the strong exponent
//! E_sp(R,P) = sup_{s≥0}{E₀(s,P) − sR}, the variational forms built from the
//! two Rényi mutual informations, the weak (log-Euclidean) exponent, the
//! saddle point (α*, σ*) of F_{R,P}(α,σ) = (1−α)/α (D_α(𝒲‖σ|P) − R), and the
//! rate derivative s* = (1−α*)/α*. The s ↔ α conversion is α = 1/(1+s)
//! throughout.

use crate::channel::{
    average_output, conditional_renyi, i_alpha_1, i_alpha_2, maximize_over_simplex,
    mutual_information, CQChannel, Prior, RenyiFamily,
};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::extreal::ExtReal;
use crate::operator::{
    mat_exp, mat_log_on_support, power_from_spectral, trace_re, CMat, DensityOperator,
    HermitianMatrix,
};

/// Cap and divergence-detection slope for the sup over s in the strong
/// exponent.
const S_MAX: f64 = 1e3;
const DIVERGENCE_SLOPE: f64 = 1e-6;

/// Smallest α probed by the outer maximization.
const ALPHA_FLOOR: f64 = 1e-4;

/// Saddle-point solution of min_σ sup_α F_{R,P} = sup_α min_σ F_{R,P}.
#[derive(Debug, Clone)]
pub struct SaddleResult {
    pub alpha_star: f64,
    pub sigma_star: DensityOperator,
    pub value: ExtReal,
    pub s_star: f64,
    /// |min-max − max-min| from cross-evaluation at (α*, σ*).
    pub minimax_gap: f64,
}

/// Regime of a rate point on the exponent curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Infinite,
    Positive,
    Zero,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Infinite => "infinite",
            Regime::Positive => "positive",
            Regime::Zero => "zero",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CurvePoint {
    pub rate: f64,
    pub e_sp: ExtReal,
    pub e_sp_weak: Option<ExtReal>,
    pub s_star: f64,
    pub regime: Regime,
}

/// Sphere-packing exponent curve over a rate grid.
#[derive(Debug, Clone)]
pub struct ExponentCurve {
    pub points: Vec<CurvePoint>,
    pub r_infinity: f64,
    pub capacity: f64,
}

/// E₀(s,P) = −log Tr[(Σ_x P(x) W_x^{1/(1+s)})^{1+s}].
pub fn e0_gallager(s: f64, p: &Prior, w: &CQChannel, tol: &Tolerances) -> Result<f64> {
    if s < 0.0 {
        return Err(Error::InvalidParameter(format!("s must be ≥ 0, got {s}")));
    }
    let a = 1.0 / (1.0 + s);
    let d = w.dim();
    let mut m = CMat::zeros(d, d);
    for (x, &px) in p.weights().iter().enumerate() {
        if px > 0.0 {
            let wa = power_from_spectral(w.state(x).spectral(), a, tol)?;
            m += wa.matrix().scale(px);
        }
    }
    let powered = crate::operator::mat_power(&HermitianMatrix::from_exact(m), 1.0 + s, tol)?;
    Ok(-trace_re(powered.matrix()).ln())
}

/// Golden-section maximization of a unimodal function on [lo, hi].
pub fn golden_max(lo: f64, hi: f64, iters: usize, f: &mut dyn FnMut(f64) -> f64) -> (f64, f64) {
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// E_sp(R,P) = sup_{s≥0} {E₀(s,P) − sR}; +∞ when the sup diverges.
pub fn e_sp_strong(r: f64, p: &Prior, w: &CQChannel, tol: &Tolerances) -> Result<ExtReal> {
    if r < 0.0 {
        return Err(Error::InvalidRate(format!("rate must be ≥ 0, got {r}")));
    }
    let g = |s: f64| -> Result<f64> { Ok(e0_gallager(s, p, w, tol)? - s * r) };
    // expand the bracket while the objective keeps increasing
    let mut s_hi = 1.0;
    let mut g_hi = g(s_hi)?;
    loop {
        let probe = (s_hi * 2.0).min(S_MAX);
        let g_probe = g(probe)?;
        if g_probe > g_hi {
            s_hi = probe;
            g_hi = g_probe;
            if s_hi >= S_MAX {
                // divergence test: positive slope at the cap means the sup is +∞
                let slope = (g(S_MAX)? - g(S_MAX * 0.99)?) / (S_MAX * 0.01);
                if slope > DIVERGENCE_SLOPE {
                    return Ok(ExtReal::Infinite);
                }
                break;
            }
        } else {
            s_hi = probe;
            break;
        }
    }
    let mut err: Option<Error> = None;
    let (_, best) = golden_max(0.0, s_hi, 80, &mut |s| match g(s) {
        Ok(v) => v,
        Err(e) => {
            err = Some(e);
            f64::NEG_INFINITY
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(ExtReal::Finite(best.max(0.0)))
}

/// F_{R,P}(α,σ): (1−α)/α (D_α(𝒲‖σ|P) − R) for α ∈ (0,1), 0 at α = 1.
pub fn f_r_p(
    alpha: f64,
    sigma: &DensityOperator,
    r: f64,
    p: &Prior,
    w: &CQChannel,
    tol: &Tolerances,
) -> Result<ExtReal> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0,1], got {alpha}"
        )));
    }
    if alpha == 1.0 {
        return Ok(ExtReal::Finite(0.0));
    }
    let d = conditional_renyi(w, sigma, p, alpha, RenyiFamily::Petz, tol)?;
    let c = (1.0 - alpha) / alpha;
    Ok(match d {
        ExtReal::Finite(v) => ExtReal::Finite(c * (v - r)),
        ExtReal::Infinite => ExtReal::Infinite,
    })
}

/// Inner minimization min_σ D_α(𝒲‖σ|P) via the damped fixed point; returns
/// (σ*, I_α^(2)(P,𝒲)).
pub fn inner_min_sigma(
    alpha: f64,
    p: &Prior,
    w: &CQChannel,
    tol: &Tolerances,
) -> Result<(DensityOperator, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    let r = i_alpha_2(p, w, alpha, tol)?;
    Ok((r.sigma, r.value))
}

/// The outer objective h(α) = (1−α)/α (I_α^(2)(P,𝒲) − R), concave on (0,1].
fn outer_objective(alpha: f64, r: f64, p: &Prior, w: &CQChannel, tol: &Tolerances) -> Result<f64> {
    if alpha >= 1.0 {
        return Ok(0.0);
    }
    let i2 = i_alpha_2(p, w, alpha, tol)?.value;
    Ok((1.0 - alpha) / alpha * (i2 - r))
}

/// Solve the saddle point of F_{R,P} over (α, σ).
pub fn saddle_solve(r: f64, p: &Prior, w: &CQChannel, tol: &Tolerances) -> Result<SaddleResult> {
    let i1_info = mutual_information(p, w, tol)?;
    if r >= i1_info {
        // zero-exponent regime: α* = 1, σ* = averaged output
        let sigma = average_output(w, p, tol)?;
        return Ok(SaddleResult {
            alpha_star: 1.0,
            sigma_star: sigma,
            value: ExtReal::Finite(0.0),
            s_star: 0.0,
            minimax_gap: 0.0,
        });
    }
    // +∞ regime: R below the α→0 limit of I_α^(2)
    let i0 = i_alpha_2(p, w, ALPHA_FLOOR, tol)?.value;
    if r < i0 {
        let h_floor = outer_objective(ALPHA_FLOOR, r, p, w, tol)?;
        return Ok(SaddleResult {
            alpha_star: ALPHA_FLOOR,
            sigma_star: i_alpha_2(p, w, ALPHA_FLOOR, tol)?.sigma,
            value: ExtReal::Infinite,
            s_star: (1.0 - ALPHA_FLOOR) / ALPHA_FLOOR,
            minimax_gap: if h_floor.is_finite() { 0.0 } else { f64::NAN },
        });
    }
    // coarse log-spaced α scan, then golden section around the best point
    let grid: Vec<f64> = (0..=40)
        .map(|k| {
            let t = k as f64 / 40.0;
            ALPHA_FLOOR.powf(1.0 - t) // log-spaced from ALPHA_FLOOR to 1
        })
        .collect();
    let mut best_k = grid.len() - 1;
    let mut best_v = f64::NEG_INFINITY;
    for (k, &a) in grid.iter().enumerate() {
        let v = outer_objective(a, r, p, w, tol)?;
        if v > best_v {
            best_v = v;
            best_k = k;
        }
    }
    let lo = if best_k == 0 { grid[0] } else { grid[best_k - 1] };
    let hi = if best_k + 1 >= grid.len() {
        1.0
    } else {
        grid[best_k + 1]
    };
    let mut err: Option<Error> = None;
    let (alpha_star, value) = golden_max(lo, hi, 60, &mut |a| {
        match outer_objective(a, r, p, w, tol) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                f64::NEG_INFINITY
            }
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    let value = value.max(0.0);
    let (sigma_star, _) = inner_min_sigma(alpha_star, p, w, tol)?;
    // cross-evaluation: sup over α of F(α, σ*) upper-bounds the saddle value
    let minmax = sup_alpha_at_sigma(&sigma_star, r, p, w, tol)?;
    let minimax_gap = (minmax - value).abs();
    Ok(SaddleResult {
        alpha_star,
        sigma_star,
        value: ExtReal::Finite(value),
        s_star: (1.0 - alpha_star) / alpha_star,
        minimax_gap,
    })
}

/// sup_{α ∈ (0,1]} F(α, σ) at fixed σ.
fn sup_alpha_at_sigma(
    sigma: &DensityOperator,
    r: f64,
    p: &Prior,
    w: &CQChannel,
    tol: &Tolerances,
) -> Result<f64> {
    let eval = |a: f64| -> Result<f64> {
        Ok(f_r_p(a, sigma, r, p, w, tol)?.as_f64())
    };
    let grid: Vec<f64> = (0..=40)
        .map(|k| ALPHA_FLOOR.powf(1.0 - k as f64 / 40.0))
        .collect();
    let mut best_k = grid.len() - 1;
    let mut best_v = 0.0f64; // α = 1 gives 0
    for (k, &a) in grid.iter().enumerate() {
        let v = eval(a)?;
        if v > best_v {
            best_v = v;
            best_k = k;
        }
    }
    let lo = if best_k == 0 { grid[0] } else { grid[best_k - 1] };
    let hi = if best_k + 1 >= grid.len() {
        1.0
    } else {
        grid[best_k + 1]
    };
    let mut err: Option<Error> = None;
    let (_, v) = golden_max(lo, hi, 60, &mut |a| match eval(a) {
        Ok(v) => v,
        Err(e) => {
            err = Some(e);
            f64::NEG_INFINITY
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(v.max(best_v).max(0.0))
}

/// Variational strong exponent through I^(1):
/// sup_{α ∈ (0,1]} (1−α)/α (I_α^(1)(P,𝒲) − R). Coincides with the Gallager
/// form by the substitution α = 1/(1+s).
pub fn e_sp_variational_1(r: f64, p: &Prior, w: &CQChannel, tol: &Tolerances) -> Result<ExtReal> {
    let eval = |a: f64| -> Result<f64> {
        if a >= 1.0 {
            return Ok(0.0);
        }
        Ok((1.0 - a) / a * (i_alpha_1(p, w, a, tol)? - r))
    };
    let a_cap = 1.0 / (1.0 + S_MAX);
    let v_cap = eval(a_cap)?;
    let v_near = eval(a_cap * (1.0 + 1e-2))?;
    if v_cap > v_near && v_cap > 0.0 {
        // still increasing as α ↓ the cap: divergent sup
        let slope = (v_cap - v_near) / (a_cap * 1e-2);
        if slope.abs() > DIVERGENCE_SLOPE {
            return Ok(ExtReal::Infinite);
        }
    }
    let mut err: Option<Error> = None;
    let (_, v) = golden_max(a_cap, 1.0, 90, &mut |a| match eval(a) {
        Ok(v) => v,
        Err(e) => {
            err = Some(e);
            f64::NEG_INFINITY
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(ExtReal::Finite(v.max(0.0)))
}

/// Inner objective of the weak exponent: min_σ Σ_x P(x) D_α^♭(W_x‖σ) with
/// σ = exp(H)/Tr exp(H), quasi-Newton descent with numerical gradients.
fn inner_min_flat(
    alpha: f64,
    p: &Prior,
    w: &CQChannel,
    init: &DensityOperator,
    tol: &Tolerances,
) -> Result<(DensityOperator, f64)> {
    let d = w.dim();
    let m = d * d; // real parameters of a Hermitian matrix
    // cache log W_x (support-restricted; weak exponent callers use full-rank
    // channel states, rank-deficient ones surface through d_alpha_flat)
    let objective = |h_params: &[f64]| -> Result<f64> {
        let h = params_to_hermitian(h_params, d);
        let sigma = DensityOperator::normalized(mat_exp(&h).into_matrix(), tol)?;
        Ok(conditional_renyi(w, &sigma, p, alpha, RenyiFamily::Flat, tol)?.as_f64())
    };
    let mut starts: Vec<Vec<f64>> = Vec::new();
    // start 1: log of the provided initializer (Petz inner minimizer)
    let lg = mat_log_on_support(&HermitianMatrix::from_exact(init.matrix().clone()), tol)?;
    starts.push(hermitian_to_params(&lg, d));
    // start 2: maximally mixed
    starts.push(vec![0.0; m]);
    // starts 3-5: deterministic pseudorandom perturbations
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xf1a7);
    for _ in 0..3 {
        let base = &starts[0];
        starts.push(
            base.iter()
                .map(|&v| v + 0.3 * (rng.gen::<f64>() - 0.5))
                .collect(),
        );
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in starts {
        if let Ok((xs, v)) = bfgs_min(&s, 200, 1e-6, &objective) {
            if best.as_ref().map_or(true, |b| v < b.1) {
                best = Some((xs, v));
            }
        }
    }
    let (xs, v) = best.ok_or_else(|| Error::NumericalFailure {
        context: "weak-exponent inner minimization".into(),
        detail: "all descent restarts failed".into(),
    })?;
    let h = params_to_hermitian(&xs, d);
    let sigma = DensityOperator::normalized(mat_exp(&h).into_matrix(), tol)?;
    Ok((sigma, v))
}

fn params_to_hermitian(params: &[f64], d: usize) -> HermitianMatrix {
    let mut m = CMat::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        m[(i, i)] = crate::operator::C64::new(params[k], 0.0);
        k += 1;
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let z = crate::operator::C64::new(params[k], params[k + 1]);
            k += 2;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    HermitianMatrix::from_exact(m)
}

fn hermitian_to_params(h: &HermitianMatrix, d: usize) -> Vec<f64> {
    let m = h.matrix();
    let mut params = Vec::with_capacity(d * d);
    for i in 0..d {
        params.push(m[(i, i)].re);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            params.push(m[(i, j)].re);
            params.push(m[(i, j)].im);
        }
    }
    params
}

/// Dense BFGS minimization with numerical forward-difference gradients and
/// backtracking line search.
fn bfgs_min(
    x0: &[f64],
    max_iters: usize,
    grad_step: f64,
    f: &dyn Fn(&[f64]) -> Result<f64>,
) -> Result<(Vec<f64>, f64)> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x)?;
    let grad = |x: &[f64], fx: f64| -> Result<Vec<f64>> {
        let mut g = vec![0.0; n];
        for i in 0..n {
            let mut xp = x.to_vec();
            xp[i] += grad_step;
            g[i] = (f(&xp)? - fx) / grad_step;
        }
        Ok(g)
    };
    let mut g = grad(&x, fx)?;
    // inverse Hessian approximation
    let mut hinv = vec![vec![0.0; n]; n];
    for (i, row) in hinv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..max_iters {
        let gnorm: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < 1e-9 {
            break;
        }
        // direction = −Hinv g
        let mut dir = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                dir[i] -= hinv[i][j] * g[j];
            }
        }
        // backtracking line search
        let slope: f64 = dir.iter().zip(&g).map(|(d, g)| d * g).sum();
        if slope >= 0.0 {
            // reset to steepest descent
            for i in 0..n {
                for j in 0..n {
                    hinv[i][j] = if i == j { 1.0 } else { 0.0 };
                }
                dir[i] = -g[i];
            }
        }
        let mut step = 1.0;
        let mut accepted = false;
        let mut xn = x.clone();
        let mut fn_ = fx;
        while step > 1e-12 {
            for i in 0..n {
                xn[i] = x[i] + step * dir[i];
            }
            match f(&xn) {
                Ok(v) if v < fx - 1e-14 * step => {
                    fn_ = v;
                    accepted = true;
                    break;
                }
                _ => step *= 0.5,
            }
        }
        if !accepted {
            break;
        }
        let gn = grad(&xn, fn_)?;
        // BFGS inverse update
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-14 {
            let rho = 1.0 / sy;
            // Hinv ← (I − ρ s yᵀ) Hinv (I − ρ y sᵀ) + ρ s sᵀ
            let mut hy = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    hy[i] += hinv[i][j] * y[j];
                }
            }
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    hinv[i][j] += -rho * (s[i] * hy[j] + hy[i] * s[j])
                        + rho * rho * yhy * s[i] * s[j]
                        + rho * s[i] * s[j];
                }
            }
        }
        x = xn;
        fx = fn_;
        g = gn;
    }
    Ok((x, fx))
}

/// Weak sphere-packing exponent Ẽ_sp(R,P): the strong outer loop with the
/// log-Euclidean conditional divergence inside.
pub fn e_sp_weak(r: f64, p: &Prior, w: &CQChannel, tol: &Tolerances) -> Result<ExtReal> {
    let i1_info = mutual_information(p, w, tol)?;
    if r >= i1_info {
        return Ok(ExtReal::Finite(0.0));
    }
    let h = |a: f64| -> Result<f64> {
        if a >= 1.0 {
            return Ok(0.0);
        }
        let (sig_petz, _) = inner_min_sigma(a, p, w, tol)?;
        let (_, v) = inner_min_flat(a, p, w, &sig_petz, tol)?;
        Ok((1.0 - a) / a * (v - r))
    };
    // coarse scan then golden refinement (objective concave in α)
    let grid: Vec<f64> = (1..=12).map(|k| k as f64 / 12.0).collect();
    let mut best_k = grid.len() - 1;
    let mut best_v = 0.0f64;
    for (k, &a) in grid.iter().enumerate() {
        let v = h(a)?;
        if v > best_v {
            best_v = v;
            best_k = k;
        }
    }
    if best_v <= 0.0 {
        return Ok(ExtReal::Finite(0.0));
    }
    let lo = if best_k == 0 { 0.02 } else { grid[best_k - 1] };
    let hi = if best_k + 1 >= grid.len() {
        1.0
    } else {
        grid[best_k + 1]
    };
    let mut err: Option<Error> = None;
    let (_, v) = golden_max(lo, hi, 24, &mut |a| match h(a) {
        Ok(v) => v,
        Err(e) => {
            err = Some(e);
            f64::NEG_INFINITY
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(ExtReal::Finite(v.max(best_v).max(0.0)))
}

/// Channel-level exponent: E_sp(R) = max_P E_sp^(2)(R,P) together with the
/// achieving prior and |E_sp′(R)| = s* at that prior.
pub fn e_sp_max(r: f64, w: &CQChannel, tol: &Tolerances) -> Result<(f64, Prior, f64)> {
    let n = w.size();
    let eval = |pw: &[f64]| -> f64 {
        let prior = match Prior::new(pw.to_vec()) {
            Ok(p) => p,
            Err(_) => return f64::NEG_INFINITY,
        };
        match saddle_solve(r, &prior, w, tol) {
            Ok(res) => match res.value {
                ExtReal::Finite(v) => v,
                ExtReal::Infinite => f64::MAX,
            },
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let (pbest, vbest, _) = maximize_over_simplex(n, &eval);
    let prior = Prior::new(pbest).expect("optimizer returns a valid prior");
    let res = saddle_solve(r, &prior, w, tol)?;
    if vbest == f64::MAX {
        return Err(Error::InvalidRate(format!(
            "rate {r} lies in the infinite regime for the maximizing prior"
        )));
    }
    Ok((vbest, prior, res.s_star))
}

/// Report of the finite-difference derivative check at (R, P).
#[derive(Debug, Clone)]
pub struct SubgradientReport {
    pub finite_difference: f64,
    pub s_star: f64,
    pub deviation: f64,
}

/// Central finite difference of E_sp^(2)(·,P) at R against −s*_{R,P}.
pub fn subgradient_check(
    r: f64,
    p: &Prior,
    w: &CQChannel,
    tol: &Tolerances,
) -> Result<SubgradientReport> {
    let h = 1e-4;
    let s_star = saddle_solve(r, p, w, tol)?.s_star;
    let ep = saddle_solve(r + h, p, w, tol)?
        .value
        .expect_finite("E at R+h");
    let em = saddle_solve(r - h, p, w, tol)?
        .value
        .expect_finite("E at R-h");
    let fd = (ep - em) / (2.0 * h);
    Ok(SubgradientReport {
        finite_difference: fd,
        s_star,
        deviation: (fd + s_star).abs(),
    })
}

/// Build the exponent curve over a rate grid. The weak exponent is evaluated
/// at the strong-optimal prior when `include_weak` is set.
pub fn exponent_curve(
    w: &CQChannel,
    rates: &[f64],
    include_weak: bool,
    tol: &Tolerances,
) -> Result<ExponentCurve> {
    let r_inf = crate::channel::r_infinity(w, tol)?.value;
    let cap = crate::channel::capacity(w, tol)?.value;
    let mut points = Vec::with_capacity(rates.len());
    for &r in rates {
        if r <= 0.0 {
            return Err(Error::InvalidRate(format!("rate grid must be positive, got {r}")));
        }
        let (e_sp, s_star, regime, pstar) = if r <= r_inf {
            (ExtReal::Infinite, f64::INFINITY, Regime::Infinite, None)
        } else if r >= cap {
            (ExtReal::Finite(0.0), 0.0, Regime::Zero, None)
        } else {
            let (v, p, s) = e_sp_max(r, w, tol)?;
            let reg = if v <= 0.0 { Regime::Zero } else { Regime::Positive };
            (ExtReal::Finite(v), s, reg, Some(p))
        };
        let e_sp_weak_val = if include_weak && regime == Regime::Positive {
            let p = pstar.as_ref().expect("positive regime has a prior");
            Some(e_sp_weak(r, p, w, tol)?)
        } else if include_weak && regime == Regime::Zero {
            Some(ExtReal::Finite(0.0))
        } else if include_weak {
            Some(ExtReal::Infinite)
        } else {
            None
        };
        points.push(CurvePoint {
            rate: r,
            e_sp,
            e_sp_weak: e_sp_weak_val,
            s_star,
            regime,
        });
    }
    Ok(ExponentCurve {
        points,
        r_infinity: r_inf,
        capacity: cap,
    })
}

impl ExponentCurve {
    /// CSV rows: R, E_sp, E_sp_weak, s_star, regime.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("R,E_sp,E_sp_weak,s_star,regime\n");
        for p in &self.points {
            let weak = p
                .e_sp_weak
                .map(|v| format!("{}", ExtCsv(v)))
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt17(p.rate),
                ExtCsv(p.e_sp),
                weak,
                fmt17(p.s_star),
                p.regime.as_str()
            ));
        }
        out
    }
}

/// 17-significant-digit formatting used by all CSV output.
pub fn fmt17(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.17e}")
    }
}

struct ExtCsv(ExtReal);

impl std::fmt::Display for ExtCsv {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            ExtReal::Finite(v) => write!(f, "{}", fmt17(v)),
            ExtReal::Infinite => write!(f, "inf"),
        }
    }
}
