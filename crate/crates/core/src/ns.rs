//! Classical reduction of a pair of quantum states and the large-deviation
//! machinery built on it: tilted distributions, cumulant generating
//! functions, Legendre-Fenchel transforms, the regularity identities linking
//! them to the error-exponent function φ, and the Bahadur-Ranga Rao
//! concentration lower bound with exact-tail oracles.

use crate::config::Tolerances;
use crate::divergence::overlap_data;
use crate::error::{Error, Result};
use crate::extreal::ExtReal;
use crate::operator::DensityOperator;

/// Classical distribution over index-pair atoms ω = (i,j).
#[derive(Debug, Clone)]
pub struct ClassicalDistribution {
    pub atoms: Vec<(usize, usize)>,
    pub mass: Vec<f64>,
}

impl ClassicalDistribution {
    pub fn new(atoms: Vec<(usize, usize)>, mass: Vec<f64>) -> Result<Self> {
        if atoms.len() != mass.len() {
            return Err(Error::DimensionMismatch(
                "atom and mass lists differ in length".into(),
            ));
        }
        if mass.iter().any(|&m| m < -1e-15 || !m.is_finite()) {
            return Err(Error::InvalidParameter("negative or non-finite mass".into()));
        }
        let s: f64 = mass.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "masses sum to {s}, not 1"
            )));
        }
        Ok(ClassicalDistribution {
            atoms,
            mass: mass.into_iter().map(|m| m.max(0.0)).collect(),
        })
    }

    pub fn support(&self) -> Vec<usize> {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(k, _)| k)
            .collect()
    }
}

/// Pair of classical distributions over a shared atom set, carrying the
/// joint support.
#[derive(Debug, Clone)]
pub struct NSPair {
    pub atoms: Vec<(usize, usize)>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

/// Mass below this is treated as a structural zero of an NS distribution.
const ATOM_EPS: f64 = 1e-15;

impl NSPair {
    pub fn from_parts(atoms: Vec<(usize, usize)>, p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if atoms.len() != p.len() || atoms.len() != q.len() {
            return Err(Error::DimensionMismatch("atom/mass length mismatch".into()));
        }
        Ok(NSPair { atoms, p, q })
    }

    /// Atom indices where both masses are positive.
    pub fn joint_support(&self) -> Vec<usize> {
        (0..self.atoms.len())
            .filter(|&k| self.p[k] > ATOM_EPS && self.q[k] > ATOM_EPS)
            .collect()
    }

    /// p ≪ q: no p-mass outside supp(q).
    pub fn p_dominated(&self) -> bool {
        (0..self.atoms.len()).all(|k| self.p[k] <= ATOM_EPS || self.q[k] > ATOM_EPS)
    }

    /// Classical Rényi divergence D_α(p‖q), α ∈ [0,1].
    pub fn d_alpha(&self, alpha: f64) -> ExtReal {
        assert!((0.0..=1.0).contains(&alpha), "alpha out of range");
        if alpha == 1.0 {
            return self.relative_entropy();
        }
        if alpha == 0.0 {
            let m: f64 = (0..self.atoms.len())
                .filter(|&k| self.p[k] > ATOM_EPS)
                .map(|k| self.q[k])
                .sum();
            return if m > 0.0 {
                ExtReal::Finite(-m.ln())
            } else {
                ExtReal::Infinite
            };
        }
        let s: f64 = (0..self.atoms.len())
            .filter(|&k| self.p[k] > ATOM_EPS && self.q[k] > ATOM_EPS)
            .map(|k| self.p[k].powf(alpha) * self.q[k].powf(1.0 - alpha))
            .sum();
        if s <= 0.0 {
            ExtReal::Infinite
        } else {
            ExtReal::Finite(s.ln() / (alpha - 1.0))
        }
    }

    pub fn relative_entropy(&self) -> ExtReal {
        if !self.p_dominated() {
            return ExtReal::Infinite;
        }
        let d = (0..self.atoms.len())
            .filter(|&k| self.p[k] > ATOM_EPS)
            .map(|k| self.p[k] * (self.p[k].ln() - self.q[k].ln()))
            .sum();
        ExtReal::Finite(d)
    }

    pub fn relative_variance(&self) -> ExtReal {
        if !self.p_dominated() {
            return ExtReal::Infinite;
        }
        let d = self.relative_entropy().expect_finite("D");
        let m2: f64 = (0..self.atoms.len())
            .filter(|&k| self.p[k] > ATOM_EPS)
            .map(|k| {
                let r = self.p[k].ln() - self.q[k].ln();
                self.p[k] * r * r
            })
            .sum();
        ExtReal::Finite((m2 - d * d).max(0.0))
    }

    /// Tensor product with index bookkeeping flattened into fresh atoms.
    pub fn product(&self, other: &NSPair) -> NSPair {
        let mut atoms = Vec::new();
        let mut p = Vec::new();
        let mut q = Vec::new();
        for (k1, &(i1, j1)) in self.atoms.iter().enumerate() {
            for (k2, &(i2, j2)) in other.atoms.iter().enumerate() {
                atoms.push((i1 * other.atoms.len() + i2, j1 * other.atoms.len() + j2));
                p.push(self.p[k1] * other.p[k2]);
                q.push(self.q[k1] * other.q[k2]);
            }
        }
        NSPair { atoms, p, q }
    }

    /// Drop the q-mass of atoms outside supp(p) (the convention used before
    /// cumulant construction; such atoms never enter the exponent function).
    pub fn restricted_to_p_support(&self) -> NSPair {
        let keep: Vec<usize> = (0..self.atoms.len())
            .filter(|&k| self.p[k] > ATOM_EPS)
            .collect();
        NSPair {
            atoms: keep.iter().map(|&k| self.atoms[k]).collect(),
            p: keep.iter().map(|&k| self.p[k]).collect(),
            q: keep.iter().map(|&k| self.q[k]).collect(),
        }
    }
}

/// Classical pair (p,q) built from the spectra and eigenbasis overlaps of
/// (ρ,σ): p(i,j) = λᵢ|⟨xᵢ|yⱼ⟩|², q(i,j) = γⱼ|⟨xᵢ|yⱼ⟩|². Preserves every D_α
/// for α ∈ [0,1] and tensorizes.
pub fn ns_distributions(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    tol: &Tolerances,
) -> NSPair {
    let ov = overlap_data(rho, sigma, tol);
    let d1 = ov.lam.len();
    let d2 = ov.gam.len();
    let mut atoms = Vec::with_capacity(d1 * d2);
    let mut p = Vec::with_capacity(d1 * d2);
    let mut q = Vec::with_capacity(d1 * d2);
    for i in 0..d1 {
        for j in 0..d2 {
            let w = ov.osq[(i, j)];
            atoms.push((i, j));
            let lam = if ov.lam[i] > ov.lam_cut { ov.lam[i] } else { 0.0 };
            let gam = if ov.gam[j] > ov.gam_cut { ov.gam[j] } else { 0.0 };
            p.push(lam * w);
            q.push(gam * w);
        }
    }
    NSPair { atoms, p, q }
}

/// Tilted distribution q̂_t ∝ p^{1−t} q^t on the joint support.
pub fn tilted(pair: &NSPair, t: f64) -> Result<ClassicalDistribution> {
    let b = pair.joint_support();
    if b.is_empty() {
        return Err(Error::DisjointSupport(
            "tilted family undefined for disjoint supports".into(),
        ));
    }
    let mut mass = vec![0.0; pair.atoms.len()];
    let mut z = 0.0;
    for &k in &b {
        let m = pair.p[k].powf(1.0 - t) * pair.q[k].powf(t);
        mass[k] = m;
        z += m;
    }
    for m in mass.iter_mut() {
        *m /= z;
    }
    ClassicalDistribution::new(pair.atoms.clone(), mass)
}

fn kl_to(pair: &NSPair, dist: &ClassicalDistribution, against_q: bool) -> f64 {
    let mut d = 0.0;
    for (k, &m) in dist.mass.iter().enumerate() {
        if m > 0.0 {
            let target = if against_q { pair.q[k] } else { pair.p[k] };
            d += m * (m.ln() - target.ln());
        }
    }
    d
}

/// Error-exponent function of a single pair:
/// φ(r) = sup_{α∈(0,1]} (1−α)/α (D_α(p‖q) − r).
pub fn phi_single(pair: &NSPair, r: f64) -> ExtReal {
    phi_weighted(&[pair.clone()], &[1.0], r)
}

/// φ over a weighted collection of pairs (mean per-letter divergence):
/// sup_{α∈(0,1]} (1−α)/α (Σ wᵢ D_α(pᵢ‖qᵢ) − r). +∞ exactly when r is below
/// the α → 0 limit of the mean divergence.
pub fn phi_weighted(pairs: &[NSPair], weights: &[f64], r: f64) -> ExtReal {
    assert_eq!(pairs.len(), weights.len());
    let mean_d = |alpha: f64| -> ExtReal {
        let mut acc = 0.0;
        for (pair, &w) in pairs.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            match pair.d_alpha(alpha) {
                ExtReal::Finite(v) => acc += w * v,
                ExtReal::Infinite => return ExtReal::Infinite,
            }
        }
        ExtReal::Finite(acc)
    };
    let d0 = match mean_d(0.0) {
        ExtReal::Finite(v) => v,
        ExtReal::Infinite => return ExtReal::Infinite,
    };
    if r < d0 - 1e-12 {
        return ExtReal::Infinite;
    }
    let obj = |alpha: f64| -> f64 {
        if alpha >= 1.0 {
            return 0.0;
        }
        match mean_d(alpha) {
            ExtReal::Finite(v) => (1.0 - alpha) / alpha * (v - r),
            ExtReal::Infinite => f64::NEG_INFINITY,
        }
    };
    // concave in α: coarse scan then golden refinement
    let grid: Vec<f64> = (1..=64).map(|k| k as f64 / 64.0).collect();
    let mut best_k = grid.len() - 1;
    let mut best_v = 0.0f64;
    for (k, &a) in grid.iter().enumerate() {
        let v = obj(a);
        if v > best_v {
            best_v = v;
            best_k = k;
        }
    }
    let lo = if best_k == 0 { 1e-6 } else { grid[best_k - 1] };
    let hi = if best_k + 1 >= grid.len() { 1.0 } else { grid[best_k + 1] };
    let (_, v) = crate::solver::golden_max(lo, hi, 60, &mut |a| obj(a));
    let mut phi = v.max(best_v).max(0.0);
    // the sup can be attained only in the α → 0 limit (e.g. r at the lower
    // boundary of the finite regime); the objective is affine in α near 0,
    // so a two-point Richardson extrapolation recovers the limit value
    let boundary = 2.0 * obj(1e-5) - obj(2e-5);
    if boundary.is_finite() {
        phi = phi.max(boundary);
    }
    ExtReal::Finite(phi)
}

/// Find the tilt t with D(q̂_t‖q) = r by bisection on the monotone map, and
/// verify the companion identity D(q̂_t‖p) = φ(r).
pub fn find_tilt(pair: &NSPair, r: f64, tol: &Tolerances) -> Result<(f64, ClassicalDistribution)> {
    let g = |t: f64| -> Result<f64> { Ok(kl_to(pair, &tilted(pair, t)?, true)) };
    let hi_val = g(0.0)?; // D decreasing in t: max at t = 0
    let lo_val = g(1.0)?;
    if r > hi_val + 1e-12 || r < lo_val - 1e-12 {
        return Err(Error::InfeasibleRate(format!(
            "r={r} outside the reachable range [{lo_val}, {hi_val}]"
        )));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    // g(lo) ≥ r ≥ g(hi)
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = g(mid)?;
        if v > r {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) < 1e-15 {
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    let dist = tilted(pair, t)?;
    let resid = (kl_to(pair, &dist, true) - r).abs();
    if resid > tol.bisection.max(1e-9) {
        return Err(Error::NumericalFailure {
            context: "tilt bisection".into(),
            detail: format!("residual {resid:.3e}"),
        });
    }
    // companion identity: D(q̂_t‖p) = φ(r)
    if let ExtReal::Finite(phi) = phi_single(pair, r) {
        let lhs = kl_to(pair, &dist, false);
        if (lhs - phi).abs() > 1e-7 {
            return Err(Error::NumericalFailure {
                context: "tilt identity check".into(),
                detail: format!("D(tilted||p) = {lhs} vs phi(r) = {phi}"),
            });
        }
    }
    Ok((t, dist))
}

/// Cumulant generating data of one input symbol: the distribution of
/// Z = log(q/p) under p (side 0) and of −Z under q (side 1), with q-atoms
/// outside supp(p) dropped.
#[derive(Debug, Clone)]
pub struct SymbolCGF {
    /// masses of p on supp(p)
    p: Vec<f64>,
    /// masses of q on supp(p) (may subnormalize)
    q: Vec<f64>,
}

impl SymbolCGF {
    pub fn new(pair: &NSPair) -> Self {
        let r = pair.restricted_to_p_support();
        SymbolCGF { p: r.p, q: r.q }
    }

    /// Λ_j(t): j = 0 is log E_p[e^{t log(q/p)}], j = 1 is log E_q[e^{t log(p/q)}].
    pub fn lambda(&self, side: usize, t: f64) -> f64 {
        self.moments(side, t).0.ln()
    }

    pub fn lambda_d1(&self, side: usize, t: f64) -> f64 {
        let (m, m1, _) = self.moments3(side, t);
        m1 / m
    }

    pub fn lambda_d2(&self, side: usize, t: f64) -> f64 {
        let (m, m1, m2) = self.moments3(side, t);
        m2 / m - (m1 / m) * (m1 / m)
    }

    /// Third absolute central moment of Z under the t-tilted measure.
    pub fn abs_central_m3(&self, side: usize, t: f64) -> f64 {
        let mean = self.lambda_d1(side, t);
        let (m, _, _) = self.moments3(side, t);
        let mut acc = 0.0;
        for (w, z) in self.terms(side, t) {
            acc += w * (z - mean).abs().powi(3);
        }
        acc / m
    }

    /// (base mass, weight, z) iterator terms: weight = base·e^{tz} over atoms.
    fn terms(&self, side: usize, t: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.p.len());
        for k in 0..self.p.len() {
            let (base, zp, zq) = (if side == 0 { self.p[k] } else { self.q[k] }, self.p[k], self.q[k]);
            if base <= ATOM_EPS {
                continue;
            }
            // side 0: Z = log(q/p); side 1: Z = log(p/q)
            if zq <= ATOM_EPS && side == 0 {
                // e^{tZ} = 0 for t > 0; z = −∞ — contributes 0 to the MGF for t > 0
                if t > 0.0 {
                    continue;
                }
                out.push((base, f64::NEG_INFINITY));
                continue;
            }
            let z = if side == 0 {
                zq.ln() - zp.ln()
            } else {
                zp.ln() - zq.ln()
            };
            out.push((base * (t * z).exp(), z));
        }
        out
    }

    fn moments(&self, side: usize, t: f64) -> (f64, f64) {
        let (m, m1, _) = self.moments3(side, t);
        (m, m1)
    }

    fn moments3(&self, side: usize, t: f64) -> (f64, f64, f64) {
        let mut m = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (w, z) in self.terms(side, t) {
            if z.is_finite() {
                m += w;
                m1 += w * z;
                m2 += w * z * z;
            } else {
                m += w; // t = 0 atom with z = −∞ only enters the mass
            }
        }
        (m, m1, m2)
    }
}

/// Composition-averaged cumulant record over the input alphabet.
#[derive(Debug, Clone)]
pub struct CGFRecord {
    pub composition: Vec<f64>,
    pub symbols: Vec<SymbolCGF>,
}

impl CGFRecord {
    pub fn lambda(&self, side: usize, t: f64) -> f64 {
        self.composition
            .iter()
            .zip(&self.symbols)
            .filter(|(&w, _)| w > 0.0)
            .map(|(&w, s)| w * s.lambda(side, t))
            .sum()
    }

    pub fn lambda_d1(&self, side: usize, t: f64) -> f64 {
        self.composition
            .iter()
            .zip(&self.symbols)
            .filter(|(&w, _)| w > 0.0)
            .map(|(&w, s)| w * s.lambda_d1(side, t))
            .sum()
    }

    pub fn lambda_d2(&self, side: usize, t: f64) -> f64 {
        self.composition
            .iter()
            .zip(&self.symbols)
            .filter(|(&w, _)| w > 0.0)
            .map(|(&w, s)| w * s.lambda_d2(side, t))
            .sum()
    }

    pub fn abs_central_m3(&self, side: usize, t: f64) -> f64 {
        self.composition
            .iter()
            .zip(&self.symbols)
            .filter(|(&w, _)| w > 0.0)
            .map(|(&w, s)| w * s.abs_central_m3(side, t))
            .sum()
    }
}

/// Build the composition-averaged cumulant record from per-symbol pairs.
pub fn cgf_build(pairs: &[NSPair], composition: &[f64]) -> Result<CGFRecord> {
    if pairs.len() != composition.len() {
        return Err(Error::DimensionMismatch(
            "pairs and composition differ in length".into(),
        ));
    }
    for (k, (pair, &w)) in pairs.iter().zip(composition).enumerate() {
        if w > 0.0 && pair.joint_support().is_empty() {
            return Err(Error::DisjointSupport(format!(
                "symbol {k} has disjoint supports"
            )));
        }
    }
    Ok(CGFRecord {
        composition: composition.to_vec(),
        symbols: pairs.iter().map(SymbolCGF::new).collect(),
    })
}

/// Legendre-Fenchel transform Λ*_j(z) = sup_t {tz − Λ_{j,P}(t)}.
#[derive(Debug, Clone, Copy)]
pub struct LFResult {
    pub value: f64,
    pub t_star: f64,
    /// True when the optimizer lies in the regime t ∈ [0,1]; otherwise the
    /// search was widened to [−5, 5].
    pub in_regime: bool,
}

pub fn legendre_fenchel(record: &CGFRecord, side: usize, z: f64) -> LFResult {
    // Λ' is increasing (Λ convex); solve Λ'(t) = z by bisection
    let solve = |lo: f64, hi: f64| -> f64 {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if record.lambda_d1(side, m) < z {
                a = m;
            } else {
                b = m;
            }
            if b - a < 1e-15 {
                break;
            }
        }
        0.5 * (a + b)
    };
    let d_lo = record.lambda_d1(side, 0.0);
    let d_hi = record.lambda_d1(side, 1.0);
    if z >= d_lo && z <= d_hi {
        let t = solve(0.0, 1.0);
        return LFResult {
            value: t * z - record.lambda(side, t),
            t_star: t,
            in_regime: true,
        };
    }
    // outside the primary regime: widen the search and flag
    let (wlo, whi) = (-5.0, 5.0);
    let t = if z < record.lambda_d1(side, wlo) {
        wlo
    } else if z > record.lambda_d1(side, whi) {
        whi
    } else {
        solve(wlo, whi)
    };
    LFResult {
        value: t * z - record.lambda(side, t),
        t_star: t,
        in_regime: false,
    }
}

/// E₀^{(2)}(s,P) evaluated both through the cumulant form
/// −(1+s)Λ_{0,P}(s/(1+s)) and through the Rényi form
/// Σ_x P(x)·s·D_{1/(1+s)}(p_x‖q_x); the two must agree.
pub fn e0_two(s: f64, pairs: &[NSPair], composition: &[f64]) -> Result<(f64, f64)> {
    if s < 0.0 {
        return Err(Error::InvalidParameter(format!("s must be ≥ 0, got {s}")));
    }
    let record = cgf_build(pairs, composition)?;
    let via_cgf = -(1.0 + s) * record.lambda(0, s / (1.0 + s));
    let alpha = 1.0 / (1.0 + s);
    let mut via_renyi = 0.0;
    for (pair, &w) in pairs.iter().zip(composition) {
        if w > 0.0 {
            via_renyi += w * s * pair.d_alpha(alpha).expect_finite("D_alpha");
        }
    }
    Ok((via_cgf, via_renyi))
}

/// Outcome of the regularity checks tying the Legendre-Fenchel transforms to
/// the exponent function φ at a rate r.
#[derive(Debug, Clone)]
pub struct RegularityReport {
    pub skipped: Option<String>,
    pub phi: f64,
    pub lambda2_min: f64,
    pub lf0_identity_dev: f64,
    pub lf1_identity_dev: f64,
    pub t_star_identity_dev: f64,
    pub slope_identity_dev: f64,
    pub curvature_identity_dev: f64,
    pub pass: bool,
}

/// Check the identities: Λ″ > 0 on [0,1]; Λ*₀(φ−r) = φ; Λ*₁(r−φ) = r;
/// t* = s*/(1+s*); s* = −∂φ/∂r; ∂²φ/∂r² = (1+s*)³/Λ″₀(t*).
pub fn regularity_suite(pairs: &[NSPair], composition: &[f64], r: f64) -> Result<RegularityReport> {
    let skipped_report = |why: String| RegularityReport {
        skipped: Some(why),
        phi: 0.0,
        lambda2_min: 0.0,
        lf0_identity_dev: 0.0,
        lf1_identity_dev: 0.0,
        t_star_identity_dev: 0.0,
        slope_identity_dev: 0.0,
        curvature_identity_dev: 0.0,
        pass: true,
    };
    let phi = match phi_weighted(pairs, composition, r) {
        ExtReal::Finite(v) if v > 0.0 => v,
        ExtReal::Finite(_) => return Ok(skipped_report("zero-exponent regime".into())),
        ExtReal::Infinite => return Ok(skipped_report("infinite regime".into())),
    };
    let record = cgf_build(pairs, composition)?;
    // (a) positive curvature on [0,1]
    let mut lambda2_min = f64::INFINITY;
    for k in 0..=20 {
        let t = k as f64 / 20.0;
        lambda2_min = lambda2_min.min(record.lambda_d2(0, t));
    }
    // (b), (c)
    let lf0 = legendre_fenchel(&record, 0, phi - r);
    let lf1 = legendre_fenchel(&record, 1, r - phi);
    let lf0_dev = (lf0.value - phi).abs();
    let lf1_dev = (lf1.value - r).abs();
    // (d) slope and t* parameterization: s* = −∂φ/∂r, t* = s*/(1+s*)
    let h = 1e-5;
    let phi_p = phi_weighted(pairs, composition, r + h).expect_finite("phi+");
    let phi_m = phi_weighted(pairs, composition, r - h).expect_finite("phi-");
    let s_star = -((phi_p - phi_m) / (2.0 * h));
    let t_dev = (lf0.t_star - s_star / (1.0 + s_star)).abs();
    let slope_dev = 0.0; // s* above *is* the finite-difference slope
    // curvature identity via second finite difference
    let curv_fd = (phi_p - 2.0 * phi + phi_m) / (h * h);
    let curv_pred = (1.0 + s_star).powi(3) / record.lambda_d2(0, lf0.t_star);
    let curv_dev = (curv_fd - curv_pred).abs() / curv_pred.abs().max(1.0);
    let pass = lambda2_min > 0.0
        && lf0_dev <= 1e-7
        && lf1_dev <= 1e-7
        && t_dev <= 1e-3
        && curv_dev <= 1e-4;
    Ok(RegularityReport {
        skipped: None,
        phi,
        lambda2_min,
        lf0_identity_dev: lf0_dev,
        lf1_identity_dev: lf1_dev,
        t_star_identity_dev: t_dev,
        slope_identity_dev: slope_dev,
        curvature_identity_dev: curv_dev,
        pass,
    })
}

/// Bahadur-Ranga Rao lower bound on Pr{(1/n)Σ Zᵢ ≥ z} for the independent
/// sum with per-symbol laws given by the record (side 0: Z = log(q/p) under
/// p; side 1: Z = log(p/q) under q).
#[derive(Debug, Clone)]
pub struct BRRBound {
    pub bound: f64,
    pub rate: f64,
    pub t_star: f64,
    pub m2: f64,
    pub m3: f64,
    pub k_n: f64,
    /// Attained √m₂,ₙ for the guard √m₂,ₙ ≥ 1 + (1 + Kₙ)².
    pub sqrt_m2: f64,
}

pub fn bahadur_ranga_rao(
    record: &CGFRecord,
    side: usize,
    z: f64,
    n: usize,
) -> Result<BRRBound> {
    let lf = legendre_fenchel(record, side, z);
    if !lf.in_regime || lf.t_star <= 0.0 {
        return Err(Error::ConditionNotMet(format!(
            "tilt {} outside (0,1]",
            lf.t_star
        )));
    }
    let t = lf.t_star;
    let m2 = n as f64 * record.lambda_d2(side, t);
    let m3 = n as f64 * record.abs_central_m3(side, t);
    // Berry-Esseen-normalized correction term; dimensionless so the bound is
    // usable at moderate blocklengths
    let k_n = 15.0 * (2.0 * std::f64::consts::PI).sqrt() * m3 / m2.powf(1.5);
    let sqrt_m2 = m2.sqrt();
    if sqrt_m2 < 1.0 + (1.0 + k_n) * (1.0 + k_n) {
        return Err(Error::ConditionNotMet(format!(
            "sqrt(m2) = {sqrt_m2:.4} < 1 + (1 + K)^2 = {:.4}",
            1.0 + (1.0 + k_n) * (1.0 + k_n)
        )));
    }
    let bound = (-(n as f64) * lf.value).exp() * (-k_n).exp()
        / (2.0 * (2.0 * std::f64::consts::PI * m2).sqrt());
    Ok(BRRBound {
        bound,
        rate: lf.value,
        t_star: t,
        m2,
        m3,
        k_n,
        sqrt_m2,
    })
}

/// Exact upper-tail probability Pr{(1/n)Σ Zᵢ ≥ z} for n i.i.d. copies of the
/// per-symbol law, by multinomial type-class enumeration.
pub fn exact_tail_iid(symbol: &SymbolCGF, side: usize, z: f64, n: usize) -> Result<f64> {
    // single-letter atoms (weight under the base measure, Z value)
    let terms = symbol.terms(side, 0.0);
    let k = terms.len();
    if k == 0 {
        return Err(Error::DisjointSupport("no atoms".into()));
    }
    // number of type classes = C(n+k−1, k−1); refuse if astronomically many
    let mut classes: f64 = 1.0;
    for i in 1..k {
        classes *= (n + i) as f64 / i as f64;
    }
    if classes > 2e7 {
        return Err(Error::CapacityExceeded(format!(
            "{classes:.3e} type classes at n={n}, k={k}"
        )));
    }
    let lnfac = ln_factorial_table(n);
    let mut total = 0.0f64;
    // enumerate compositions of n into k parts
    let mut counts = vec![0usize; k];
    fn rec(
        counts: &mut Vec<usize>,
        idx: usize,
        rem: usize,
        n: usize,
        z: f64,
        terms: &[(f64, f64)],
        lnfac: &[f64],
        total: &mut f64,
    ) {
        if idx == counts.len() - 1 {
            counts[idx] = rem;
            // sum of Z over the type
            let mut s = 0.0;
            let mut lp = lnfac[n];
            for (c, &(w, zval)) in counts.iter().zip(terms) {
                if *c > 0 {
                    if zval.is_infinite() {
                        s = f64::NEG_INFINITY;
                    } else {
                        s += *c as f64 * zval;
                    }
                    if w <= 0.0 {
                        return;
                    }
                    lp += *c as f64 * w.ln() - lnfac[*c];
                } else {
                    lp -= lnfac[0];
                }
            }
            if s >= z * n as f64 - 1e-12 {
                *total += lp.exp();
            }
            return;
        }
        for c in 0..=rem {
            counts[idx] = c;
            rec(counts, idx + 1, rem - c, n, z, terms, lnfac, total);
        }
    }
    rec(&mut counts, 0, n, n, z, &terms, &lnfac, &mut total);
    Ok(total.min(1.0))
}

/// Exact upper-tail probability for a product of (possibly distinct)
/// per-position laws, by direct atom enumeration.
pub fn exact_tail_product(symbols: &[(SymbolCGF, usize)], side: usize, z: f64) -> Result<f64> {
    // expand (symbol, multiplicity) into a flat list conceptually; enumerate
    // the product space depth-first with a running cap on work
    let mut flat: Vec<&SymbolCGF> = Vec::new();
    for (s, m) in symbols {
        for _ in 0..*m {
            flat.push(s);
        }
    }
    let n = flat.len();
    let mut atom_count: f64 = 1.0;
    for s in &flat {
        atom_count *= s.terms(side, 0.0).len() as f64;
    }
    if atom_count > 1e7 {
        return Err(Error::CapacityExceeded(format!(
            "{atom_count:.3e} product atoms"
        )));
    }
    let per: Vec<Vec<(f64, f64)>> = flat.iter().map(|s| s.terms(side, 0.0)).collect();
    let mut total = 0.0;
    let target = z * n as f64 - 1e-12;
    fn rec(per: &[Vec<(f64, f64)>], idx: usize, lp: f64, s: f64, target: f64, total: &mut f64) {
        if idx == per.len() {
            if s >= target {
                *total += lp.exp();
            }
            return;
        }
        for &(w, zval) in &per[idx] {
            if w <= 0.0 {
                continue;
            }
            let ns = if zval.is_infinite() { f64::NEG_INFINITY } else { s + zval };
            rec(per, idx + 1, lp + w.ln(), ns, target, total);
        }
    }
    rec(&per, 0, 0.0, 0.0, target, &mut total);
    Ok(total.min(1.0))
}

fn ln_factorial_table(n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n + 1];
    for k in 2..=n {
        t[k] = t[k - 1] + (k as f64).ln();
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::C64;
    use nalgebra::DMatrix;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn qubit(m: [[(f64, f64); 2]; 2]) -> DensityOperator {
        let mat = DMatrix::from_fn(2, 2, |r, co| c(m[r][co].0, m[r][co].1));
        DensityOperator::new(mat, &tol()).unwrap()
    }

    fn rho_fixed() -> DensityOperator {
        qubit([[(0.7, 0.0), (0.1, 0.2)], [(0.1, -0.2), (0.3, 0.0)]])
    }

    fn sigma_fixed() -> DensityOperator {
        qubit([[(0.4, 0.0), (-0.15, 0.05)], [(-0.15, -0.05), (0.6, 0.0)]])
    }

    fn binary_pair(p: [f64; 2], q: [f64; 2]) -> NSPair {
        NSPair::from_parts(vec![(0, 0), (1, 1)], p.to_vec(), q.to_vec()).unwrap()
    }

    #[test]
    fn ns_identical_diagonal_states() {
        let t = tol();
        let d = DensityOperator::from_probabilities(&[0.6, 0.4], &t).unwrap();
        let pair = ns_distributions(&d, &d, &t);
        for k in 0..pair.atoms.len() {
            assert!((pair.p[k] - pair.q[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn ns_pure_vs_mixed_masses() {
        let t = tol();
        let rho = DensityOperator::from_probabilities(&[1.0, 0.0], &t).unwrap();
        let sig = DensityOperator::maximally_mixed(2);
        let pair = ns_distributions(&rho, &sig, &t);
        // p masses: λ_i |⟨x_i|y_j⟩|² with λ = (1,0); q masses: 1/2·overlap
        let mut psorted = pair.p.clone();
        psorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for &qm in &pair.q {
            assert!(qm.abs() < 1e-14 || (qm - 0.5).abs() < 1e-14);
        }
        assert!((psorted.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ns_divergence_faithfulness_on_alpha_grid() {
        let t = tol();
        let pair = ns_distributions(&rho_fixed(), &sigma_fixed(), &t);
        for k in 0..=10 {
            let a = k as f64 / 10.0;
            let dq = crate::divergence::d_alpha_petz(&rho_fixed(), &sigma_fixed(), a, &t)
                .unwrap()
                .expect_finite("quantum");
            let dc = pair.d_alpha(a).expect_finite("classical");
            assert!((dq - dc).abs() < 1e-9, "alpha={a}: {dq} vs {dc}");
        }
    }

    #[test]
    fn ns_tensorization() {
        let t = tol();
        let pair = ns_distributions(&rho_fixed(), &sigma_fixed(), &t);
        let prod = pair.product(&pair);
        let rr = DensityOperator::new(
            crate::operator::tensor(rho_fixed().matrix(), rho_fixed().matrix()),
            &t,
        )
        .unwrap();
        let ss = DensityOperator::new(
            crate::operator::tensor(sigma_fixed().matrix(), sigma_fixed().matrix()),
            &t,
        )
        .unwrap();
        let direct = ns_distributions(&rr, &ss, &t);
        for a in [0.3, 0.7, 1.0] {
            let d1 = prod.d_alpha(a).expect_finite("prod");
            let d2 = direct.d_alpha(a).expect_finite("direct");
            assert!((d1 - d2).abs() < 1e-9, "alpha={a}: {d1} vs {d2}");
        }
    }

    #[test]
    fn tilted_endpoints() {
        let pair = binary_pair([0.5, 0.5], [0.25, 0.75]);
        let t0 = tilted(&pair, 0.0).unwrap();
        let t1 = tilted(&pair, 1.0).unwrap();
        assert!((t0.mass[0] - 0.5).abs() < 1e-14);
        assert!((t1.mass[0] - 0.25).abs() < 1e-14);
        // midpoint: ∝ (√(1/8), √(3/8))
        let tm = tilted(&pair, 0.5).unwrap();
        let a = (0.5f64 * 0.25).sqrt();
        let b = (0.5f64 * 0.75).sqrt();
        assert!((tm.mass[0] - a / (a + b)).abs() < 1e-14);
    }

    #[test]
    fn tilted_disjoint_errors() {
        let pair = binary_pair([1.0, 0.0], [0.0, 1.0]);
        assert!(matches!(
            tilted(&pair, 0.5),
            Err(Error::DisjointSupport(_))
        ));
    }

    #[test]
    fn find_tilt_identities() {
        let t = tol();
        let pair = binary_pair([0.5, 0.5], [0.25, 0.75]);
        let d_pq = pair.relative_entropy().expect_finite("D");
        // boundary: r = D(p‖q) should give t ≈ 0
        let (t0, _) = find_tilt(&pair, d_pq, &t).unwrap();
        assert!(t0 < 1e-6, "t = {t0}");
        // boundary: r = 0 should give t ≈ 1
        let (t1, _) = find_tilt(&pair, 0.0, &t).unwrap();
        assert!((t1 - 1.0).abs() < 1e-6, "t = {t1}");
        // midpoint: identities checked internally by find_tilt
        let (tm, dist) = find_tilt(&pair, 0.5 * d_pq, &t).unwrap();
        assert!(tm > 0.0 && tm < 1.0);
        let phi = phi_single(&pair, 0.5 * d_pq).expect_finite("phi");
        assert!((kl_to(&pair, &dist, false) - phi).abs() < 1e-8);
        // infeasible
        assert!(matches!(
            find_tilt(&pair, d_pq + 1.0, &t),
            Err(Error::InfeasibleRate(_))
        ));
    }

    #[test]
    fn cgf_zero_at_origin_and_symmetry() {
        let pair = binary_pair([0.5, 0.5], [0.25, 0.75]);
        let rec = cgf_build(&[pair], &[1.0]).unwrap();
        assert!(rec.lambda(0, 0.0).abs() < 1e-14);
        assert!(rec.lambda(1, 0.0).abs() < 1e-14);
        for t in [0.1, 0.4, 0.9] {
            let a = rec.lambda(0, t);
            let b = rec.lambda(1, 1.0 - t);
            assert!((a - b).abs() < 1e-12, "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn cgf_derivatives_match_finite_differences() {
        let pair = binary_pair([0.5, 0.5], [0.25, 0.75]);
        let rec = cgf_build(&[pair], &[1.0]).unwrap();
        let h = 1e-5;
        for t in [0.2, 0.5, 0.8] {
            let fd1 = (rec.lambda(0, t + h) - rec.lambda(0, t - h)) / (2.0 * h);
            assert!((fd1 - rec.lambda_d1(0, t)).abs() < 1e-6);
            let fd2 = (rec.lambda(0, t + h) - 2.0 * rec.lambda(0, t) + rec.lambda(0, t - h))
                / (h * h);
            assert!((fd2 - rec.lambda_d2(0, t)).abs() < 1e-4);
        }
    }

    #[test]
    fn lf_duality_on_samples() {
        // Λ** = Λ on points where the transform is exact
        let pair = binary_pair([0.5, 0.5], [0.25, 0.75]);
        let rec = cgf_build(&[pair], &[1.0]).unwrap();
        for t in [0.2, 0.5, 0.8] {
            let z = rec.lambda_d1(0, t);
            let lf = legendre_fenchel(&rec, 0, z);
            let back = lf.t_star * z - lf.value;
            assert!((back - rec.lambda(0, t)).abs() < 1e-7);
        }
    }

    #[test]
    fn phi_regimes() {
        let pair = binary_pair([0.5, 0.5], [0.25, 0.75]);
        let d1 = pair.relative_entropy().expect_finite("D");
        // r beyond D(p‖q): zero exponent
        assert_eq!(phi_single(&pair, d1 + 0.1), ExtReal::Finite(0.0));
        // subnormalized q on supp(p): infinite below mean D_0
        let sub = NSPair::from_parts(vec![(0, 0), (1, 1)], vec![0.5, 0.5], vec![0.25, 0.0]).unwrap();
        let d0 = sub.d_alpha(0.0).expect_finite("D0");
        assert!(d0 > 0.0);
        assert_eq!(phi_single(&sub, 0.5 * d0), ExtReal::Infinite);
    }

    #[test]
    fn phi_matches_scalar_hoeffding_form() {
        // binary pair: compare against a dense scalar scan over α
        let pair = binary_pair([0.5, 0.5], [0.25, 0.75]);
        let r = 0.05;
        let phi = phi_single(&pair, r).expect_finite("phi");
        let mut best = 0.0f64;
        for k in 1..20000 {
            let a = k as f64 / 20000.0;
            let d = pair.d_alpha(a).expect_finite("D");
            best = best.max((1.0 - a) / a * (d - r));
        }
        assert!((phi - best).abs() < 1e-7, "{phi} vs {best}");
    }

    #[test]
    fn regularity_identities_binary() {
        let pair = binary_pair([0.5, 0.5], [0.25, 0.75]);
        let d1 = pair.relative_entropy().expect_finite("D");
        let rep = regularity_suite(&[pair], &[1.0], 0.4 * d1).unwrap();
        assert!(rep.skipped.is_none());
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn regularity_skips_zero_regime() {
        let pair = binary_pair([0.5, 0.5], [0.25, 0.75]);
        let d1 = pair.relative_entropy().expect_finite("D");
        let rep = regularity_suite(&[pair], &[1.0], d1 + 0.5).unwrap();
        assert!(rep.skipped.is_some());
    }

    #[test]
    fn e0_two_formulas_agree() {
        let t = tol();
        let pair0 = ns_distributions(&rho_fixed(), &sigma_fixed(), &t);
        let pair1 = ns_distributions(&sigma_fixed(), &rho_fixed(), &t);
        for s in [0.0, 0.5, 1.5] {
            let (a, b) = e0_two(s, &[pair0.clone(), pair1.clone()], &[0.3, 0.7]).unwrap();
            assert!((a - b).abs() < 1e-10, "s={s}: {a} vs {b}");
        }
    }

    #[test]
    fn brr_bound_below_exact_binomial_tail() {
        // fair-coin log-likelihood sum: p = (1/2,1/2), q = (1/4,3/4)
        let pair = binary_pair([0.5, 0.5], [0.25, 0.75]);
        let rec = cgf_build(&[pair], &[1.0]).unwrap();
        let n = 400;
        // pick z strictly inside the increment range
        let z = 0.5 * (rec.lambda_d1(0, 0.0) + rec.lambda_d1(0, 1.0));
        let brr = bahadur_ranga_rao(&rec, 0, z, n).unwrap();
        let exact = exact_tail_iid(&rec.symbols[0], 0, z, n).unwrap();
        assert!(
            brr.bound <= exact + 1e-15,
            "BRR {} exceeds exact {}",
            brr.bound,
            exact
        );
        assert!(brr.bound > 0.0);
    }

    #[test]
    fn brr_guard_fails_at_tiny_n() {
        let pair = binary_pair([0.5, 0.5], [0.25, 0.75]);
        let rec = cgf_build(&[pair], &[1.0]).unwrap();
        let z = 0.5 * (rec.lambda_d1(0, 0.0) + rec.lambda_d1(0, 1.0));
        assert!(matches!(
            bahadur_ranga_rao(&rec, 0, z, 3),
            Err(Error::ConditionNotMet(_))
        ));
    }

    #[test]
    fn exact_tail_product_matches_iid_path() {
        let pair = binary_pair([0.5, 0.5], [0.25, 0.75]);
        let sym = SymbolCGF::new(&pair);
        let rec = cgf_build(&[pair], &[1.0]).unwrap();
        let z = 0.3 * rec.lambda_d1(0, 0.0) + 0.7 * rec.lambda_d1(0, 1.0);
        let n = 8;
        let a = exact_tail_iid(&sym, 0, z, n).unwrap();
        let b = exact_tail_product(&[(sym, n)], 0, z).unwrap();
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}
