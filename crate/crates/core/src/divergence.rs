//! Bipartite entropic quantities: relative entropy, relative variance, the
//! Petz and log-Euclidean α-Rényi families with boundary limits, and the
//! Golden-Thompson gap between them.
//!
//! Everything is evaluated in the two eigenbases via the overlap table
//! O(i,j) = |⟨xᵢ|yⱼ⟩|², which turns each trace functional into a weighted sum
//! over eigenvalue pairs:
//!   Tr[ρ^α σ^{1−α}] = Σ λᵢ^α γⱼ^{1−α} O(i,j),
//!   Tr[ρ(log ρ − log σ)] = Σ λᵢ O(i,j) (log λᵢ − log γⱼ).
//! Natural logarithms throughout.

use nalgebra::DMatrix;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::extreal::ExtReal;
use crate::operator::{
    delta_regularize, mat_exp, mat_log_on_support, overlap_sq, trace_re, DensityOperator,
    HermitianMatrix,
};

/// Eigenvalues of ρ and σ plus the squared-overlap table between their
/// eigenbases; the common currency of this module and the classical
/// reduction.
pub struct OverlapData {
    pub lam: Vec<f64>,
    pub gam: Vec<f64>,
    pub osq: DMatrix<f64>,
    pub lam_cut: f64,
    pub gam_cut: f64,
}

pub fn overlap_data(rho: &DensityOperator, sigma: &DensityOperator, tol: &Tolerances) -> OverlapData {
    let sa = rho.spectral();
    let sb = sigma.spectral();
    OverlapData {
        lam: sa.values.clone(),
        gam: sb.values.clone(),
        osq: overlap_sq(sa, sb),
        lam_cut: tol.rank_cutoff(sa.max_eigenvalue()),
        gam_cut: tol.rank_cutoff(sb.max_eigenvalue()),
    }
}

impl OverlapData {
    /// Probability mass of ρ lying outside supp(σ).
    pub fn support_leak(&self) -> f64 {
        let mut leak = 0.0;
        for (i, &l) in self.lam.iter().enumerate() {
            if l <= self.lam_cut {
                continue;
            }
            for (j, &g) in self.gam.iter().enumerate() {
                if g <= self.gam_cut {
                    leak += l * self.osq[(i, j)];
                }
            }
        }
        leak
    }

    /// Σ over supp(ρ)×supp(σ) of f(λᵢ, γⱼ)·O(i,j).
    pub fn sum_support(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for (i, &l) in self.lam.iter().enumerate() {
            if l <= self.lam_cut {
                continue;
            }
            for (j, &g) in self.gam.iter().enumerate() {
                if g <= self.gam_cut {
                    continue;
                }
                let w = self.osq[(i, j)];
                if w > 0.0 {
                    acc += f(l, g) * w;
                }
            }
        }
        acc
    }
}

/// Mass outside supp(σ) above this threshold is a genuine support violation
/// (returns +∞) rather than rounding noise.
const SUPPORT_LEAK_TOL: f64 = 1e-10;

/// Quantum relative entropy D(ρ‖σ) = Tr[ρ(log ρ − log σ)] when ρ ≪ σ, else +∞.
pub fn relative_entropy(rho: &DensityOperator, sigma: &DensityOperator, tol: &Tolerances) -> ExtReal {
    let ov = overlap_data(rho, sigma, tol);
    relative_entropy_overlap(&ov)
}

pub fn relative_entropy_overlap(ov: &OverlapData) -> ExtReal {
    if ov.support_leak() > SUPPORT_LEAK_TOL {
        return ExtReal::Infinite;
    }
    ExtReal::Finite(ov.sum_support(|l, g| l * (l.ln() - g.ln())))
}

/// Relative variance V(ρ‖σ) = Tr[ρ(log ρ − log σ)²] − D(ρ‖σ)² when ρ ≪ σ.
pub fn relative_variance(rho: &DensityOperator, sigma: &DensityOperator, tol: &Tolerances) -> ExtReal {
    let ov = overlap_data(rho, sigma, tol);
    relative_variance_overlap(&ov)
}

pub fn relative_variance_overlap(ov: &OverlapData) -> ExtReal {
    if ov.support_leak() > SUPPORT_LEAK_TOL {
        return ExtReal::Infinite;
    }
    let d = ov.sum_support(|l, g| l * (l.ln() - g.ln()));
    let m2 = ov.sum_support(|l, g| {
        let r = l.ln() - g.ln();
        l * r * r
    });
    ExtReal::Finite((m2 - d * d).max(0.0))
}

fn check_alpha(alpha: f64, open_left: bool) -> Result<()> {
    let lo_ok = if open_left { alpha > 0.0 } else { alpha >= 0.0 };
    if !(lo_ok && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in {} , got {alpha}",
            if open_left { "(0,1]" } else { "[0,1]" }
        )));
    }
    Ok(())
}

/// Q_α = Tr[ρ^α σ^{1−α}] with support-restricted powers, α ∈ (0,1).
pub fn q_alpha_petz(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    alpha: f64,
    tol: &Tolerances,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    let ov = overlap_data(rho, sigma, tol);
    Ok(q_alpha_petz_overlap(&ov, alpha))
}

pub fn q_alpha_petz_overlap(ov: &OverlapData, alpha: f64) -> f64 {
    ov.sum_support(|l, g| l.powf(alpha) * g.powf(1.0 - alpha))
}

/// Petz α-Rényi divergence, α ∈ [0,1]; α=1 is the relative entropy, α=0 the
/// limit −log Tr[ρ⁰σ].
pub fn d_alpha_petz(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    alpha: f64,
    tol: &Tolerances,
) -> Result<ExtReal> {
    check_alpha(alpha, false)?;
    let ov = overlap_data(rho, sigma, tol);
    Ok(d_alpha_petz_overlap(&ov, alpha))
}

pub fn d_alpha_petz_overlap(ov: &OverlapData, alpha: f64) -> ExtReal {
    if alpha == 1.0 {
        return relative_entropy_overlap(ov);
    }
    if alpha == 0.0 {
        // Tr[ρ⁰σ] = mass of σ on supp(ρ)
        let mut m = 0.0;
        for (i, &l) in ov.lam.iter().enumerate() {
            if l <= ov.lam_cut {
                continue;
            }
            for (j, &g) in ov.gam.iter().enumerate() {
                if g > ov.gam_cut {
                    m += g * ov.osq[(i, j)];
                }
            }
        }
        if m <= 0.0 {
            return ExtReal::Infinite;
        }
        return ExtReal::Finite(-m.ln());
    }
    let q = q_alpha_petz_overlap(ov, alpha);
    if q <= 0.0 {
        return ExtReal::Infinite;
    }
    ExtReal::Finite(q.ln() / (alpha - 1.0))
}

/// Result of a log-Euclidean Q evaluation; `extrapolated` marks values that
/// came from the boundary regularization ladder rather than a direct trace.
#[derive(Debug, Clone, Copy)]
pub struct FlatQ {
    pub value: f64,
    pub extrapolated: bool,
    /// Disagreement between the two successive ladder extrapolants (0 when
    /// evaluated directly).
    pub ladder_spread: f64,
}

/// Q♭_α = Tr[exp(α log ρ + (1−α) log σ)]. Full-rank pairs are evaluated
/// directly; rank-deficient pairs go through the decreasing-δ regularization
/// ladder with linear extrapolation to δ → 0.
pub fn q_alpha_flat(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    alpha: f64,
    tol: &Tolerances,
) -> Result<FlatQ> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    let d = rho.dim();
    if sigma.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "state dims {} vs {}",
            d,
            sigma.dim()
        )));
    }
    // Commuting pairs: the δ → 0 limit equals the support-restricted
    // power-trace exactly, so no ladder is needed even at deficient rank.
    let comm = rho.matrix() * sigma.matrix() - sigma.matrix() * rho.matrix();
    if crate::operator::fro_norm(&comm) <= 1e-13 {
        let ov = overlap_data(rho, sigma, tol);
        return Ok(FlatQ {
            value: q_alpha_petz_overlap(&ov, alpha),
            extrapolated: false,
            ladder_spread: 0.0,
        });
    }
    if rho.rank() == d && sigma.rank() == d {
        let v = flat_trace(
            &HermitianMatrix::from_exact(rho.matrix().clone()),
            &HermitianMatrix::from_exact(sigma.matrix().clone()),
            alpha,
            tol,
        )?;
        return Ok(FlatQ {
            value: v,
            extrapolated: false,
            ladder_spread: 0.0,
        });
    }
    // δ-ladder: evaluate at decreasing δ, fit a linear-in-δ model on
    // consecutive pairs, require the two extrapolants to agree.
    let deltas = [1e-6, 1e-7, 1e-8];
    let mut ys = [0.0f64; 3];
    for (k, &delta) in deltas.iter().enumerate() {
        let r = delta_regularize(rho, delta)?;
        let s = delta_regularize(sigma, delta)?;
        ys[k] = flat_trace(&r, &s, alpha, tol)?;
    }
    let extrap = |d0: f64, y0: f64, d1: f64, y1: f64| (y1 * d0 - y0 * d1) / (d0 - d1);
    let e01 = extrap(deltas[0], ys[0], deltas[1], ys[1]);
    let e12 = extrap(deltas[1], ys[1], deltas[2], ys[2]);
    let spread = (e01 - e12).abs();
    if spread > tol.extrapolation {
        return Err(Error::NumericalFailure {
            context: "log-Euclidean Q boundary extrapolation".into(),
            detail: format!(
                "ladder values {:?} at deltas {:?}; extrapolants {e01} vs {e12} differ by {spread:.3e}",
                ys, deltas
            ),
        });
    }
    Ok(FlatQ {
        value: e12,
        extrapolated: true,
        ladder_spread: spread,
    })
}

/// Tr[exp(α log ρ + (1−α) log σ)] for (strictly) positive definite inputs.
fn flat_trace(
    rho: &HermitianMatrix,
    sigma: &HermitianMatrix,
    alpha: f64,
    tol: &Tolerances,
) -> Result<f64> {
    let lr = mat_log_on_support(rho, tol)?;
    let ls = mat_log_on_support(sigma, tol)?;
    let h = HermitianMatrix::from_exact(lr.matrix().scale(alpha) + ls.matrix().scale(1.0 - alpha));
    Ok(trace_re(mat_exp(&h).matrix()))
}

/// Log-Euclidean α-Rényi divergence, α ∈ [0,1].
pub fn d_alpha_flat(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    alpha: f64,
    tol: &Tolerances,
) -> Result<ExtReal> {
    check_alpha(alpha, false)?;
    if alpha == 1.0 {
        return Ok(relative_entropy(rho, sigma, tol));
    }
    if alpha == 0.0 {
        // continuity endpoint: Q♭ → Tr[σ-part] as α → 0; evaluate at a small
        // proxy α to honor the limit definition
        let a = 1e-6;
        let q = q_alpha_flat(rho, sigma, a, tol)?;
        if q.value <= 0.0 {
            return Ok(ExtReal::Infinite);
        }
        return Ok(ExtReal::Finite(q.value.ln() / (a - 1.0)));
    }
    let q = q_alpha_flat(rho, sigma, alpha, tol)?;
    if q.value <= 0.0 {
        return Ok(ExtReal::Infinite);
    }
    Ok(ExtReal::Finite(q.value.ln() / (alpha - 1.0)))
}

/// Q_α − Q♭_α; nonnegative up to numerical slack by the trace inequality
/// ordering of the two families.
pub fn golden_thompson_gap(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    alpha: f64,
    tol: &Tolerances,
) -> Result<f64> {
    let qp = q_alpha_petz(rho, sigma, alpha, tol)?;
    let qf = q_alpha_flat(rho, sigma, alpha, tol)?;
    Ok(qp - qf.value)
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

    fn ket0() -> DensityOperator {
        DensityOperator::from_probabilities(&[1.0, 0.0], &tol()).unwrap()
    }

    #[test]
    fn relative_entropy_identical_is_zero() {
        let r = rho_fixed();
        let d = relative_entropy(&r, &r, &tol()).expect_finite("D");
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn relative_entropy_disjoint_is_infinite() {
        let zero = ket0();
        let one = DensityOperator::from_probabilities(&[0.0, 1.0], &tol()).unwrap();
        assert_eq!(relative_entropy(&zero, &one, &tol()), ExtReal::Infinite);
    }

    #[test]
    fn relative_entropy_pure_vs_mixed() {
        let d = relative_entropy(&ket0(), &DensityOperator::maximally_mixed(2), &tol())
            .expect_finite("D");
        assert!((d - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn relative_entropy_and_variance_fixed_pair() {
        // frozen oracle values for the fixed non-commuting qubit pair
        let d = relative_entropy(&rho_fixed(), &sigma_fixed(), &tol()).expect_finite("D");
        assert!((d - 0.37325889187079292).abs() < 1e-12, "D = {d}");
        let v = relative_variance(&rho_fixed(), &sigma_fixed(), &tol()).expect_finite("V");
        assert!((v - 0.60651222720340114).abs() < 1e-11, "V = {v}");
    }

    #[test]
    fn relative_variance_classical() {
        let p = DensityOperator::from_probabilities(&[0.5, 0.5], &tol()).unwrap();
        let q = DensityOperator::from_probabilities(&[0.25, 0.75], &tol()).unwrap();
        let v = relative_variance(&p, &q, &tol()).expect_finite("V");
        assert!((v - 0.30173724020314552).abs() < 1e-12);
    }

    #[test]
    fn relative_variance_constant_log_ratio() {
        // pure state vs maximally mixed: log-ratio constant on the support
        let v = relative_variance(&ket0(), &DensityOperator::maximally_mixed(2), &tol())
            .expect_finite("V");
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn petz_q_fixed_pair() {
        let t = tol();
        let cases = [
            (0.3, 0.91789687976520584),
            (0.5, 0.9044520157914604),
            (0.8, 0.940047676307605),
        ];
        for (a, expect) in cases {
            let q = q_alpha_petz(&rho_fixed(), &sigma_fixed(), a, &t).unwrap();
            assert!((q - expect).abs() < 1e-12, "alpha={a}: {q} vs {expect}");
        }
    }

    #[test]
    fn flat_q_fixed_pair() {
        let t = tol();
        let cases = [
            (0.3, 0.91750452932713999),
            (0.5, 0.90391018241146937),
            (0.8, 0.93983191440685776),
        ];
        for (a, expect) in cases {
            let q = q_alpha_flat(&rho_fixed(), &sigma_fixed(), a, &t).unwrap();
            assert!(!q.extrapolated);
            assert!(
                (q.value - expect).abs() < 1e-12,
                "alpha={a}: {} vs {expect}",
                q.value
            );
        }
    }

    #[test]
    fn d_alpha_petz_identical_and_constant_cases() {
        let t = tol();
        for a in [0.0, 0.1, 0.5, 0.9, 1.0] {
            let d = d_alpha_petz(&rho_fixed(), &rho_fixed(), a, &t)
                .unwrap()
                .expect_finite("D");
            assert!(d.abs() < 1e-10, "alpha={a}: {d}");
            // pure vs maximally mixed: log 2 for every alpha
            let d2 = d_alpha_petz(&ket0(), &DensityOperator::maximally_mixed(2), a, &t)
                .unwrap()
                .expect_finite("D");
            assert!((d2 - 2.0f64.ln()).abs() < 1e-10, "alpha={a}: {d2}");
        }
    }

    #[test]
    fn d_alpha_petz_matches_classical() {
        let t = tol();
        let p = DensityOperator::from_probabilities(&[0.6, 0.4], &t).unwrap();
        let q = DensityOperator::from_probabilities(&[0.2, 0.8], &t).unwrap();
        let d = d_alpha_petz(&p, &q, 0.5, &t).unwrap().expect_finite("D");
        assert!((d - 0.1840209693634878).abs() < 1e-12);
    }

    #[test]
    fn d_zero_matches_small_alpha_sweep() {
        // closed form at alpha=0 against the limit from small alpha
        let t = tol();
        // rank-deficient rho so that the alpha=0 value is nontrivial
        let rho = ket0();
        let sig = sigma_fixed();
        let d0 = d_alpha_petz(&rho, &sig, 0.0, &t).unwrap().expect_finite("D0");
        let mut prev = f64::INFINITY;
        for a in [1e-2, 1e-3, 1e-4, 1e-5] {
            let da = d_alpha_petz(&rho, &sig, a, &t).unwrap().expect_finite("Da");
            let gap = (da - d0).abs();
            assert!(gap < prev + 1e-12, "sweep not converging at alpha={a}");
            prev = gap;
        }
        assert!(prev < 1e-4, "limit gap {prev}");
    }

    #[test]
    fn flat_equals_petz_commuting_full_rank() {
        let t = tol();
        let p = DensityOperator::from_probabilities(&[0.6, 0.4], &t).unwrap();
        let q = DensityOperator::from_probabilities(&[0.2, 0.8], &t).unwrap();
        for a in [0.2, 0.5, 0.77] {
            let qp = q_alpha_petz(&p, &q, a, &t).unwrap();
            let qf = q_alpha_flat(&p, &q, a, &t).unwrap();
            assert!((qp - qf.value).abs() < 1e-12, "alpha={a}");
        }
    }

    #[test]
    fn flat_commuting_rank_deficient_exact() {
        // rank-deficient commuting pair: the δ-limit equals the
        // support-restricted Petz value exactly
        let t = tol();
        let p = DensityOperator::from_probabilities(&[1.0, 0.0], &t).unwrap();
        let q = DensityOperator::from_probabilities(&[0.5, 0.5], &t).unwrap();
        let a = 0.5;
        let qf = q_alpha_flat(&p, &q, a, &t).unwrap();
        assert!(!qf.extrapolated);
        let qp = q_alpha_petz(&p, &q, a, &t).unwrap();
        assert!((qf.value - qp).abs() < 1e-14);
    }

    #[test]
    fn flat_ladder_noncommuting_rank_deficient_reports_failure() {
        // non-commuting pure state vs full-rank state: the boundary value has
        // a δ^α correction, so the linear ladder must flag non-convergence
        // rather than return a silently wrong extrapolant
        let t = tol();
        let plus = DensityOperator::pure(&[c(1.0, 0.0), c(1.0, 0.0)], &t).unwrap();
        let res = q_alpha_flat(&plus, &sigma_fixed(), 0.5, &t);
        assert!(matches!(res, Err(Error::NumericalFailure { .. })));
    }

    #[test]
    fn gt_gap_nonnegative_and_zero_when_commuting() {
        let t = tol();
        let gap = golden_thompson_gap(&rho_fixed(), &sigma_fixed(), 0.5, &t).unwrap();
        assert!(gap >= -1e-9);
        let p = DensityOperator::from_probabilities(&[0.6, 0.4], &t).unwrap();
        let q = DensityOperator::from_probabilities(&[0.2, 0.8], &t).unwrap();
        let gap_c = golden_thompson_gap(&p, &q, 0.5, &t).unwrap();
        assert!(gap_c.abs() < 1e-12);
    }

    #[test]
    fn additivity_under_tensor() {
        let t = tol();
        let r1 = rho_fixed();
        let s1 = sigma_fixed();
        let r2 = qubit([[(0.2, 0.0), (0.05, -0.1)], [(0.05, 0.1), (0.8, 0.0)]]);
        let s2 = DensityOperator::maximally_mixed(2);
        let rr = DensityOperator::new(crate::operator::tensor(r1.matrix(), r2.matrix()), &t).unwrap();
        let ss = DensityOperator::new(crate::operator::tensor(s1.matrix(), s2.matrix()), &t).unwrap();
        for a in [0.3, 0.6, 1.0] {
            let lhs = d_alpha_petz(&rr, &ss, a, &t).unwrap().expect_finite("lhs");
            let rhs = d_alpha_petz(&r1, &s1, a, &t).unwrap().expect_finite("a")
                + d_alpha_petz(&r2, &s2, a, &t).unwrap().expect_finite("b");
            assert!((lhs - rhs).abs() < 1e-9, "alpha={a}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn monotone_in_alpha() {
        let t = tol();
        let mut prev = -1e300;
        for k in 1..=50 {
            let a = k as f64 / 50.0;
            let d = d_alpha_petz(&rho_fixed(), &sigma_fixed(), a, &t)
                .unwrap()
                .expect_finite("D");
            assert!(d >= prev - 1e-9, "not monotone at alpha={a}");
            prev = d;
        }
    }
}
