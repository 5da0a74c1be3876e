//! Hermitian spectral calculus: decompositions, matrix functions on supports,
//! tensor products, and support/orthogonality predicates.
//!
//! Conventions: for a PSD operator A with spectral form A = Σ aᵢ Pᵢ, the power
//! A^p is taken over the strictly positive part of the spectrum only, so that
//! A^0 is the projection onto supp(A) and log A acts as Σ log(aᵢ) Pᵢ there.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::config::Tolerances;
use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;

/// Threshold above which eigendecompositions are routed to the faer backend.
const FAER_DIM: usize = 48;

/// A validated Hermitian matrix. Construction symmetrizes the input after
/// checking that the deviation from A† is within tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    mat: CMat,
}

impl HermitianMatrix {
    pub fn new(mat: CMat, tol: &Tolerances) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "expected square nonempty matrix, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let adj = mat.adjoint();
        let mut dev: f64 = 0.0;
        for (a, b) in mat.iter().zip(adj.iter()) {
            dev = dev.max((a - b).norm());
        }
        // scale-relative check with an absolute floor
        let scale = mat.iter().map(|z| z.norm()).fold(0.0f64, f64::max).max(1.0);
        if dev > tol.hermitian * scale {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let sym = (&mat + adj).scale(0.5);
        Ok(HermitianMatrix { mat: sym })
    }

    /// Build without validation from a matrix known to be Hermitian
    /// (e.g. assembled from a spectral decomposition). Symmetrizes anyway.
    pub fn from_exact(mat: CMat) -> Self {
        let adj = mat.adjoint();
        HermitianMatrix {
            mat: (&mat + adj).scale(0.5),
        }
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let d = diag.len();
        let mut m = CMat::zeros(d, d);
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        HermitianMatrix { mat: m }
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianMatrix {
            mat: CMat::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        HermitianMatrix {
            mat: CMat::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.diagonal().iter().map(|z| z.re).sum()
    }
}

/// Spectral decomposition with eigenvalues sorted descending and eigenvectors
/// as the corresponding columns of a unitary matrix.
#[derive(Debug, Clone)]
pub struct Spectral {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl Spectral {
    /// Σ f(aᵢ) Pᵢ over the full spectrum.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let d = self.values.len();
        let mut diag = CMat::zeros(d, d);
        for (i, &v) in self.values.iter().enumerate() {
            diag[(i, i)] = C64::new(f(v), 0.0);
        }
        let m = &self.vectors * diag * self.vectors.adjoint();
        HermitianMatrix::from_exact(m)
    }

    /// Σ_{aᵢ > cutoff} f(aᵢ) Pᵢ — matrix function restricted to the support.
    pub fn map_on_support(&self, cutoff: f64, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        self.map(|v| if v > cutoff { f(v) } else { 0.0 })
    }

    pub fn reconstruct(&self) -> CMat {
        self.map(|v| v).into_matrix()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Number of eigenvalues above the support cutoff implied by `tol`.
    pub fn rank(&self, tol: &Tolerances) -> usize {
        let cut = tol.rank_cutoff(self.max_eigenvalue());
        self.values.iter().filter(|&&v| v > cut).count()
    }
}

/// Eigendecomposition of a Hermitian matrix, descending eigenvalue order.
pub fn spectral_decompose(a: &HermitianMatrix) -> Spectral {
    let d = a.dim();
    let (mut vals, mut vecs): (Vec<f64>, CMat) = if d >= FAER_DIM {
        faer_eigh(a.matrix())
    } else {
        let se = a.matrix().clone().symmetric_eigen();
        (se.eigenvalues.iter().copied().collect(), se.eigenvectors)
    };
    // sort descending, permuting columns accordingly
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&i, &j| vals[j].partial_cmp(&vals[i]).unwrap());
    let sorted_vals: Vec<f64> = idx.iter().map(|&i| vals[i]).collect();
    let mut sorted_vecs = CMat::zeros(d, d);
    for (new_col, &old_col) in idx.iter().enumerate() {
        sorted_vecs.set_column(new_col, &vecs.column(old_col));
    }
    vals = sorted_vals;
    vecs = sorted_vecs;
    Spectral {
        values: vals,
        vectors: vecs,
    }
}

/// Eigenvalues of a Hermitian matrix without eigenvectors (noticeably
/// cheaper at large dimension), unsorted guarantees beyond being real.
pub fn eigenvalues_only(m: &CMat) -> Vec<f64> {
    let d = m.nrows();
    if d >= FAER_DIM {
        let fm = faer::Mat::from_fn(d, d, |r, c| {
            let z = m[(r, c)];
            faer::c64::new(z.re, z.im)
        });
        fm.self_adjoint_eigenvalues(faer::Side::Lower)
            .expect("self-adjoint eigenvalue computation failed")
    } else {
        m.clone().symmetric_eigenvalues().iter().copied().collect()
    }
}

fn faer_eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let d = m.nrows();
    let fm = faer::Mat::from_fn(d, d, |r, c| {
        let z = m[(r, c)];
        faer::c64::new(z.re, z.im)
    });
    let evd = fm
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("self-adjoint eigendecomposition failed");
    let s = evd.S();
    let u = evd.U();
    let vals: Vec<f64> = (0..d).map(|i| s[i].re).collect();
    let vecs = CMat::from_fn(d, d, |r, c| {
        let z = u[(r, c)];
        C64::new(z.re, z.im)
    });
    (vals, vecs)
}

/// An (approximate) orthogonal projector.
#[derive(Debug, Clone)]
pub struct Projector {
    mat: HermitianMatrix,
    rank: usize,
}

impl Projector {
    pub fn matrix(&self) -> &CMat {
        self.mat.matrix()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }
}

/// A density operator: Hermitian, PSD (after clamping eigenvalues within the
/// clamp window), unit trace. Carries its spectral decomposition.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    mat: CMat,
    spec: Spectral,
    rank: usize,
}

impl DensityOperator {
    pub fn new(mat: CMat, tol: &Tolerances) -> Result<Self> {
        let herm = HermitianMatrix::new(mat, tol)?;
        let tr = herm.trace();
        if (tr - 1.0).abs() > tol.trace {
            return Err(Error::NotUnitTrace { trace: tr });
        }
        Self::from_hermitian(herm, tol)
    }

    /// Validates PSD and clamps tiny negative eigenvalues; does not renormalize.
    pub fn from_hermitian(herm: HermitianMatrix, tol: &Tolerances) -> Result<Self> {
        let mut spec = spectral_decompose(&herm);
        let min = spec.min_eigenvalue();
        if min < -tol.psd {
            return Err(Error::NotPsd {
                min_eigenvalue: min,
            });
        }
        for v in spec.values.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let rank = spec.rank(tol);
        let mat = spec.reconstruct();
        Ok(DensityOperator { mat, spec, rank })
    }

    /// Normalize a PSD matrix with positive trace into a density operator.
    pub fn normalized(mat: CMat, tol: &Tolerances) -> Result<Self> {
        let herm = HermitianMatrix::new(mat, tol)?;
        let tr = herm.trace();
        if tr <= 0.0 || !tr.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cannot normalize matrix with trace {tr}"
            )));
        }
        let scaled = herm.into_matrix().scale(1.0 / tr);
        Self::from_hermitian(HermitianMatrix::from_exact(scaled), tol)
    }

    /// Pure state |v⟩⟨v| from a (not necessarily normalized) vector.
    pub fn pure(v: &[C64], tol: &Tolerances) -> Result<Self> {
        let norm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(Error::InvalidParameter("zero state vector".into()));
        }
        let d = v.len();
        let m = CMat::from_fn(d, d, |r, c| v[r] * v[c].conj() / norm2);
        Self::new(m, tol)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let tol = Tolerances::default();
        let m = CMat::identity(dim, dim).scale(1.0 / dim as f64);
        Self::new(m, &tol).expect("maximally mixed state is valid")
    }

    pub fn from_probabilities(p: &[f64], tol: &Tolerances) -> Result<Self> {
        Self::new(
            HermitianMatrix::from_real_diag(p).into_matrix(),
            tol,
        )
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spec
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.spec.values
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Projection onto the support.
    pub fn support(&self, tol: &Tolerances) -> Projector {
        let cut = tol.rank_cutoff(self.spec.max_eigenvalue());
        let mat = self.spec.map_on_support(cut, |_| 1.0);
        Projector {
            mat,
            rank: self.rank,
        }
    }
}

/// ρ^p over the positive part of the spectrum (zero eigenvalues excluded).
pub fn mat_power(a: &HermitianMatrix, p: f64, tol: &Tolerances) -> Result<HermitianMatrix> {
    let spec = spectral_decompose(a);
    power_from_spectral(&spec, p, tol)
}

pub fn power_from_spectral(spec: &Spectral, p: f64, tol: &Tolerances) -> Result<HermitianMatrix> {
    let min = spec.min_eigenvalue();
    if min < -tol.psd {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    let cut = tol.rank_cutoff(spec.max_eigenvalue());
    Ok(spec.map_on_support(cut, |v| v.powf(p)))
}

/// Projection onto supp(A) for PSD A.
pub fn support_projector(a: &HermitianMatrix, tol: &Tolerances) -> Result<Projector> {
    let spec = spectral_decompose(a);
    let min = spec.min_eigenvalue();
    if min < -tol.psd {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    let cut = tol.rank_cutoff(spec.max_eigenvalue());
    let rank = spec.values.iter().filter(|&&v| v > cut).count();
    Ok(Projector {
        mat: spec.map_on_support(cut, |_| 1.0),
        rank,
    })
}

/// Σ_{aᵢ > cutoff} log(aᵢ) Pᵢ — logarithm restricted to the support.
pub fn mat_log_on_support(a: &HermitianMatrix, tol: &Tolerances) -> Result<HermitianMatrix> {
    let spec = spectral_decompose(a);
    let min = spec.min_eigenvalue();
    if min < -tol.psd {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    let cut = tol.rank_cutoff(spec.max_eigenvalue());
    Ok(spec.map_on_support(cut, f64::ln))
}

/// Matrix exponential of a Hermitian matrix.
pub fn mat_exp(h: &HermitianMatrix) -> HermitianMatrix {
    let spec = spectral_decompose(h);
    spec.map(f64::exp)
}

/// ρ + δ·𝟙, unnormalized.
pub fn delta_regularize(rho: &DensityOperator, delta: f64) -> Result<HermitianMatrix> {
    if delta <= 0.0 || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "regularization parameter must be positive, got {delta}"
        )));
    }
    let d = rho.dim();
    let m = rho.matrix() + CMat::identity(d, d).scale(delta);
    Ok(HermitianMatrix::from_exact(m))
}

/// Kronecker product.
pub fn tensor(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// supp(A) ∩ supp(B) = ∅, tested via ‖A⁰B⁰‖_F ≤ τ_orth.
pub fn is_orthogonal(a: &DensityOperator, b: &DensityOperator, tol: &Tolerances) -> bool {
    let pa = a.support(tol);
    let pb = b.support(tol);
    let prod = pa.matrix() * pb.matrix();
    fro_norm(&prod) <= tol.orthogonality.max(1e-8)
}

pub fn fro_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace_re(m: &CMat) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Trace norm ‖A‖₁ of a Hermitian matrix (sum of |eigenvalues|).
pub fn trace_norm(a: &HermitianMatrix) -> f64 {
    spectral_decompose(a).values.iter().map(|v| v.abs()).sum()
}

/// Trace-norm distance between two density operators.
pub fn trace_distance(a: &DensityOperator, b: &DensityOperator) -> f64 {
    let diff = a.matrix() - b.matrix();
    trace_norm(&HermitianMatrix::from_exact(diff))
}

/// Squared overlap table O(i,j) = |⟨xᵢ|yⱼ⟩|² between two eigenbases.
pub fn overlap_sq(a: &Spectral, b: &Spectral) -> DMatrix<f64> {
    let inner = a.vectors.adjoint() * &b.vectors;
    DMatrix::from_fn(inner.nrows(), inner.ncols(), |r, c| inner[(r, c)].norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn identity_eigenvalues() {
        let a = HermitianMatrix::identity(2);
        let s = spectral_decompose(&a);
        assert_eq!(s.values, vec![1.0, 1.0]);
    }

    #[test]
    fn diagonal_eigen_sorted() {
        let a = HermitianMatrix::from_real_diag(&[1.0, 3.0]);
        let s = spectral_decompose(&a);
        assert_eq!(s.values, vec![3.0, 1.0]);
        // eigenvector for 3 is e2, for 1 is e1 (up to phase)
        assert!((s.vectors[(1, 0)].norm() - 1.0).abs() < 1e-12);
        assert!((s.vectors[(0, 1)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            HermitianMatrix::new(m, &tol()),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn power_zero_is_support_projector() {
        let a = HermitianMatrix::from_real_diag(&[4.0, 0.0]);
        let p = mat_power(&a, 0.0, &tol()).unwrap();
        let expect = HermitianMatrix::from_real_diag(&[1.0, 0.0]);
        assert!(fro_norm(&(p.matrix() - expect.matrix())) < 1e-12);
    }

    #[test]
    fn power_half_diagonal() {
        let a = HermitianMatrix::from_real_diag(&[4.0, 0.0]);
        let p = mat_power(&a, 0.5, &tol()).unwrap();
        let expect = HermitianMatrix::from_real_diag(&[2.0, 0.0]);
        assert!(fro_norm(&(p.matrix() - expect.matrix())) < 1e-12);
    }

    #[test]
    fn mat_exp_of_zero_is_identity() {
        let z = HermitianMatrix::zeros(3);
        let e = mat_exp(&z);
        assert!(fro_norm(&(e.matrix() - CMat::identity(3, 3))) < 1e-12);
    }

    #[test]
    fn log_exp_round_trip() {
        // fixed full-rank qubit state
        let m = CMat::from_row_slice(
            2,
            2,
            &[c(0.7, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.3, 0.0)],
        );
        let rho = DensityOperator::new(m, &tol()).unwrap();
        let lg = mat_log_on_support(
            &HermitianMatrix::from_exact(rho.matrix().clone()),
            &tol(),
        )
        .unwrap();
        let back = mat_exp(&lg);
        assert!(fro_norm(&(back.matrix() - rho.matrix())) < 1e-10);
    }

    #[test]
    fn delta_regularize_diagonal() {
        let rho = DensityOperator::from_probabilities(&[1.0, 0.0], &tol()).unwrap();
        let r = delta_regularize(&rho, 0.5).unwrap();
        let expect = HermitianMatrix::from_real_diag(&[1.5, 0.5]);
        assert!(fro_norm(&(r.matrix() - expect.matrix())) < 1e-12);
        assert!(delta_regularize(&rho, 0.0).is_err());
    }

    #[test]
    fn tensor_identity() {
        let i2 = CMat::identity(2, 2);
        let t = tensor(&i2, &i2);
        assert!(fro_norm(&(&t - CMat::identity(4, 4))) < 1e-15);
    }

    #[test]
    fn orthogonality_predicates() {
        let t = tol();
        let zero = DensityOperator::from_probabilities(&[1.0, 0.0], &t).unwrap();
        let one = DensityOperator::from_probabilities(&[0.0, 1.0], &t).unwrap();
        let plus = DensityOperator::pure(&[c(1.0, 0.0), c(1.0, 0.0)], &t).unwrap();
        assert!(is_orthogonal(&zero, &one, &t));
        // overlap |⟨0|+⟩|² = 1/2, so not orthogonal
        assert!(!is_orthogonal(&zero, &plus, &t));
    }

    #[test]
    fn faer_backend_agrees_with_small_path() {
        // build a 64-dim Hermitian matrix (faer path) and compare its
        // reconstruction residual against the input
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let d = 64;
        let raw = CMat::from_fn(d, d, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let h = HermitianMatrix::from_exact(raw);
        let s = spectral_decompose(&h);
        assert!(fro_norm(&(s.reconstruct() - h.matrix())) < 1e-10 * fro_norm(h.matrix()).max(1.0));
        // orthonormality
        let g = s.vectors.adjoint() * &s.vectors;
        assert!(fro_norm(&(&g - CMat::identity(d, d))) < 1e-10);
    }
}
