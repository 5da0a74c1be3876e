//! Central tolerance configuration.
//!
//! All numerical cutoffs used across the library live in one record so that
//! every module agrees on what "zero" means.

/// Numerical tolerances shared by all modules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative rank cutoff: eigenvalues below `rank_rel * max|eigenvalue|`
    /// are treated as zero when deciding support membership.
    pub rank_rel: f64,
    /// Eigenvalues in `(-psd, 0)` are clamped to zero; anything more negative
    /// fails the PSD check.
    pub psd: f64,
    /// Allowed deviation of a density operator's trace from 1.
    pub trace: f64,
    /// Allowed deviation from Hermitian symmetry (max element of `A - A†`).
    pub hermitian: f64,
    /// Orthogonality / orthonormality cutoff.
    pub orthogonality: f64,
    /// Spectral reconstruction residual allowance.
    pub reconstruction: f64,
    /// Trace-norm residual target for fixed-point iterations.
    pub fixed_point: f64,
    /// First-order (stationarity) residual target for inner minimizations.
    pub first_order: f64,
    /// Acceptable gap between min-max and max-min in the saddle solver.
    pub minimax_gap: f64,
    /// Residual target for scalar bisections.
    pub bisection: f64,
    /// Allowed disagreement between successive delta-ladder extrapolants.
    pub extrapolation: f64,
    /// Slack permitted when checking the trace-inequality ordering of the
    /// two Renyi families (small negative gaps are numerical noise).
    pub gt_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rank_rel: 1e-12,
            psd: 1e-10,
            trace: 1e-10,
            hermitian: 1e-10,
            orthogonality: 1e-10,
            reconstruction: 1e-10,
            fixed_point: 1e-10,
            first_order: 1e-7,
            minimax_gap: 1e-6,
            bisection: 1e-10,
            extrapolation: 1e-6,
            gt_slack: 1e-9,
        }
    }
}

impl Tolerances {
    /// Absolute rank cutoff for a spectrum with largest eigenvalue `lambda_max`.
    pub fn rank_cutoff(&self, lambda_max: f64) -> f64 {
        self.rank_rel * lambda_max.abs().max(1e-300)
    }
}
