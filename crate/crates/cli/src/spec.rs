//! Channel-spec file format: JSON with explicit [re, im] entries, row-major.

use anyhow::{bail, Context, Result};
use cqexp_core::{CMat, CQChannel, DensityOperator, Tolerances, C64};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// One complex matrix as nested arrays of [re, im] pairs, row-major.
pub type MatrixLiteral = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetricBlock {
    /// generating state W₁
    pub w1: MatrixLiteral,
    /// unitary V with V^m = identity
    pub v: MatrixLiteral,
    pub m: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelSpec {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub dim: usize,
    pub inputs: usize,
    #[serde(default)]
    pub matrices: Vec<MatrixLiteral>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetric: Option<SymmetricBlock>,
}

fn to_cmat(lit: &MatrixLiteral, dim: usize, what: &str) -> Result<CMat> {
    if lit.len() != dim || lit.iter().any(|row| row.len() != dim) {
        bail!("{what}: expected a {dim}x{dim} matrix of [re, im] pairs");
    }
    Ok(DMatrix::from_fn(dim, dim, |r, c| {
        C64::new(lit[r][c][0], lit[r][c][1])
    }))
}

fn to_literal(m: &CMat) -> MatrixLiteral {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

impl ChannelSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: ChannelSpec = serde_json::from_str(text).context("parsing channel spec")?;
        if spec.dim == 0 || spec.inputs == 0 {
            bail!("dim and inputs must be positive");
        }
        if spec.symmetric.is_none() && spec.matrices.len() != spec.inputs {
            bail!(
                "expected {} matrices, found {}",
                spec.inputs,
                spec.matrices.len()
            );
        }
        Ok(spec)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn to_channel(&self, tol: &Tolerances) -> Result<CQChannel> {
        if let Some(sym) = &self.symmetric {
            let w1 = DensityOperator::new(to_cmat(&sym.w1, self.dim, "symmetric.w1")?, tol)?;
            let v = to_cmat(&sym.v, self.dim, "symmetric.v")?;
            if sym.m != self.inputs {
                bail!("symmetric.m = {} but inputs = {}", sym.m, self.inputs);
            }
            return Ok(cqexp_core::bounds::build_symmetric(&w1, &v, sym.m, tol)?);
        }
        let states = self
            .matrices
            .iter()
            .enumerate()
            .map(|(x, lit)| {
                let m = to_cmat(lit, self.dim, &format!("matrices[{x}]"))?;
                Ok(DensityOperator::new(m, tol)?)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CQChannel::new(states)?)
    }

    /// Lossless round-trip of a channel back into spec form.
    pub fn from_channel(channel: &CQChannel, name: &str) -> Self {
        ChannelSpec {
            name: name.into(),
            description: String::new(),
            dim: channel.dim(),
            inputs: channel.size(),
            matrices: channel
                .states()
                .iter()
                .map(|s| to_literal(s.matrix()))
                .collect(),
            symmetric: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }
}
