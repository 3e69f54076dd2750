//! JSON file formats for domains, moments and moment grids.
//!
//! Complex numbers are `[re, im]` pairs throughout.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{validate_domain_with, PolyDomain, Univalence};
use crate::error::{Error, Result};
use crate::moments::{ComplexMomentGrid, MomentVector};

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn unpair(p: &[f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

/// `{"N": 2, "a": [[1, 0], [0.2, 0], [0.05, 0.01]]}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainFile {
    #[serde(rename = "N")]
    pub n: usize,
    pub a: Vec<[f64; 2]>,
}

impl DomainFile {
    pub fn from_domain(d: &PolyDomain) -> Self {
        Self { n: d.order(), a: d.coeffs().iter().map(|&z| pair(z)).collect() }
    }

    pub fn to_domain(&self, mode: Univalence) -> Result<PolyDomain> {
        if self.a.len() != self.n + 1 {
            return Err(Error::Schema(format!("N = {} but a has {} entries", self.n, self.a.len())));
        }
        if self.a[0][1] != 0.0 {
            return Err(Error::Normalization(format!("a[0] = {:?} must be real", self.a[0])));
        }
        let a: Vec<Complex64> = self.a.iter().map(unpair).collect();
        validate_domain_with(&a, mode)
    }
}

pub fn parse_domain(json: &str) -> Result<PolyDomain> {
    let f: DomainFile = serde_json::from_str(json).map_err(|e| Error::Schema(e.to_string()))?;
    f.to_domain(Univalence::Full)
}

pub fn domain_to_json(d: &PolyDomain) -> String {
    serde_json::to_string(&DomainFile::from_domain(d)).expect("plain data")
}

/// `{"M0": 4, "M": [[re, im], ...], "Mneg": [...]}`. `M` starts at `M₁`,
/// `Mneg` at `M₋₁`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentFile {
    #[serde(rename = "M0")]
    pub m0: f64,
    #[serde(rename = "M")]
    pub m: Vec<[f64; 2]>,
    #[serde(rename = "Mneg", default, skip_serializing_if = "Option::is_none")]
    pub neg: Option<Vec<[f64; 2]>>,
}

impl MomentFile {
    pub fn from_moments(mv: &MomentVector) -> Self {
        let neg = mv.neg.as_ref().map(|v| v.iter().map(|&z| pair(z)).collect());
        Self { m0: mv.m0, m: mv.m.iter().map(|&z| pair(z)).collect(), neg }
    }

    pub fn to_moments(&self) -> MomentVector {
        let mv = MomentVector::new(self.m0, self.m.iter().map(unpair).collect());
        match &self.neg {
            Some(neg) => mv.with_negative(neg.iter().map(unpair).collect()),
            None => mv,
        }
    }
}

pub fn parse_moments(json: &str) -> Result<MomentVector> {
    let f: MomentFile = serde_json::from_str(json).map_err(|e| Error::Schema(e.to_string()))?;
    if !f.m0.is_finite() || f.m.iter().chain(f.neg.iter().flatten()).any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(f.to_moments())
}

/// `{"K": 1, "Mkj": [[M00, M01], [M10, M11]]}` with `Mkj[k][j]` the
/// coefficient of `z^k w̄^j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "Mkj")]
    pub mkj: Vec<Vec<[f64; 2]>>,
}

impl GridFile {
    pub fn from_grid(g: &ComplexMomentGrid) -> Self {
        let k = g.order();
        let mkj = (0..=k).map(|i| (0..=k).map(|j| pair(g.get(i, j))).collect()).collect();
        Self { k, mkj }
    }

    pub fn to_grid(&self) -> Result<ComplexMomentGrid> {
        if self.mkj.len() != self.k + 1 || self.mkj.iter().any(|row| row.len() != self.k + 1) {
            return Err(Error::Schema(format!("Mkj must be {0}×{0} for K = {1}", self.k + 1, self.k)));
        }
        let grid: Vec<Vec<Complex64>> = self.mkj.iter().map(|row| row.iter().map(unpair).collect()).collect();
        ComplexMomentGrid::from_grid(&grid)
    }
}

pub fn parse_grid(json: &str) -> Result<ComplexMomentGrid> {
    let f: GridFile = serde_json::from_str(json).map_err(|e| Error::Schema(e.to_string()))?;
    f.to_grid()
}
