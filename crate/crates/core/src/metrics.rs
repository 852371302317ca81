//! Structure-comparison metrics: Kabsch-aligned RMSD, distance-matrix MAE,
//! and coverage / average-minimum-RMSD in recall and precision directions.

use crate::align::kabsch_rotation;
use crate::error::{Error, Result};
use crate::geometry::{center, rotate_row, Conformation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    /// RMSD threshold for a generated structure to count as a match.
    pub delta: f64,
    /// How many samples to draw per reference conformer (K = multiplier * L).
    pub samples_per_class_multiplier: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            delta: 0.5,
            samples_per_class_multiplier: 2,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::InvalidConfig("delta must be > 0".into()));
        }
        if self.samples_per_class_multiplier == 0 {
            return Err(Error::InvalidConfig("samples_per_class_multiplier must be >= 1".into()));
        }
        Ok(())
    }
}

/// Root-mean-square deviation after optimal rotation, with the atom
/// correspondence fixed by index (no permutation search). Both inputs are
/// centered internally.
pub fn rmsd_aligned(x1: &Conformation, x2: &Conformation) -> Result<f64> {
    if x1.n_atoms() != x2.n_atoms() {
        return Err(Error::Shape(format!(
            "{} atoms vs {} atoms",
            x1.n_atoms(),
            x2.n_atoms()
        )));
    }
    let a = center(x1)?;
    let b = center(x2)?;
    let rot = kabsch_rotation(&a, &b)?;
    let n = a.n_atoms() as f64;
    let mut sq = 0.0;
    for (ar, br) in a.coords.iter().zip(&b.coords) {
        let moved = rotate_row(&rot, br);
        for k in 0..3 {
            let d = ar[k] - moved[k];
            sq += d * d;
        }
    }
    Ok((sq / n).sqrt())
}

/// Mean absolute error between the inter-atom distance matrices, averaged
/// over ordered pairs i != j (equivalently the mean over unordered pairs).
pub fn dmae(x1: &Conformation, x2: &Conformation) -> Result<f64> {
    let n = x1.n_atoms();
    if n != x2.n_atoms() {
        return Err(Error::Shape(format!("{} atoms vs {} atoms", n, x2.n_atoms())));
    }
    if n < 2 {
        return Err(Error::InvalidInput("dmae needs at least two atoms".into()));
    }
    let dist = |c: &Conformation, i: usize, j: usize| {
        let a = &c.coords[i];
        let b = &c.coords[j];
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    };
    let mut acc = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            acc += 2.0 * (dist(x1, i, j) - dist(x2, i, j)).abs();
        }
    }
    Ok(acc / (n * (n - 1)) as f64)
}

/// Coverage and average-minimum-RMSD in both directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageAmr {
    /// Fraction of references matched by some generated structure.
    pub cov_r: f64,
    /// Mean over references of the minimum RMSD to the generated set.
    pub amr_r: f64,
    /// Fraction of generated structures matching some reference.
    pub cov_p: f64,
    /// Mean over generated structures of the minimum RMSD to a reference.
    pub amr_p: f64,
}

pub fn coverage_amr(
    generated: &[Conformation],
    references: &[Conformation],
    config: &EvalConfig,
) -> Result<CoverageAmr> {
    config.validate()?;
    if generated.is_empty() || references.is_empty() {
        return Err(Error::InvalidInput("coverage needs non-empty generated and reference sets".into()));
    }
    let k = generated.len();
    let l = references.len();
    let mut table = vec![vec![0.0; l]; k];
    for (i, g) in generated.iter().enumerate() {
        for (j, r) in references.iter().enumerate() {
            table[i][j] = rmsd_aligned(g, r)?;
        }
    }
    let mut cov_r = 0usize;
    let mut amr_r = 0.0;
    for j in 0..l {
        let min = (0..k).map(|i| table[i][j]).fold(f64::INFINITY, f64::min);
        if min < config.delta {
            cov_r += 1;
        }
        amr_r += min;
    }
    let mut cov_p = 0usize;
    let mut amr_p = 0.0;
    for row in &table {
        let min = row.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < config.delta {
            cov_p += 1;
        }
        amr_p += min;
    }
    Ok(CoverageAmr {
        cov_r: cov_r as f64 / l as f64,
        amr_r: amr_r / l as f64,
        cov_p: cov_p as f64 / k as f64,
        amr_p: amr_p / k as f64,
    })
}
