//! Group-invariant embedding of typed point clouds.
//!
//! The feature map collects the pairwise distances of each unordered
//! interaction type (the unordered pair of atom types), sorts each block
//! ascending, and concatenates the blocks in canonical order. Invariance to
//! rotations and type-preserving permutations holds by construction; the map
//! is piecewise smooth with non-differentiability only where two distances
//! within a block coincide or two atoms collide. The cotangent pullback
//! freezes the forward sort order, which makes the gradient well defined at
//! ties.

use crate::error::{Error, Result};
use crate::geometry::{AtomType, Conformation};

/// Pair distance below which the distance gradient is treated as singular.
pub const COINCIDENCE_THRESHOLD: f64 = 1e-9;

/// Within-block distance gap below which a sort tie is flagged.
pub const TIE_THRESHOLD: f64 = 1e-12;

/// One contiguous block of the embedding vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddingBlock {
    /// Unordered type pair, stored as (min, max).
    pub pair_type: (AtomType, AtomType),
    pub offset: usize,
    pub len: usize,
}

/// Sorted type-conditioned pairwise distances of a cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// Block-concatenated sorted distances, ascending within each block.
    pub values: Vec<f64>,
    /// Blocks in canonical order (lexicographic on the sorted type pair).
    pub blocks: Vec<EmbeddingBlock>,
}

impl Embedding {
    /// Slice of this embedding belonging to one interaction type.
    pub fn block(&self, pair_type: (AtomType, AtomType)) -> Option<&[f64]> {
        let key = (pair_type.0.min(pair_type.1), pair_type.0.max(pair_type.1));
        self.blocks
            .iter()
            .find(|b| b.pair_type == key)
            .map(|b| &self.values[b.offset..b.offset + b.len])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Coordinate gradient produced by [`embed_pullback`].
#[derive(Debug, Clone)]
pub struct PullbackGradient {
    pub gradient: Vec<[f64; 3]>,
    /// True when the frozen sort order sat on an exact within-block tie.
    pub non_smooth_tie: bool,
}

struct SortedPairs {
    values: Vec<f64>,
    blocks: Vec<EmbeddingBlock>,
    /// Atom pair occupying each sorted slot.
    pairs: Vec<(usize, usize)>,
}

fn sorted_pairs(conf: &Conformation) -> Result<SortedPairs> {
    if conf.coords.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("coordinates passed to embed".into()));
    }
    let n = conf.n_atoms();
    let mut by_type: std::collections::BTreeMap<(AtomType, AtomType), Vec<(f64, (usize, usize))>> =
        Default::default();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist(&conf.coords[i], &conf.coords[j]);
            let key = (
                conf.types[i].min(conf.types[j]),
                conf.types[i].max(conf.types[j]),
            );
            by_type.entry(key).or_default().push((d, (i, j)));
        }
    }
    let mut values = Vec::with_capacity(n * (n - 1) / 2);
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    let mut blocks = Vec::with_capacity(by_type.len());
    for (pair_type, mut entries) in by_type {
        // stable: exact ties keep (i, j) insertion order
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        blocks.push(EmbeddingBlock {
            pair_type,
            offset: values.len(),
            len: entries.len(),
        });
        for (d, pair) in entries {
            values.push(d);
            pairs.push(pair);
        }
    }
    Ok(SortedPairs { values, blocks, pairs })
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Compute the invariant embedding of a cloud. A single atom yields the
/// empty embedding.
pub fn embed(conf: &Conformation) -> Result<Embedding> {
    let sp = sorted_pairs(conf)?;
    Ok(Embedding {
        values: sp.values,
        blocks: sp.blocks,
    })
}

/// Pull a cotangent on the embedding back to a coordinate gradient.
///
/// The sort permutation is recomputed here and frozen, so repeated calls on
/// the same cloud see the same pair order as [`embed`]. Errors when two
/// atoms are closer than [`COINCIDENCE_THRESHOLD`]; exact within-block
/// distance ties are flagged, not rejected.
pub fn embed_pullback(conf: &Conformation, cotangent: &[f64]) -> Result<PullbackGradient> {
    let sp = sorted_pairs(conf)?;
    if cotangent.len() != sp.values.len() {
        return Err(Error::Shape(format!(
            "cotangent length {} vs embedding length {}",
            cotangent.len(),
            sp.values.len()
        )));
    }
    let mut non_smooth_tie = false;
    for block in &sp.blocks {
        for k in block.offset + 1..block.offset + block.len {
            if (sp.values[k] - sp.values[k - 1]).abs() < TIE_THRESHOLD {
                non_smooth_tie = true;
            }
        }
    }
    let mut gradient = vec![[0.0; 3]; conf.n_atoms()];
    for (slot, &(i, j)) in sp.pairs.iter().enumerate() {
        let d = sp.values[slot];
        if d <= COINCIDENCE_THRESHOLD {
            return Err(Error::SingularGradient { i, j, dist: d });
        }
        let c = cotangent[slot];
        for k in 0..3 {
            let u = (conf.coords[i][k] - conf.coords[j][k]) / d;
            gradient[i][k] += c * u;
            gradient[j][k] -= c * u;
        }
    }
    Ok(PullbackGradient {
        gradient,
        non_smooth_tie,
    })
}
