//! Typed point clouds and the rotation/permutation group acting on them.
//!
//! A cloud is acted on by pairs g = (R, pi) of a proper rotation and a
//! type-preserving atom permutation, with `(g . x)_i = R x_{pi(i)}`.
//! Translations are removed by mean-centering rather than modelled as
//! group elements.

use crate::error::{Error, Result};
use crate::rng::RandomSource;
use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

/// Small non-negative integer atom-type code.
pub type AtomType = u32;

/// Orthogonality / determinant tolerance for rotation validation.
pub const ROTATION_TOL: f64 = 1e-10;

/// A typed 3D point cloud with a conditioning class id.
#[derive(Debug, Clone, PartialEq)]
pub struct Conformation {
    /// Atom coordinates, one row per atom.
    pub coords: Vec<[f64; 3]>,
    /// Per-atom type codes, same length as `coords`.
    pub types: Vec<AtomType>,
    /// Opaque identifier of the conditioning class.
    pub class_id: String,
}

impl Conformation {
    pub fn new(coords: Vec<[f64; 3]>, types: Vec<AtomType>, class_id: impl Into<String>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidInput("conformation needs at least one atom".into()));
        }
        if coords.len() != types.len() {
            return Err(Error::Shape(format!(
                "{} coordinate rows vs {} types",
                coords.len(),
                types.len()
            )));
        }
        if coords.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("conformation coordinates".into()));
        }
        Ok(Self {
            coords,
            types,
            class_id: class_id.into(),
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.coords.len()
    }

    /// Row-major flattening to a 3N vector.
    pub fn flatten(&self) -> Vec<f64> {
        self.coords.iter().flatten().copied().collect()
    }

    /// Inverse of [`Conformation::flatten`].
    pub fn from_flat(flat: &[f64], types: &[AtomType], class_id: impl Into<String>) -> Result<Self> {
        if flat.len() != 3 * types.len() {
            return Err(Error::Shape(format!(
                "flat length {} vs 3 * {} atoms",
                flat.len(),
                types.len()
            )));
        }
        let coords = flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Conformation::new(coords, types.to_vec(), class_id)
    }

    /// Root-mean-square atom norm; the dimensionless "scale" used by
    /// tolerance statements.
    pub fn rms_norm(&self) -> f64 {
        let sq: f64 = self.coords.iter().map(|r| r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sum();
        (sq / self.n_atoms() as f64).sqrt()
    }
}

/// A proper rotation together with a type-preserving permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    pub rotation: Matrix3<f64>,
    /// Index map; the action reads `output row i = rotation * input row permutation[i]`.
    pub permutation: Vec<usize>,
}

impl GroupElement {
    /// Validates the rotation (orthogonal, det +1) and that `permutation`
    /// is a bijection on 0..N-1. Type preservation is checked against a
    /// concrete conformation in [`apply_group`].
    pub fn new(rotation: Matrix3<f64>, permutation: Vec<usize>) -> Result<Self> {
        let defect = (rotation.transpose() * rotation - Matrix3::identity()).norm();
        if defect >= ROTATION_TOL {
            return Err(Error::InvalidGroup(format!(
                "rotation not orthogonal (||R^T R - I|| = {defect:.3e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() >= ROTATION_TOL {
            return Err(Error::InvalidGroup(format!("rotation determinant {det} != 1")));
        }
        let n = permutation.len();
        let mut seen = vec![false; n];
        for &p in &permutation {
            if p >= n || seen[p] {
                return Err(Error::InvalidGroup("permutation is not a bijection".into()));
            }
            seen[p] = true;
        }
        Ok(Self { rotation, permutation })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rotation: Matrix3::identity(),
            permutation: (0..n).collect(),
        }
    }

    /// Validated construction from a row-major 3x3 array.
    pub fn from_rows(rotation: [[f64; 3]; 3], permutation: Vec<usize>) -> Result<Self> {
        let r = rotation;
        let rot = Matrix3::new(
            r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
        );
        Self::new(rot, permutation)
    }

    /// Rotation matrix as a row-major 3x3 array.
    pub fn rotation_rows(&self) -> [[f64; 3]; 3] {
        let r = &self.rotation;
        [
            [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
            [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
            [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
        ]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.permutation.len()];
        for (i, &p) in self.permutation.iter().enumerate() {
            inv[p] = i;
        }
        Self {
            rotation: self.rotation.transpose(),
            permutation: inv,
        }
    }

    /// Composition under the action: `compose(g, h) . x == g . (h . x)`.
    pub fn compose(&self, other: &GroupElement) -> Self {
        let perm = self
            .permutation
            .iter()
            .map(|&i| other.permutation[i])
            .collect();
        Self {
            rotation: self.rotation * other.rotation,
            permutation: perm,
        }
    }

    /// True when the permutation maps every atom to one of the same type.
    pub fn preserves_types(&self, types: &[AtomType]) -> bool {
        self.permutation.len() == types.len()
            && self
                .permutation
                .iter()
                .enumerate()
                .all(|(i, &p)| types[p] == types[i])
    }
}

/// Subtract the column means so the cloud is centered at the origin.
///
/// Repeats the subtraction until the recomputed means vanish exactly, so
/// the result is a bitwise fixed point of `center` (at most a few passes;
/// the residual after one pass is already at rounding level).
pub fn center(conf: &Conformation) -> Result<Conformation> {
    if conf.coords.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("coordinates passed to center".into()));
    }
    let n = conf.n_atoms() as f64;
    let mut coords = conf.coords.clone();
    for _ in 0..4 {
        let mut mean = [0.0; 3];
        for row in &coords {
            for a in 0..3 {
                mean[a] += row[a];
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        if mean == [0.0; 3] {
            break;
        }
        for row in &mut coords {
            for a in 0..3 {
                row[a] -= mean[a];
            }
        }
    }
    Ok(Conformation {
        coords,
        types: conf.types.clone(),
        class_id: conf.class_id.clone(),
    })
}

/// Apply a rotation matrix to one coordinate row.
pub fn rotate_row(rotation: &Matrix3<f64>, row: &[f64; 3]) -> [f64; 3] {
    let v = rotation * Vector3::new(row[0], row[1], row[2]);
    [v.x, v.y, v.z]
}

/// Apply `(R, pi)` to raw coordinate rows: output row i = R * rows[pi(i)].
pub fn apply_to_rows(g: &GroupElement, rows: &[[f64; 3]]) -> Vec<[f64; 3]> {
    g.permutation
        .iter()
        .map(|&p| rotate_row(&g.rotation, &rows[p]))
        .collect()
}

/// Group action on a conformation; errors when the permutation does not
/// preserve the conformation's atom types.
pub fn apply_group(g: &GroupElement, conf: &Conformation) -> Result<Conformation> {
    if g.permutation.len() != conf.n_atoms() {
        return Err(Error::InvalidGroup(format!(
            "permutation length {} vs {} atoms",
            g.permutation.len(),
            conf.n_atoms()
        )));
    }
    if !g.preserves_types(&conf.types) {
        return Err(Error::InvalidGroup("permutation does not preserve atom types".into()));
    }
    Ok(Conformation {
        coords: apply_to_rows(g, &conf.coords),
        types: conf.types.clone(),
        class_id: conf.class_id.clone(),
    })
}

/// Uniform (Haar) random proper rotation via a normalized 4D Gaussian
/// quaternion.
pub fn sample_haar_rotation(rng: &mut RandomSource) -> Matrix3<f64> {
    loop {
        let q = Quaternion::new(rng.normal(), rng.normal(), rng.normal(), rng.normal());
        if q.norm() > 1e-6 {
            return *UnitQuaternion::from_quaternion(q).to_rotation_matrix().matrix();
        }
    }
}

/// Uniform random element of the product of symmetric groups on each
/// type class; always preserves `types`.
pub fn sample_type_permutation(rng: &mut RandomSource, types: &[AtomType]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..types.len()).collect();
    for class in type_classes(types).values() {
        let mut shuffled = class.clone();
        rng.shuffle(&mut shuffled);
        for (slot, &src) in class.iter().zip(&shuffled) {
            perm[*slot] = src;
        }
    }
    perm
}

/// Uniform random full group element (Haar rotation x type permutation).
pub fn sample_group_element(rng: &mut RandomSource, types: &[AtomType]) -> GroupElement {
    GroupElement {
        rotation: sample_haar_rotation(rng),
        permutation: sample_type_permutation(rng, types),
    }
}

/// Indices of each type class, keyed and ordered by type code.
pub fn type_classes(types: &[AtomType]) -> std::collections::BTreeMap<AtomType, Vec<usize>> {
    let mut classes: std::collections::BTreeMap<AtomType, Vec<usize>> = Default::default();
    for (i, &t) in types.iter().enumerate() {
        classes.entry(t).or_default().push(i);
    }
    classes
}
