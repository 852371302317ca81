//! Optimal alignment of typed point clouds.
//!
//! Finds the group element (rotation + type-preserving permutation) that
//! minimizes the Frobenius distance between two centered clouds. Four
//! strategies: rotation-only Kabsch, Hungarian assignment per type block,
//! alternating refinement of both, and exact brute-force enumeration over
//! all type-preserving permutations (the oracle).

use crate::error::{Error, Result};
use crate::geometry::{apply_to_rows, center, rotate_row, type_classes, Conformation, GroupElement};
use nalgebra::Matrix3;

/// Largest type class the brute-force oracle will enumerate (8! Kabsch solves).
pub const BRUTE_FORCE_CLASS_LIMIT: usize = 8;

/// Absolute residual improvement below which iterative refinement stops.
pub const ITERATIVE_CONVERGENCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignVariant {
    RotationOnly,
    Iterative,
    BruteForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitOrder {
    RotationFirst,
    PermutationFirst,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignStrategy {
    pub variant: AlignVariant,
    /// Iterative variant only.
    pub max_iterations: usize,
    /// Iterative variant only.
    pub init_order: InitOrder,
}

impl AlignStrategy {
    pub fn rotation_only() -> Self {
        Self {
            variant: AlignVariant::RotationOnly,
            max_iterations: 50,
            init_order: InitOrder::RotationFirst,
        }
    }

    pub fn iterative() -> Self {
        Self {
            variant: AlignVariant::Iterative,
            max_iterations: 50,
            init_order: InitOrder::RotationFirst,
        }
    }

    pub fn brute_force() -> Self {
        Self {
            variant: AlignVariant::BruteForce,
            max_iterations: 50,
            init_order: InitOrder::RotationFirst,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Outcome of an alignment: the minimizing group element and its residual.
#[derive(Debug, Clone)]
pub struct AlignmentResult {
    pub group_element: GroupElement,
    /// `||x - g . y||_F` on the centered pair.
    pub residual: f64,
    /// Refinement rounds performed; 0 for closed-form strategies.
    pub iterations: usize,
}

fn require_same_types(x: &Conformation, y: &Conformation) -> Result<()> {
    if x.n_atoms() != y.n_atoms() {
        return Err(Error::Shape(format!(
            "{} atoms vs {} atoms",
            x.n_atoms(),
            y.n_atoms()
        )));
    }
    if x.types != y.types {
        return Err(Error::TypeMismatch(format!(
            "{:?} vs {:?}",
            x.types, y.types
        )));
    }
    Ok(())
}

/// Optimal proper rotation minimizing `||x - R y||_F` with the atom
/// correspondence fixed as given. Both inputs are centered internally.
pub fn kabsch_rotation(x: &Conformation, y: &Conformation) -> Result<Matrix3<f64>> {
    require_same_types(x, y)?;
    let xc = center(x)?;
    let yc = center(y)?;
    Ok(kabsch_rows(&xc.coords, &yc.coords))
}

/// Kabsch on pre-centered coordinate rows.
fn kabsch_rows(x: &[[f64; 3]], y: &[[f64; 3]]) -> Matrix3<f64> {
    // maximize tr(R H) with H = sum_i y_i x_i^T
    let mut h: Matrix3<f64> = Matrix3::zeros();
    for (xr, yr) in x.iter().zip(y) {
        for a in 0..3 {
            for b in 0..3 {
                h[(a, b)] += yr[a] * xr[b];
            }
        }
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("3x3 svd u");
    let v_t = svd.v_t.expect("3x3 svd v_t");
    let v = v_t.transpose();
    let d: f64 = (v.determinant() * u.determinant()).signum();
    // sign fix on the smallest singular direction keeps det(R) = +1
    v * Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0, d)) * u.transpose()
}

fn residual_of(x: &[[f64; 3]], y: &[[f64; 3]], rot: &Matrix3<f64>, perm: &[usize]) -> f64 {
    let mut s = 0.0;
    for (i, &p) in perm.iter().enumerate() {
        let r = rotate_row(rot, &y[p]);
        for k in 0..3 {
            let d = x[i][k] - r[k];
            s += d * d;
        }
    }
    s.sqrt()
}

/// Minimum-cost assignment of a square cost matrix.
///
/// Returns the lexicographically smallest permutation among minimal-cost
/// assignments (row i is assigned column `perm[i]`) and the exact sum of
/// the selected entries.
pub fn hungarian_assignment(cost: &[Vec<f64>]) -> Result<(Vec<usize>, f64)> {
    let n = cost.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty cost matrix".into()));
    }
    for row in cost {
        if row.len() != n {
            return Err(Error::InvalidInput(format!(
                "cost matrix is not square ({} columns in a {}-row matrix)",
                row.len(),
                n
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cost matrix entry".into()));
        }
    }
    let (_, best) = lap_min(cost);
    let tol = 1e-11 * (1.0 + best.abs());

    // Lexicographic refinement: fix rows in order to the smallest column
    // that still admits a completion of optimal total cost.
    let mut chosen = vec![usize::MAX; n];
    let mut used = vec![false; n];
    let mut prefix = 0.0;
    for i in 0..n {
        let mut picked = false;
        for j in 0..n {
            if used[j] {
                continue;
            }
            let completion = if i + 1 == n {
                0.0
            } else {
                let free: Vec<usize> = (0..n).filter(|&c| !used[c] && c != j).collect();
                let sub: Vec<Vec<f64>> = (i + 1..n)
                    .map(|r| free.iter().map(|&c| cost[r][c]).collect())
                    .collect();
                lap_min(&sub).1
            };
            if prefix + cost[i][j] + completion <= best + tol {
                chosen[i] = j;
                used[j] = true;
                prefix += cost[i][j];
                picked = true;
                break;
            }
        }
        debug_assert!(picked, "no feasible column for row {i}");
        if !picked {
            // fall back to any optimal assignment
            return Ok(lap_exact(cost));
        }
    }
    let total = chosen.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Ok((chosen, total))
}

fn lap_exact(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let (perm, _) = lap_min(cost);
    let total = perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    (perm, total)
}

/// O(n^3) shortest-augmenting-path assignment with potentials.
fn lap_min(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    if n == 0 {
        return (vec![], 0.0);
    }
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1]; // column j -> row (1-based, 0 = free)
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[matched_row[j] - 1] = j - 1;
    }
    let total = perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    (perm, total)
}

/// Type-preserving permutation matching `x` against already-rotated target
/// rows, Hungarian-optimal within each type block.
pub fn typewise_assignment(x: &Conformation, y_rotated: &[[f64; 3]]) -> Result<Vec<usize>> {
    if y_rotated.len() != x.n_atoms() {
        return Err(Error::TypeMismatch(format!(
            "{} target rows vs {} atoms",
            y_rotated.len(),
            x.n_atoms()
        )));
    }
    let mut perm = vec![0usize; x.n_atoms()];
    for class in type_classes(&x.types).values() {
        if class.len() == 1 {
            perm[class[0]] = class[0];
            continue;
        }
        let cost: Vec<Vec<f64>> = class
            .iter()
            .map(|&i| {
                class
                    .iter()
                    .map(|&j| {
                        let dx = x.coords[i][0] - y_rotated[j][0];
                        let dy = x.coords[i][1] - y_rotated[j][1];
                        let dz = x.coords[i][2] - y_rotated[j][2];
                        dx * dx + dy * dy + dz * dz
                    })
                    .collect()
            })
            .collect();
        let (assignment, _) = hungarian_assignment(&cost)?;
        for (a, &i) in class.iter().enumerate() {
            perm[i] = class[assignment[a]];
        }
    }
    Ok(perm)
}

/// Compute the optimal group transformation between two clouds.
///
/// Inputs must share the same atom count and type sequence; both are
/// centered internally before optimization.
pub fn align(x: &Conformation, y: &Conformation, strategy: &AlignStrategy) -> Result<AlignmentResult> {
    strategy.validate()?;
    require_same_types(x, y)?;
    let xc = center(x)?;
    let yc = center(y)?;
    match strategy.variant {
        AlignVariant::RotationOnly => {
            let rot = kabsch_rows(&xc.coords, &yc.coords);
            let perm: Vec<usize> = (0..x.n_atoms()).collect();
            let residual = residual_of(&xc.coords, &yc.coords, &rot, &perm);
            Ok(AlignmentResult {
                group_element: GroupElement::new(rot, perm)?,
                residual,
                iterations: 0,
            })
        }
        AlignVariant::Iterative => align_iterative(&xc, &yc, strategy),
        AlignVariant::BruteForce => align_brute_force(&xc, &yc),
    }
}

fn permute_rows(rows: &[[f64; 3]], perm: &[usize]) -> Vec<[f64; 3]> {
    perm.iter().map(|&p| rows[p]).collect()
}

fn align_iterative(xc: &Conformation, yc: &Conformation, strategy: &AlignStrategy) -> Result<AlignmentResult> {
    let n = xc.n_atoms();
    let identity: Vec<usize> = (0..n).collect();
    let (mut rot, mut perm) = match strategy.init_order {
        InitOrder::RotationFirst => (kabsch_rows(&xc.coords, &yc.coords), identity),
        InitOrder::PermutationFirst => {
            let p = typewise_assignment(xc, &yc.coords)?;
            (Matrix3::identity(), p)
        }
    };
    let mut residual = residual_of(&xc.coords, &yc.coords, &rot, &perm);
    let mut iterations = 0usize;
    while iterations < strategy.max_iterations {
        let (new_rot, new_perm) = match strategy.init_order {
            InitOrder::RotationFirst => {
                let rotated = rotate_all(&yc.coords, &rot);
                let p = typewise_assignment(xc, &rotated)?;
                let r = kabsch_rows(&xc.coords, &permute_rows(&yc.coords, &p));
                (r, p)
            }
            InitOrder::PermutationFirst => {
                let r = kabsch_rows(&xc.coords, &permute_rows(&yc.coords, &perm));
                let rotated = rotate_all(&yc.coords, &r);
                let p = typewise_assignment(xc, &rotated)?;
                (r, p)
            }
        };
        let new_residual = residual_of(&xc.coords, &yc.coords, &new_rot, &new_perm);
        iterations += 1;
        let improvement = residual - new_residual;
        rot = new_rot;
        perm = new_perm;
        residual = new_residual;
        if improvement < ITERATIVE_CONVERGENCE {
            break;
        }
    }
    Ok(AlignmentResult {
        group_element: GroupElement::new(rot, perm)?,
        residual,
        iterations,
    })
}

fn rotate_all(rows: &[[f64; 3]], rot: &Matrix3<f64>) -> Vec<[f64; 3]> {
    rows.iter().map(|r| rotate_row(rot, r)).collect()
}

fn align_brute_force(xc: &Conformation, yc: &Conformation) -> Result<AlignmentResult> {
    let classes: Vec<Vec<usize>> = type_classes(&xc.types).into_values().collect();
    for class in &classes {
        if class.len() > BRUTE_FORCE_CLASS_LIMIT {
            return Err(Error::ComplexityGuard {
                size: class.len(),
                limit: BRUTE_FORCE_CLASS_LIMIT,
            });
        }
    }
    // all permutations of each class, lexicographic within the class
    let class_perms: Vec<Vec<Vec<usize>>> = classes.iter().map(|c| permutations(c)).collect();
    let n = xc.n_atoms();
    let mut best: Option<(f64, Matrix3<f64>, Vec<usize>)> = None;
    let mut odometer = vec![0usize; class_perms.len()];
    loop {
        let mut perm = vec![0usize; n];
        for (class, (choices, &pick)) in classes.iter().zip(class_perms.iter().zip(&odometer)) {
            for (slot, &src) in class.iter().zip(&choices[pick]) {
                perm[*slot] = src;
            }
        }
        let permuted = permute_rows(&yc.coords, &perm);
        let rot = kabsch_rows(&xc.coords, &permuted);
        let residual = residual_of(&xc.coords, &yc.coords, &rot, &perm);
        if best.as_ref().map_or(true, |(r, _, _)| residual < *r) {
            best = Some((residual, rot, perm));
        }
        // advance odometer
        let mut k = 0;
        loop {
            if k == odometer.len() {
                let (residual, rot, perm) = best.unwrap();
                return Ok(AlignmentResult {
                    group_element: GroupElement::new(rot, perm)?,
                    residual,
                    iterations: 0,
                });
            }
            odometer[k] += 1;
            if odometer[k] < class_perms[k].len() {
                break;
            }
            odometer[k] = 0;
            k += 1;
        }
    }
}

/// All permutations of `items`, in lexicographic order.
fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() == 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (k, &head) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(k);
        for tail in permutations(&rest) {
            let mut p = Vec::with_capacity(items.len());
            p.push(head);
            p.extend(tail);
            out.push(p);
        }
    }
    out
}

/// Optimally aligned copies of each target: element j is
/// `g*(x, y_j) . y_j`, centered.
pub fn aligned_targets(
    x: &Conformation,
    ys: &[Conformation],
    strategy: &AlignStrategy,
) -> Result<Vec<Vec<[f64; 3]>>> {
    ys.iter()
        .map(|y| {
            let res = align(x, y, strategy)?;
            let yc = center(y)?;
            let rows = apply_to_rows(&res.group_element, &yc.coords);
            // rotation + permutation of a centered cloud stays centered
            Ok(rows)
        })
        .collect()
}
