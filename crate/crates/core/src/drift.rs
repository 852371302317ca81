//! Kernel drifting fields over mini-batches.
//!
//! The drift of a point is an attractive kernel-weighted pull toward the
//! positive targets minus a repulsive push from the negative targets, with
//! Laplacian-kernel weights normalized by softmax (one-sided) or by the
//! geometric mean of the two softmax directions followed by a row
//! re-normalization (two-sided). Multi-temperature drifts normalize each
//! temperature's contribution per point before summing so low temperatures
//! cannot dominate.

use crate::align::{aligned_targets, AlignStrategy};
use crate::embedding::{embed, embed_pullback};
use crate::error::{Error, Result};
use crate::geometry::{center, Conformation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    OneSided,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftSpace {
    Cartesian,
    Aligned,
    Embedded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftConfig {
    pub temperatures: Vec<f64>,
    pub normalization: Normalization,
    pub space: DriftSpace,
    /// Used only when `space == Aligned`.
    pub align_strategy: AlignStrategy,
    /// Epsilon of the per-temperature norm division.
    pub norm_epsilon: f64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self {
            temperatures: vec![0.02, 0.05, 0.2],
            normalization: Normalization::OneSided,
            space: DriftSpace::Embedded,
            align_strategy: AlignStrategy::iterative(),
            norm_epsilon: 1e-8,
        }
    }
}

impl DriftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.temperatures.is_empty() {
            return Err(Error::InvalidConfig("temperatures must be non-empty".into()));
        }
        if self.temperatures.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::InvalidConfig("temperatures must all be > 0".into()));
        }
        if !(self.norm_epsilon > 0.0) {
            return Err(Error::InvalidConfig("norm_epsilon must be > 0".into()));
        }
        self.align_strategy.validate()
    }
}

/// Targets of a drift batch: one shared set, or one set per point (the
/// aligned space gives every point its own optimally oriented copies).
#[derive(Debug, Clone)]
pub enum TargetSet {
    Shared(Vec<Vec<f64>>),
    PerPoint(Vec<Vec<Vec<f64>>>),
}

impl TargetSet {
    fn count(&self) -> usize {
        match self {
            TargetSet::Shared(t) => t.len(),
            TargetSet::PerPoint(t) => t.first().map_or(0, |s| s.len()),
        }
    }

    fn for_point(&self, i: usize) -> &[Vec<f64>] {
        match self {
            TargetSet::Shared(t) => t,
            TargetSet::PerPoint(t) => &t[i],
        }
    }
}

/// Points and targets already mapped into the configured drift space.
#[derive(Debug, Clone)]
pub struct DriftBatch {
    pub points: Vec<Vec<f64>>,
    pub pos_targets: TargetSet,
    pub neg_targets: TargetSet,
}

impl DriftBatch {
    pub fn new(points: Vec<Vec<f64>>, pos_targets: TargetSet, neg_targets: TargetSet) -> Result<Self> {
        let batch = Self {
            points,
            pos_targets,
            neg_targets,
        };
        batch.validate()?;
        Ok(batch)
    }

    fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidInput("drift batch has no points".into()));
        }
        if self.pos_targets.count() == 0 {
            return Err(Error::InvalidInput("drift batch needs at least one positive target".into()));
        }
        let dim = self.points[0].len();
        let check = |v: &[f64]| -> Result<()> {
            if v.len() != dim {
                return Err(Error::Shape(format!("vector length {} vs batch dimension {dim}", v.len())));
            }
            Ok(())
        };
        for p in &self.points {
            check(p)?;
        }
        for set in [&self.pos_targets, &self.neg_targets] {
            match set {
                TargetSet::Shared(ts) => {
                    for t in ts {
                        check(t)?;
                    }
                }
                TargetSet::PerPoint(per) => {
                    if per.len() != self.points.len() {
                        return Err(Error::Shape(format!(
                            "{} per-point target lists vs {} points",
                            per.len(),
                            self.points.len()
                        )));
                    }
                    let m = per[0].len();
                    for ts in per {
                        if ts.len() != m {
                            return Err(Error::Shape("ragged per-point target lists".into()));
                        }
                        for t in ts {
                            check(t)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn softmax_rows(logits: &mut [Vec<f64>]) {
    for row in logits {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            z += *v;
        }
        for v in row.iter_mut() {
            *v /= z;
        }
    }
}

fn softmax_cols(logits: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let rows = logits.len();
    let cols = logits[0].len();
    let mut out = vec![vec![0.0; cols]; rows];
    for j in 0..cols {
        let m = (0..rows).map(|i| logits[i][j]).fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for i in 0..rows {
            let e = (logits[i][j] - m).exp();
            out[i][j] = e;
            z += e;
        }
        for row in out.iter_mut() {
            row[j] /= z;
        }
    }
    out
}

/// Laplacian-kernel logits `-||q - t_j|| / tau` for every (point, target).
pub fn logit_matrix(points: &[Vec<f64>], targets: &TargetSet, tau: f64) -> Vec<Vec<f64>> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| targets.for_point(i).iter().map(|t| -euclid(p, t) / tau).collect())
        .collect()
}

/// Row-stochastic weight matrix for the given normalization mode.
pub fn weight_matrix(logits: &[Vec<f64>], mode: Normalization) -> Vec<Vec<f64>> {
    match mode {
        Normalization::OneSided => {
            let mut w = logits.to_vec();
            softmax_rows(&mut w);
            w
        }
        Normalization::TwoSided => {
            let mut over_targets = logits.to_vec();
            softmax_rows(&mut over_targets);
            let over_points = softmax_cols(logits);
            let mut w: Vec<Vec<f64>> = over_targets
                .iter()
                .zip(&over_points)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x * y).sqrt()).collect())
                .collect();
            for row in &mut w {
                let z: f64 = row.iter().sum();
                for v in row.iter_mut() {
                    *v /= z;
                }
            }
            w
        }
    }
}

/// Normalized kernel weights of one query against a target set.
///
/// For the two-sided mode the full batch logit matrix and this query's row
/// index may be supplied to avoid recomputing the batch; without it the
/// query is treated as a batch of one.
pub fn kernel_weights(
    query: &[f64],
    targets: &[Vec<f64>],
    tau: f64,
    mode: Normalization,
    cross_logits: Option<(&[Vec<f64>], usize)>,
) -> Result<Vec<f64>> {
    if targets.is_empty() {
        return Err(Error::InvalidInput("kernel_weights needs at least one target".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidConfig(format!("tau must be > 0, got {tau}")));
    }
    match cross_logits {
        Some((logits, row)) => {
            if row >= logits.len() || logits[row].len() != targets.len() {
                return Err(Error::Shape("cross-logit matrix does not match query/targets".into()));
            }
            Ok(weight_matrix(logits, mode).swap_remove(row))
        }
        None => {
            let logits = vec![targets.iter().map(|t| -euclid(query, t) / tau).collect::<Vec<f64>>()];
            Ok(weight_matrix(&logits, mode).swap_remove(0))
        }
    }
}

/// Normalized kernel pull of one target set: `sum_j w_j (t_j - u)`.
fn weighted_pull(point: &[f64], targets: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; point.len()];
    for (t, &w) in targets.iter().zip(weights) {
        for (k, (tv, pv)) in t.iter().zip(point).enumerate() {
            v[k] += w * (tv - pv);
        }
    }
    v
}

/// Drift of every batch point at a single temperature: attraction toward
/// positives minus repulsion from negatives, each set normalized on its own.
pub fn single_temperature_drift(batch: &DriftBatch, tau: f64, mode: Normalization) -> Result<Vec<Vec<f64>>> {
    if !(tau > 0.0) {
        return Err(Error::InvalidConfig(format!("tau must be > 0, got {tau}")));
    }
    batch.validate()?;
    let pos_logits = logit_matrix(&batch.points, &batch.pos_targets, tau);
    let pos_w = weight_matrix(&pos_logits, mode);
    let neg_w = if batch.neg_targets.count() > 0 {
        let neg_logits = logit_matrix(&batch.points, &batch.neg_targets, tau);
        Some(weight_matrix(&neg_logits, mode))
    } else {
        None
    };
    let mut out = Vec::with_capacity(batch.points.len());
    for (i, p) in batch.points.iter().enumerate() {
        let mut v = weighted_pull(p, batch.pos_targets.for_point(i), &pos_w[i]);
        if let Some(nw) = &neg_w {
            let neg = weighted_pull(p, batch.neg_targets.for_point(i), &nw[i]);
            for (a, b) in v.iter_mut().zip(neg) {
                *a -= b;
            }
        }
        out.push(v);
    }
    Ok(out)
}

/// Combined drift over the configured temperatures. Each temperature's
/// per-point drift is divided by its own norm plus epsilon before summing.
pub fn multi_temperature_drift(batch: &DriftBatch, config: &DriftConfig) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let dim = batch.points.first().map_or(0, |p| p.len());
    let mut combined = vec![vec![0.0; dim]; batch.points.len()];
    for &tau in &config.temperatures {
        let per_tau = single_temperature_drift(batch, tau, config.normalization)?;
        for (acc, v) in combined.iter_mut().zip(per_tau) {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let scale = 1.0 / (norm + config.norm_epsilon);
            for (a, x) in acc.iter_mut().zip(v) {
                *a += x * scale;
            }
        }
    }
    Ok(combined)
}

/// Maps drift-space cotangents back to coordinate gradients.
#[derive(Debug, Clone)]
pub enum DriftBackMap {
    /// Cartesian / aligned space: the drift vector lives on the flattened
    /// coordinates themselves.
    Coordinates { n_atoms: usize },
    /// Embedded space: pull cotangents through the sorted-distance map of
    /// each source cloud.
    Embedded { sources: Vec<Conformation> },
}

impl DriftBackMap {
    pub fn cotangent_to_coords(&self, point_index: usize, cotangent: &[f64]) -> Result<Vec<[f64; 3]>> {
        match self {
            DriftBackMap::Coordinates { n_atoms } => {
                if cotangent.len() != 3 * n_atoms {
                    return Err(Error::Shape(format!(
                        "cotangent length {} vs 3 * {} atoms",
                        cotangent.len(),
                        n_atoms
                    )));
                }
                Ok(cotangent.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
            }
            DriftBackMap::Embedded { sources } => {
                let conf = sources.get(point_index).ok_or_else(|| {
                    Error::Shape(format!("point index {point_index} out of range"))
                })?;
                Ok(embed_pullback(conf, cotangent)?.gradient)
            }
        }
    }
}

/// Assemble a drift batch from conformations according to the configured
/// space. Generated points `xs` are expected centered by the caller; target
/// clouds are centered here.
pub fn build_drift_batch(
    xs: &[Conformation],
    y_plus: &[Conformation],
    y_minus: &[Conformation],
    config: &DriftConfig,
) -> Result<(DriftBatch, DriftBackMap)> {
    config.validate()?;
    if xs.is_empty() {
        return Err(Error::InvalidInput("no generated points".into()));
    }
    if y_plus.is_empty() {
        return Err(Error::InvalidInput("no positive targets".into()));
    }
    let types = &xs[0].types;
    for c in xs.iter().chain(y_plus).chain(y_minus) {
        if &c.types != types {
            return Err(Error::TypeMismatch(format!("{:?} vs {:?}", c.types, types)));
        }
    }
    match config.space {
        DriftSpace::Cartesian => {
            let points = xs.iter().map(Conformation::flatten).collect();
            let flat_centered = |cs: &[Conformation]| -> Result<Vec<Vec<f64>>> {
                cs.iter().map(|c| Ok(center(c)?.flatten())).collect()
            };
            let batch = DriftBatch::new(
                points,
                TargetSet::Shared(flat_centered(y_plus)?),
                TargetSet::Shared(flat_centered(y_minus)?),
            )?;
            Ok((batch, DriftBackMap::Coordinates { n_atoms: types.len() }))
        }
        DriftSpace::Aligned => {
            let points: Vec<Vec<f64>> = xs.iter().map(Conformation::flatten).collect();
            let per_point = |targets: &[Conformation]| -> Result<Vec<Vec<Vec<f64>>>> {
                xs.iter()
                    .map(|x| {
                        let rows = aligned_targets(x, targets, &config.align_strategy)?;
                        Ok(rows
                            .into_iter()
                            .map(|r| r.into_iter().flatten().collect())
                            .collect())
                    })
                    .collect()
            };
            let pos = TargetSet::PerPoint(per_point(y_plus)?);
            let neg = if y_minus.is_empty() {
                TargetSet::Shared(vec![])
            } else {
                TargetSet::PerPoint(per_point(y_minus)?)
            };
            let batch = DriftBatch::new(points, pos, neg)?;
            Ok((batch, DriftBackMap::Coordinates { n_atoms: types.len() }))
        }
        DriftSpace::Embedded => {
            let points: Vec<Vec<f64>> = xs
                .iter()
                .map(|x| Ok(embed(x)?.values))
                .collect::<Result<_>>()?;
            let embed_all = |cs: &[Conformation]| -> Result<Vec<Vec<f64>>> {
                cs.iter().map(|c| Ok(embed(c)?.values)).collect()
            };
            let dim = points[0].len();
            let pos = embed_all(y_plus)?;
            let neg = embed_all(y_minus)?;
            for v in points.iter().chain(&pos).chain(&neg) {
                if v.len() != dim {
                    return Err(Error::Shape(format!(
                        "embedding length {} vs {dim} across the batch",
                        v.len()
                    )));
                }
            }
            let batch = DriftBatch::new(points, TargetSet::Shared(pos), TargetSet::Shared(neg))?;
            Ok((
                batch,
                DriftBackMap::Embedded { sources: xs.to_vec() },
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::AlignStrategy;
    use crate::geometry::{apply_group, rotate_row, sample_group_element, sample_haar_rotation, GroupElement};
    use crate::rng::RandomSource;
    use nalgebra::Matrix3;

    fn vecs(rows: &[&[f64]]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| r.to_vec()).collect()
    }

    fn random_conf(rng: &mut RandomSource, types: &[u32]) -> Conformation {
        let coords = (0..types.len())
            .map(|_| [rng.normal(), rng.normal(), rng.normal()])
            .collect();
        center(&Conformation::new(coords, types.to_vec(), "t").unwrap()).unwrap()
    }

    #[test]
    fn single_target_weight_is_one() {
        let w = kernel_weights(&[0.0, 0.0], &vecs(&[&[3.0, 4.0]]), 0.7, Normalization::OneSided, None).unwrap();
        assert_eq!(w, vec![1.0]);
    }

    #[test]
    fn equidistant_targets_split_evenly() {
        let w = kernel_weights(
            &[0.0, 0.0],
            &vecs(&[&[1.0, 0.0], &[-1.0, 0.0]]),
            0.3,
            Normalization::OneSided,
            None,
        )
        .unwrap();
        assert!((w[0] - 0.5).abs() < 1e-12);
        assert!((w[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn analytic_softmax_at_tau_and_two_tau() {
        let tau = 0.4;
        let w = kernel_weights(
            &[0.0],
            &vecs(&[&[tau], &[2.0 * tau]]),
            tau,
            Normalization::OneSided,
            None,
        )
        .unwrap();
        let e1 = (-1.0f64).exp();
        let e2 = (-2.0f64).exp();
        assert!((w[0] - e1 / (e1 + e2)).abs() < 1e-12);
        assert!((w[1] - e2 / (e1 + e2)).abs() < 1e-12);
        assert!((w[0] - 0.7311).abs() < 1e-4);
    }

    #[test]
    fn weight_rows_sum_to_one_both_modes() {
        let mut rng = RandomSource::new(1);
        let points: Vec<Vec<f64>> = (0..4).map(|_| (0..6).map(|_| rng.normal()).collect()).collect();
        let targets = TargetSet::Shared((0..5).map(|_| (0..6).map(|_| rng.normal()).collect()).collect());
        let logits = logit_matrix(&points, &targets, 0.3);
        for mode in [Normalization::OneSided, Normalization::TwoSided] {
            let w = weight_matrix(&logits, mode);
            for row in &w {
                let s: f64 = row.iter().sum();
                assert!((s - 1.0).abs() < 1e-12, "row sum {s}");
                for &v in row {
                    assert!(v > 0.0 && v <= 1.0);
                }
            }
        }
    }

    #[test]
    fn one_sided_weights_are_shift_invariant() {
        let logits = vec![vec![-1.0, -2.0, -0.5]];
        let shifted = vec![vec![-1.0 + 7.3, -2.0 + 7.3, -0.5 + 7.3]];
        let a = weight_matrix(&logits, Normalization::OneSided);
        let b = weight_matrix(&shifted, Normalization::OneSided);
        for (x, y) in a[0].iter().zip(&b[0]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn one_positive_no_negatives_is_exact_pull() {
        let batch = DriftBatch::new(
            vec![vec![1.0, 2.0, 3.0]],
            TargetSet::Shared(vec![vec![4.0, 6.0, 3.0]]),
            TargetSet::Shared(vec![]),
        )
        .unwrap();
        let v = single_temperature_drift(&batch, 0.1, Normalization::OneSided).unwrap();
        assert_eq!(v[0], vec![3.0, 4.0, 0.0]);
    }

    #[test]
    fn matched_positive_and_negative_sets_cancel() {
        let mut rng = RandomSource::new(2);
        let targets: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| rng.normal()).collect()).collect();
        let batch = DriftBatch::new(
            vec![(0..3).map(|_| rng.normal()).collect()],
            TargetSet::Shared(targets.clone()),
            TargetSet::Shared(targets),
        )
        .unwrap();
        for mode in [Normalization::OneSided, Normalization::TwoSided] {
            let v = single_temperature_drift(&batch, 0.5, mode).unwrap();
            for c in &v[0] {
                assert!(c.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn drift_matches_naive_double_loop() {
        let mut rng = RandomSource::new(3);
        let dim = 5;
        let points: Vec<Vec<f64>> = (0..3).map(|_| (0..dim).map(|_| rng.normal()).collect()).collect();
        let pos: Vec<Vec<f64>> = (0..3).map(|_| (0..dim).map(|_| rng.normal()).collect()).collect();
        let neg: Vec<Vec<f64>> = (0..2).map(|_| (0..dim).map(|_| rng.normal()).collect()).collect();
        let tau = 0.7;
        let batch = DriftBatch::new(
            points.clone(),
            TargetSet::Shared(pos.clone()),
            TargetSet::Shared(neg.clone()),
        )
        .unwrap();
        let got = single_temperature_drift(&batch, tau, Normalization::OneSided).unwrap();

        // naive oracle: explicit kernels, explicit normalizers
        for (i, u) in points.iter().enumerate() {
            let k = |a: &[f64], b: &[f64]| (-euclid(a, b) / tau).exp();
            let zp: f64 = pos.iter().map(|y| k(u, y)).sum();
            let zq: f64 = neg.iter().map(|y| k(u, y)).sum();
            for d in 0..dim {
                let mut expect = 0.0;
                for y in &pos {
                    expect += k(u, y) / zp * (y[d] - u[d]);
                }
                for y in &neg {
                    expect -= k(u, y) / zq * (y[d] - u[d]);
                }
                assert!((got[i][d] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn multi_temperature_keeps_direction_for_single_target() {
        let batch = DriftBatch::new(
            vec![vec![0.0, 0.0]],
            TargetSet::Shared(vec![vec![3.0, 4.0]]),
            TargetSet::Shared(vec![]),
        )
        .unwrap();
        let config = DriftConfig {
            space: DriftSpace::Cartesian,
            ..DriftConfig::default()
        };
        let v = multi_temperature_drift(&batch, &config).unwrap();
        let norm = (v[0][0].powi(2) + v[0][1].powi(2)).sqrt();
        let cos = (v[0][0] * 3.0 + v[0][1] * 4.0) / (norm * 5.0);
        assert!((cos - 1.0).abs() < 1e-9);
    }

    #[test]
    fn multi_temperature_zero_drift_stays_zero() {
        let t: Vec<Vec<f64>> = vec![vec![1.0, 1.0], vec![-1.0, 0.5]];
        let batch = DriftBatch::new(
            vec![vec![0.2, 0.4]],
            TargetSet::Shared(t.clone()),
            TargetSet::Shared(t),
        )
        .unwrap();
        let config = DriftConfig {
            space: DriftSpace::Cartesian,
            ..DriftConfig::default()
        };
        let v = multi_temperature_drift(&batch, &config).unwrap();
        for c in &v[0] {
            assert!(c.abs() < 1e-9);
        }
    }

    #[test]
    fn multi_temperature_matches_per_tau_recomputation() {
        let mut rng = RandomSource::new(4);
        let dim = 4;
        let points: Vec<Vec<f64>> = (0..3).map(|_| (0..dim).map(|_| rng.normal()).collect()).collect();
        let pos: Vec<Vec<f64>> = (0..4).map(|_| (0..dim).map(|_| rng.normal()).collect()).collect();
        let neg: Vec<Vec<f64>> = (0..2).map(|_| (0..dim).map(|_| rng.normal()).collect()).collect();
        let batch = DriftBatch::new(points.clone(), TargetSet::Shared(pos), TargetSet::Shared(neg)).unwrap();
        let config = DriftConfig {
            space: DriftSpace::Cartesian,
            temperatures: vec![0.05, 0.2, 0.9],
            ..DriftConfig::default()
        };
        let got = multi_temperature_drift(&batch, &config).unwrap();
        let mut expect = vec![vec![0.0; dim]; points.len()];
        for &tau in &config.temperatures {
            let per = single_temperature_drift(&batch, tau, config.normalization).unwrap();
            for (acc, v) in expect.iter_mut().zip(per) {
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += x / (norm + config.norm_epsilon);
                }
            }
        }
        for (g, e) in got.iter().zip(&expect) {
            for (a, b) in g.iter().zip(e) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn positive_drift_stays_in_convex_hull() {
        let mut rng = RandomSource::new(5);
        // 1D intervals make hull membership easy to check
        let pos: Vec<Vec<f64>> = vec![vec![-1.0], vec![0.5], vec![2.0]];
        for _ in 0..50 {
            let u = vec![rng.normal() * 3.0];
            let batch = DriftBatch::new(
                vec![u.clone()],
                TargetSet::Shared(pos.clone()),
                TargetSet::Shared(vec![]),
            )
            .unwrap();
            let v = single_temperature_drift(&batch, 0.3, Normalization::OneSided).unwrap();
            let moved = u[0] + v[0][0];
            assert!(moved >= -1.0 - 1e-12 && moved <= 2.0 + 1e-12, "moved {moved}");
        }
    }

    #[test]
    fn fixed_point_in_cartesian_space() {
        let mut rng = RandomSource::new(6);
        let x = random_conf(&mut rng, &[0, 1]);
        let config = DriftConfig {
            space: DriftSpace::Cartesian,
            ..DriftConfig::default()
        };
        let (batch, _) = build_drift_batch(
            std::slice::from_ref(&x),
            std::slice::from_ref(&x),
            &[],
            &config,
        )
        .unwrap();
        let v = single_temperature_drift(&batch, 0.1, Normalization::OneSided).unwrap();
        for c in &v[0] {
            assert!(c.abs() < 1e-12);
        }
    }

    #[test]
    fn embedded_space_collapses_rotated_copy() {
        let mut rng = RandomSource::new(7);
        let x = random_conf(&mut rng, &[0, 0, 1]);
        let r = sample_haar_rotation(&mut rng);
        let y = Conformation::new(
            x.coords.iter().map(|row| rotate_row(&r, row)).collect(),
            x.types.clone(),
            "t",
        )
        .unwrap();
        let config = DriftConfig {
            space: DriftSpace::Embedded,
            ..DriftConfig::default()
        };
        let (batch, _) = build_drift_batch(std::slice::from_ref(&x), &[y], &[], &config).unwrap();
        let v = single_temperature_drift(&batch, 0.1, Normalization::OneSided).unwrap();
        for c in &v[0] {
            assert!(c.abs() < 1e-10);
        }
    }

    #[test]
    fn aligned_batch_matches_standalone_aligned_targets() {
        let mut rng = RandomSource::new(8);
        let types = vec![0, 0, 0];
        let xs: Vec<Conformation> = (0..2).map(|_| random_conf(&mut rng, &types)).collect();
        let ys: Vec<Conformation> = (0..3).map(|_| random_conf(&mut rng, &types)).collect();
        let config = DriftConfig {
            space: DriftSpace::Aligned,
            align_strategy: AlignStrategy::brute_force(),
            ..DriftConfig::default()
        };
        let (batch, _) = build_drift_batch(&xs, &ys, &[], &config).unwrap();
        match &batch.pos_targets {
            TargetSet::PerPoint(per) => {
                for (x, targets) in xs.iter().zip(per) {
                    let standalone = aligned_targets(x, &ys, &config.align_strategy).unwrap();
                    for (got, rows) in targets.iter().zip(standalone) {
                        let flat: Vec<f64> = rows.into_iter().flatten().collect();
                        for (a, b) in got.iter().zip(&flat) {
                            assert!((a - b).abs() < 1e-12);
                        }
                    }
                }
            }
            _ => panic!("aligned space must produce per-point targets"),
        }
    }

    #[test]
    fn negative_drift_is_equivariant_for_closed_target_set() {
        // target set closed under the 4-element z-rotation group
        let mut rng = RandomSource::new(9);
        let types = vec![0, 1, 2];
        let base = random_conf(&mut rng, &types);
        let rz = |k: usize| {
            let a = std::f64::consts::FRAC_PI_2 * k as f64;
            Matrix3::new(a.cos(), -a.sin(), 0.0, a.sin(), a.cos(), 0.0, 0.0, 0.0, 1.0)
        };
        let targets: Vec<Vec<f64>> = (0..4)
            .map(|k| {
                base.coords
                    .iter()
                    .flat_map(|row| rotate_row(&rz(k), row))
                    .collect()
            })
            .collect();
        let x = random_conf(&mut rng, &types);
        let tau = 0.4;
        let drift_at = |p: &Conformation| -> Vec<f64> {
            let w = kernel_weights(&p.flatten(), &targets, tau, Normalization::OneSided, None).unwrap();
            weighted_pull(&p.flatten(), &targets, &w)
        };
        for k in 1..4 {
            let g = GroupElement::new(rz(k), vec![0, 1, 2]).unwrap();
            let gx = apply_group(&g, &x).unwrap();
            let lhs = drift_at(&gx);
            let rhs_rows: Vec<[f64; 3]> = drift_at(&x)
                .chunks_exact(3)
                .map(|c| rotate_row(&rz(k), &[c[0], c[1], c[2]]))
                .collect();
            let rhs: Vec<f64> = rhs_rows.into_iter().flatten().collect();
            for (a, b) in lhs.iter().zip(&rhs) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn aligned_drift_is_group_equivariant() {
        // brute-force aligned drift commutes with the group action
        let mut rng = RandomSource::new(10);
        let types = vec![0, 0, 1];
        let x = random_conf(&mut rng, &types);
        let ys: Vec<Conformation> = (0..3).map(|_| random_conf(&mut rng, &types)).collect();
        let config = DriftConfig {
            space: DriftSpace::Aligned,
            align_strategy: AlignStrategy::brute_force(),
            temperatures: vec![0.3],
            ..DriftConfig::default()
        };
        let drift_of = |p: &Conformation| -> Vec<f64> {
            let (batch, _) = build_drift_batch(std::slice::from_ref(p), &ys, &[], &config).unwrap();
            single_temperature_drift(&batch, 0.3, Normalization::OneSided).unwrap().swap_remove(0)
        };
        for _ in 0..10 {
            let h = sample_group_element(&mut rng, &types);
            let hx = apply_group(&h, &x).unwrap();
            let lhs = drift_of(&hx);
            let base = drift_of(&x);
            let rows: Vec<[f64; 3]> = base.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
            let moved = crate::geometry::apply_to_rows(&h, &rows);
            let rhs: Vec<f64> = moved.into_iter().flatten().collect();
            for (a, b) in lhs.iter().zip(&rhs) {
                assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn invalid_tau_rejected() {
        assert!(kernel_weights(&[0.0], &vecs(&[&[1.0]]), 0.0, Normalization::OneSided, None).is_err());
        assert!(kernel_weights(&[0.0], &[], 1.0, Normalization::OneSided, None).is_err());
    }
}
