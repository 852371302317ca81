//! Monte-Carlo machinery for the symmetrized and aggregated drift fields,
//! plus an executable verification suite for the analytic claims the rest
//! of the crate is built on.
//!
//! Two estimators, deliberately different in structure:
//! - the symmetrized drift is a ratio of sums: numerator and denominator
//!   are accumulated over the same (target, group-element) draws and
//!   divided once;
//! - the aggregated drift forms the per-element ratio first and averages
//!   the back-transformed results.
//! The two disagree on generic data (the ratio of averages is not the
//! average of ratios), which is exactly what the mismatch check measures.
//!
//! Standard errors come from 10-fold batching of the group draws. For
//! exceedance checks ("gap must be larger than k standard errors") the
//! reported error is the ratio threshold/actual with tolerance 1.0, so the
//! report invariant `pass == (error <= tolerance)` holds for every check.

use crate::align::{align, AlignStrategy};
use crate::drift::{kernel_weights, Normalization};
use crate::embedding::{embed, embed_pullback};
use crate::error::{Error, Result};
use crate::geometry::{
    apply_group, apply_to_rows, center, rotate_row, sample_group_element, Conformation,
    GroupElement,
};
use crate::rng::RandomSource;
use nalgebra::Matrix3;
use std::fmt::Write as _;

/// Kernel values below 1e-300 are treated as total underflow.
const UNDERFLOW_LOGIT: f64 = -690.0;

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub n_group_samples: usize,
    pub seed: u64,
    /// Relative temperatures (multiples of the instance scale), strictly
    /// decreasing, for the hard-alignment limit study.
    pub tau_schedule: Vec<f64>,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_group_samples: 20_000,
            seed: 0,
            tau_schedule: vec![1.0, 0.3, 0.1, 0.03, 0.01],
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_group_samples == 0 {
            return Err(Error::InvalidConfig("n_group_samples must be >= 1".into()));
        }
        if self.tau_schedule.is_empty()
            || self.tau_schedule.iter().any(|&t| !(t > 0.0))
            || self.tau_schedule.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::InvalidConfig(
                "tau_schedule must be strictly decreasing and positive".into(),
            ));
        }
        Ok(())
    }
}

/// A Monte-Carlo drift estimate with its batched standard error.
#[derive(Debug, Clone)]
pub struct McDrift {
    pub drift: Vec<[f64; 3]>,
    /// Euclidean norm of the per-component standard-error vector.
    pub standard_error: f64,
    /// Group draws actually consumed (rounded down to equal batches).
    pub n_samples: usize,
}

const N_BATCHES: usize = 10;

fn check_targets(x: &Conformation, targets: &[Conformation]) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::InvalidInput("no targets".into()));
    }
    for t in targets {
        if t.types != x.types {
            return Err(Error::TypeMismatch(format!("{:?} vs {:?}", t.types, x.types)));
        }
    }
    Ok(())
}

fn flat_diff_norm(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    let mut s = 0.0;
    for (ra, rb) in a.iter().zip(b) {
        for k in 0..3 {
            let d = ra[k] - rb[k];
            s += d * d;
        }
    }
    s.sqrt()
}

fn batch_layout(n: usize) -> (usize, usize) {
    let batches = N_BATCHES.min(n);
    let per_batch = n / batches;
    (batches, per_batch)
}

fn se_from_batches(batches: &[Vec<[f64; 3]>]) -> f64 {
    let b = batches.len();
    if b < 2 {
        return f64::INFINITY;
    }
    let n_rows = batches[0].len();
    let mut se_sq = 0.0;
    for row in 0..n_rows {
        for axis in 0..3 {
            let vals: Vec<f64> = batches.iter().map(|v| v[row][axis]).collect();
            let mean = vals.iter().sum::<f64>() / b as f64;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (b - 1) as f64;
            se_sq += var / b as f64;
        }
    }
    se_sq.sqrt()
}

/// Monte-Carlo estimate of the drift toward the group-averaged target
/// distribution: one ratio of kernel-weighted sums over all
/// (target, group-element) draws.
pub fn mc_symmetrized_drift(
    x: &Conformation,
    targets: &[Conformation],
    tau: f64,
    mc: &McConfig,
) -> Result<McDrift> {
    mc.validate()?;
    check_targets(x, targets)?;
    if !(tau > 0.0) {
        return Err(Error::InvalidConfig(format!("tau must be > 0, got {tau}")));
    }
    let centered: Vec<Conformation> = targets.iter().map(center).collect::<Result<_>>()?;
    let mut rng = RandomSource::new(mc.seed);
    let n_atoms = x.n_atoms();
    let (n_batches, per_batch) = batch_layout(mc.n_group_samples);

    struct BatchAcc {
        max_logit: f64,
        num: Vec<[f64; 3]>,
        den: f64,
    }
    let mut batch_ratios = Vec::with_capacity(n_batches);
    let mut accs = Vec::with_capacity(n_batches);
    let mut global_max = f64::NEG_INFINITY;
    for _ in 0..n_batches {
        let mut acc = BatchAcc {
            max_logit: f64::NEG_INFINITY,
            num: vec![[0.0; 3]; n_atoms],
            den: 0.0,
        };
        for _ in 0..per_batch {
            let g = sample_group_element(&mut rng, &x.types);
            for y in &centered {
                let gy = apply_to_rows(&g, &y.coords);
                let d = flat_diff_norm(&x.coords, &gy);
                let logit = -d / tau;
                if logit > acc.max_logit {
                    let scale = (acc.max_logit - logit).exp();
                    for row in &mut acc.num {
                        for v in row.iter_mut() {
                            *v *= scale;
                        }
                    }
                    acc.den *= scale;
                    acc.max_logit = logit;
                }
                let w = (logit - acc.max_logit).exp();
                for (row, (gyr, xr)) in acc.num.iter_mut().zip(gy.iter().zip(&x.coords)) {
                    for k in 0..3 {
                        row[k] += w * (gyr[k] - xr[k]);
                    }
                }
                acc.den += w;
            }
        }
        global_max = global_max.max(acc.max_logit);
        let ratio: Vec<[f64; 3]> = acc
            .num
            .iter()
            .map(|r| [r[0] / acc.den, r[1] / acc.den, r[2] / acc.den])
            .collect();
        batch_ratios.push(ratio);
        accs.push(acc);
    }
    if global_max < UNDERFLOW_LOGIT {
        return Err(Error::Underflow { max_logit: global_max });
    }
    // combine batches under a common shift
    let mut num = vec![[0.0; 3]; n_atoms];
    let mut den = 0.0;
    for acc in &accs {
        let scale = (acc.max_logit - global_max).exp();
        for (row, src) in num.iter_mut().zip(&acc.num) {
            for k in 0..3 {
                row[k] += scale * src[k];
            }
        }
        den += scale * acc.den;
    }
    let drift: Vec<[f64; 3]> = num.iter().map(|r| [r[0] / den, r[1] / den, r[2] / den]).collect();
    Ok(McDrift {
        drift,
        standard_error: se_from_batches(&batch_ratios),
        n_samples: n_batches * per_batch,
    })
}

/// Monte-Carlo estimate of the aggregated drift: for each group draw the
/// plain normalized drift is evaluated at the transformed point, mapped
/// back through the inverse element, and the results are averaged.
pub fn mc_aggregated_drift(
    x: &Conformation,
    targets: &[Conformation],
    tau: f64,
    mc: &McConfig,
) -> Result<McDrift> {
    mc.validate()?;
    check_targets(x, targets)?;
    if !(tau > 0.0) {
        return Err(Error::InvalidConfig(format!("tau must be > 0, got {tau}")));
    }
    let centered: Vec<Conformation> = targets.iter().map(center).collect::<Result<_>>()?;
    let mut rng = RandomSource::new(mc.seed);
    let n_atoms = x.n_atoms();
    let (n_batches, per_batch) = batch_layout(mc.n_group_samples);

    let mut batch_means = Vec::with_capacity(n_batches);
    let mut overall = vec![[0.0; 3]; n_atoms];
    for _ in 0..n_batches {
        let mut batch_sum = vec![[0.0; 3]; n_atoms];
        for _ in 0..per_batch {
            let g = sample_group_element(&mut rng, &x.types);
            let gx = apply_to_rows(&g, &x.coords);
            // per-draw ratio toward the fixed target set
            let mut max_logit = f64::NEG_INFINITY;
            let mut num = vec![[0.0; 3]; n_atoms];
            let mut den = 0.0;
            for y in &centered {
                let d = flat_diff_norm(&gx, &y.coords);
                let logit = -d / tau;
                if logit > max_logit {
                    let scale = (max_logit - logit).exp();
                    for row in &mut num {
                        for v in row.iter_mut() {
                            *v *= scale;
                        }
                    }
                    den *= scale;
                    max_logit = logit;
                }
                let w = (logit - max_logit).exp();
                for (row, (yr, gxr)) in num.iter_mut().zip(y.coords.iter().zip(&gx)) {
                    for k in 0..3 {
                        row[k] += w * (yr[k] - gxr[k]);
                    }
                }
                den += w;
            }
            if max_logit < UNDERFLOW_LOGIT {
                return Err(Error::Underflow { max_logit });
            }
            let v: Vec<[f64; 3]> = num.iter().map(|r| [r[0] / den, r[1] / den, r[2] / den]).collect();
            let back = apply_to_rows(&g.inverse(), &v);
            for (row, b) in batch_sum.iter_mut().zip(&back) {
                for k in 0..3 {
                    row[k] += b[k];
                }
            }
        }
        let mean: Vec<[f64; 3]> = batch_sum
            .iter()
            .map(|r| [r[0] / per_batch as f64, r[1] / per_batch as f64, r[2] / per_batch as f64])
            .collect();
        for (row, m) in overall.iter_mut().zip(&mean) {
            for k in 0..3 {
                row[k] += m[k] / n_batches as f64;
            }
        }
        batch_means.push(mean);
    }
    Ok(McDrift {
        drift: overall,
        standard_error: se_from_batches(&batch_means),
        n_samples: n_batches * per_batch,
    })
}

/// One verification check: pass iff `error <= tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub error: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub samples: usize,
}

impl CheckResult {
    fn new(name: &str, error: f64, tolerance: f64, samples: usize) -> Self {
        Self {
            name: name.to_string(),
            error,
            tolerance,
            passed: error <= tolerance,
            samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Human-readable form, one line per check.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{:<28} error={:>12.6e} tol={:>12.6e} {} n={}",
                c.name,
                c.error,
                c.tolerance,
                if c.passed { "PASS" } else { "FAIL" },
                c.samples
            );
        }
        out
    }

    /// Machine-readable `key value` lines.
    pub fn render_key_values(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(out, "{}.error {:.17e}", c.name, c.error);
            let _ = writeln!(out, "{}.tolerance {:.17e}", c.name, c.tolerance);
            let _ = writeln!(out, "{}.pass {}", c.name, u8::from(c.passed));
            let _ = writeln!(out, "{}.samples {}", c.name, c.samples);
        }
        out
    }
}

fn random_centered(rng: &mut RandomSource, types: &[u32], spread: f64) -> Conformation {
    let coords = (0..types.len())
        .map(|_| [rng.normal() * spread, rng.normal() * spread, rng.normal() * spread])
        .collect();
    center(&Conformation::new(coords, types.to_vec(), "lab").unwrap()).unwrap()
}

/// Weighted orbit mean of a single target under sampled group elements,
/// shared draws across the whole temperature schedule.
fn hard_alignment_distances(
    x: &Conformation,
    y: &Conformation,
    taus: &[f64],
    n_draws: usize,
    rng: &mut RandomSource,
) -> Result<Vec<f64>> {
    let yc = center(y)?;
    let mut orbit: Vec<Vec<[f64; 3]>> = Vec::with_capacity(n_draws);
    let mut dists: Vec<f64> = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let g = sample_group_element(rng, &x.types);
        let gy = apply_to_rows(&g, &yc.coords);
        dists.push(flat_diff_norm(&x.coords, &gy));
        orbit.push(gy);
    }
    let nearest = {
        let res = align(x, y, &AlignStrategy::brute_force())?;
        apply_group(&res.group_element, &yc)?.coords
    };
    let n_atoms = x.n_atoms();
    let mut out = Vec::with_capacity(taus.len());
    for &tau in taus {
        let max_logit = dists.iter().map(|d| -d / tau).fold(f64::NEG_INFINITY, f64::max);
        let mut num = vec![[0.0; 3]; n_atoms];
        let mut den = 0.0;
        for (gy, d) in orbit.iter().zip(&dists) {
            let w = (-d / tau - max_logit).exp();
            for (row, src) in num.iter_mut().zip(gy) {
                for k in 0..3 {
                    row[k] += w * src[k];
                }
            }
            den += w;
        }
        let mean: Vec<[f64; 3]> = num.iter().map(|r| [r[0] / den, r[1] / den, r[2] / den]).collect();
        out.push(flat_diff_norm(&mean, &nearest));
    }
    Ok(out)
}

/// Run the fixed verification suite. Failures are recorded in the report,
/// never thrown.
pub fn verify(mc: &McConfig) -> Result<VerificationReport> {
    mc.validate()?;
    let mut checks = Vec::new();
    let rng = RandomSource::new(mc.seed);

    // shared two-atom instance for the field comparisons
    let types = vec![0u32, 1u32];
    let x = random_centered(&mut rng.fork(1), &types, 1.0);
    let y = random_centered(&mut rng.fork(2), &types, 1.0);
    let scale = x.rms_norm();

    // (a) aggregated vs symmetrized mismatch on a single target at low tau
    {
        let tau = 0.05 * scale;
        let sub = McConfig {
            seed: rng.fork(3).seed(),
            ..mc.clone()
        };
        let agg = mc_aggregated_drift(&x, std::slice::from_ref(&y), tau, &sub)?;
        let sym = mc_symmetrized_drift(&x, std::slice::from_ref(&y), tau, &sub)?;
        let gap = flat_diff_norm(&agg.drift, &sym.drift);
        let se = (agg.standard_error.powi(2) + sym.standard_error.powi(2)).sqrt();
        checks.push(CheckResult::new(
            "mismatch_exceeds_10se",
            10.0 * se / gap,
            1.0,
            agg.n_samples + sym.n_samples,
        ));
    }

    // (b) aggregated drift equals -x for a single target
    {
        let tau = 0.5 * scale;
        let sub = McConfig {
            seed: rng.fork(4).seed(),
            ..mc.clone()
        };
        let agg = mc_aggregated_drift(&x, std::slice::from_ref(&y), tau, &sub)?;
        let minus_x: Vec<[f64; 3]> = x.coords.iter().map(|r| [-r[0], -r[1], -r[2]]).collect();
        let err = flat_diff_norm(&agg.drift, &minus_x);
        checks.push(CheckResult::new(
            "aggregated_identity",
            err,
            3.0 * agg.standard_error,
            agg.n_samples,
        ));
    }

    // (c) hard alignment limit over the temperature schedule
    {
        let arm = 1.0;
        let yd = Conformation::new(
            vec![[arm, 0.0, 0.0], [-arm, 0.0, 0.0]],
            vec![0, 0],
            "lab",
        )?;
        let mut hrng = rng.fork(5);
        let r0 = crate::geometry::sample_haar_rotation(&mut hrng);
        let xd = Conformation::new(
            yd.coords
                .iter()
                .map(|row| {
                    let r = rotate_row(&r0, row);
                    [1.3 * r[0], 1.3 * r[1], 1.3 * r[2]]
                })
                .collect(),
            vec![0, 0],
            "lab",
        )?;
        let dscale = xd.rms_norm();
        let taus: Vec<f64> = mc.tau_schedule.iter().map(|t| t * dscale).collect();
        let n_draws = mc.n_group_samples.max(200_000);
        let dists = hard_alignment_distances(&xd, &yd, &taus, n_draws, &mut hrng)?;
        let worst_increase = dists
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(CheckResult::new(
            "hard_alignment_monotone",
            worst_increase.max(0.0) / dscale,
            1e-9,
            n_draws,
        ));
        checks.push(CheckResult::new(
            "hard_alignment_final",
            dists.last().copied().unwrap_or(f64::INFINITY) / dscale,
            0.02,
            n_draws,
        ));
    }

    // (d) negative-drift equivariance under a finite closed target set
    {
        let mut drng = rng.fork(6);
        let base = random_centered(&mut drng, &[0, 1, 2], 1.0);
        let rz = |k: usize| {
            let a = std::f64::consts::FRAC_PI_2 * k as f64;
            Matrix3::new(a.cos(), -a.sin(), 0.0, a.sin(), a.cos(), 0.0, 0.0, 0.0, 1.0)
        };
        let targets: Vec<Vec<f64>> = (0..4)
            .map(|k| base.coords.iter().flat_map(|row| rotate_row(&rz(k), row)).collect())
            .collect();
        let probe = random_centered(&mut drng, &[0, 1, 2], 1.0);
        let tau = 0.4;
        let drift_at = |c: &Conformation| -> Result<Vec<f64>> {
            let flat = c.flatten();
            let w = kernel_weights(&flat, &targets, tau, Normalization::OneSided, None)?;
            let mut v = vec![0.0; flat.len()];
            for (t, &wk) in targets.iter().zip(&w) {
                for (k, (tv, fv)) in t.iter().zip(&flat).enumerate() {
                    v[k] += wk * (tv - fv);
                }
            }
            Ok(v)
        };
        let mut worst = 0.0f64;
        for k in 1..4 {
            let g = GroupElement::new(rz(k), vec![0, 1, 2])?;
            let lhs = drift_at(&apply_group(&g, &probe)?)?;
            let base_v = drift_at(&probe)?;
            let rows: Vec<[f64; 3]> = base_v.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
            let rhs: Vec<f64> = apply_to_rows(&g, &rows).into_iter().flatten().collect();
            let err = lhs
                .iter()
                .zip(&rhs)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(err);
        }
        checks.push(CheckResult::new("negative_drift_equivariance", worst, 1e-9, 4));
    }

    // (e) aligned-drift equivariance with brute-force alignment
    {
        let mut erng = rng.fork(7);
        let types = vec![0u32, 0, 1];
        let probe = random_centered(&mut erng, &types, 1.0);
        let targets: Vec<Conformation> = (0..3).map(|_| random_centered(&mut erng, &types, 1.0)).collect();
        let tau = 0.3;
        let strategy = AlignStrategy::brute_force();
        let drift_at = |c: &Conformation| -> Result<Vec<[f64; 3]>> {
            let mut weights = Vec::with_capacity(targets.len());
            let mut moved = Vec::with_capacity(targets.len());
            for t in &targets {
                let res = align(c, t, &strategy)?;
                let tc = center(t)?;
                let rows = apply_to_rows(&res.group_element, &tc.coords);
                weights.push(-res.residual / tau);
                moved.push(rows);
            }
            let max = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut den = 0.0;
            let exps: Vec<f64> = weights
                .iter()
                .map(|l| {
                    let e = (l - max).exp();
                    den += e;
                    e
                })
                .collect();
            let cc = center(c)?;
            let mut v = vec![[0.0; 3]; c.n_atoms()];
            for (rows, e) in moved.iter().zip(&exps) {
                let w = e / den;
                for (out, (mr, xr)) in v.iter_mut().zip(rows.iter().zip(&cc.coords)) {
                    for k in 0..3 {
                        out[k] += w * (mr[k] - xr[k]);
                    }
                }
            }
            Ok(v)
        };
        let mut worst = 0.0f64;
        let n_elems = 50;
        for _ in 0..n_elems {
            let h = sample_group_element(&mut erng, &types);
            let lhs = drift_at(&apply_group(&h, &probe)?)?;
            let rhs = apply_to_rows(&h, &drift_at(&probe)?);
            worst = worst.max(flat_diff_norm(&lhs, &rhs));
        }
        checks.push(CheckResult::new("aligned_drift_equivariance", worst, 1e-8, n_elems));
    }

    // (f) embedding invariance and pullback gradient
    {
        let mut frng = rng.fork(8);
        let types = vec![0u32, 0, 1, 1, 2];
        let mut worst = 0.0f64;
        let n_pairs = 100;
        for _ in 0..n_pairs {
            let c = random_centered(&mut frng, &types, 1.0);
            let g = sample_group_element(&mut frng, &types);
            let a = embed(&c)?;
            let b = embed(&apply_group(&g, &c)?)?;
            for (u, v) in a.values.iter().zip(&b.values) {
                worst = worst.max((u - v).abs());
            }
        }
        checks.push(CheckResult::new("embedding_invariance", worst, 1e-10, n_pairs));

        let c = random_centered(&mut frng, &types, 1.0);
        let m = embed(&c)?.len();
        let cot: Vec<f64> = (0..m).map(|_| frng.normal()).collect();
        let analytic = embed_pullback(&c, &cot)?.gradient;
        let eps = 1e-5;
        let pairing = |conf: &Conformation| -> Result<f64> {
            Ok(embed(conf)?.values.iter().zip(&cot).map(|(v, c)| v * c).sum())
        };
        let mut worst_rel = 0.0f64;
        for atom in 0..types.len() {
            for axis in 0..3 {
                let mut plus = c.clone();
                plus.coords[atom][axis] += eps;
                let mut minus = c.clone();
                minus.coords[atom][axis] -= eps;
                let numeric = (pairing(&plus)? - pairing(&minus)?) / (2.0 * eps);
                let a = analytic[atom][axis];
                worst_rel = worst_rel.max((numeric - a).abs() / a.abs().max(1e-8));
            }
        }
        checks.push(CheckResult::new("embedding_pullback_fd", worst_rel, 1e-4, m));
    }

    Ok(VerificationReport { checks })
}
