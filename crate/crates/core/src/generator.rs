//! One-shot generator and its drifting-field training loop.
//!
//! The generator maps a standard-normal prior sample (concatenated with a
//! learned class embedding) through a fully connected network to a centered
//! cloud. Training freezes the drift target per step (stop-gradient), so
//! the loss gradient per point is exactly -2 V and flows only through the
//! generator. One network is shared per atom-count/type-signature group;
//! classes are told apart by their embedding vector.

use crate::dataset::Dataset;
use crate::drift::{build_drift_batch, multi_temperature_drift, DriftConfig};
use crate::error::{Error, Result};
use crate::geometry::{AtomType, Conformation};
use crate::net::{DenseNet, ForwardCache, NetGradient};
use crate::rng::RandomSource;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Classes sampled per step.
    pub n_classes_per_step: usize,
    /// Data samples drawn per class (capped at the class size).
    pub n_pos: usize,
    /// Prior samples generated per class; these double as negatives.
    pub n_neg: usize,
    pub learning_rate: f64,
    /// Optional final learning rate; `train` interpolates linearly from
    /// `learning_rate` to this value over the steps. Each step remains one
    /// plain gradient-descent update.
    pub learning_rate_final: Option<f64>,
    pub steps: usize,
    pub seed: u64,
    pub drift: DriftConfig,
    pub hidden_widths: Vec<usize>,
    pub class_embed_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_classes_per_step: 2,
            n_pos: 30,
            n_neg: 64,
            learning_rate: 1e-2,
            learning_rate_final: None,
            steps: 2000,
            seed: 0,
            drift: DriftConfig::default(),
            hidden_widths: vec![128, 128, 128],
            class_embed_dim: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_neg == 0 {
            return Err(Error::InvalidConfig("n_neg must be >= 1 during training".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be > 0".into()));
        }
        if let Some(lr) = self.learning_rate_final {
            if !(lr > 0.0) {
                return Err(Error::InvalidConfig("learning_rate_final must be > 0".into()));
            }
        }
        if self.n_classes_per_step == 0 || self.n_pos == 0 {
            return Err(Error::InvalidConfig("n_classes_per_step and n_pos must be >= 1".into()));
        }
        self.drift.validate()
    }
}

/// Standard-normal prior draw for one cloud.
#[derive(Debug, Clone)]
pub struct PriorSample {
    pub noise: Vec<[f64; 3]>,
}

impl PriorSample {
    pub fn standard(n_atoms: usize, rng: &mut RandomSource) -> Self {
        Self {
            noise: (0..n_atoms)
                .map(|_| [rng.normal(), rng.normal(), rng.normal()])
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassEntry {
    pub types: Vec<AtomType>,
    pub embedding: Vec<f64>,
}

/// One shared network plus the classes it serves.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupParams {
    pub net: DenseNet,
    pub n_atoms: usize,
    pub classes: BTreeMap<String, ClassEntry>,
}

/// The full trainable model: one network per atom-count/type-signature
/// group, each with per-class embedding vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub groups: BTreeMap<String, GroupParams>,
    pub class_embed_dim: usize,
}

/// Signature key shared by classes that can use the same network.
pub fn signature_key(types: &[AtomType]) -> String {
    let mut sorted = types.to_vec();
    sorted.sort_unstable();
    let joined: Vec<String> = sorted.iter().map(|t| t.to_string()).collect();
    format!("n{}_t{}", types.len(), joined.join("-"))
}

impl GeneratorParams {
    /// Initialize networks and class embeddings for every class in the
    /// dataset.
    pub fn new(dataset: &Dataset, config: &TrainConfig, rng: &mut RandomSource) -> Result<Self> {
        config.validate()?;
        dataset.validate()?;
        if dataset.classes.is_empty() {
            return Err(Error::Data("dataset has no classes".into()));
        }
        let mut groups: BTreeMap<String, GroupParams> = BTreeMap::new();
        for class in &dataset.classes {
            let key = signature_key(&class.types);
            let n = class.types.len();
            let group = match groups.entry(key) {
                std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::btree_map::Entry::Vacant(e) => {
                    let mut dims = vec![3 * n + config.class_embed_dim];
                    dims.extend_from_slice(&config.hidden_widths);
                    dims.push(3 * n);
                    e.insert(GroupParams {
                        net: DenseNet::new(&dims, rng)?,
                        n_atoms: n,
                        classes: BTreeMap::new(),
                    })
                }
            };
            if group.classes.contains_key(&class.class_id) {
                return Err(Error::Data(format!("duplicate class id {}", class.class_id)));
            }
            let embedding = (0..config.class_embed_dim).map(|_| 0.1 * rng.normal()).collect();
            group.classes.insert(
                class.class_id.clone(),
                ClassEntry {
                    types: class.types.clone(),
                    embedding,
                },
            );
        }
        Ok(Self {
            groups,
            class_embed_dim: config.class_embed_dim,
        })
    }

    /// Locate the group and class entry backing a class id.
    pub fn lookup(&self, class_id: &str) -> Result<(&str, &GroupParams, &ClassEntry)> {
        for (key, group) in &self.groups {
            if let Some(entry) = group.classes.get(class_id) {
                return Ok((key, group, entry));
            }
        }
        Err(Error::UnknownClass(class_id.to_string()))
    }

    /// Total number of trainable parameters.
    pub fn param_count(&self) -> usize {
        self.groups
            .values()
            .map(|g| g.net.param_count() + g.classes.len() * self.class_embed_dim)
            .sum()
    }

    /// Flat view of every parameter (networks, then embeddings, in group
    /// and class order).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for group in self.groups.values() {
            out.extend(group.net.flat_params());
            for entry in group.classes.values() {
                out.extend_from_slice(&entry.embedding);
            }
        }
        out
    }

    /// Overwrite every parameter from a flat vector laid out as
    /// [`GeneratorParams::flat_params`].
    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "{} parameters vs expected {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut k = 0;
        for group in self.groups.values_mut() {
            let n = group.net.param_count();
            group.net.set_flat_params(&flat[k..k + n])?;
            k += n;
            for entry in group.classes.values_mut() {
                let ne = entry.embedding.len();
                entry.embedding.copy_from_slice(&flat[k..k + ne]);
                k += ne;
            }
        }
        Ok(())
    }
}

/// Deterministic forward pass: (flattened noise ++ class embedding) through
/// the class's network, reshaped and mean-centered.
pub fn generator_forward(
    params: &GeneratorParams,
    eps: &PriorSample,
    class_id: &str,
) -> Result<(Conformation, ForwardCache)> {
    let (_, group, entry) = params.lookup(class_id)?;
    if eps.noise.len() != group.n_atoms {
        return Err(Error::Shape(format!(
            "prior sample has {} atoms, class {} needs {}",
            eps.noise.len(),
            class_id,
            group.n_atoms
        )));
    }
    if eps.noise.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("prior sample".into()));
    }
    let mut input: Vec<f64> = eps.noise.iter().flatten().copied().collect();
    input.extend_from_slice(&entry.embedding);
    let (out, cache) = group.net.forward(&input)?;
    let raw = Conformation::from_flat(&out, &entry.types, class_id)?;
    let centered = crate::geometry::center(&raw)?;
    Ok((centered, cache))
}

/// Stop-gradient drifting loss over a batch of points.
///
/// Loss is the mean squared drift norm; the cotangent on each point is
/// `-2 V_i / count` because the target `sg(u_i + V_i)` is a constant.
pub fn drifting_loss_and_cotangent(
    points: &[Vec<f64>],
    drifts: &[Vec<f64>],
) -> Result<(f64, Vec<Vec<f64>>)> {
    if points.len() != drifts.len() {
        return Err(Error::Shape(format!(
            "{} points vs {} drift vectors",
            points.len(),
            drifts.len()
        )));
    }
    if points.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let count = points.len() as f64;
    let mut loss = 0.0;
    let mut cotangents = Vec::with_capacity(drifts.len());
    for (p, v) in points.iter().zip(drifts) {
        if p.len() != v.len() {
            return Err(Error::Shape(format!(
                "point dim {} vs drift dim {}",
                p.len(),
                v.len()
            )));
        }
        loss += v.iter().map(|x| x * x).sum::<f64>();
        cotangents.push(v.iter().map(|x| -2.0 * x / count).collect());
    }
    Ok((loss / count, cotangents))
}

/// Gradient of the generator for one sample: network parameters plus the
/// class embedding used in the forward pass.
#[derive(Debug, Clone)]
pub struct GeneratorGradient {
    pub net: NetGradient,
    pub class_embedding: Vec<f64>,
}

/// Transpose of the output mean-centering: subtract the column means of the
/// cotangent, then flatten.
pub fn center_cotangent(cotangent: &[[f64; 3]]) -> Vec<f64> {
    let n = cotangent.len() as f64;
    let mut mean = [0.0; 3];
    for row in cotangent {
        for k in 0..3 {
            mean[k] += row[k];
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    cotangent
        .iter()
        .flat_map(|row| [row[0] - mean[0], row[1] - mean[1], row[2] - mean[2]])
        .collect()
}

/// Reverse pass through the network for one cached forward call. The
/// cotangent must already be projected through the centering transpose.
pub fn generator_backward(
    group: &GroupParams,
    cache: &ForwardCache,
    cotangent_on_output: &[f64],
) -> Result<GeneratorGradient> {
    let (net, d_input) = group.net.backward(cache, cotangent_on_output)?;
    let class_embedding = d_input[3 * group.n_atoms..].to_vec();
    Ok(GeneratorGradient { net, class_embedding })
}

struct GroupAccumulator {
    net: NetGradient,
    embeddings: BTreeMap<String, Vec<f64>>,
}

/// One training step: sample classes, generate negatives from the prior,
/// compute the symmetry-aware multi-temperature drift, and apply a single
/// gradient-descent update. Returns the step loss.
pub fn train_step(
    params: &mut GeneratorParams,
    dataset: &Dataset,
    config: &TrainConfig,
    rng: &mut RandomSource,
) -> Result<f64> {
    config.validate()?;
    if dataset.classes.is_empty() {
        return Err(Error::Data("dataset has no classes".into()));
    }
    let take = config.n_classes_per_step.min(dataset.classes.len());
    let class_indices = rng.sample_indices(dataset.classes.len(), take);
    let total = (take * config.n_neg) as f64;

    let mut accums: BTreeMap<String, GroupAccumulator> = BTreeMap::new();
    let mut sq_sum = 0.0;

    for &ci in &class_indices {
        let class = &dataset.classes[ci];
        if class.conformers.is_empty() {
            return Err(Error::Data(format!("class {} has no conformers", class.class_id)));
        }
        let k_pos = config.n_pos.min(class.conformers.len());
        let mut pos_indices = rng.sample_indices(class.conformers.len(), k_pos);
        pos_indices.sort_unstable();
        let y_plus: Vec<Conformation> = pos_indices
            .iter()
            .map(|&k| Ok(crate::geometry::center(&class.conformation(k)?)?))
            .collect::<Result<_>>()?;

        let (group_key, group, _) = params.lookup(&class.class_id)?;
        let group_key = group_key.to_string();
        let n_atoms = group.n_atoms;

        let mut xs = Vec::with_capacity(config.n_neg);
        let mut caches = Vec::with_capacity(config.n_neg);
        for _ in 0..config.n_neg {
            let eps = PriorSample::standard(n_atoms, rng);
            let (x, cache) = generator_forward(params, &eps, &class.class_id)?;
            xs.push(x);
            caches.push(cache);
        }
        // frozen copies of the generated points serve as negatives
        let y_minus = xs.clone();

        let (batch, back_map) = build_drift_batch(&xs, &y_plus, &y_minus, &config.drift)?;
        let drifts = multi_temperature_drift(&batch, &config.drift)?;

        let accum = accums.entry(group_key).or_insert_with(|| GroupAccumulator {
            net: NetGradient::zeros_like(&group.net),
            embeddings: BTreeMap::new(),
        });
        for (i, drift) in drifts.iter().enumerate() {
            sq_sum += drift.iter().map(|x| x * x).sum::<f64>();
            let cot_u: Vec<f64> = drift.iter().map(|x| -2.0 * x / total).collect();
            let coord_cot = back_map.cotangent_to_coords(i, &cot_u)?;
            let flat_cot = center_cotangent(&coord_cot);
            let grad = generator_backward(group, &caches[i], &flat_cot)?;
            accum.net.add_assign(&grad.net);
            let emb = accum
                .embeddings
                .entry(class.class_id.clone())
                .or_insert_with(|| vec![0.0; params.class_embed_dim]);
            for (a, g) in emb.iter_mut().zip(&grad.class_embedding) {
                *a += g;
            }
        }
    }

    // single deterministic parameter update
    for (key, accum) in accums {
        let group = params.groups.get_mut(&key).expect("accumulated group exists");
        group.net.sgd_step(&accum.net, config.learning_rate);
        for (class_id, grad) in accum.embeddings {
            let entry = group.classes.get_mut(&class_id).expect("class exists");
            for (w, g) in entry.embedding.iter_mut().zip(&grad) {
                *w -= config.learning_rate * g;
            }
        }
    }
    Ok(sq_sum / total)
}

/// Run the full training loop; returns the per-step losses. When a final
/// learning rate is configured, the rate decays linearly across the steps.
pub fn train(
    params: &mut GeneratorParams,
    dataset: &Dataset,
    config: &TrainConfig,
    rng: &mut RandomSource,
) -> Result<Vec<f64>> {
    let lr0 = config.learning_rate;
    let lr1 = config.learning_rate_final.unwrap_or(lr0);
    let mut step_config = config.clone();
    let mut losses = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let f = step as f64 / config.steps.max(1) as f64;
        step_config.learning_rate = lr0 + (lr1 - lr0) * f;
        losses.push(train_step(params, dataset, &step_config, rng)?);
    }
    Ok(losses)
}

/// Post-sampling selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSelect {
    /// Return all k samples.
    None,
    /// Return only the sample closest to the coordinatewise median.
    Median,
}

/// One-shot sampling: k independent prior draws, one forward pass each.
pub fn sample_one_shot(
    params: &GeneratorParams,
    class_id: &str,
    k: usize,
    rng: &mut RandomSource,
    select: SampleSelect,
) -> Result<Vec<Conformation>> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be >= 1".into()));
    }
    let (_, group, _) = params.lookup(class_id)?;
    let n_atoms = group.n_atoms;
    let mut samples = Vec::with_capacity(k);
    for _ in 0..k {
        let eps = PriorSample::standard(n_atoms, rng);
        let (x, _) = generator_forward(params, &eps, class_id)?;
        samples.push(x);
    }
    match select {
        SampleSelect::None => Ok(samples),
        SampleSelect::Median => {
            let median = coordinatewise_median(&samples);
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (i, s) in samples.iter().enumerate() {
                let mut d = 0.0;
                for (row, med) in s.coords.iter().zip(&median) {
                    for a in 0..3 {
                        let diff = row[a] - med[a];
                        d += diff * diff;
                    }
                }
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            Ok(vec![samples.swap_remove(best)])
        }
    }
}

fn coordinatewise_median(samples: &[Conformation]) -> Vec<[f64; 3]> {
    let n = samples[0].n_atoms();
    let mut out = vec![[0.0; 3]; n];
    for atom in 0..n {
        for axis in 0..3 {
            let mut vals: Vec<f64> = samples.iter().map(|s| s.coords[atom][axis]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let m = vals.len();
            out[atom][axis] = if m % 2 == 1 {
                vals[m / 2]
            } else {
                0.5 * (vals[m / 2 - 1] + vals[m / 2])
            };
        }
    }
    out
}
