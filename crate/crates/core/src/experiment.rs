//! File-based experiment pipeline: dataset generation or loading, training,
//! one-shot sampling, metric evaluation, and the verification suite, glued
//! together by a flat key = value config.
//!
//! Everything is seeded through one root seed; sub-stages use labelled
//! forks, so identical config + seed reproduces every artifact byte for
//! byte.

use crate::align::{AlignStrategy, AlignVariant, InitOrder};
use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::ConfigMap;
use crate::dataset::{
    generate_toy_dataset, read_dataset, write_dataset, Dataset, DatasetClass, DatasetMetadata,
    ToyDatasetSpec,
};
use crate::drift::{DriftConfig, DriftSpace, Normalization};
use crate::error::{Error, Result};
use crate::generator::{sample_one_shot, train, GeneratorParams, SampleSelect, TrainConfig};
use crate::lab::{verify, McConfig, VerificationReport};
use crate::metrics::{coverage_amr, EvalConfig};
use crate::rng::RandomSource;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct SampleConfig {
    /// K = multiplier * L samples per class.
    pub multiplier: usize,
    pub select: SampleSelect,
}

#[derive(Debug, Clone)]
pub struct VerifySection {
    pub enabled: bool,
    pub mc: McConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Min,
    Max,
}

/// A declared acceptance threshold on one metric-report key.
#[derive(Debug, Clone)]
pub struct AcceptRule {
    pub metric: String,
    pub bound: Bound,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data_path: Option<PathBuf>,
    pub toy_spec: ToyDatasetSpec,
    pub train: TrainConfig,
    pub sample: SampleConfig,
    pub eval: EvalConfig,
    pub verify: VerifySection,
    pub accept: Vec<AcceptRule>,
}

fn parse_drift(cfg: &mut ConfigMap) -> Result<DriftConfig> {
    let defaults = DriftConfig::default();
    let space = match cfg.get_str("drift.space", "embedded").as_str() {
        "cartesian" => DriftSpace::Cartesian,
        "aligned" => DriftSpace::Aligned,
        "embedded" => DriftSpace::Embedded,
        other => {
            return Err(Error::InvalidConfig(format!(
                "key drift.space: expected cartesian|aligned|embedded, got {other:?}"
            )))
        }
    };
    let normalization = match cfg.get_str("drift.normalization", "one_sided").as_str() {
        "one_sided" => Normalization::OneSided,
        "two_sided" => Normalization::TwoSided,
        other => {
            return Err(Error::InvalidConfig(format!(
                "key drift.normalization: expected one_sided|two_sided, got {other:?}"
            )))
        }
    };
    let variant = match cfg.get_str("drift.align_strategy", "iterative").as_str() {
        "rotation_only" => AlignVariant::RotationOnly,
        "iterative" => AlignVariant::Iterative,
        "brute_force" => AlignVariant::BruteForce,
        other => {
            return Err(Error::InvalidConfig(format!(
                "key drift.align_strategy: expected rotation_only|iterative|brute_force, got {other:?}"
            )))
        }
    };
    let init_order = match cfg.get_str("drift.align_init_order", "rotation_first").as_str() {
        "rotation_first" => InitOrder::RotationFirst,
        "permutation_first" => InitOrder::PermutationFirst,
        other => {
            return Err(Error::InvalidConfig(format!(
                "key drift.align_init_order: expected rotation_first|permutation_first, got {other:?}"
            )))
        }
    };
    let config = DriftConfig {
        temperatures: cfg.get_f64_list("drift.temperatures", &defaults.temperatures)?,
        normalization,
        space,
        align_strategy: AlignStrategy {
            variant,
            max_iterations: cfg.get_usize("drift.align_max_iterations", 50)?,
            init_order,
        },
        norm_epsilon: cfg.get_f64("drift.norm_epsilon", defaults.norm_epsilon)?,
    };
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    pub fn from_config(cfg: &mut ConfigMap, seed_override: Option<u64>) -> Result<Self> {
        let seed = match seed_override {
            Some(s) => {
                // consume a config seed if present so finish() stays clean
                let _ = cfg.get_u64("seed", 0)?;
                s
            }
            None => cfg.get_u64("seed", 0)?,
        };
        let data_path = cfg.get_opt_str("data.path").map(PathBuf::from);
        let d = ToyDatasetSpec::default();
        let toy_spec = ToyDatasetSpec {
            n_classes: cfg.get_usize("data.n_classes", d.n_classes)?,
            atoms_min: cfg.get_usize("data.atoms_min", d.atoms_min)?,
            atoms_max: cfg.get_usize("data.atoms_max", d.atoms_max)?,
            type_alphabet: cfg.get_u64("data.type_alphabet", d.type_alphabet as u64)? as u32,
            conformers_min: cfg.get_usize("data.conformers_min", d.conformers_min)?,
            conformers_max: cfg.get_usize("data.conformers_max", d.conformers_max)?,
            template_sigma: cfg.get_f64("data.template_sigma", d.template_sigma)?,
            conformer_sigma: cfg.get_f64("data.conformer_sigma", d.conformer_sigma)?,
            orbit_scramble: cfg.get_bool("data.orbit_scramble", d.orbit_scramble)?,
        };
        let drift = parse_drift(cfg)?;
        let t = TrainConfig::default();
        let train = TrainConfig {
            n_classes_per_step: cfg.get_usize("train.n_classes_per_step", t.n_classes_per_step)?,
            n_pos: cfg.get_usize("train.n_pos", t.n_pos)?,
            n_neg: cfg.get_usize("train.n_neg", t.n_neg)?,
            learning_rate: cfg.get_f64("train.learning_rate", t.learning_rate)?,
            learning_rate_final: match cfg.get_opt_str("train.learning_rate_final") {
                None => None,
                Some(raw) => Some(raw.parse().map_err(|_| {
                    Error::InvalidConfig(format!(
                        "key train.learning_rate_final: cannot parse {raw:?}"
                    ))
                })?),
            },
            steps: cfg.get_usize("train.steps", t.steps)?,
            seed,
            drift,
            hidden_widths: cfg.get_usize_list("train.hidden", &t.hidden_widths)?,
            class_embed_dim: cfg.get_usize("train.class_embed_dim", t.class_embed_dim)?,
        };
        let select = match cfg.get_str("sample.select", "none").as_str() {
            "none" => SampleSelect::None,
            "median" => SampleSelect::Median,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "key sample.select: expected none|median, got {other:?}"
                )))
            }
        };
        let sample = SampleConfig {
            multiplier: cfg.get_usize("sample.multiplier", 2)?,
            select,
        };
        let e = EvalConfig::default();
        let eval = EvalConfig {
            delta: cfg.get_f64("eval.delta", e.delta)?,
            samples_per_class_multiplier: sample.multiplier,
        };
        eval.validate()?;
        let m = McConfig::default();
        let verify = VerifySection {
            enabled: cfg.get_bool("verify.enabled", false)?,
            mc: McConfig {
                n_group_samples: cfg.get_usize("verify.n_group_samples", m.n_group_samples)?,
                seed,
                tau_schedule: cfg.get_f64_list("verify.tau_schedule", &m.tau_schedule)?,
            },
        };
        let mut accept = Vec::new();
        for key in cfg.keys_with_prefix("accept.") {
            let rest = key.strip_prefix("accept.").unwrap();
            let (bound, metric) = if let Some(metric) = rest.strip_prefix("min.") {
                (Bound::Min, metric.to_string())
            } else if let Some(metric) = rest.strip_prefix("max.") {
                (Bound::Max, metric.to_string())
            } else {
                return Err(Error::InvalidConfig(format!(
                    "key {key}: acceptance thresholds are accept.min.<metric> or accept.max.<metric>"
                )));
            };
            let value = cfg.get_f64(&key, 0.0)?;
            accept.push(AcceptRule {
                metric,
                bound,
                value,
            });
        }
        train.validate()?;
        Ok(Self {
            seed,
            data_path,
            toy_spec,
            train,
            sample,
            eval,
            verify,
            accept,
        })
    }

    pub fn load(config_path: &Path, seed_override: Option<u64>) -> Result<Self> {
        let mut cfg = ConfigMap::from_file(config_path)?;
        let out = Self::from_config(&mut cfg, seed_override)?;
        cfg.finish()?;
        Ok(out)
    }
}

pub fn dataset_path(out_dir: &Path) -> PathBuf {
    out_dir.join("dataset.txt")
}

pub fn checkpoint_path(out_dir: &Path) -> PathBuf {
    out_dir.join("model.ckpt")
}

pub fn samples_path(out_dir: &Path) -> PathBuf {
    out_dir.join("samples.txt")
}

pub fn metrics_path(out_dir: &Path) -> PathBuf {
    out_dir.join("metrics.txt")
}

pub fn verification_path(out_dir: &Path) -> PathBuf {
    out_dir.join("verification.txt")
}

/// Load the dataset named by the config, or generate and persist the toy
/// dataset.
pub fn obtain_dataset(config: &ExperimentConfig, out_dir: &Path) -> Result<Dataset> {
    if let Some(path) = &config.data_path {
        return read_dataset(path);
    }
    let stored = dataset_path(out_dir);
    if stored.exists() {
        return read_dataset(&stored);
    }
    let mut rng = RandomSource::new(config.seed).fork(1);
    let ds = generate_toy_dataset(&config.toy_spec, &mut rng)?;
    write_dataset(&ds, &stored)?;
    Ok(ds)
}

pub fn cmd_gen_data(config: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let mut rng = RandomSource::new(config.seed).fork(1);
    let ds = generate_toy_dataset(&config.toy_spec, &mut rng)?;
    let path = dataset_path(out_dir);
    write_dataset(&ds, &path)?;
    Ok(path)
}

pub fn cmd_train(config: &ExperimentConfig, out_dir: &Path) -> Result<(PathBuf, f64)> {
    std::fs::create_dir_all(out_dir)?;
    let dataset = obtain_dataset(config, out_dir)?;
    let mut rng = RandomSource::new(config.seed).fork(2);
    let mut params = GeneratorParams::new(&dataset, &config.train, &mut rng)?;
    let losses = train(&mut params, &dataset, &config.train, &mut rng)?;
    let path = checkpoint_path(out_dir);
    save_checkpoint(&params, config.seed, &path)?;
    Ok((path, losses.last().copied().unwrap_or(f64::NAN)))
}

/// Draw K = multiplier * L samples per class and store them in the dataset
/// file format.
pub fn cmd_sample(config: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf> {
    let dataset = obtain_dataset(config, out_dir)?;
    let (params, _) = load_checkpoint(&checkpoint_path(out_dir))?;
    let mut rng = RandomSource::new(config.seed).fork(3);
    let mut classes = Vec::with_capacity(dataset.classes.len());
    for class in &dataset.classes {
        let k = config.sample.multiplier * class.conformers.len();
        let samples = sample_one_shot(&params, &class.class_id, k.max(1), &mut rng, config.sample.select)?;
        classes.push(DatasetClass {
            class_id: class.class_id.clone(),
            types: class.types.clone(),
            conformers: samples.into_iter().map(|c| c.coords).collect(),
        });
    }
    let out = Dataset {
        classes,
        metadata: DatasetMetadata {
            seed: config.seed,
            params: "generated samples".into(),
        },
    };
    let path = samples_path(out_dir);
    write_dataset(&out, &path)?;
    Ok(path)
}

/// Per-class and aggregate coverage / AMR metrics as a sorted key-value map.
pub fn evaluate(
    dataset: &Dataset,
    samples: &Dataset,
    eval: &EvalConfig,
) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    let mut per_metric: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for class in &dataset.classes {
        let generated_class = samples
            .class(&class.class_id)
            .ok_or_else(|| Error::Data(format!("no samples for class {}", class.class_id)))?;
        let references: Vec<_> = (0..class.conformers.len())
            .map(|k| class.conformation(k))
            .collect::<Result<_>>()?;
        let generated: Vec<_> = (0..generated_class.conformers.len())
            .map(|k| generated_class.conformation(k))
            .collect::<Result<_>>()?;
        let m = coverage_amr(&generated, &references, eval)?;
        for (name, value) in [
            ("cov_r", m.cov_r),
            ("amr_r", m.amr_r),
            ("cov_p", m.cov_p),
            ("amr_p", m.amr_p),
        ] {
            out.insert(format!("class.{}.{}", class.class_id, name), value);
            per_metric.entry(name).or_default().push(value);
        }
    }
    for (name, values) in per_metric {
        out.insert(format!("mean.{name}"), mean(&values));
        out.insert(format!("median.{name}"), median(&values));
    }
    out.insert("n_classes".into(), dataset.classes.len() as f64);
    Ok(out)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

pub fn render_metrics(metrics: &BTreeMap<String, f64>) -> String {
    let mut out = String::new();
    for (key, value) in metrics {
        let _ = writeln!(out, "{key} {value:.10e}");
    }
    out
}

pub fn cmd_eval(config: &ExperimentConfig, out_dir: &Path) -> Result<BTreeMap<String, f64>> {
    let dataset = obtain_dataset(config, out_dir)?;
    let samples = read_dataset(&samples_path(out_dir))?;
    let metrics = evaluate(&dataset, &samples, &config.eval)?;
    std::fs::write(metrics_path(out_dir), render_metrics(&metrics))?;
    Ok(metrics)
}

pub fn cmd_verify(config: &ExperimentConfig, out_dir: &Path) -> Result<VerificationReport> {
    std::fs::create_dir_all(out_dir)?;
    let report = verify(&config.verify.mc)?;
    std::fs::write(verification_path(out_dir), report.render_key_values())?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub metrics: BTreeMap<String, f64>,
    pub accept_failures: Vec<String>,
    pub verification: Option<VerificationReport>,
    pub final_loss: f64,
}

impl ExperimentOutcome {
    pub fn passed(&self) -> bool {
        self.accept_failures.is_empty()
    }
}

/// Evaluate the declared acceptance thresholds against the metric map.
pub fn check_accept_rules(rules: &[AcceptRule], metrics: &BTreeMap<String, f64>) -> Vec<String> {
    let mut failures = Vec::new();
    for rule in rules {
        match metrics.get(&rule.metric) {
            None => failures.push(format!("metric {} not found", rule.metric)),
            Some(&v) => {
                let ok = match rule.bound {
                    Bound::Min => v >= rule.value,
                    Bound::Max => v <= rule.value,
                };
                if !ok {
                    let dir = match rule.bound {
                        Bound::Min => ">=",
                        Bound::Max => "<=",
                    };
                    failures.push(format!("{} = {v:.6e} violates {dir} {:.6e}", rule.metric, rule.value));
                }
            }
        }
    }
    failures
}

/// Full pipeline: dataset, training, sampling, evaluation, optional
/// verification, acceptance thresholds.
pub fn run_experiment(
    config_path: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<ExperimentOutcome> {
    let config = ExperimentConfig::load(config_path, seed_override)?;
    std::fs::create_dir_all(out_dir)?;
    let (_, final_loss) = cmd_train(&config, out_dir)?;
    cmd_sample(&config, out_dir)?;
    let metrics = cmd_eval(&config, out_dir)?;
    let verification = if config.verify.enabled {
        Some(cmd_verify(&config, out_dir)?)
    } else {
        None
    };
    let accept_failures = check_accept_rules(&config.accept, &metrics);
    Ok(ExperimentOutcome {
        metrics,
        accept_failures,
        verification,
        final_loss,
    })
}
