//! Python bindings for the symdrift core: conformations, group actions,
//! alignment, the invariant embedding, drift fields, metrics, toy datasets,
//! and the experiment pipeline.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use std::path::PathBuf;

use symdrift::align::{AlignStrategy, AlignVariant, InitOrder};
use symdrift::dataset::{generate_toy_dataset, read_dataset, write_dataset, ToyDatasetSpec};
use symdrift::drift::{
    multi_temperature_drift, DriftBatch, DriftConfig, DriftSpace, Normalization, TargetSet,
};
use symdrift::embedding::{embed, embed_pullback};
use symdrift::error::Error;
use symdrift::geometry::{
    apply_group, center, sample_haar_rotation, sample_type_permutation, Conformation, GroupElement,
};
use symdrift::lab::{mc_aggregated_drift, mc_symmetrized_drift, verify, McConfig};
use symdrift::metrics::{coverage_amr, dmae, rmsd_aligned, EvalConfig};
use symdrift::rng::RandomSource;

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn coords_from_py(coords: Vec<[f64; 3]>) -> Vec<[f64; 3]> {
    coords
}

/// A typed 3D point cloud.
#[pyclass(name = "Conformation", from_py_object)]
#[derive(Clone)]
struct PyConformation {
    inner: Conformation,
}

#[pymethods]
impl PyConformation {
    #[new]
    #[pyo3(signature = (coords, types, class_id = String::new()))]
    fn new(coords: Vec<[f64; 3]>, types: Vec<u32>, class_id: String) -> PyResult<Self> {
        Ok(Self {
            inner: Conformation::new(coords_from_py(coords), types, class_id).map_err(err)?,
        })
    }

    #[getter]
    fn coords(&self) -> Vec<[f64; 3]> {
        self.inner.coords.clone()
    }

    #[getter]
    fn types(&self) -> Vec<u32> {
        self.inner.types.clone()
    }

    #[getter]
    fn class_id(&self) -> String {
        self.inner.class_id.clone()
    }

    fn n_atoms(&self) -> usize {
        self.inner.n_atoms()
    }

    fn centered(&self) -> PyResult<PyConformation> {
        Ok(Self {
            inner: center(&self.inner).map_err(err)?,
        })
    }

    fn rms_norm(&self) -> f64 {
        self.inner.rms_norm()
    }

    fn __repr__(&self) -> String {
        format!(
            "Conformation(n_atoms={}, class_id={:?})",
            self.inner.n_atoms(),
            self.inner.class_id
        )
    }
}

/// A proper rotation plus a type-preserving permutation.
#[pyclass(name = "GroupElement", from_py_object)]
#[derive(Clone)]
struct PyGroupElement {
    inner: GroupElement,
}

#[pymethods]
impl PyGroupElement {
    #[new]
    fn new(rotation: [[f64; 3]; 3], permutation: Vec<usize>) -> PyResult<Self> {
        Ok(Self {
            inner: GroupElement::from_rows(rotation, permutation).map_err(err)?,
        })
    }

    #[getter]
    fn rotation(&self) -> [[f64; 3]; 3] {
        self.inner.rotation_rows()
    }

    #[getter]
    fn permutation(&self) -> Vec<usize> {
        self.inner.permutation.clone()
    }

    fn inverse(&self) -> PyGroupElement {
        Self {
            inner: self.inner.inverse(),
        }
    }

    fn apply(&self, conf: &PyConformation) -> PyResult<PyConformation> {
        Ok(PyConformation {
            inner: apply_group(&self.inner, &conf.inner).map_err(err)?,
        })
    }
}

#[pyfunction(name = "sample_haar_rotation")]
fn py_sample_haar_rotation(seed: u64) -> [[f64; 3]; 3] {
    let mut rng = RandomSource::new(seed);
    let r = sample_haar_rotation(&mut rng);
    GroupElement { rotation: r, permutation: vec![] }.rotation_rows()
}

#[pyfunction(name = "sample_type_permutation")]
fn py_sample_type_permutation(seed: u64, types: Vec<u32>) -> Vec<usize> {
    let mut rng = RandomSource::new(seed);
    sample_type_permutation(&mut rng, &types)
}

/// Sorted type-blocked pairwise distances. Returns (values, blocks) where
/// blocks maps "a-b" type pairs to (offset, length).
#[pyfunction(name = "embed")]
fn py_embed(conf: &PyConformation) -> PyResult<(Vec<f64>, Vec<((u32, u32), (usize, usize))>)> {
    let e = embed(&conf.inner).map_err(err)?;
    let blocks = e
        .blocks
        .iter()
        .map(|b| (b.pair_type, (b.offset, b.len)))
        .collect();
    Ok((e.values, blocks))
}

/// Pull an embedding cotangent back to a coordinate gradient.
/// Returns (gradient, hit_sort_tie).
#[pyfunction(name = "embed_pullback")]
fn py_embed_pullback(conf: &PyConformation, cotangent: Vec<f64>) -> PyResult<(Vec<[f64; 3]>, bool)> {
    let g = embed_pullback(&conf.inner, &cotangent).map_err(err)?;
    Ok((g.gradient, g.non_smooth_tie))
}

fn strategy_from_str(variant: &str, max_iterations: usize, init_order: &str) -> PyResult<AlignStrategy> {
    let variant = match variant {
        "rotation_only" => AlignVariant::RotationOnly,
        "iterative" => AlignVariant::Iterative,
        "brute_force" => AlignVariant::BruteForce,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown alignment variant {other:?}"
            )))
        }
    };
    let init_order = match init_order {
        "rotation_first" => InitOrder::RotationFirst,
        "permutation_first" => InitOrder::PermutationFirst,
        other => return Err(PyValueError::new_err(format!("unknown init order {other:?}"))),
    };
    Ok(AlignStrategy {
        variant,
        max_iterations,
        init_order,
    })
}

/// Optimal alignment of y onto x.
/// Returns (group_element, residual, iterations).
#[pyfunction(name = "align")]
#[pyo3(signature = (x, y, variant = "iterative", max_iterations = 50, init_order = "rotation_first"))]
fn py_align(
    x: &PyConformation,
    y: &PyConformation,
    variant: &str,
    max_iterations: usize,
    init_order: &str,
) -> PyResult<(PyGroupElement, f64, usize)> {
    let strategy = strategy_from_str(variant, max_iterations, init_order)?;
    let res = symdrift::align::align(&x.inner, &y.inner, &strategy).map_err(err)?;
    Ok((
        PyGroupElement {
            inner: res.group_element,
        },
        res.residual,
        res.iterations,
    ))
}

/// Minimum-cost assignment; returns (permutation, cost).
#[pyfunction(name = "hungarian_assignment")]
fn py_hungarian(cost: Vec<Vec<f64>>) -> PyResult<(Vec<usize>, f64)> {
    symdrift::align::hungarian_assignment(&cost).map_err(err)
}

#[pyfunction(name = "rmsd_aligned")]
fn py_rmsd(x1: &PyConformation, x2: &PyConformation) -> PyResult<f64> {
    rmsd_aligned(&x1.inner, &x2.inner).map_err(err)
}

#[pyfunction(name = "dmae")]
fn py_dmae(x1: &PyConformation, x2: &PyConformation) -> PyResult<f64> {
    dmae(&x1.inner, &x2.inner).map_err(err)
}

/// Coverage / AMR metrics; returns a dict with cov_r, amr_r, cov_p, amr_p.
#[pyfunction(name = "coverage_amr")]
#[pyo3(signature = (generated, references, delta = 0.5))]
fn py_coverage(
    py: Python<'_>,
    generated: Vec<PyConformation>,
    references: Vec<PyConformation>,
    delta: f64,
) -> PyResult<Py<pyo3::types::PyDict>> {
    let gen: Vec<Conformation> = generated.into_iter().map(|c| c.inner).collect();
    let refs: Vec<Conformation> = references.into_iter().map(|c| c.inner).collect();
    let config = EvalConfig {
        delta,
        ..EvalConfig::default()
    };
    let m = coverage_amr(&gen, &refs, &config).map_err(err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("cov_r", m.cov_r)?;
    dict.set_item("amr_r", m.amr_r)?;
    dict.set_item("cov_p", m.cov_p)?;
    dict.set_item("amr_p", m.amr_p)?;
    Ok(dict.into())
}

/// Multi-temperature drift of flat points toward shared target sets.
#[pyfunction(name = "multi_temperature_drift")]
#[pyo3(signature = (points, pos_targets, neg_targets, temperatures = vec![0.02, 0.05, 0.2], normalization = "one_sided"))]
fn py_drift(
    points: Vec<Vec<f64>>,
    pos_targets: Vec<Vec<f64>>,
    neg_targets: Vec<Vec<f64>>,
    temperatures: Vec<f64>,
    normalization: &str,
) -> PyResult<Vec<Vec<f64>>> {
    let normalization = match normalization {
        "one_sided" => Normalization::OneSided,
        "two_sided" => Normalization::TwoSided,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown normalization {other:?}"
            )))
        }
    };
    let batch = DriftBatch::new(
        points,
        TargetSet::Shared(pos_targets),
        TargetSet::Shared(neg_targets),
    )
    .map_err(err)?;
    let config = DriftConfig {
        temperatures,
        normalization,
        space: DriftSpace::Cartesian,
        ..DriftConfig::default()
    };
    multi_temperature_drift(&batch, &config).map_err(err)
}

/// Monte-Carlo symmetrized drift; returns (drift, standard_error, n_samples).
#[pyfunction(name = "mc_symmetrized_drift")]
#[pyo3(signature = (x, targets, tau, n_group_samples = 20000, seed = 0))]
fn py_mc_sym(
    x: &PyConformation,
    targets: Vec<PyConformation>,
    tau: f64,
    n_group_samples: usize,
    seed: u64,
) -> PyResult<(Vec<[f64; 3]>, f64, usize)> {
    let mc = McConfig {
        n_group_samples,
        seed,
        ..McConfig::default()
    };
    let ts: Vec<Conformation> = targets.into_iter().map(|c| c.inner).collect();
    let out = mc_symmetrized_drift(&x.inner, &ts, tau, &mc).map_err(err)?;
    Ok((out.drift, out.standard_error, out.n_samples))
}

/// Monte-Carlo aggregated drift; returns (drift, standard_error, n_samples).
#[pyfunction(name = "mc_aggregated_drift")]
#[pyo3(signature = (x, targets, tau, n_group_samples = 20000, seed = 0))]
fn py_mc_agg(
    x: &PyConformation,
    targets: Vec<PyConformation>,
    tau: f64,
    n_group_samples: usize,
    seed: u64,
) -> PyResult<(Vec<[f64; 3]>, f64, usize)> {
    let mc = McConfig {
        n_group_samples,
        seed,
        ..McConfig::default()
    };
    let ts: Vec<Conformation> = targets.into_iter().map(|c| c.inner).collect();
    let out = mc_aggregated_drift(&x.inner, &ts, tau, &mc).map_err(err)?;
    Ok((out.drift, out.standard_error, out.n_samples))
}

/// Run the analytic verification suite; returns a list of
/// (name, error, tolerance, passed, samples) tuples.
#[pyfunction(name = "verify")]
#[pyo3(signature = (seed = 0, n_group_samples = 20000))]
fn py_verify(seed: u64, n_group_samples: usize) -> PyResult<Vec<(String, f64, f64, bool, usize)>> {
    let mc = McConfig {
        n_group_samples,
        seed,
        ..McConfig::default()
    };
    let report = verify(&mc).map_err(err)?;
    Ok(report
        .checks
        .into_iter()
        .map(|c| (c.name, c.error, c.tolerance, c.passed, c.samples))
        .collect())
}

/// Generate a toy dataset and write it to `path`; returns the class ids.
#[pyfunction(name = "generate_dataset")]
#[pyo3(signature = (path, seed = 0, n_classes = 8, atoms_min = 4, atoms_max = 6,
    type_alphabet = 12, conformers = 10, template_sigma = 1.0, conformer_sigma = 0.1,
    orbit_scramble = true))]
#[allow(clippy::too_many_arguments)]
fn py_generate_dataset(
    path: PathBuf,
    seed: u64,
    n_classes: usize,
    atoms_min: usize,
    atoms_max: usize,
    type_alphabet: u32,
    conformers: usize,
    template_sigma: f64,
    conformer_sigma: f64,
    orbit_scramble: bool,
) -> PyResult<Vec<String>> {
    let spec = ToyDatasetSpec {
        n_classes,
        atoms_min,
        atoms_max,
        type_alphabet,
        conformers_min: conformers,
        conformers_max: conformers,
        template_sigma,
        conformer_sigma,
        orbit_scramble,
    };
    let mut rng = RandomSource::new(seed);
    let ds = generate_toy_dataset(&spec, &mut rng).map_err(err)?;
    write_dataset(&ds, &path).map_err(err)?;
    Ok(ds.classes.into_iter().map(|c| c.class_id).collect())
}

/// Load a dataset file; returns {class_id: [Conformation, ...]}.
#[pyfunction(name = "load_dataset")]
fn py_load_dataset(
    py: Python<'_>,
    path: PathBuf,
) -> PyResult<Py<pyo3::types::PyDict>> {
    let ds = read_dataset(&path).map_err(err)?;
    let dict = pyo3::types::PyDict::new(py);
    for class in &ds.classes {
        let confs: Vec<PyConformation> = (0..class.conformers.len())
            .map(|k| {
                Ok(PyConformation {
                    inner: class.conformation(k).map_err(err)?,
                })
            })
            .collect::<PyResult<_>>()?;
        dict.set_item(&class.class_id, confs)?;
    }
    Ok(dict.into())
}

/// Run the full experiment pipeline from a config file.
/// Returns (passed, metrics dict).
#[pyfunction(name = "run_experiment")]
#[pyo3(signature = (config_path, out_dir, seed = None))]
fn py_run_experiment(
    py: Python<'_>,
    config_path: PathBuf,
    out_dir: PathBuf,
    seed: Option<u64>,
) -> PyResult<(bool, Py<pyo3::types::PyDict>)> {
    let outcome = symdrift::experiment::run_experiment(&config_path, &out_dir, seed).map_err(err)?;
    let dict = pyo3::types::PyDict::new(py);
    for (k, v) in &outcome.metrics {
        dict.set_item(k, *v)?;
    }
    Ok((outcome.passed(), dict.into()))
}

#[pymodule]
fn symdrift_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConformation>()?;
    m.add_class::<PyGroupElement>()?;
    m.add_function(wrap_pyfunction!(py_sample_haar_rotation, m)?)?;
    m.add_function(wrap_pyfunction!(py_sample_type_permutation, m)?)?;
    m.add_function(wrap_pyfunction!(py_embed, m)?)?;
    m.add_function(wrap_pyfunction!(py_embed_pullback, m)?)?;
    m.add_function(wrap_pyfunction!(py_align, m)?)?;
    m.add_function(wrap_pyfunction!(py_hungarian, m)?)?;
    m.add_function(wrap_pyfunction!(py_rmsd, m)?)?;
    m.add_function(wrap_pyfunction!(py_dmae, m)?)?;
    m.add_function(wrap_pyfunction!(py_coverage, m)?)?;
    m.add_function(wrap_pyfunction!(py_drift, m)?)?;
    m.add_function(wrap_pyfunction!(py_mc_sym, m)?)?;
    m.add_function(wrap_pyfunction!(py_mc_agg, m)?)?;
    m.add_function(wrap_pyfunction!(py_verify, m)?)?;
    m.add_function(wrap_pyfunction!(py_generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(py_load_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(py_run_experiment, m)?)?;
    Ok(())
}
