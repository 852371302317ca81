//! Synthetic toy datasets and their line-oriented file format.
//!
//! A dataset is a list of classes, each with a fixed type sequence and a
//! set of conformers. The file format is text, human-diffable, and loses
//! nothing: coordinates are written with 17 significant digits.
//!
//! ```text
//! SYMDRIFT-DS v1
//! META seed=42 params=...
//! CLASS c000 3 2
//! 0 0 1
//! CONF 0
//! <x> <y> <z>   (3 lines)
//! CONF 1
//! ...
//! ```

use crate::error::{Error, Result};
use crate::geometry::{apply_group, center, sample_group_element, AtomType, Conformation};
use crate::rng::RandomSource;
use std::fmt::Write as _;
use std::path::Path;

pub const DATASET_HEADER: &str = "SYMDRIFT-DS v1";

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetClass {
    pub class_id: String,
    pub types: Vec<AtomType>,
    pub conformers: Vec<Vec<[f64; 3]>>,
}

impl DatasetClass {
    pub fn conformation(&self, index: usize) -> Result<Conformation> {
        let coords = self
            .conformers
            .get(index)
            .ok_or_else(|| Error::Data(format!("conformer {index} out of range")))?;
        Conformation::new(coords.clone(), self.types.clone(), self.class_id.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetMetadata {
    pub seed: u64,
    /// One-line description of the generation parameters.
    pub params: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub classes: Vec<DatasetClass>,
    pub metadata: DatasetMetadata,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        for class in &self.classes {
            if class.conformers.is_empty() {
                return Err(Error::Data(format!("class {} has no conformers", class.class_id)));
            }
            if class.types.is_empty() {
                return Err(Error::Data(format!("class {} has no atoms", class.class_id)));
            }
            for (k, conf) in class.conformers.iter().enumerate() {
                if conf.len() != class.types.len() {
                    return Err(Error::Data(format!(
                        "class {} conformer {k}: {} atoms vs {} types",
                        class.class_id,
                        conf.len(),
                        class.types.len()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn class(&self, class_id: &str) -> Option<&DatasetClass> {
        self.classes.iter().find(|c| c.class_id == class_id)
    }
}

/// Parameters of the synthetic dataset generator.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyDatasetSpec {
    pub n_classes: usize,
    pub atoms_min: usize,
    pub atoms_max: usize,
    pub type_alphabet: u32,
    pub conformers_min: usize,
    pub conformers_max: usize,
    /// Spread of the per-class template cloud.
    pub template_sigma: f64,
    /// Per-conformer Gaussian perturbation of the template.
    pub conformer_sigma: f64,
    /// Apply an independent random group element to each stored conformer,
    /// so the stored empirical distribution is deliberately not invariant.
    pub orbit_scramble: bool,
}

impl Default for ToyDatasetSpec {
    fn default() -> Self {
        Self {
            n_classes: 8,
            atoms_min: 4,
            atoms_max: 6,
            type_alphabet: 3,
            conformers_min: 10,
            conformers_max: 10,
            template_sigma: 1.0,
            conformer_sigma: 0.05,
            orbit_scramble: true,
        }
    }
}

impl ToyDatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes == 0
            || self.atoms_min == 0
            || self.conformers_min == 0
            || self.type_alphabet == 0
        {
            return Err(Error::InvalidConfig("toy dataset counts must be >= 1".into()));
        }
        if self.atoms_min > self.atoms_max || self.conformers_min > self.conformers_max {
            return Err(Error::InvalidConfig("toy dataset ranges are inverted".into()));
        }
        if self.template_sigma < 0.0 || self.conformer_sigma < 0.0 {
            return Err(Error::InvalidConfig("sigma values must be >= 0".into()));
        }
        Ok(())
    }

    fn describe(&self) -> String {
        format!(
            "n_classes={} atoms={}..{} alphabet={} conformers={}..{} template_sigma={} conformer_sigma={} orbit_scramble={}",
            self.n_classes,
            self.atoms_min,
            self.atoms_max,
            self.type_alphabet,
            self.conformers_min,
            self.conformers_max,
            self.template_sigma,
            self.conformer_sigma,
            self.orbit_scramble
        )
    }
}

/// Draw a synthetic dataset: per class a random centered template plus
/// Gaussian-perturbed conformers, optionally orbit-scrambled.
pub fn generate_toy_dataset(spec: &ToyDatasetSpec, rng: &mut RandomSource) -> Result<Dataset> {
    spec.validate()?;
    let mut classes = Vec::with_capacity(spec.n_classes);
    for c in 0..spec.n_classes {
        let n = rng.range_inclusive(spec.atoms_min, spec.atoms_max);
        let types: Vec<AtomType> = (0..n).map(|_| rng.index(spec.type_alphabet as usize) as u32).collect();
        let class_id = format!("c{c:03}");
        let template: Vec<[f64; 3]> = (0..n)
            .map(|_| {
                [
                    rng.normal() * spec.template_sigma,
                    rng.normal() * spec.template_sigma,
                    rng.normal() * spec.template_sigma,
                ]
            })
            .collect();
        let template = center(&Conformation::new(template, types.clone(), class_id.clone())?)?;
        let n_conf = rng.range_inclusive(spec.conformers_min, spec.conformers_max);
        let mut conformers = Vec::with_capacity(n_conf);
        for _ in 0..n_conf {
            let coords: Vec<[f64; 3]> = template
                .coords
                .iter()
                .map(|row| {
                    [
                        row[0] + rng.normal() * spec.conformer_sigma,
                        row[1] + rng.normal() * spec.conformer_sigma,
                        row[2] + rng.normal() * spec.conformer_sigma,
                    ]
                })
                .collect();
            let mut conf = Conformation::new(coords, types.clone(), class_id.clone())?;
            if spec.orbit_scramble {
                let g = sample_group_element(rng, &types);
                conf = apply_group(&g, &conf)?;
            }
            conformers.push(center(&conf)?.coords);
        }
        classes.push(DatasetClass {
            class_id,
            types,
            conformers,
        });
    }
    let ds = Dataset {
        classes,
        metadata: DatasetMetadata {
            seed: rng.seed(),
            params: spec.describe(),
        },
    };
    ds.validate()?;
    Ok(ds)
}

fn fmt_coord(v: f64) -> String {
    // 17 significant digits round-trips every f64 exactly
    format!("{v:.16e}")
}

/// Render a dataset in the line-oriented text format.
pub fn render_dataset(ds: &Dataset) -> Result<String> {
    ds.validate()?;
    let mut out = String::new();
    writeln_str(&mut out, DATASET_HEADER);
    writeln_str(
        &mut out,
        &format!("META seed={} params={}", ds.metadata.seed, ds.metadata.params),
    );
    for class in &ds.classes {
        writeln_str(
            &mut out,
            &format!(
                "CLASS {} {} {}",
                class.class_id,
                class.types.len(),
                class.conformers.len()
            ),
        );
        let type_line: Vec<String> = class.types.iter().map(|t| t.to_string()).collect();
        writeln_str(&mut out, &type_line.join(" "));
        for (k, conf) in class.conformers.iter().enumerate() {
            writeln_str(&mut out, &format!("CONF {k}"));
            for row in conf {
                writeln_str(
                    &mut out,
                    &format!("{} {} {}", fmt_coord(row[0]), fmt_coord(row[1]), fmt_coord(row[2])),
                );
            }
        }
    }
    Ok(out)
}

fn writeln_str(buf: &mut String, line: &str) {
    let _ = writeln!(buf, "{line}");
}

pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, render_dataset(ds)?)?;
    Ok(())
}

struct LineParser<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> LineParser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate(),
        }
    }

    /// Next line, 1-based line number attached.
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.lines.next() {
            Some((i, l)) => Ok((i + 1, l)),
            None => Err(Error::Parse {
                line: 0,
                msg: format!("unexpected end of file, expected {what}"),
            }),
        }
    }
}

fn parse_field<T: std::str::FromStr>(line: usize, field: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse {field} from {raw:?}"),
    })
}

/// Parse a dataset from the text format; errors carry the offending line.
pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut p = LineParser::new(text);
    let (ln, header) = p.next("header")?;
    if header.trim() != DATASET_HEADER {
        return Err(Error::Parse {
            line: ln,
            msg: format!("expected header {DATASET_HEADER:?}, got {header:?}"),
        });
    }
    let (ln, meta_line) = p.next("META line")?;
    let meta = meta_line
        .strip_prefix("META ")
        .ok_or_else(|| Error::Parse {
            line: ln,
            msg: "expected META line".into(),
        })?;
    let (seed_part, params_part) = meta.split_once(' ').unwrap_or((meta, ""));
    let seed: u64 = parse_field(
        ln,
        "seed",
        seed_part.strip_prefix("seed=").ok_or_else(|| Error::Parse {
            line: ln,
            msg: "expected seed=<u64>".into(),
        })?,
    )?;
    let params = params_part.strip_prefix("params=").unwrap_or(params_part).to_string();

    let mut classes = Vec::new();
    loop {
        let (ln, line) = match p.lines.next() {
            None => break,
            Some((i, l)) => (i + 1, l),
        };
        if line.trim().is_empty() {
            continue;
        }
        let rest = line.strip_prefix("CLASS ").ok_or_else(|| Error::Parse {
            line: ln,
            msg: format!("expected CLASS line, got {line:?}"),
        })?;
        let mut parts = rest.split_whitespace();
        let class_id = parts
            .next()
            .ok_or_else(|| Error::Parse {
                line: ln,
                msg: "CLASS line missing id".into(),
            })?
            .to_string();
        let n: usize = parse_field(ln, "atom count", parts.next().unwrap_or(""))?;
        let n_conf: usize = parse_field(ln, "conformer count", parts.next().unwrap_or(""))?;

        let (tln, type_line) = p.next("type line")?;
        let types: Vec<AtomType> = type_line
            .split_whitespace()
            .map(|t| parse_field(tln, "atom type", t))
            .collect::<Result<_>>()?;
        if types.len() != n {
            return Err(Error::Parse {
                line: tln,
                msg: format!("expected {n} types, got {}", types.len()),
            });
        }
        let mut conformers = Vec::with_capacity(n_conf);
        for k in 0..n_conf {
            let (cln, conf_line) = p.next("CONF line")?;
            let idx_raw = conf_line.strip_prefix("CONF ").ok_or_else(|| Error::Parse {
                line: cln,
                msg: format!("expected CONF line, got {conf_line:?}"),
            })?;
            let idx: usize = parse_field(cln, "conformer index", idx_raw.trim())?;
            if idx != k {
                return Err(Error::Parse {
                    line: cln,
                    msg: format!("expected conformer index {k}, got {idx}"),
                });
            }
            let mut coords = Vec::with_capacity(n);
            for _ in 0..n {
                let (rln, row) = p.next("coordinate row")?;
                let vals: Vec<f64> = row
                    .split_whitespace()
                    .map(|v| parse_field(rln, "coordinate", v))
                    .collect::<Result<_>>()?;
                if vals.len() != 3 {
                    return Err(Error::Parse {
                        line: rln,
                        msg: format!("expected 3 coordinates, got {}", vals.len()),
                    });
                }
                coords.push([vals[0], vals[1], vals[2]]);
            }
            conformers.push(coords);
        }
        classes.push(DatasetClass {
            class_id,
            types,
            conformers,
        });
    }
    let ds = Dataset {
        classes,
        metadata: DatasetMetadata { seed, params },
    };
    ds.validate()?;
    Ok(ds)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    parse_dataset(&std::fs::read_to_string(path)?)
}
