//! Generator checkpoints: text header, little-endian f64 payload.
//!
//! The header records the format version, architecture dimensions, and the
//! class table; the payload is the flat parameter vector in declared order
//! (per group: network layers as weights-then-biases, then each class's
//! embedding). The binary payload round-trips bit-exactly.

use crate::error::{Error, Result};
use crate::generator::{ClassEntry, GeneratorParams, GroupParams};
use crate::geometry::AtomType;
use crate::net::DenseNet;
use crate::rng::RandomSource;
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

pub const CHECKPOINT_HEADER: &str = "SYMDRIFT-CKPT v1";

pub fn save_checkpoint(params: &GeneratorParams, seed: u64, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{CHECKPOINT_HEADER}")?;
    writeln!(w, "seed {seed}")?;
    writeln!(w, "embed_dim {}", params.class_embed_dim)?;
    writeln!(w, "groups {}", params.groups.len())?;
    for (key, group) in &params.groups {
        let dims: Vec<String> = std::iter::once(group.net.input_dim())
            .chain(group.net.layers.iter().map(|l| l.out_dim))
            .map(|d| d.to_string())
            .collect();
        writeln!(
            w,
            "group {key} atoms {} dims {} classes {}",
            group.n_atoms,
            dims.join(" "),
            group.classes.len()
        )?;
        for (class_id, entry) in &group.classes {
            let types: Vec<String> = entry.types.iter().map(|t| t.to_string()).collect();
            writeln!(w, "class {class_id} types {}", types.join(" "))?;
        }
    }
    let flat = params.flat_params();
    writeln!(w, "payload {}", flat.len())?;
    for v in &flat {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn header_err(msg: impl Into<String>) -> Error {
    Error::CorruptCheckpoint(msg.into())
}

fn read_line(r: &mut impl BufRead) -> Result<String> {
    let mut line = String::new();
    let n = r.read_line(&mut line)?;
    if n == 0 {
        return Err(header_err("unexpected end of header"));
    }
    Ok(line.trim_end_matches(['\n', '\r']).to_string())
}

fn expect_token<'a>(parts: &mut impl Iterator<Item = &'a str>, what: &str) -> Result<&'a str> {
    parts.next().ok_or_else(|| header_err(format!("missing {what}")))
}

fn parse_num<T: std::str::FromStr>(raw: &str, what: &str) -> Result<T> {
    raw.parse().map_err(|_| header_err(format!("cannot parse {what} from {raw:?}")))
}

pub fn load_checkpoint(path: &Path) -> Result<(GeneratorParams, u64)> {
    let file = std::fs::File::open(path)?;
    let mut r = BufReader::new(file);
    let header = read_line(&mut r)?;
    if header != CHECKPOINT_HEADER {
        return Err(header_err(format!(
            "expected header {CHECKPOINT_HEADER:?}, got {header:?}"
        )));
    }
    let seed_line = read_line(&mut r)?;
    let seed: u64 = parse_num(
        seed_line.strip_prefix("seed ").ok_or_else(|| header_err("expected seed line"))?,
        "seed",
    )?;
    let embed_line = read_line(&mut r)?;
    let class_embed_dim: usize = parse_num(
        embed_line
            .strip_prefix("embed_dim ")
            .ok_or_else(|| header_err("expected embed_dim line"))?,
        "embed_dim",
    )?;
    let groups_line = read_line(&mut r)?;
    let n_groups: usize = parse_num(
        groups_line
            .strip_prefix("groups ")
            .ok_or_else(|| header_err("expected groups line"))?,
        "group count",
    )?;

    let mut groups: BTreeMap<String, GroupParams> = BTreeMap::new();
    let mut init_rng = RandomSource::new(0);
    for _ in 0..n_groups {
        let line = read_line(&mut r)?;
        let mut parts = line.split_whitespace();
        if expect_token(&mut parts, "group keyword")? != "group" {
            return Err(header_err(format!("expected group line, got {line:?}")));
        }
        let key = expect_token(&mut parts, "group key")?.to_string();
        if expect_token(&mut parts, "atoms keyword")? != "atoms" {
            return Err(header_err("expected atoms keyword"));
        }
        let n_atoms: usize = parse_num(expect_token(&mut parts, "atom count")?, "atom count")?;
        if expect_token(&mut parts, "dims keyword")? != "dims" {
            return Err(header_err("expected dims keyword"));
        }
        let rest: Vec<&str> = parts.collect();
        let classes_pos = rest
            .iter()
            .position(|&t| t == "classes")
            .ok_or_else(|| header_err("expected classes keyword"))?;
        let dims: Vec<usize> = rest[..classes_pos]
            .iter()
            .map(|t| parse_num(t, "dimension"))
            .collect::<Result<_>>()?;
        let n_classes: usize = parse_num(
            rest.get(classes_pos + 1).ok_or_else(|| header_err("missing class count"))?,
            "class count",
        )?;
        if dims.len() < 2 {
            return Err(header_err("group needs at least input and output dims"));
        }
        if dims[0] != 3 * n_atoms + class_embed_dim || *dims.last().unwrap() != 3 * n_atoms {
            return Err(header_err(format!(
                "group {key}: dims {dims:?} inconsistent with {n_atoms} atoms and embed_dim {class_embed_dim}"
            )));
        }
        let mut classes = BTreeMap::new();
        for _ in 0..n_classes {
            let cline = read_line(&mut r)?;
            let rest = cline
                .strip_prefix("class ")
                .ok_or_else(|| header_err(format!("expected class line, got {cline:?}")))?;
            let (class_id, types_part) = rest
                .split_once(" types ")
                .ok_or_else(|| header_err("class line missing types"))?;
            let types: Vec<AtomType> = types_part
                .split_whitespace()
                .map(|t| parse_num(t, "atom type"))
                .collect::<Result<_>>()?;
            if types.len() != n_atoms {
                return Err(header_err(format!(
                    "class {class_id}: {} types vs {n_atoms} atoms",
                    types.len()
                )));
            }
            classes.insert(
                class_id.to_string(),
                ClassEntry {
                    types,
                    embedding: vec![0.0; class_embed_dim],
                },
            );
        }
        groups.insert(
            key,
            GroupParams {
                net: DenseNet::new(&dims, &mut init_rng)?,
                n_atoms,
                classes,
            },
        );
    }
    let payload_line = read_line(&mut r)?;
    let n_payload: usize = parse_num(
        payload_line
            .strip_prefix("payload ")
            .ok_or_else(|| header_err("expected payload line"))?,
        "payload length",
    )?;
    let mut params = GeneratorParams {
        groups,
        class_embed_dim,
    };
    if n_payload != params.param_count() {
        return Err(header_err(format!(
            "payload length {n_payload} vs header-declared parameter count {}",
            params.param_count()
        )));
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * n_payload {
        return Err(header_err(format!(
            "payload is {} bytes, expected {}",
            bytes.len(),
            8 * n_payload
        )));
    }
    let flat: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    params.set_flat_params(&flat)?;
    Ok((params, seed))
}
