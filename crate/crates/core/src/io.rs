//! JSON instance files.
//!
//! ```json
//! {
//!   "n": 3, "m": 2,
//!   "triplets": [[0, 0, 1.0], [1, 2, -0.5]],
//!   "b": [1.0, 0.25],
//!   "objective": {"kind": "linear", "c": [1.0, 0.0, -1.0]},
//!   "meta": {"seed": 7, "family": "lp", "d": 3, "delta": 1.0}
//! }
//! ```
//!
//! Indices are 0-based. `objective`, `meta` and `witness` are optional.
//! Floats are written with shortest round-trip formatting, so a write-read
//! cycle is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::IoError;
use crate::probgen::{Family, InstanceMeta, Objective, ProblemInstance, Topology, TransmitPower};
use crate::system::SparseConstraintSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    n: usize,
    m: usize,
    triplets: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    objective: Option<ObjectiveBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<InstanceMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    witness: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectiveBlock {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q_triplets: Option<Vec<(usize, usize, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    topology: Option<Topology>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h_triplets: Option<Vec<(usize, usize, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    s: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_max: Option<f64>,
}

impl ObjectiveBlock {
    fn empty(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            c: None,
            q_triplets: None,
            topology: None,
            h_triplets: None,
            sigma: None,
            s: None,
            p_max: None,
        }
    }
}

fn missing(kind: &str, field: &str) -> IoError {
    IoError::Malformed(format!("{kind} objective needs `{field}`"))
}

fn encode_objective(objective: &Objective) -> Option<ObjectiveBlock> {
    match objective {
        Objective::None => None,
        Objective::Linear { c } => Some(ObjectiveBlock {
            c: Some(c.clone()),
            ..ObjectiveBlock::empty("linear")
        }),
        Objective::Quadratic { c, q, topology } => Some(ObjectiveBlock {
            c: Some(c.clone()),
            q_triplets: Some(q.clone()),
            topology: Some(*topology),
            ..ObjectiveBlock::empty("quadratic")
        }),
        Objective::TransmitPower(p) => Some(ObjectiveBlock {
            h_triplets: Some(p.h.clone()),
            sigma: Some(p.sigma),
            s: Some(p.s.clone()),
            p_max: Some(p.p_max),
            ..ObjectiveBlock::empty("transmit-power")
        }),
    }
}

fn decode_objective(block: Option<ObjectiveBlock>, n: usize) -> Result<Objective, IoError> {
    let Some(block) = block else {
        return Ok(Objective::None);
    };
    let kind = block.kind.as_str();
    let check_len = |name: &str, v: &[f64]| {
        if v.len() == n {
            Ok(())
        } else {
            Err(IoError::Malformed(format!("`{name}` has length {}, expected {n}", v.len())))
        }
    };
    let check_idx = |name: &str, t: &[(usize, usize, f64)]| {
        if t.iter().all(|&(i, j, _)| i < n && j < n) {
            Ok(())
        } else {
            Err(IoError::Malformed(format!("`{name}` index out of range")))
        }
    };
    match kind {
        "none" => Ok(Objective::None),
        "linear" => {
            let c = block.c.ok_or_else(|| missing(kind, "c"))?;
            check_len("c", &c)?;
            Ok(Objective::Linear { c })
        }
        "quadratic" => {
            let c = block.c.unwrap_or_else(|| vec![0.0; n]);
            check_len("c", &c)?;
            let q = block.q_triplets.ok_or_else(|| missing(kind, "q_triplets"))?;
            check_idx("q_triplets", &q)?;
            Ok(Objective::Quadratic {
                c,
                q,
                topology: block.topology.unwrap_or(Topology::ErdosRenyi),
            })
        }
        "transmit-power" => {
            let h = block.h_triplets.ok_or_else(|| missing(kind, "h_triplets"))?;
            check_idx("h_triplets", &h)?;
            let s = block.s.ok_or_else(|| missing(kind, "s"))?;
            check_len("s", &s)?;
            Ok(Objective::TransmitPower(TransmitPower {
                h,
                sigma: block.sigma.ok_or_else(|| missing(kind, "sigma"))?,
                s,
                p_max: block.p_max.ok_or_else(|| missing(kind, "p_max"))?,
            }))
        }
        other => Err(IoError::Malformed(format!("unknown objective kind `{other}`"))),
    }
}

pub fn to_json(instance: &ProblemInstance) -> Result<String, IoError> {
    let system = &instance.system;
    let file = InstanceFile {
        n: system.n(),
        m: system.m(),
        triplets: system.triplets().collect(),
        b: system.b().to_vec(),
        objective: encode_objective(&instance.objective),
        meta: Some(instance.meta.clone()),
        witness: instance.witness.clone(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Parses an instance. Files without `meta` get seed 0, family
/// `constraints-only`, `d = 0` and `delta = 0`.
pub fn from_json(text: &str) -> Result<ProblemInstance, IoError> {
    let file: InstanceFile = serde_json::from_str(text)?;
    if file.b.len() != file.m {
        return Err(IoError::Malformed(format!(
            "`b` has length {}, expected m = {}",
            file.b.len(),
            file.m
        )));
    }
    if let Some(w) = &file.witness {
        if w.len() != file.n {
            return Err(IoError::Malformed("`witness` length differs from n".into()));
        }
    }
    let system = SparseConstraintSystem::new(file.n, file.triplets, file.b)?;
    let objective = decode_objective(file.objective, file.n)?;
    let meta = file.meta.unwrap_or(InstanceMeta {
        seed: 0,
        family: Family::ConstraintsOnly,
        d: 0,
        delta: 0.0,
    });
    Ok(ProblemInstance {
        system,
        objective,
        meta,
        witness: file.witness,
    })
}

pub fn write_instance(path: impl AsRef<Path>, instance: &ProblemInstance) -> Result<(), IoError> {
    fs::write(path, to_json(instance)? + "\n")?;
    Ok(())
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<ProblemInstance, IoError> {
    from_json(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probgen::{generate, GeneratorConfig};

    #[test]
    fn round_trip_every_family() {
        let cfg = GeneratorConfig::new(9, 7, 3, 11);
        for family in Family::ALL {
            let inst = generate(family, &cfg).unwrap();
            let text = to_json(&inst).unwrap();
            let back = from_json(&text).unwrap();
            assert_eq!(back, inst);
            assert_eq!(to_json(&back).unwrap(), text);
        }
    }

    #[test]
    fn minimal_file() {
        let inst = from_json(r#"{"n": 2, "m": 1, "triplets": [[0, 1, 2.0]], "b": [1.0]}"#).unwrap();
        assert_eq!(inst.system.row_norms(), &[2.0]);
        assert_eq!(inst.objective, Objective::None);
    }

    #[test]
    fn malformed_files() {
        assert!(matches!(
            from_json(r#"{"n": 2, "m": 2, "triplets": [[0, 1, 2.0]], "b": [1.0]}"#),
            Err(IoError::Malformed(_))
        ));
        assert!(matches!(
            from_json(r#"{"n": 2, "m": 1, "triplets": [[0, 5, 2.0]], "b": [1.0]}"#),
            Err(IoError::System(_))
        ));
        assert!(matches!(
            from_json(r#"{"n": 1, "m": 1, "triplets": [[0, 0, 1.0]], "b": [1.0], "objective": {"kind": "linear"}}"#),
            Err(IoError::Malformed(_))
        ));
        assert!(matches!(
            from_json(r#"{"n": 1, "m": 1, "triplets": [[0, 0, 1.0]], "b": [1.0], "extra": 3}"#),
            Err(IoError::Json(_))
        ));
    }
}
