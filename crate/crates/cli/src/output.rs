//! Artifact writers. Floats are written in their shortest round-trip
//! decimal form so that files reproduce the binary values exactly.

use std::fmt::Write as _;
use std::path::Path;

use multibump::model::ProblemSpec;
use serde::Serialize;

use crate::error::CliError;

/// One row per mesh node: coordinates, `u`, component label and `a`.
pub fn solution_csv(spec: &ProblemSpec, interior: &[f64]) -> String {
    let disc = spec.disc();
    let mesh = disc.mesh();
    let weights = disc.weights();
    let axes = ["x", "y", "z"];
    let mut out = String::new();
    for axis in axes.iter().take(mesh.dimension()) {
        out.push_str(axis);
        out.push(',');
    }
    out.push_str("u,label,a\n");
    let full = mesh.extend_to_all(interior);
    for g in 0..mesh.total_nodes() {
        for c in mesh.coordinates(g) {
            write!(out, "{c:?},").unwrap();
        }
        writeln!(
            out,
            "{:?},{},{:?}",
            full[g],
            weights.label(g).name(),
            weights.values()[g]
        )
        .unwrap();
    }
    out
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

pub fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}
