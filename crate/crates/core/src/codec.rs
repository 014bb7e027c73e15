//! Compressed text serialization of sparse voxel sets.
//!
//! Occupied cells are mapped to linear indices and consecutive indices are
//! merged into hyphenated runs, e.g. `"0-2,5"` for `{0,1,2,5}`. The grammar
//! is:
//!
//! ```text
//! runs := run ("," run)*
//! run  := INT | INT "-" INT        (in "a-b", a < b)
//! ```
//!
//! Canonical strings have runs sorted ascending with a gap of at least one
//! index between consecutive runs (adjacent runs must be merged), and
//! singleton cells written as a bare integer, never `k-k`. The empty grid
//! encodes to the empty string.
//!
//! Token accounting uses a pluggable, deterministic tokenizer model standing
//! in for a language model's BPE: every non-digit character is one token and
//! maximal digit runs are chunked into groups (default 3) from the left.

use crate::mesh::{write_obj, TriMesh};
use crate::voxel::{voxelize, VoxelError, VoxelGrid, VoxelizeMode};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("malformed token syntax at {0:?}")]
    MalformedSyntax(String),
    #[error("descending or empty range {0:?} (need a < b)")]
    DescendingRange(String),
    #[error("index {index} out of bounds for resolution {resolution} (max {max})")]
    IndexOutOfBounds {
        index: u64,
        resolution: u32,
        max: u32,
    },
    #[error("runs unsorted or overlapping at {0:?}")]
    UnsortedOrOverlapping(String),
    #[error("adjacent runs not merged at {0:?}")]
    AdjacentRuns(String),
    #[error(transparent)]
    Voxel(#[from] VoxelError),
}

/// A token string plus the resolution it was encoded at.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenString {
    pub text: String,
    pub resolution: u32,
}

impl TokenString {
    pub fn new(text: impl Into<String>, resolution: u32) -> Self {
        TokenString {
            text: text.into(),
            resolution,
        }
    }
}

/// Serialize occupied cells as maximal merged index runs.
pub fn encode(grid: &VoxelGrid) -> TokenString {
    use std::fmt::Write as _;
    let mut text = String::new();
    let mut run: Option<(u32, u32)> = None;
    let flush = |text: &mut String, (start, end): (u32, u32)| {
        if !text.is_empty() {
            text.push(',');
        }
        if start == end {
            let _ = write!(text, "{start}");
        } else {
            let _ = write!(text, "{start}-{end}");
        }
    };
    for idx in grid.indices() {
        run = match run {
            None => Some((idx, idx)),
            Some((start, end)) if idx == end + 1 => Some((start, idx)),
            Some(done) => {
                flush(&mut text, done);
                Some((idx, idx))
            }
        };
    }
    if let Some(done) = run {
        flush(&mut text, done);
    }
    TokenString::new(text, grid.resolution())
}

/// Exact inverse of [`encode`]. Rejects non-canonical input: descending
/// ranges, out-of-bounds indices, unsorted or overlapping runs, and adjacent
/// runs that should have been merged, each with the offending substring.
pub fn decode(tokens: &TokenString) -> Result<VoxelGrid, CodecError> {
    let resolution = tokens.resolution;
    let max = resolution
        .checked_mul(resolution)
        .and_then(|rr| rr.checked_mul(resolution))
        .ok_or(VoxelError::InvalidResolution(resolution))?;
    let text = tokens.text.trim();
    if text.is_empty() {
        return VoxelGrid::new(resolution).map_err(Into::into);
    }

    let parse_int = |s: &str| -> Result<u64, CodecError> {
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(CodecError::MalformedSyntax(s.to_string()));
        }
        s.parse().map_err(|_| CodecError::MalformedSyntax(s.to_string()))
    };
    let check_bounds = |v: u64| -> Result<u32, CodecError> {
        if v >= max as u64 {
            Err(CodecError::IndexOutOfBounds {
                index: v,
                resolution,
                max: max - 1,
            })
        } else {
            Ok(v as u32)
        }
    };

    let mut indices: Vec<u32> = Vec::new();
    let mut prev_end: Option<u32> = None;
    for piece in text.split(',') {
        let (start, end) = match piece.split_once('-') {
            None => {
                let v = check_bounds(parse_int(piece)?)?;
                (v, v)
            }
            Some((a, b)) => {
                let a = parse_int(a)?;
                let b = parse_int(b)?;
                if a >= b {
                    return Err(CodecError::DescendingRange(piece.to_string()));
                }
                (check_bounds(a)?, check_bounds(b)?)
            }
        };
        if let Some(pe) = prev_end {
            if start <= pe {
                return Err(CodecError::UnsortedOrOverlapping(piece.to_string()));
            }
            if start == pe + 1 {
                return Err(CodecError::AdjacentRuns(piece.to_string()));
            }
        }
        indices.extend(start..=end);
        prev_end = Some(end);
    }
    VoxelGrid::from_indices(resolution, indices).map_err(Into::into)
}

/// Deterministic stand-in for a language-model tokenizer: each non-digit
/// character is one token; maximal digit runs are split into groups of at
/// most `digit_group` digits, left to right, one token per group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerModel {
    pub digit_group: usize,
}

impl Default for TokenizerModel {
    fn default() -> Self {
        TokenizerModel { digit_group: 3 }
    }
}

pub fn count_tokens(text: &str, model: &TokenizerModel) -> usize {
    let group = model.digit_group.max(1);
    let mut count = 0usize;
    let mut digits = 0usize;
    for ch in text.chars() {
        if ch.is_ascii_digit() {
            digits += 1;
        } else {
            count += digits.div_ceil(group);
            digits = 0;
            count += 1;
        }
    }
    count + digits.div_ceil(group)
}

/// The five serializations whose token counts get compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    MeshText,
    QuantizedMesh,
    VoxelCoords,
    IndexList,
    MergedRuns,
}

impl Representation {
    pub fn name(self) -> &'static str {
        match self {
            Representation::MeshText => "mesh-text",
            Representation::QuantizedMesh => "quantized-mesh",
            Representation::VoxelCoords => "voxel-coords",
            Representation::IndexList => "index-list",
            Representation::MergedRuns => "merged-runs",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenReport {
    pub representation: Representation,
    pub tokens: usize,
    /// Token count of the raw mesh text divided by this representation's.
    pub ratio: f64,
}

/// Build all five serializations of a normalized mesh and count their
/// tokens. Counts always satisfy
/// merged-runs <= index-list <= voxel-coords.
pub fn compare_representations(
    mesh: &TriMesh,
    resolution: u32,
    mode: VoxelizeMode,
    model: &TokenizerModel,
) -> Result<Vec<TokenReport>, CodecError> {
    let grid = voxelize(mesh, resolution, mode)?;

    let mesh_text = write_obj(mesh);
    let quantized = quantized_mesh_text(mesh, resolution);
    let coords = grid
        .cells()
        .map(|(x, y, z)| format!("{x},{y},{z}"))
        .collect::<Vec<_>>()
        .join(";");
    let index_list = grid
        .indices()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let merged = encode(&grid).text;

    let counts = [
        (Representation::MeshText, count_tokens(&mesh_text, model)),
        (Representation::QuantizedMesh, count_tokens(&quantized, model)),
        (Representation::VoxelCoords, count_tokens(&coords, model)),
        (Representation::IndexList, count_tokens(&index_list, model)),
        (Representation::MergedRuns, count_tokens(&merged, model)),
    ];
    let merged_n = counts[4].1;
    let index_n = counts[3].1;
    let coords_n = counts[2].1;
    assert!(
        merged_n <= index_n && index_n <= coords_n,
        "token monotonicity violated: merged {merged_n}, index {index_n}, coords {coords_n}"
    );

    let baseline = counts[0].1 as f64;
    Ok(counts
        .into_iter()
        .map(|(representation, tokens)| TokenReport {
            representation,
            tokens,
            ratio: baseline / tokens.max(1) as f64,
        })
        .collect())
}

/// Mesh text with vertex coordinates quantized to integer cells in
/// `[0, resolution)`; faces unchanged.
fn quantized_mesh_text(mesh: &TriMesh, resolution: u32) -> String {
    use std::fmt::Write as _;
    let r = resolution as f64;
    let mut out = String::new();
    for v in &mesh.vertices {
        let q = |c: f64| ((c * r).floor() as i64).clamp(0, resolution as i64 - 1);
        let _ = writeln!(out, "v {} {} {}", q(v.x), q(v.y), q(v.z));
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

/// CSV with columns `representation,tokens,ratio`.
pub fn reports_to_csv(reports: &[TokenReport]) -> String {
    let mut out = String::from("representation,tokens,ratio\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{:.2}\n",
            r.representation.name(),
            r.tokens,
            r.ratio
        ));
    }
    out
}
