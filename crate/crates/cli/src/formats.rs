//! On-disk JSON layouts for grids and label grids, plus token-file i/o.
//!
//! Token files hold the raw run text plus a trailing newline. Grid files
//! are `{"resolution": R, "cells": [[x,y,z], ...]}` with cells sorted by
//! linear index; label files add the part id as a fourth element and a
//! `part_count` field.

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use simvox_core::codec::TokenString;
use simvox_core::voxel::{PartLabeledGrid, VoxelGrid};
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
pub struct GridJson {
    pub resolution: u32,
    pub cells: Vec<[u32; 3]>,
}

impl GridJson {
    pub fn from_grid(grid: &VoxelGrid) -> Self {
        GridJson {
            resolution: grid.resolution(),
            cells: grid.cells().map(|(x, y, z)| [x, y, z]).collect(),
        }
    }

    pub fn into_grid(self) -> Result<VoxelGrid> {
        VoxelGrid::from_cells(
            self.resolution,
            self.cells.into_iter().map(|[x, y, z]| (x, y, z)),
        )
        .context("invalid grid json")
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LabelsJson {
    pub resolution: u32,
    pub part_count: u32,
    pub cells: Vec<[u32; 4]>,
}

impl LabelsJson {
    pub fn from_labels(labels: &PartLabeledGrid) -> Self {
        LabelsJson {
            resolution: labels.resolution(),
            part_count: labels.part_count(),
            cells: labels
                .entries()
                .map(|((x, y, z), id)| [x, y, z, id])
                .collect(),
        }
    }

    pub fn into_labels(self) -> Result<PartLabeledGrid> {
        PartLabeledGrid::new(
            self.resolution,
            self.part_count,
            self.cells
                .into_iter()
                .map(|[x, y, z, id]| ((x, y, z), id)),
        )
        .context("invalid labels json")
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_tokens(tokens: &TokenString, path: &Path) -> Result<()> {
    std::fs::write(path, format!("{}\n", tokens.text))
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_tokens(path: &Path, resolution: u32) -> Result<TokenString> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(TokenString::new(text.trim_end().to_string(), resolution))
}
