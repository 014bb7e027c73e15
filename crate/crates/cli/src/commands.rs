//! Subcommand implementations.

use crate::formats::{
    read_json, read_tokens, write_json, write_tokens, GridJson, LabelsJson,
};
use crate::{
    CompareArgs, DecodeArgs, EncodeArgs, ExportArgs, FileDefaults, MetricsArgs, RefineArgs,
    SegmentArgs, TrainArgs, ValidateArgs,
};
use anyhow::{bail, Context, Result};
use nalgebra::Vector3;
use simvox_core::codec::{
    compare_representations, decode as decode_tokens, encode as encode_grid, reports_to_csv,
    TokenizerModel,
};
use simvox_core::mesh::{load_mesh, normalize, save_mesh, TriMesh};
use simvox_core::metrics::{
    chamfer, default_tau, fscore, projection_psnr_meshes, sample_surface, scale_error,
    voxel_iou, voxelize_for_metrics, MetricReport,
};
use simvox_core::schema::parse_spec;
use simvox_core::segmentation::{segment_mesh, split_parts};
use simvox_core::voxel::{label_parts, voxelize, PartLabeledGrid, VoxelizeMode};
use simvox_flow::{load_model, loss_curve_csv, sample, save_model, train, TrainConfig};
use std::path::Path;

const DEFAULT_RES: u32 = 32;
const DEFAULT_SAMPLES: usize = 10_000;

fn load_normalized(path: &Path) -> Result<TriMesh> {
    let mesh = load_mesh(path).with_context(|| format!("loading {}", path.display()))?;
    let (normalized, _) = normalize(&mesh)?;
    Ok(normalized)
}

fn load_spec(path: &Path) -> Result<simvox_core::schema::PhysicalAssetSpec> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_spec(&text)?)
}

fn labels_from_spec(spec: &simvox_core::schema::PhysicalAssetSpec) -> Result<PartLabeledGrid> {
    let grids = spec
        .parts
        .iter()
        .map(|p| spec.part_grid(p.id))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(label_parts(&grids)?)
}

pub fn encode(args: EncodeArgs, defaults: &FileDefaults) -> Result<()> {
    let res = args.res.or(defaults.res).unwrap_or(DEFAULT_RES);
    let mode: VoxelizeMode = args
        .mode
        .or(defaults.mode())
        .unwrap_or(crate::ModeArg::Surface)
        .into();
    let grid = match (&args.mesh, &args.grid) {
        (Some(mesh_path), None) => {
            let mesh = load_normalized(mesh_path)?;
            voxelize(&mesh, res, mode)?
        }
        (None, Some(grid_path)) => read_json::<GridJson>(grid_path)?.into_grid()?,
        _ => bail!("exactly one of --mesh or --grid is required"),
    };
    write_tokens(&encode_grid(&grid), &args.out)?;
    Ok(())
}

pub fn decode(args: DecodeArgs, defaults: &FileDefaults) -> Result<()> {
    let res = args.res.or(defaults.res).unwrap_or(DEFAULT_RES);
    let tokens = read_tokens(&args.tokens, res)?;
    let grid = decode_tokens(&tokens)?;
    write_json(&GridJson::from_grid(&grid), &args.out)?;
    Ok(())
}

pub fn compare_tokens(args: CompareArgs, defaults: &FileDefaults) -> Result<()> {
    let res = args.res.or(defaults.res).unwrap_or(DEFAULT_RES);
    let mode: VoxelizeMode = args
        .mode
        .or(defaults.mode())
        .unwrap_or(crate::ModeArg::Surface)
        .into();
    let digit_group = args
        .digit_group
        .or(defaults.digit_group)
        .unwrap_or(TokenizerModel::default().digit_group);
    let mesh = load_normalized(&args.mesh)?;
    let reports = compare_representations(&mesh, res, mode, &TokenizerModel { digit_group })?;
    std::fs::write(&args.out, reports_to_csv(&reports))
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

pub fn train_refiner(args: TrainArgs, defaults: &FileDefaults) -> Result<()> {
    let mut config: TrainConfig = match &args.config_file {
        Some(p) => serde_json::from_str(
            &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = args.seed.or(defaults.seed) {
        config.seed = seed;
    }
    let mode: VoxelizeMode = args
        .mode
        .or(defaults.mode())
        .unwrap_or(crate::ModeArg::Solid)
        .into();

    let factor = config.fine_resolution / config.coarse_resolution.max(1);
    let mut dataset = Vec::with_capacity(args.meshes.len());
    for path in &args.meshes {
        let mesh = load_normalized(path)?;
        let fine = voxelize(&mesh, config.fine_resolution, mode)?;
        let coarse = simvox_core::voxel::downsample(&fine, factor)?;
        dataset.push((coarse, fine));
    }

    let result = train(&dataset, &config)?;
    save_model(&result.model, &args.out)?;
    if let Some(curve_path) = &args.loss_curve {
        std::fs::write(curve_path, loss_curve_csv(&result.loss_curve))
            .with_context(|| format!("writing {}", curve_path.display()))?;
    }
    let first = result.loss_curve.first().copied().unwrap_or(0.0);
    let last = result.loss_curve.last().copied().unwrap_or(0.0);
    println!(
        "trained {} steps: loss {first:.4} -> {last:.4}, checkpoint {}",
        result.loss_curve.len(),
        args.out.display()
    );
    Ok(())
}

pub fn refine(args: RefineArgs, defaults: &FileDefaults) -> Result<()> {
    let model = load_model(&args.model)?;
    let coarse_tokens = read_tokens(&args.coarse, model.config.coarse_resolution)?;
    let coarse = decode_tokens(&coarse_tokens)?;
    let seed = args.seed.or(defaults.seed).unwrap_or(0);
    let image_cond = vec![0.0; model.config.image_cond_dim];
    let fine = sample(&model, &coarse, args.steps, seed, &image_cond)?;
    write_tokens(&encode_grid(&fine), &args.out)?;
    println!(
        "refined {} coarse cells into {} fine cells at {}^3",
        coarse.len(),
        fine.len(),
        fine.resolution()
    );
    Ok(())
}

pub fn segment(args: SegmentArgs) -> Result<()> {
    let mesh = load_normalized(&args.mesh)?;
    let labels = match (&args.spec, &args.labels) {
        (Some(spec_path), None) => labels_from_spec(&load_spec(spec_path)?)?,
        (None, Some(labels_path)) => read_json::<LabelsJson>(labels_path)?.into_labels()?,
        _ => bail!("exactly one of --spec or --labels is required"),
    };
    let segmented = segment_mesh(&mesh, &labels)?;
    for part in &segmented.empty_parts {
        eprintln!("warning: part {part} received no faces");
    }
    if let Some(labels_path) = &args.labels_out {
        write_json(&LabelsJson::from_labels(&labels), labels_path)?;
    }
    let split = split_parts(&segmented.mesh, labels.part_count())?;
    std::fs::create_dir_all(&args.out_dir)?;
    for (id, part_mesh) in (0u32..).zip(&split.meshes) {
        let path = args.out_dir.join(format!("part_{id}.obj"));
        save_mesh(part_mesh, &path)?;
    }
    println!(
        "wrote {} part meshes to {}",
        split.meshes.len(),
        args.out_dir.display()
    );
    Ok(())
}

pub fn export(args: ExportArgs) -> Result<()> {
    let spec = load_spec(&args.spec)?;
    let labeled_mesh = match &args.mesh {
        None => None,
        Some(mesh_path) => {
            let mesh = load_normalized(mesh_path)?;
            let labels = match &args.labels {
                Some(labels_path) => read_json::<LabelsJson>(labels_path)?.into_labels()?,
                None => labels_from_spec(&spec)?,
            };
            let segmented = segment_mesh(&mesh, &labels)?;
            for part in &segmented.empty_parts {
                eprintln!("warning: part {part} received no faces");
            }
            Some(segmented.mesh)
        }
    };
    let bundle = simvox_core::export::export(&spec, labeled_mesh.as_ref())?;
    bundle.write(&args.out)?;
    println!(
        "exported {} parts to {}",
        bundle.part_meshes.len(),
        args.out.display()
    );
    Ok(())
}

pub fn validate(args: ValidateArgs) -> Result<()> {
    let report = simvox_core::export::validate_bundle(&args.bundle)?;
    print!("{}", report.to_text());
    if let Some(path) = &args.report {
        write_json(&report, path)?;
    }
    if !report.all_passed() {
        bail!("bundle validation failed");
    }
    Ok(())
}

pub fn metrics(args: MetricsArgs, defaults: &FileDefaults) -> Result<()> {
    let res = args.res.or(defaults.res).unwrap_or(DEFAULT_RES);
    let samples = args.samples.or(defaults.samples).unwrap_or(DEFAULT_SAMPLES);
    let seed = args.seed.or(defaults.seed).unwrap_or(0);

    let pred = load_normalized(&args.pred)?;
    let gt = load_normalized(&args.gt)?;

    let pred_points = sample_surface(&pred, samples, seed)?;
    let gt_points = sample_surface(&gt, samples, seed.wrapping_add(1))?;
    let tau = match args.tau.or(defaults.tau) {
        Some(t) => t,
        None => default_tau(&gt_points),
    };

    let psnr = projection_psnr_meshes(&pred, &gt)?;
    let cd = chamfer(&pred_points, &gt_points)?;
    let f = fscore(&pred_points, &gt_points, tau)?;
    let iou = voxel_iou(
        &voxelize_for_metrics(&pred, res)?,
        &voxelize_for_metrics(&gt, res)?,
    )?;

    let scale = match (&args.pred_extents, &args.gt_extents) {
        (Some(p), Some(g)) => Some(scale_error(parse_extents(p)?, parse_extents(g)?)?),
        (None, None) => None,
        _ => bail!("--pred-extents and --gt-extents must be given together"),
    };

    let report = MetricReport {
        psnr,
        cd,
        fscore: f,
        scale_error: scale,
        iou: Some(iou),
    };
    write_json(&report, &args.out)?;
    if let Some(csv) = &args.csv {
        std::fs::write(csv, report.to_csv())
            .with_context(|| format!("writing {}", csv.display()))?;
    }
    println!(
        "psnr {:.2} dB, cd {:.6}, fscore {:.2}, iou {:.4}",
        psnr, cd, f, iou
    );
    Ok(())
}

fn parse_extents(text: &str) -> Result<Vector3<f64>> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|w| w.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad extents {text:?} (expected x,y,z)"))?;
    if parts.len() != 3 {
        bail!("extents need 3 components, got {}", parts.len());
    }
    Ok(Vector3::new(parts[0], parts[1], parts[2]))
}
