use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nsegment::analysis::{DEFAULT_BIN_EDGES, DEFAULT_TINY_THRESHOLD};
use nsegment::dataset::{load_pair, save_image, Split};
use nsegment::pipeline::{augment_corpus, corpus_area_report, replay, tile_corpus, CorpusInputs};
use nsegment::preview::render_preview;
use nsegment::transform::{parse_fill, parse_interp, parse_mapping, parse_resize};
use nsegment::{AugmentConfig, ClassMap, DatasetManifest, EdgePolicy, Mode, Palette, TilingSpec, WarpSpec};

mod config;

use config::{pick, FileConfig};

/// Label-only elastic deformation for segmentation datasets.
#[derive(Parser)]
#[command(name = "nsegment", version)]
struct Cli {
    /// TOML file with defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Augment a corpus for one or more epochs.
    Augment(AugmentArgs),
    /// Render a panel grid of deformed labels over an (alpha, sigma) grid.
    Preview(PreviewArgs),
    /// Connected-component area statistics of masks.
    Stats(StatsArgs),
    /// Cut large pairs into fixed-size patches.
    Tile(TileArgs),
}

#[derive(Args, Default)]
struct InputArgs {
    /// Tab-separated manifest of image and mask paths.
    #[arg(long, conflicts_with_all = ["images", "masks"])]
    manifest: Option<PathBuf>,
    /// Image directory, paired with --masks by file stem.
    #[arg(long, requires = "masks")]
    images: Option<PathBuf>,
    #[arg(long)]
    masks: Option<PathBuf>,
    /// RGB-to-index palette for color-coded masks.
    #[arg(long)]
    palette: Option<PathBuf>,
    /// Targets by source index, e.g. "0,1,2,3,4,ignore".
    #[arg(long)]
    class_map: Option<String>,
}

#[derive(Args)]
struct WarpArgs {
    /// {forward|backward}
    #[arg(long)]
    mapping: Option<String>,
    /// {ignore|nearest}
    #[arg(long)]
    fill: Option<String>,
    /// {nearest|bilinear}, used by backward image warps.
    #[arg(long)]
    image_interp: Option<String>,
}

#[derive(Args)]
struct AugmentArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    out: PathBuf,
    /// {label|image|identical}
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    /// Cartesian product "a1,a2,...xs1,s2,...".
    #[arg(long)]
    omega: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    warp: WarpArgs,
    #[arg(long)]
    hflip_p: Option<f64>,
    /// Random resize bounds "lo:hi".
    #[arg(long)]
    resize: Option<String>,
    /// Rerun from a provenance sidecar; other augmentation flags are ignored.
    #[arg(long, conflicts_with_all = ["manifest", "images"])]
    replay: Option<PathBuf>,
}

#[derive(Args)]
struct PreviewArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    /// "a1,a2,...xs1,s2,..."
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    warp: WarpArgs,
    #[arg(long)]
    palette: Option<PathBuf>,
    #[arg(long)]
    class_map: Option<String>,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Split name used in the summary line.
    #[arg(long)]
    split: Option<String>,
    /// Output path; writes `<report>.json` and `<report>.csv`.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Lower bin edges, e.g. "0,10,100,1000,10000".
    #[arg(long, value_delimiter = ',')]
    bins: Option<Vec<u64>>,
    /// Components below this area count as tiny.
    #[arg(long)]
    tiny: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct TileArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    tile: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    /// {snap|drop}
    #[arg(long)]
    edge: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn seed_fallback() -> Result<Option<u64>> {
    match std::env::var("NSEG_SEED") {
        Ok(s) => Ok(Some(s.trim().parse().with_context(|| format!("NSEG_SEED={s:?} is not an integer"))?)),
        Err(_) => Ok(None),
    }
}

fn corpus_inputs(input: &InputArgs, file: &FileConfig) -> Result<CorpusInputs> {
    let palette_path = pick(input.palette.clone(), &file.palette);
    let palette = palette_path.as_deref().map(Palette::load).transpose()?;
    let class_map_spec = pick(input.class_map.clone(), &file.class_map);
    let class_map = class_map_spec.as_deref().map(str::parse::<ClassMap>).transpose()?;
    Ok(CorpusInputs {
        palette,
        palette_path,
        class_map,
        class_map_spec,
    })
}

fn manifest(input: &InputArgs, split: Split, masks_only: bool) -> Result<DatasetManifest> {
    Ok(match (&input.manifest, &input.images, &input.masks) {
        (Some(m), _, _) => DatasetManifest::read(m, split)?,
        (None, Some(i), Some(m)) => DatasetManifest::from_dirs(i, m, split)?,
        (None, None, Some(m)) if masks_only => DatasetManifest::masks_in(m, split)?,
        _ => bail!("give --manifest, or --images with --masks"),
    })
}

fn warp_spec(args: &WarpArgs, file: &FileConfig) -> Result<WarpSpec> {
    let mut spec = WarpSpec::default();
    if let Some(m) = pick(args.mapping.clone(), &file.mapping) {
        spec.mapping = parse_mapping(&m)?;
    }
    if let Some(f) = pick(args.fill.clone(), &file.fill) {
        spec.fill = parse_fill(&f)?;
    }
    if let Some(i) = pick(args.image_interp.clone(), &file.image_interp) {
        spec.image_interp = parse_interp(&i)?;
    }
    Ok(spec)
}

fn augment_config(args: &AugmentArgs, file: &FileConfig) -> Result<AugmentConfig> {
    let mut c = AugmentConfig::default();
    if let Some(m) = pick(args.mode.clone(), &file.mode) {
        c.mode = m.parse::<Mode>()?;
    }
    if let Some(p) = pick(args.p, &file.p) {
        c.p = p;
    }
    if let Some(o) = &args.omega {
        c.omega = o.parse()?;
    } else if let Some(o) = &file.omega {
        c.omega = o.to_omega()?;
    }
    if let Some(s) = pick(args.seed, &file.seed).or(seed_fallback()?) {
        c.master_seed = s;
    }
    c.warp_spec = warp_spec(&args.warp, file)?;
    if let Some(h) = pick(args.hflip_p, &file.hflip_p) {
        c.hflip_p = h;
    }
    if let Some(r) = pick(args.resize.clone(), &file.resize) {
        c.resize_range = Some(parse_resize(&r)?);
    }
    c.validate()?;
    Ok(c)
}

fn cmd_augment(args: AugmentArgs, file: &FileConfig) -> Result<()> {
    let workers = pick(args.workers, &file.workers).unwrap_or_else(default_workers);
    if let Some(sidecar) = &args.replay {
        let prov = replay(sidecar, &args.out, workers)?;
        println!("replayed {} sample-epochs into {}", prov.samples.len(), args.out.display());
        return Ok(());
    }
    let config = augment_config(&args, file)?;
    let epochs = pick(args.epochs, &file.epochs).unwrap_or(1);
    let inputs = corpus_inputs(&args.input, file)?;
    let manifest = manifest(&args.input, Split::Train, false)?;
    let prov = augment_corpus(&manifest, &config, epochs, &args.out, workers, &inputs)?;
    let applied = prov.samples.iter().filter(|s| !s.deformation.is_skipped()).count();
    println!(
        "{} samples x {} epochs: {} deformed, {} skipped -> {}",
        manifest.entries.len(),
        epochs,
        applied,
        prov.samples.len() - applied,
        args.out.display()
    );
    Ok(())
}

fn cmd_preview(args: PreviewArgs, file: &FileConfig) -> Result<()> {
    let palette_path = pick(args.palette.clone(), &file.palette);
    let palette = palette_path.as_deref().map(Palette::load).transpose()?;
    let class_map = pick(args.class_map.clone(), &file.class_map)
        .as_deref()
        .map(str::parse::<ClassMap>)
        .transpose()?;
    let pair = load_pair(&args.image, &args.mask, palette.as_ref(), class_map.as_ref())?;
    let grid = pick(args.grid.clone(), &file.grid).unwrap_or_else(|| "1,15,30,50,100x3,5,10".into());
    let (alphas, sigmas) = parse_grid(&grid)?;
    let seed = pick(args.seed, &file.seed).or(seed_fallback()?).unwrap_or(0);
    let spec = warp_spec(&args.warp, file)?;
    let preview = render_preview(&pair, &alphas, &sigmas, seed, &spec)?;
    save_image(&args.out, &preview.panel)?;
    println!("{} panels ({}x{} grid) -> {}", preview.panel_count(), preview.rows, preview.cols, args.out.display());
    Ok(())
}

fn parse_grid(s: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .with_context(|| format!("grid {s:?} must look like \"a1,a2xs1,s2\""))?;
    let list = |t: &str| -> Result<Vec<f64>> {
        t.split(',')
            .map(|v| v.trim().parse::<f64>().with_context(|| format!("{v:?} in grid is not a number")))
            .collect()
    };
    Ok((list(a)?, list(b)?))
}

fn report_paths(report: &Path) -> (PathBuf, PathBuf) {
    let stem = match report.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("csv") => report.with_extension(""),
        _ => report.to_path_buf(),
    };
    (stem.with_extension("json"), stem.with_extension("csv"))
}

fn cmd_stats(args: StatsArgs, file: &FileConfig) -> Result<()> {
    let split_name = pick(args.split.clone(), &file.split).unwrap_or_else(|| "train".into());
    let split: Split = split_name.parse()?;
    let inputs = corpus_inputs(&args.input, file)?;
    let manifest = manifest(&args.input, split, true)?;
    let bins = pick(args.bins.clone(), &file.bins).unwrap_or_else(|| DEFAULT_BIN_EDGES.to_vec());
    let tiny = pick(args.tiny, &file.tiny).unwrap_or(DEFAULT_TINY_THRESHOLD);
    let workers = pick(args.workers, &file.workers).unwrap_or_else(default_workers);
    let report = corpus_area_report(&manifest, &bins, tiny, workers, &inputs)?;
    if let Some(path) = pick(args.report.clone(), &file.report) {
        let (json, csv) = report_paths(&path);
        if let Some(dir) = json.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        report.write_json(&json)?;
        report.write_csv_file(&csv)?;
    }
    println!(
        "{split_name}: tiny_fraction={:.4} ({} of {} components below {} px, {} masks)",
        report.tiny_fraction, report.tiny_components, report.total_components, tiny, report.masks
    );
    Ok(())
}

fn cmd_tile(args: TileArgs, file: &FileConfig) -> Result<()> {
    let edge = pick(args.edge.clone(), &file.edge).unwrap_or_else(|| "snap".into());
    let spec = TilingSpec::new(
        pick(args.tile, &file.tile).unwrap_or(nsegment::dataset::DEFAULT_TILE),
        pick(args.stride, &file.stride).unwrap_or(nsegment::dataset::DEFAULT_STRIDE),
        edge.parse::<EdgePolicy>()?,
    )?;
    let inputs = corpus_inputs(&args.input, file)?;
    let manifest = manifest(&args.input, Split::Train, false)?;
    let workers = pick(args.workers, &file.workers).unwrap_or_else(default_workers);
    let tiled = tile_corpus(&manifest, &spec, &args.out, workers, &inputs)?;
    println!("{} pairs -> {} patches in {}", manifest.entries.len(), tiled.entries.len(), args.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Augment(a) => cmd_augment(a, &file),
        Command::Preview(a) => cmd_preview(a, &file),
        Command::Stats(a) => cmd_stats(a, &file),
        Command::Tile(a) => cmd_tile(a, &file),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
