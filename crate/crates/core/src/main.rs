use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dpc_inpaint::baselines::Method;
use dpc_inpaint::bench::{run_benchmark, HoleParams};
use dpc_inpaint::cube::SegmentationConfig;
use dpc_inpaint::holes::{synthesize_holes, HoleMask};
use dpc_inpaint::pipeline::{inpaint_sequence_with, RunOptions};
use dpc_inpaint::ply::PlyFormat;
use dpc_inpaint::sequence::{load_sequence, save_sequence, FramePattern};
use dpc_inpaint::synth::{synthetic_sequence, SynthParams};
use dpc_inpaint::{Error, FrameSequence, InpaintConfig, Result};

#[derive(Parser)]
#[command(name = "dpc-inpaint", version, about = "Fill holes in dynamic point cloud sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inpaint a sequence of PLY frames.
    Run(RunArgs),
    /// Corrupt a sequence with ball holes and compare inpainting methods.
    Bench(BenchArgs),
    /// Write a synthetic sequence.
    Synth(SynthArgs),
    /// Punch seeded ball holes into a sequence and write the hole mask.
    Corrupt(CorruptArgs),
}

#[derive(Args)]
struct Tuning {
    /// JSON file with a full or partial configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Gaussian width of the spatial graph weights.
    #[arg(long)]
    sigma: Option<f64>,
    /// Neighbours of the spatial graph.
    #[arg(long)]
    knn_k: Option<usize>,
    /// Neighbours of the descriptor graph.
    #[arg(long)]
    k_graph: Option<usize>,
    #[arg(long)]
    icp_iters: Option<usize>,
    /// ICP tolerance relative to the cube edge.
    #[arg(long)]
    icp_tol: Option<f64>,
    /// Fraction of closest ICP pairs kept.
    #[arg(long)]
    icp_trim: Option<f64>,
    /// Search box edge over cube edge.
    #[arg(long)]
    box_scale: Option<f64>,
    #[arg(long)]
    window_stride: Option<f64>,
    #[arg(long)]
    temporal_radius: Option<usize>,
    #[arg(long)]
    vote_threshold: Option<f64>,
    #[arg(long)]
    vote_max_dist: Option<f64>,
    #[arg(long)]
    temporal_max_dist: Option<f64>,
    /// Cube edge; stride and pitch default to half and an eighth of it.
    #[arg(long)]
    edge_length: Option<f64>,
    #[arg(long, requires = "edge_length")]
    stride: Option<f64>,
    #[arg(long, requires = "edge_length")]
    voxel_pitch: Option<f64>,
    #[arg(long)]
    points_per_cube: Option<usize>,
    /// Leave wall-clock times out of reports.
    #[arg(long)]
    no_timing: bool,
}

impl Tuning {
    fn config(&self) -> Result<InpaintConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
                serde_json::from_str(&text)?
            }
            None => InpaintConfig::default(),
        };
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut cfg.weights.alpha, self.alpha);
        set(&mut cfg.weights.beta, self.beta);
        set(&mut cfg.weights.gamma, self.gamma);
        set(&mut cfg.graph.sigma, self.sigma);
        set(&mut cfg.icp_tol, self.icp_tol);
        set(&mut cfg.icp_trim, self.icp_trim);
        set(&mut cfg.box_scale, self.box_scale);
        set(&mut cfg.vote_threshold, self.vote_threshold);
        if let Some(k) = self.knn_k {
            cfg.graph.k = k;
        }
        if let Some(k) = self.k_graph {
            cfg.k_graph = k;
        }
        if let Some(n) = self.icp_iters {
            cfg.icp_iters = n;
        }
        if let Some(r) = self.temporal_radius {
            cfg.temporal_radius = r;
        }
        if let Some(n) = self.points_per_cube {
            cfg.points_per_cube = n;
        }
        cfg.window_stride = self.window_stride.or(cfg.window_stride);
        cfg.vote_max_dist = self.vote_max_dist.or(cfg.vote_max_dist);
        cfg.temporal_max_dist = self.temporal_max_dist.or(cfg.temporal_max_dist);
        if let Some(edge) = self.edge_length {
            let base = SegmentationConfig::from_edge(edge)?;
            cfg.segmentation = Some(SegmentationConfig::new(
                edge,
                self.stride.unwrap_or(base.stride),
                self.voxel_pitch.unwrap_or(base.voxel_pitch),
            )?);
        }
        if self.no_timing {
            cfg.timing = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    input: PathBuf,
    /// Frame file pattern, e.g. name_%04d.ply.
    #[arg(long)]
    pattern: String,
    #[arg(long)]
    output: PathBuf,
    /// Hole mask JSON; without it holes are detected from point density.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Per-cube report JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Directory receiving one graph edge list per solved cube.
    #[arg(long)]
    dump_graphs: Option<PathBuf>,
    /// Write ASCII PLY instead of binary.
    #[arg(long)]
    ascii: bool,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args)]
struct BenchArgs {
    /// Sequence directory; a synthetic sequence is used when absent.
    #[arg(long, requires = "pattern")]
    input: Option<PathBuf>,
    #[arg(long)]
    pattern: Option<String>,
    /// Synthetic sequence parameters as JSON.
    #[arg(long, conflicts_with = "input")]
    synth: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    holes: usize,
    #[arg(long, default_value_t = 5.0)]
    radius: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "proposed,intra-only,none-fill,plane-fill")]
    methods: String,
    /// Benchmark report JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value = "frame_%04d.ply")]
    pattern: String,
    /// Synthetic sequence parameters as JSON.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    ascii: bool,
}

#[derive(Args)]
struct CorruptArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    pattern: String,
    #[arg(long)]
    output: PathBuf,
    /// Where to write the hole mask JSON.
    #[arg(long)]
    mask: PathBuf,
    #[arg(long, default_value_t = 8)]
    holes: usize,
    #[arg(long, default_value_t = 5.0)]
    radius: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    ascii: bool,
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

fn format(ascii: bool) -> PlyFormat {
    if ascii {
        PlyFormat::Ascii
    } else {
        PlyFormat::BinaryLittleEndian
    }
}

fn read_synth_params(path: Option<&Path>) -> Result<SynthParams> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_error(p, e))?;
            Ok(serde_json::from_str(&text)?)
        }
        None => Ok(SynthParams::default()),
    }
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = args.tuning.config()?;
    let pattern = FramePattern::parse(&args.pattern)?;
    let (seq, numbers) = load_sequence(&args.input, &pattern)?;
    let mask = args.mask.as_deref().map(HoleMask::load).transpose()?;
    if let Some(dir) = &args.dump_graphs {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    let options = RunOptions {
        graph_dump: args.dump_graphs.clone(),
    };
    let (out, report) = inpaint_sequence_with(&seq, &cfg, mask.as_ref(), &options)?;
    save_sequence(&out, &args.output, &pattern, &numbers, format(args.ascii))?;
    let solved: usize = report.frames.iter().map(|r| r.n_solved()).sum();
    let targets: usize = report.frames.iter().map(|r| r.cubes.len()).sum();
    eprintln!("{} frames, {solved} of {targets} target cubes solved", out.len());
    if let Some(path) = &args.report {
        write_text(path, &report.to_json()?)?;
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let cfg = args.tuning.config()?;
    let methods = Method::parse_list(&args.methods)?;
    let seq: FrameSequence = match (&args.input, &args.pattern) {
        (Some(dir), Some(p)) => load_sequence(dir, &FramePattern::parse(p)?)?.0,
        _ => synthetic_sequence(&read_synth_params(args.synth.as_deref())?)?,
    };
    let holes = HoleParams {
        n_holes: args.holes,
        radius: args.radius,
    };
    let report = run_benchmark(&seq, &cfg, &methods, holes, args.seed)?;
    print!("{}", report.table());
    for row in &report.methods {
        if let Some(e) = &row.error {
            eprintln!("{}: {e}", row.name);
        }
    }
    if let Some(path) = &args.out {
        write_text(path, &report.to_json()?)?;
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut params = read_synth_params(args.params.as_deref())?;
    params.frames = args.frames.unwrap_or(params.frames);
    params.points = args.points.unwrap_or(params.points);
    let seq = synthetic_sequence(&params)?;
    let pattern = FramePattern::parse(&args.pattern)?;
    let numbers: Vec<u64> = (0..seq.len() as u64).collect();
    save_sequence(&seq, &args.output, &pattern, &numbers, format(args.ascii))
}

fn corrupt(args: CorruptArgs) -> Result<()> {
    let pattern = FramePattern::parse(&args.pattern)?;
    let (seq, numbers) = load_sequence(&args.input, &pattern)?;
    let (corrupted, mask) = synthesize_holes(&seq, args.holes, args.radius, args.seed)?;
    save_sequence(&corrupted, &args.output, &pattern, &numbers, format(args.ascii))?;
    mask.save(&args.mask)?;
    let removed: usize = mask.frames.iter().map(|h| h.removed.len()).sum();
    eprintln!("removed {removed} points over {} frames", seq.len());
    Ok(())
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::Bench(a) => bench(a),
        Command::Synth(a) => synth(a),
        Command::Corrupt(a) => corrupt(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
