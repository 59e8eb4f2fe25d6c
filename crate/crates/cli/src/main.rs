use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use planekit::error::{Error, ErrorKind, Result};
use planekit::exemplars::ExemplarSet;
use planekit::geometry::{CameraIntrinsics, SceneSpec};
use planekit::io::{
    load_config, load_depth, load_intrinsics, load_json, save_json, to_json_string,
    DepthEncoding, PipelineConfig,
};
use planekit::metrics::{Domain, RecallSpec};
use planekit::pipeline::{self, ClusterOptions, CAMERA_FILE};

/// Dense plane annotation, exemplar encoding and plane reconstruction metrics.
#[derive(Parser, Debug)]
#[command(name = "planekit", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Camera intrinsics JSON. Defaults to `<input>/camera.json` where a dataset is read.
    #[arg(long, global = true, env = "PLANEKIT_CAMERA")]
    camera: Option<PathBuf>,
    /// Pipeline configuration JSON with `fitting`, `ranges` and `loss_weights` sections.
    #[arg(long, global = true, env = "PLANEKIT_CONFIG")]
    config: Option<PathBuf>,
    /// Seed for every random choice; overrides the configuration file.
    #[arg(long, global = true, env = "PLANEKIT_SEED")]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, env = "PLANEKIT_JOBS", default_value_t = 1)]
    jobs: usize,
    /// Recall threshold set.
    #[arg(long, global = true, env = "PLANEKIT_DOMAIN", default_value = "indoor")]
    domain: String,
    /// Units per meter of 16-bit PNG depth.
    #[arg(long, global = true, env = "PLANEKIT_DEPTH_SCALE", default_value_t = 1000.0)]
    depth_scale: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic piecewise-planar scenes with ground truth.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 5)]
        planes: usize,
        /// Relative depth noise (standard deviation).
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 1.0)]
        min_depth: f64,
        #[arg(long, default_value_t = 6.0)]
        max_depth: f64,
        #[arg(long, default_value_t = 50.0)]
        max_tilt: f64,
    },
    /// Fit planes to every image of a dataset.
    Annotate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build normal and offset exemplars from annotations.
    Cluster {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = planekit::exemplars::DEFAULT_NORMAL_EXEMPLARS)]
        normals: usize,
        #[arg(long, default_value_t = planekit::exemplars::DEFAULT_OFFSET_SPLIT)]
        split: f64,
        #[arg(long, default_value_t = planekit::exemplars::DEFAULT_OFFSETS_PER_GROUP)]
        per_group: usize,
    },
    /// Write exemplar class + residual targets of every annotated plane.
    Encode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        exemplars: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare predicted annotations with ground truth.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Also write the full JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render the planar depth of an annotation.
    RenderDepth {
        #[arg(long)]
        input: PathBuf,
        /// `.png` for 16-bit integer depth, anything else for raw float depth.
        #[arg(long)]
        out: PathBuf,
    },
    /// Export an annotation as a colored PLY mesh.
    ExportMesh {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Match a prediction dump to an annotation and print every loss term.
    LossCheck {
        #[arg(long)]
        prediction: PathBuf,
        #[arg(long)]
        annotation: PathBuf,
        #[arg(long)]
        exemplars: PathBuf,
        /// Depth map supervising the pixel depth loss; defaults to the planar depth.
        #[arg(long)]
        depth: Option<PathBuf>,
    },
}

impl GlobalArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.fitting.seed = seed;
        }
        Ok(cfg)
    }

    /// The `--camera` file, else `<dataset>/camera.json`.
    fn camera(&self, dataset: Option<&Path>) -> Result<CameraIntrinsics> {
        let path = match (&self.camera, dataset) {
            (Some(p), _) => p.clone(),
            (None, Some(d)) => d.join(CAMERA_FILE),
            (None, None) => return Err(Error::Config("--camera is required".into())),
        };
        if !path.is_file() {
            return Err(Error::Config(format!(
                "camera file {} does not exist",
                path.display()
            )));
        }
        let k = load_intrinsics(&path)?;
        if let Some(d) = dataset.filter(|_| self.camera.is_some()) {
            let own = d.join(CAMERA_FILE);
            if own.is_file() {
                for w in load_intrinsics(&own)?.resolution_scaling_warnings(&k) {
                    log::warn!("{}: {w}", path.display());
                }
            }
        }
        Ok(k)
    }

    fn encoding(&self) -> Result<DepthEncoding> {
        let enc = DepthEncoding {
            scale: self.depth_scale,
            ..DepthEncoding::default()
        };
        enc.validate()?;
        Ok(enc)
    }
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let domain: Domain = g.domain.parse()?;
    let enc = g.encoding()?;
    pipeline::with_pool(g.jobs, || match cli.command {
        Command::Synth {
            out,
            count,
            planes,
            noise,
            min_depth,
            max_depth,
            max_tilt,
        } => {
            let k = match &g.camera {
                Some(_) => g.camera(None)?,
                None => CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480)?,
            };
            let spec = SceneSpec {
                plane_count: planes,
                depth_range: (min_depth, max_depth),
                noise_sigma: noise,
                seed: g.seed.unwrap_or(0),
                max_tilt_deg: max_tilt,
            };
            let names = pipeline::synth_dataset(&out, &k, &spec, count)?;
            println!("wrote {} scenes to {}", names.len(), out.display());
            Ok(())
        }
        Command::Annotate { input, out } => {
            let k = g.camera(Some(&input))?;
            let summary = pipeline::annotate_dataset(&input, &out, &k, &g.config()?, &enc)?;
            let planes: usize = summary.iter().map(|s| s.planes).sum();
            println!(
                "annotated {} images ({planes} planes) into {}",
                summary.len(),
                out.display()
            );
            Ok(())
        }
        Command::Cluster {
            input,
            out,
            normals,
            split,
            per_group,
        } => {
            let opts = ClusterOptions {
                normal_count: normals,
                split,
                per_group,
                seed: g.seed.unwrap_or(0),
            };
            let (set, _warnings) = pipeline::cluster_annotations(&input, &opts)?;
            save_json(&out, &set)?;
            println!(
                "{} normal and {} offset exemplars written to {}",
                set.normals().len(),
                set.offsets().len(),
                out.display()
            );
            Ok(())
        }
        Command::Encode {
            input,
            exemplars,
            out,
        } => {
            let set: ExemplarSet = load_json(&exemplars)?;
            let encoded = pipeline::encode_annotations(&input, &set)?;
            save_json(&out, &encoded)?;
            println!("encoded {} images into {}", encoded.len(), out.display());
            Ok(())
        }
        Command::Evaluate { pred, gt, out } => {
            let camera = match &g.camera {
                Some(_) => Some(g.camera(None)?),
                None => None,
            };
            let report = pipeline::evaluate_annotations(
                &pred,
                &gt,
                camera.as_ref(),
                &RecallSpec::for_domain(domain),
            )?;
            if let Some(out) = out {
                save_json(&out, &report)?;
            }
            print!("{}", report.to_table());
            Ok(())
        }
        Command::RenderDepth { input, out } => {
            let depth = pipeline::render_depth_file(&input, &out, &enc)?;
            println!("{} planar pixels written to {}", depth.valid_count(), out.display());
            Ok(())
        }
        Command::ExportMesh { input, out } => {
            let faces = pipeline::export_mesh_file(&input, &out)?;
            println!("{faces} faces written to {}", out.display());
            Ok(())
        }
        Command::LossCheck {
            prediction,
            annotation,
            exemplars,
            depth,
        } => {
            let set: ExemplarSet = load_json(&exemplars)?;
            let depth = depth.map(|p| load_depth(&p, &enc)).transpose()?;
            let report = pipeline::loss_check(
                &prediction,
                &annotation,
                &set,
                depth.as_ref(),
                &g.config()?.loss_weights,
            )?;
            print!("{}", to_json_string(&report)?);
            Ok(())
        }
    })?
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 3,
        ErrorKind::Format | ErrorKind::Io => 4,
        ErrorKind::Degenerate | ErrorKind::Domain | ErrorKind::Decode | ErrorKind::Generation => 5,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("planekit: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
