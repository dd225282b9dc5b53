use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use meshfid_core::geom::{metro_measures, MetroOptions, SurfaceSampler};
use meshfid_core::image_fidelity::{bm, mse, perceptual_diff, ViewParams};
use meshfid_core::mesh::{load_mesh, write_off, TriMesh};
use meshfid_core::pipeline::{run_pipeline, stats_report, write_demo_corpus, PipelineConfig};
use meshfid_core::predict::{predictions_for, read_measures, read_predictions, write_predictions, Measure};
use meshfid_core::protocol::SessionStore;
use meshfid_core::render::{canonical_camera, compose_pair, render_stimulus, CameraOverrides, GrayImage};
use meshfid_core::simplify::{level_target, simplify, standardize, Algorithm, SimplifySpec};
use meshfid_core::simulate::{plan_objects, shuffle_values, simulate_responses};
use meshfid_core::stats::{correlate_report, read_human_csv, write_correlations_csv, write_human_csv, Pooling, ReportOptions, Task};
use serde::Serialize;

use crate::config::FileConfig;
use crate::server::{self, encode_png, AppState};

#[derive(Debug, Parser)]
#[command(name = "meshfid", version, about = "Simplified-mesh stimuli, fidelity measures, experiment server and analysis")]
pub struct Cli {
    /// TOML configuration file; command-line flags win over it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reduce a model to the standard face budget with edge collapse.
    Standardize {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Faces in the result [default: 3700].
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Simplify a model with one algorithm.
    Simplify {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_enum)]
        algorithm: AlgorithmArg,
        /// Percent of the input's faces to remove (0-100, exclusive).
        #[arg(long, conflicts_with = "target", required_unless_present = "target")]
        level: Option<u32>,
        /// Face count to reach.
        #[arg(long)]
        target: Option<usize>,
    },
    /// Render a model as a 591×443 stimulus (PGM or PNG by extension).
    Render {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Second model, shown on the right of a 1024×768 pair with the
        /// camera of the first.
        #[arg(long)]
        pair_with: Option<PathBuf>,
        #[command(flatten)]
        camera: CameraArgs,
    },
    /// Geometric measures of an approximation against a standard, as JSON.
    MeasureGeom {
        standard: PathBuf,
        approximation: PathBuf,
        /// Surface samples per direction [default: scales with the standard].
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Average mean and mean-squared distances over both directions.
        #[arg(long)]
        symmetrize: bool,
    },
    /// MSE and BM between two images (PGM), as JSON.
    MeasureImage {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        view: ViewArgs,
        /// Also write the perceptual difference map here.
        #[arg(long)]
        diff_out: Option<PathBuf>,
    },
    /// Preference predictors from a measures table.
    Predict {
        #[arg(long)]
        measures: PathBuf,
        /// Output CSV [default: stdout].
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Relate human responses to the automatic measures.
    Stats {
        #[arg(long)]
        measures: PathBuf,
        /// Predictors; recomputed from the measures when absent.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        human: PathBuf,
        /// How both levels of a simplifier enter a correlation.
        #[arg(long, value_enum)]
        pooling: Option<PoolingArg>,
        /// Report file [default: stdout].
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write every correlation as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Serve the experiment over HTTP.
    Serve {
        /// Pipeline output directory with measures.csv and the stimuli.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Session record directory [default: <out-dir>/sessions].
        #[arg(long)]
        sessions: Option<PathBuf>,
        /// Listen address [default: 127.0.0.1:8080].
        #[arg(long)]
        addr: Option<String>,
        /// Seed of the rating and preference orders.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Corpus to families, stimuli, measures, predictions and report.
    Run(RunArgs),
    /// Write the bundled synthetic corpus.
    GenCorpus {
        #[arg(default_value = "corpus")]
        dir: PathBuf,
    },
    /// Simulated participants whose answers follow one measure.
    SynthHuman {
        #[arg(long)]
        measures: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        participants: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// Measure the answers depend on [default: metro_mn].
        #[arg(long)]
        driver: Option<Measure>,
        /// SD of the rating noise, in scale points [default: 0.3].
        #[arg(long)]
        rating_noise: Option<f64>,
        /// Permute the ratings afterwards, destroying any relation.
        #[arg(long)]
        shuffle_ratings: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AlgorithmArg {
    Qem,
    Vclust,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PoolingArg {
    TwoPoints,
    Averaged,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CameraArgs {
    /// Vertical field of view, degrees [default: 40].
    #[arg(long)]
    pub fov: Option<f64>,
    /// Eye distance in bounding-box diagonals [default: 2].
    #[arg(long)]
    pub distance: Option<f64>,
    /// Degrees around the vertical axis from +Z towards +X [default: 45].
    #[arg(long)]
    pub azimuth: Option<f64>,
    /// Degrees above the horizontal [default: 25].
    #[arg(long)]
    pub elevation: Option<f64>,
}

impl CameraArgs {
    fn apply(&self, base: CameraOverrides) -> CameraOverrides {
        base.merged(&CameraOverrides {
            fov_deg: self.fov,
            distance_factor: self.distance,
            azimuth_deg: self.azimuth,
            elevation_deg: self.elevation,
            look_at: None,
        })
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ViewArgs {
    /// Display pixels per degree of visual angle [default: 17" 4:3 at 0.7 m, ≈36.2].
    #[arg(long)]
    pub ppd: Option<f64>,
    /// Luminance of a full-white pixel, cd/m² [default: 100].
    #[arg(long)]
    pub max_luminance: Option<f64>,
}

impl ViewArgs {
    fn apply(&self, mut v: ViewParams) -> ViewParams {
        if let Some(p) = self.ppd {
            v.pixels_per_degree = p;
        }
        if let Some(l) = self.max_luminance {
            v.max_luminance = l;
        }
        v
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Corpus manifest [default: corpus/manifest.toml].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Faces of each standard [default: 3700].
    #[arg(long)]
    pub budget: Option<usize>,
    /// Low simplification level, percent of faces removed [default: 50].
    #[arg(long)]
    pub low: Option<u32>,
    /// High simplification level [default: 80].
    #[arg(long)]
    pub high: Option<u32>,
    /// Surface samples per distance pass.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Parallel objects; 0 uses every core.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub symmetrize: bool,
    /// Skip writing the family meshes.
    #[arg(long)]
    pub no_meshes: bool,
    /// Skip writing the stimulus images.
    #[arg(long)]
    pub no_images: bool,
    #[command(flatten)]
    pub camera: CameraArgs,
    #[command(flatten)]
    pub view: ViewArgs,
}

impl RunArgs {
    pub fn apply(&self, mut c: PipelineConfig) -> PipelineConfig {
        if let Some(v) = &self.manifest {
            c.manifest = v.clone();
        }
        if let Some(v) = &self.out_dir {
            c.out_dir = v.clone();
        }
        if let Some(v) = self.budget {
            c.budget = v;
        }
        if let Some(v) = self.low {
            c.levels.low = v;
        }
        if let Some(v) = self.high {
            c.levels.high = v;
        }
        if self.samples.is_some() {
            c.samples = self.samples;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.workers {
            c.workers = v;
        }
        if self.symmetrize {
            c.metro = MetroOptions { symmetrize: true };
        }
        if self.no_meshes {
            c.write_meshes = false;
        }
        if self.no_images {
            c.write_images = false;
        }
        c.camera = self.camera.apply(c.camera);
        c.view = self.view.apply(c.view);
        c
    }
}

fn load(path: &Path) -> anyhow::Result<TriMesh> {
    load_mesh(path, None).with_context(|| format!("loading {}", path.display()))
}

fn write_image(img: &GrayImage, path: &Path) -> anyhow::Result<()> {
    let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        fs::write(path, encode_png(img)?)?;
    } else {
        img.write_pgm(path)?;
    }
    Ok(())
}

fn print_json<T: Serialize>(v: &T) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn open(path: &Path) -> anyhow::Result<fs::File> {
    fs::File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn create(path: &Path) -> anyhow::Result<fs::File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::File::create(path).with_context(|| format!("creating {}", path.display()))
}

pub fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let pipe = &file.pipeline;
    match cli.command {
        Command::Standardize { input, output, budget } => {
            let r = standardize(&load(&input)?, budget.unwrap_or(pipe.budget))?;
            write_off(&r.mesh, &output)?;
            println!("{} faces -> {}", r.achieved_faces, output.display());
        }
        Command::Simplify {
            input,
            output,
            algorithm,
            level,
            target,
        } => {
            let mesh = load(&input)?;
            let target_faces = match (level, target) {
                (_, Some(t)) => t,
                (Some(l), None) => {
                    if l == 0 || l >= 100 {
                        bail!("--level must be between 0 and 100, exclusive");
                    }
                    level_target(mesh.face_count(), l)
                }
                (None, None) => unreachable!("clap requires one"),
            };
            let algorithm = match algorithm {
                AlgorithmArg::Qem => Algorithm::Qem,
                AlgorithmArg::Vclust => Algorithm::Vclust,
            };
            let r = simplify(
                &mesh,
                &SimplifySpec {
                    algorithm,
                    target_faces,
                    seed: pipe.seed,
                },
            )?;
            if let Some(w) = &r.warning {
                log::warn!("{w}");
            }
            write_off(&r.mesh, &output)?;
            println!("{} faces -> {}", r.achieved_faces, output.display());
        }
        Command::Render {
            input,
            output,
            pair_with,
            camera,
        } => {
            let mesh = load(&input)?;
            let cam = canonical_camera(&mesh, &camera.apply(pipe.camera))?;
            let mut img = render_stimulus(&mesh, &cam)?.quantized();
            if let Some(other) = pair_with {
                let right = render_stimulus(&load(&other)?, &cam)?.quantized();
                img = compose_pair(&img, &right);
            }
            write_image(&img, &output)?;
        }
        Command::MeasureGeom {
            standard,
            approximation,
            samples,
            seed,
            symmetrize,
        } => {
            let (s, a) = (load(&standard)?, load(&approximation)?);
            let seed = seed.unwrap_or(pipe.seed);
            let sampler = match samples.or(pipe.samples) {
                Some(n) => SurfaceSampler::new(n, seed),
                None => SurfaceSampler::for_pivot(&s, seed),
            };
            let opts = MetroOptions {
                symmetrize: symmetrize || pipe.metro.symmetrize,
            };
            print_json(&metro_measures(&s, &a, &sampler, opts)?)?;
        }
        Command::MeasureImage { a, b, view, diff_out } => {
            let (ia, ib) = (GrayImage::read_pgm(&a)?, GrayImage::read_pgm(&b)?);
            let vp = view.apply(pipe.view);
            if let Some(p) = diff_out {
                write_image(&perceptual_diff(&ia, &ib, &vp)?.to_gray(), &p)?;
            }
            print_json(&serde_json::json!({
                "mse": mse(&ia, &ib, false)?,
                "mse_normalized": mse(&ia, &ib, true)?,
                "bm": bm(&ia, &ib, &vp)?,
            }))?;
        }
        Command::Predict { measures, output } => {
            let rows = read_measures(open(&measures)?)?;
            let preds = predictions_for(&rows)?;
            match output {
                Some(p) => write_predictions(create(&p)?, &preds)?,
                None => write_predictions(io::stdout().lock(), &preds)?,
            }
        }
        Command::Stats {
            measures,
            predictions,
            human,
            pooling,
            output,
            csv,
        } => {
            let m = read_measures(open(&measures)?)?;
            let p = match predictions {
                Some(p) => read_predictions(open(&p)?)?,
                None => predictions_for(&m)?,
            };
            let h = read_human_csv(open(&human)?).with_context(|| format!("reading {}", human.display()))?;
            let opts = ReportOptions {
                pooling: match pooling {
                    Some(PoolingArg::TwoPoints) => Pooling::TwoPoints,
                    Some(PoolingArg::Averaged) => Pooling::Averaged,
                    None => file.stats.pooling,
                },
                levels: pipe.levels,
            };
            let text = stats_report(&m, &p, &h, &opts)?;
            match output {
                Some(path) => fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?,
                None => io::stdout().lock().write_all(text.as_bytes())?,
            }
            if let Some(path) = csv {
                write_correlations_csv(create(&path)?, &correlate_report(&m, &p, &h, &opts)?)?;
            }
        }
        Command::Serve {
            out_dir,
            sessions,
            addr,
            seed,
        } => {
            let out = out_dir.unwrap_or_else(|| pipe.out_dir.clone());
            let measures = read_measures(open(&out.join("measures.csv"))?)?;
            let levels = match fs::read_to_string(out.join("config.toml")) {
                Ok(t) => toml::from_str::<PipelineConfig>(&t)?.levels,
                Err(_) => pipe.levels,
            };
            let sessions = sessions.or(file.serve.sessions.clone()).unwrap_or_else(|| out.join("sessions"));
            let state = Arc::new(AppState {
                store: SessionStore::open(&sessions)?,
                corpus: plan_objects(&measures),
                levels,
                seed: seed.unwrap_or(file.serve.seed),
                images_dir: out,
                clock: server::system_clock(),
            });
            let addr = addr.unwrap_or(file.serve.addr.clone());
            tokio::runtime::Runtime::new()?.block_on(server::serve(&addr, state))?;
        }
        Command::Run(args) => {
            let cfg = args.apply(pipe.clone());
            let outcome = run_pipeline(&cfg)?;
            println!(
                "{} objects measured, {} failed; results in {}",
                outcome.objects.len(),
                outcome.failures.len(),
                cfg.out_dir.display()
            );
            if !outcome.failures.is_empty() {
                for (name, e) in &outcome.failures {
                    eprintln!("{name}: {e}");
                }
                return Ok(ExitCode::from(1));
            }
        }
        Command::GenCorpus { dir } => {
            let m = write_demo_corpus(&dir)?;
            println!("{} models -> {}", m.objects.len(), dir.join("manifest.toml").display());
        }
        Command::SynthHuman {
            measures,
            output,
            participants,
            seed,
            driver,
            rating_noise,
            shuffle_ratings,
        } => {
            let m = read_measures(open(&measures)?)?;
            let mut sim = file.synth_human;
            if let Some(v) = participants {
                sim.participants = v;
            }
            if let Some(v) = seed {
                sim.seed = v;
            }
            if let Some(v) = driver {
                sim.driver = v;
            }
            if let Some(v) = rating_noise {
                sim.rating_noise = v;
            }
            sim.levels = pipe.levels;
            let mut rows = simulate_responses(&m, &sim)?;
            if shuffle_ratings {
                shuffle_values(&mut rows, Task::Rating, sim.seed);
            }
            write_human_csv(create(&output)?, &rows)?;
            println!("{} responses -> {}", rows.len(), output.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}
