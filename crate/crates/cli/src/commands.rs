use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use rgm_core::degradation::{DataShape, ScheduleDescriptor, ScheduleKind};
use rgm_core::evaldata::{
    energy_distance, make_toy_images, mean_psnr, mean_ssim, mode_coverage, read_csv, sample_gmm8, read_images_json, write_csv,
    write_images_json, Gmm8Spec, ToyImageSpec, DEFAULT_COVERAGE_THRESHOLD,
};
use rgm_core::inverse::{baseline_reconstruct, make_colorize, make_denoise, make_sr, solve, SolverConfig, TaskKind};
use rgm_core::neural::{load_checkpoint, Checkpoint};
use rgm_core::sampling::{generate_with, SamplingMode};
use rgm_core::{Error, RngState, TrainConfig, Trainer};

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::meta::Provenance;

/// Peak-to-peak range of image data, which lives in `[-1, 1]`.
const IMAGE_PEAK: f64 = 2.0;

pub struct Reporter {
    verbosity: u8,
}

impl Reporter {
    pub fn new(verbosity: u8) -> Self {
        Self { verbosity }
    }

    fn info(&self, msg: impl AsRef<str>) {
        if self.verbosity > 0 {
            eprintln!("{}", msg.as_ref());
        }
    }
}

pub fn parse_shape(text: &str) -> CliResult<DataShape> {
    let parts: Vec<&str> = text.split(['x', 'X']).collect();
    let nums: Vec<usize> = parts
        .iter()
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("cannot parse shape {text:?}; use HxWxC or a single dimension")))?;
    let shape = match nums.as_slice() {
        [d] => DataShape::vector(*d),
        [h, w] => DataShape::new(*h, *w, 1),
        [h, w, c] => DataShape::new(*h, *w, *c),
        _ => return Err(CliError::Usage(format!("shape {text:?} needs 1 to 3 components"))),
    };
    if shape.dim() == 0 {
        return Err(CliError::Usage("shape must be non-empty".into()));
    }
    Ok(shape)
}

fn kind_of(arg: KindArg) -> ScheduleKind {
    match arg {
        KindArg::D => ScheduleKind::Denoise,
        KindArg::SrNaive => ScheduleKind::SuperResNaive,
        KindArg::Sr => ScheduleKind::SuperRes,
    }
}

pub fn cmd_schedule(args: &ScheduleArgs) -> CliResult<serde_json::Value> {
    let shape = parse_shape(&args.shape)?;
    let descriptor = ScheduleDescriptor::new(kind_of(args.kind), args.steps, shape);
    let schedule = descriptor.build().map_err(|e| CliError::Usage(e.to_string()))?;
    let table = json!({
        "descriptor": descriptor,
        "latent_variance": schedule.latent_variance(),
        "fully_decomposable": schedule.is_fully_decomposable(),
        "steps": schedule.summary(),
    });
    if let Some(out) = &args.out {
        fs::write(out, serde_json::to_string_pretty(&table)?)?;
        Provenance::new("schedule", &descriptor, 0)?.attach(out)?;
    } else {
        println!("{}", serde_json::to_string_pretty(&table)?);
    }
    Ok(table)
}

pub fn cmd_train(args: &TrainArgs, report: &Reporter) -> CliResult<()> {
    let text = fs::read_to_string(&args.config)?;
    let mut config = TrainConfig::from_json(&text).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;
    fs::create_dir_all(&args.out)?;
    let prov = Provenance::new("train", &config, config.seed)?;
    let resolved = args.out.join("config.json");
    fs::write(&resolved, config.to_json()?)?;
    prov.attach(&resolved)?;

    report.info(format!(
        "training {} / {} prior for {} iterations",
        config.algorithm,
        config.prior.kind(),
        config.iterations
    ));
    let mut trainer = Trainer::new(config)?;
    let record = trainer.run(Some(&args.out))?;
    for name in ["checkpoint.json", "run.json", "metrics.csv"] {
        prov.attach(&args.out.join(name))?;
    }
    for e in &record.entries {
        report.info(format!(
            "iter {:>8}  loss_g {:.5}  prior {:?}  fidelity {:.5}  energy {:?}",
            e.iteration, e.loss_g, e.loss_d_or_prior, e.fidelity, e.energy_distance
        ));
    }
    if let Some(abort) = record.abort {
        return Err(Error::NumericalFailure(format!(
            "training aborted at iteration {}: {}",
            abort.iteration, abort.reason
        ))
        .into());
    }
    Ok(())
}

/// Checkpoint plus the digest of its file, used for provenance.
struct LoadedModel {
    ckpt: Checkpoint,
    digest: String,
}

fn load_model(path: &Path) -> CliResult<LoadedModel> {
    let bytes = fs::read(path)?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let ckpt = load_checkpoint(path)?;
    Ok(LoadedModel { ckpt, digest })
}

fn is_json(path: &Path) -> bool {
    path.extension().map(|e| e.eq_ignore_ascii_case("json")).unwrap_or(false)
}

fn write_rows(path: &Path, shape: DataShape, rows: &Array2<f64>) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    if is_json(path) {
        write_images_json(path, shape, rows)?;
    } else {
        write_csv(path, rows)?;
    }
    Ok(())
}

fn read_rows(path: &Path) -> CliResult<(Option<DataShape>, Array2<f64>)> {
    if is_json(path) {
        let (shape, rows) = read_images_json(path)?;
        Ok((Some(shape), rows))
    } else {
        Ok((None, read_csv(path)?))
    }
}

#[derive(Serialize)]
struct SampleRequest<'a> {
    checkpoint_sha256: &'a str,
    n: usize,
    mode: &'a str,
}

pub fn cmd_sample(args: &SampleArgs, report: &Reporter) -> CliResult<()> {
    let model = load_model(&args.ckpt)?;
    let schedule = model.ckpt.schedule.build()?;
    let mode = match args.mode {
        ModeArg::Forward => SamplingMode::Forward,
        ModeArg::Posterior => SamplingMode::Posterior,
    };
    let mut rng = RngState::new(args.seed);
    let batch = generate_with(&model.ckpt.generator, &schedule, args.n, mode, &mut rng)?;
    write_rows(&args.out, schedule.data_shape(), &batch.samples)?;
    let request = SampleRequest {
        checkpoint_sha256: &model.digest,
        n: args.n,
        mode: if mode == SamplingMode::Forward { "forward" } else { "posterior" },
    };
    Provenance::new("sample", &request, args.seed)?.attach(&args.out)?;
    report.info(format!("wrote {} samples ({} generator calls each)", batch.count(), batch.nfe));
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct InvertScores {
    pub method: String,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Serialize)]
struct InvertRequest<'a> {
    checkpoint_sha256: &'a str,
    task: TaskKind,
    sigma: f64,
    factor: usize,
    solver: SolverConfig,
    input: Option<String>,
    n: usize,
}

pub fn cmd_invert(args: &InvertArgs, report: &Reporter) -> CliResult<Vec<InvertScores>> {
    let model = load_model(&args.ckpt)?;
    let schedule = model.ckpt.schedule.build()?;
    let shape = schedule.data_shape();
    let truth = match &args.input {
        Some(path) => {
            let (file_shape, rows) = read_images_json(path)?;
            if file_shape != shape {
                return Err(CliError::Config(format!(
                    "input images have shape {file_shape:?}, the checkpoint expects {shape:?}"
                )));
            }
            rows
        }
        None => {
            if shape.height == 1 && shape.width == 1 {
                return Err(CliError::Usage("invert needs an image checkpoint, this one models flat vectors".into()));
            }
            if shape.height != shape.width {
                return Err(CliError::Usage("toy images need a square checkpoint shape; pass --input".into()));
            }
            let family = args.family.parse().map_err(|e: Error| CliError::Usage(e.to_string()))?;
            let spec = ToyImageSpec {
                size: shape.height,
                channels: shape.channels,
                family,
                seed: args.seed,
            };
            make_toy_images(&spec, args.n).map_err(|e| CliError::Usage(e.to_string()))?
        }
    };
    let kind = match args.task {
        TaskArg::Denoise => TaskKind::Denoise,
        TaskArg::Sr => TaskKind::SuperResolve,
        TaskArg::Color => TaskKind::Colorize,
    };
    let sigma = args
        .sigma
        .unwrap_or(if kind == TaskKind::Denoise { 40.0 / 255.0 } else { 0.0 });
    let mut solver = SolverConfig::default_for(kind, args.factor);
    if let Some(m) = args.m {
        solver.m = m;
    }
    if let Some(l) = args.lambda {
        solver.lambda = l;
    }
    if let Some(a) = args.alpha {
        solver.alpha = a;
    }
    if let Some(d) = args.depth {
        solver.k = d;
    }
    solver.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let rng = RngState::new(args.seed);
    let mut obs_rng = rng.split(1);
    let task = match kind {
        TaskKind::Denoise => make_denoise(&truth, shape, sigma, &mut obs_rng),
        TaskKind::SuperResolve => make_sr(&truth, shape, args.factor, sigma, &mut obs_rng),
        TaskKind::Colorize => make_colorize(&truth, shape, sigma, &mut obs_rng),
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let baseline = baseline_reconstruct(&task)?;
    let result = solve(&task, &model.ckpt.generator, &schedule, &solver, &mut rng.split(2))?;

    fs::create_dir_all(&args.out)?;
    let request = InvertRequest {
        checkpoint_sha256: &model.digest,
        task: kind,
        sigma,
        factor: args.factor,
        solver,
        input: args.input.as_ref().map(|p| p.to_string_lossy().into_owned()),
        n: truth.nrows(),
    };
    let prov = Provenance::new("invert", &request, args.seed)?;
    let mut written: Vec<PathBuf> = Vec::new();
    let obs_shape = match &task.op {
        rgm_core::inverse::ObservationOp::Identity { shape } => *shape,
        rgm_core::inverse::ObservationOp::BlockAverage(op) => op.output,
        rgm_core::inverse::ObservationOp::ChannelAverage { shape } => DataShape::new(shape.height, shape.width, 1),
    };
    for (name, rows, s) in [
        ("truth.json", &truth, shape),
        ("observation.json", &task.observation, obs_shape),
        ("baseline.json", &baseline, shape),
        ("estimate.json", &result.estimate, shape),
    ] {
        let path = args.out.join(name);
        write_images_json(&path, s, rows)?;
        written.push(path);
    }

    let mut scores = Vec::new();
    if kind == TaskKind::Denoise {
        scores.push(score("observation", &task.observation, &truth)?);
    }
    scores.push(score("baseline", &baseline, &truth)?);
    scores.push(score("rgm", &result.estimate, &truth)?);
    let metrics_path = args.out.join("metrics.csv");
    let mut text = String::from("method,psnr,ssim\n");
    for s in &scores {
        text.push_str(&format!("{},{},{}\n", s.method, s.psnr, s.ssim));
    }
    fs::write(&metrics_path, text)?;
    written.push(metrics_path);
    for path in &written {
        prov.attach(path)?;
    }
    for s in &scores {
        report.info(format!("{:<12} psnr {:.3} dB  ssim {:.4}", s.method, s.psnr, s.ssim));
    }
    Ok(scores)
}

fn score(method: &str, x: &Array2<f64>, truth: &Array2<f64>) -> CliResult<InvertScores> {
    Ok(InvertScores {
        method: method.to_string(),
        psnr: mean_psnr(x.view(), truth.view(), IMAGE_PEAK)?,
        ssim: mean_ssim(x.view(), truth.view(), IMAGE_PEAK)?,
    })
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult<serde_json::Value> {
    let (shape_a, a) = read_rows(&args.samples)?;
    let (shape_b, b) = match &args.reference {
        Some(path) => read_rows(path)?,
        None if a.ncols() == 2 => {
            let rows = sample_gmm8(args.reference_n, &Gmm8Spec::default(), &mut RngState::new(args.reference_seed))?;
            (None, rows)
        }
        None => return Err(CliError::Usage("--reference is required unless the samples are 2D".into())),
    };
    if a.ncols() != b.ncols() {
        return Err(CliError::Config(format!(
            "sample width {} differs from reference width {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let mut report = serde_json::Map::new();
    report.insert("n_samples".into(), json!(a.nrows()));
    report.insert("n_reference".into(), json!(b.nrows()));
    report.insert("energy_distance".into(), json!(energy_distance(a.view(), b.view())?));
    if a.ncols() == 2 {
        let cov = mode_coverage(a.view(), &Gmm8Spec::default(), None, DEFAULT_COVERAGE_THRESHOLD)?;
        report.insert("gmm8_modes_covered".into(), json!(cov.covered));
        report.insert("gmm8_mode_fractions".into(), json!(cov.fractions));
    }
    if shape_a.is_some() && shape_a == shape_b && a.nrows() == b.nrows() {
        report.insert("paired_psnr".into(), json!(mean_psnr(a.view(), b.view(), IMAGE_PEAK)?));
        report.insert("paired_ssim".into(), json!(mean_ssim(a.view(), b.view(), IMAGE_PEAK)?));
    }
    let value = serde_json::Value::Object(report);
    if let Some(out) = &args.out {
        let obj = value.as_object().expect("report is an object");
        let scalar_keys: Vec<&String> = obj.keys().filter(|k| !obj[*k].is_array()).collect();
        let header: Vec<&str> = scalar_keys.iter().map(|k| k.as_str()).collect();
        let row: Vec<String> = scalar_keys.iter().map(|k| obj[*k].to_string()).collect();
        fs::write(out, format!("{}\n{}\n", header.join(","), row.join(",")))?;
        let inputs = json!({
            "samples": args.samples.to_string_lossy(),
            "reference": args.reference.as_ref().map(|p| p.to_string_lossy()),
            "reference_n": args.reference_n,
            "reference_seed": args.reference_seed,
        });
        Provenance::new("eval", &inputs, 0)?.attach(out)?;
    }
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(value)
}
