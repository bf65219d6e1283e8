use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};
use swbce::checkpoint::Checkpoint;
use swbce::dataset::{self, Dataset, Split};
use swbce::gradcheck::{self, GradcheckConfig};
use swbce::loss::{LossConfig, LossKind};
use swbce::metrics::{evaluate, evaluate_dataset, EvalConfig, EvalItem, Tolerance};
use swbce::pgm::{self, Maxval, PgmImage};
use swbce::synth::SceneSpec;
use swbce::train::{self, TrainConfig};
use swbce::SoftMap;

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::manifest::{RunManifest, TOOL};

/// What a subcommand reports back for its manifest.
struct Outcome {
    config: Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    extra: Value,
    failure: Option<String>,
}

impl Outcome {
    fn new(config: Value, inputs: Vec<PathBuf>, outputs: Vec<PathBuf>) -> Self {
        Self {
            config,
            inputs,
            outputs,
            extra: Value::Null,
            failure: None,
        }
    }
}

pub fn default_out(subcommand: &str) -> PathBuf {
    let root = std::env::var_os(OUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| "runs".into());
    root.join(subcommand)
}

pub fn run(cli: Cli) -> CliResult<RunManifest> {
    match cli.command {
        Command::Replay(r) => replay(&r, cli.threads),
        cmd => execute(cmd, cli.threads),
    }
}

pub fn replay(args: &ReplayArgs, threads: Option<usize>) -> CliResult<RunManifest> {
    let mut cmd = RunManifest::read(&args.manifest)?.command;
    if let (Some(out), Some(slot)) = (&args.out, cmd.out_mut()) {
        *slot = Some(out.clone());
    }
    execute(cmd, threads)
}

/// Runs one subcommand and writes its run manifest. A verification failure
/// still writes every output before it is returned as an error.
pub fn execute(mut cmd: Command, threads: Option<usize>) -> CliResult<RunManifest> {
    let start = Instant::now();
    let name = cmd.name();
    let out = match cmd.out_mut() {
        Some(slot) => slot.get_or_insert_with(|| default_out(name)).clone(),
        None => return Err(CliError::Usage("a replay cannot be replayed".into())),
    };
    fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;

    let outcome = match &cmd {
        Command::Loss(a) => loss(a, &out)?,
        Command::Gradcheck(a) => gradcheck(a, &out)?,
        Command::GenData(a) => gen_data(a, &out)?,
        Command::Train(a) => train_cmd(a, &out)?,
        Command::Predict(a) => predict(a, &out)?,
        Command::Eval(a) => eval(a, &out)?,
        Command::Sweep(a) => sweep(a, &out)?,
        Command::Replay(_) => unreachable!("handled above"),
    };

    let mut outputs: Vec<String> = outcome
        .outputs
        .iter()
        .map(|p| p.strip_prefix(&out).unwrap_or(p).to_string_lossy().into_owned())
        .collect();
    outputs.sort();
    let manifest = RunManifest {
        tool: TOOL.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd,
        config: outcome.config,
        inputs: outcome.inputs.iter().map(|p| p.to_string_lossy().into_owned()).collect(),
        outputs,
        extra: outcome.extra,
        threads,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    manifest.write(&out)?;
    match outcome.failure {
        Some(msg) => Err(CliError::Verification(msg)),
        None => Ok(manifest),
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<PathBuf> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))?;
    Ok(path.to_path_buf())
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

fn loss(a: &LossArgs, out: &Path) -> CliResult<Outcome> {
    let cfg = LossConfig {
        lambda_label: a.lambda,
        lambda_pred: a.lambda_pred,
        balance_b: a.b,
        grad_mode: a.grad_mode,
        normalization: a.norm,
        ..LossConfig::default()
    };
    let pred = pgm::read_soft(&a.pred)?;
    let gt = pgm::read_binary(&a.gt, 0.5)?;
    let result = a.loss.evaluate(&pred, &gt, &cfg)?;
    println!("{}", result.value);

    let report = json!({ "loss": a.loss.name(), "value": result.value });
    let mut outputs = vec![write_file(&out.join("loss.json"), format!("{report:#}\n"))?];
    let mut extra = Value::Null;
    if let Some(grad_out) = &a.grad_out {
        let path = out.join(grad_out);
        let (lo, hi) = result
            .gradient
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &g| (lo.min(g), hi.max(g)));
        let scale = hi - lo;
        let unit: Vec<f64> = result
            .gradient
            .iter()
            .map(|&g| if scale > 0.0 { (g - lo) / scale } else { 0.0 })
            .collect();
        let map = SoftMap::new(result.height, result.width, unit)?;
        pgm::write_soft(&map, &path, Maxval::Sixteen)?;
        // gradient = offset + scale * sample / 65535
        extra = json!({ "gradient_pgm": { "offset": lo, "scale": scale, "maxval": 65535 } });
        outputs.push(path);
    }

    let config = json!({ "loss": a.loss, "loss_config": cfg });
    let mut outcome = Outcome::new(config, vec![a.pred.clone(), a.gt.clone()], outputs);
    outcome.extra = extra;
    Ok(outcome)
}

fn gradcheck(a: &GradcheckArgs, out: &Path) -> CliResult<Outcome> {
    let cfg = GradcheckConfig {
        seed: a.seed,
        trials: a.trials,
        size: a.size,
        tolerance: a.tol,
        step: a.step,
    };
    let rows = gradcheck::run(&cfg)?;

    let mut csv = String::from("loss,grad_mode,trials,worst_relative_error,passed\n");
    println!("{:<6} {:<17} {:>6} {:>14}  result", "loss", "grad_mode", "trials", "worst_rel_err");
    for r in &rows {
        let mode = to_value(&r.grad_mode);
        let mode = mode.as_str().unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.loss.name(),
            mode,
            r.trials,
            r.worst_relative_error,
            r.passed
        ));
        println!(
            "{:<6} {:<17} {:>6} {:>14.3e}  {}",
            r.loss.name(),
            mode,
            r.trials,
            r.worst_relative_error,
            if r.passed { "pass" } else { "FAIL" }
        );
    }
    let outputs = vec![write_file(&out.join("gradcheck.csv"), csv)?];
    let failed = rows.iter().filter(|r| !r.passed).count();
    let mut outcome = Outcome::new(to_value(&cfg), vec![], outputs);
    if failed > 0 {
        outcome.failure = Some(format!("{failed} of {} gradient checks above tolerance {}", rows.len(), a.tol));
    }
    Ok(outcome)
}

fn gen_data(a: &GenDataArgs, out: &Path) -> CliResult<Outcome> {
    let spec = SceneSpec {
        seed: a.seed,
        height: a.size,
        width: a.size,
        shape_count: a.shapes,
        noise_sigma: a.noise,
        texture: a.texture,
        texture_contrast: a.texture_contrast,
    };
    let manifest = dataset::generate_split(&spec, a.n_train, a.n_test, out)?;
    let mut outputs = vec![out.join(dataset::MANIFEST_FILE)];
    for e in manifest.train.iter().chain(&manifest.test) {
        outputs.push(out.join(&e.image));
        outputs.push(out.join(&e.edges));
    }
    println!("wrote {} train and {} test pairs to {}", a.n_train, a.n_test, out.display());
    let config = json!({ "base_spec": spec, "n_train": a.n_train, "n_test": a.n_test });
    Ok(Outcome::new(config, vec![], outputs))
}

fn train_config(a: &TrainArgs) -> TrainConfig {
    TrainConfig {
        learning_rate: a.lr,
        weight_decay: a.wd,
        epochs: a.epochs,
        batch_size: a.batch,
        crop: a.crop,
        seed: a.seed,
        loss: a.loss,
        loss_config: LossConfig {
            balance_b: a.b,
            grad_mode: a.grad_mode,
            ..LossConfig::default()
        },
    }
}

fn train_cmd(a: &TrainArgs, out: &Path) -> CliResult<Outcome> {
    let cfg = train_config(a);
    let ckpt = train::train_dataset(&a.data, &cfg)?;
    let ckpt_path = out.join("checkpoint.bin");
    ckpt.save(&ckpt_path)?;
    let history = write_file(&out.join("history.csv"), ckpt.history_csv())?;
    if let Some(last) = ckpt.history.last() {
        println!("epoch {} mean loss {last}", ckpt.epoch);
    }
    Ok(Outcome::new(to_value(&cfg), vec![a.data.clone()], vec![ckpt_path, history]))
}

fn predict(a: &PredictArgs, out: &Path) -> CliResult<Outcome> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let written = train::predict_dir(&ckpt.net, &a.images, out)?;
    println!("wrote {} predictions to {}", written.len(), out.display());
    let config = json!({ "maxval": 65535 });
    Ok(Outcome::new(config, vec![a.checkpoint.clone(), a.images.clone()], written))
}

fn eval_config(a: &EvalArgs) -> EvalConfig {
    let tolerance = match a.tol_ratio {
        Some(r) => Tolerance::DiagonalRatio(r),
        None => Tolerance::Pixels(a.tol_px.unwrap_or(1.0)),
    };
    EvalConfig {
        tolerance,
        matching: a.matching,
        ..EvalConfig::default()
    }
}

fn eval(a: &EvalArgs, out: &Path) -> CliResult<Outcome> {
    let cfg = eval_config(a);
    cfg.validate()?;
    let report = evaluate_dataset(&a.pred_dir, &a.gt_dir, &cfg)?;
    println!("ods {} ois {} ap {}", report.ods, report.ois, report.ap);
    let outputs = vec![
        write_file(&out.join("report.json"), report.to_json())?,
        write_file(&out.join("pr_curve.csv"), report.dataset_curve().to_csv())?,
    ];
    Ok(Outcome::new(to_value(&cfg), vec![a.pred_dir.clone(), a.gt_dir.clone()], outputs))
}

fn sweep(a: &SweepArgs, out: &Path) -> CliResult<Outcome> {
    let b_values = parse_b_values(&a.b_values).map_err(CliError::Usage)?;
    let base = TrainConfig {
        learning_rate: a.lr,
        weight_decay: a.wd,
        epochs: a.epochs,
        batch_size: a.batch,
        seed: a.seed,
        loss: LossKind::Swbce,
        loss_config: LossConfig {
            grad_mode: a.grad_mode,
            ..LossConfig::default()
        },
        ..TrainConfig::default()
    };
    let eval_cfg = EvalConfig::default();
    for &b in &b_values {
        TrainConfig {
            loss_config: LossConfig { balance_b: b, ..base.loss_config },
            ..base
        }
        .validate()?;
    }

    let ds = Dataset::open(&a.data)?;
    let train_set = ds.load(Split::Train)?;
    let test_set = ds.load(Split::Test)?;
    let ids: Vec<String> = ds
        .manifest
        .entries(Split::Test)
        .iter()
        .map(|e| {
            Path::new(&e.image)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
        .collect();

    let csv_path = out.join("sweep.csv");
    let file = File::create(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
    let mut csv = BufWriter::new(file);
    let io_err = |e| CliError::io(&csv_path, e);
    writeln!(csv, "b,ods,ois,ap").map_err(io_err)?;
    csv.flush().map_err(io_err)?;

    for &b in &b_values {
        let cfg = TrainConfig {
            loss_config: LossConfig { balance_b: b, ..base.loss_config },
            ..base
        };
        let ckpt = train::train(&train_set, &cfg)?;
        let items = test_set
            .iter()
            .zip(&ids)
            .map(|(s, id)| {
                let pred = ckpt.net.forward(&s.image)?;
                // Same quantization as a prediction written to disk.
                let pred = PgmImage::from_soft(&pred, Maxval::Sixteen).to_soft();
                Ok(EvalItem {
                    id: id.clone(),
                    pred,
                    gt: s.edges.clone(),
                })
            })
            .collect::<swbce::Result<Vec<_>>>()?;
        let report = evaluate(&items, &eval_cfg)?;
        writeln!(csv, "{b},{},{},{}", report.ods, report.ois, report.ap).map_err(io_err)?;
        csv.flush().map_err(io_err)?;
        println!("b {b}: ods {} ois {} ap {}", report.ods, report.ois, report.ap);
    }

    let config = json!({ "b_values": b_values, "train": base, "eval": eval_cfg });
    Ok(Outcome::new(config, vec![a.data.clone()], vec![csv_path]))
}
