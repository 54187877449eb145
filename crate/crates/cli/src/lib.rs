//! `gessure` subcommands. Exit codes: 0 success, 1 usage or validation
//! error, 2 I/O error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use gessure_core::config::EngineConfig;
use gessure_core::dataset::{
    import_npy, load_gesture_jsonl, synth_embeddings, synth_gestures, write_gesture_jsonl,
    GestureDataset, SynthGestureSpec,
};
use gessure_core::face::{
    load_embeddings_jsonl, train_verifier, write_embeddings_jsonl, StrayMode, VerifierConfig,
    VerifierModel,
};
use gessure_core::model::{
    decode_model, evaluate, load_model, save_model, train_gesture_classifier, GestureNet,
    GestureNetSpec,
};
use gessure_core::pipeline::{
    default_bindings, read_session, render_action_log, replay, BindingTable, EngineBundle, Models,
};
use gessure_core::{Error, Result};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_IO: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "gessure", version, about = "Face-gated dynamic gesture recognition engine")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Seed for every random draw the command makes
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Machine-readable JSON on stdout
    #[arg(long, global = true)]
    json: bool,
    /// Flat `key = value` config file; flags override it
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Face authorization threshold (strict)
    #[arg(long, global = true, value_name = "P")]
    threshold_auth: Option<f64>,
    /// Minimum gesture confidence to dispatch
    #[arg(long, global = true, value_name = "P")]
    threshold_gesture: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the gesture classifier and write an engine bundle
    TrainGestures(TrainGesturesArgs),
    /// Train the face verifier from enrollment embeddings
    TrainFace(TrainFaceArgs),
    /// Evaluate a gesture model on a labeled dataset
    Eval(EvalArgs),
    /// Generate a synthetic gesture or face-embedding corpus
    GenSynth(GenSynthArgs),
    /// Convert an N×20×63 .npy array into gesture JSONL
    ImportNpy(ImportNpyArgs),
    /// Replay a recorded session and print the action log
    Replay(ReplayArgs),
    /// Print a model's layer table and parameter count
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct TrainGesturesArgs {
    /// Gesture JSONL dataset
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output bundle directory
    #[arg(long)]
    bundle: Option<PathBuf>,
    /// Face enrollment JSONL; trains the verifier into the same bundle
    #[arg(long, value_name = "FILE")]
    faces: Option<PathBuf>,
    /// Enrolled user's identity in --faces
    #[arg(long)]
    user: Option<String>,
    /// Binding table JSON (defaults to the built-in msword/vlc table)
    #[arg(long, value_name = "FILE")]
    bindings: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StrayArg {
    Separate,
    Binary,
}

#[derive(Debug, Args)]
struct TrainFaceArgs {
    /// Enrollment embeddings JSONL with identities
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    user: Option<String>,
    /// Write verifier.json into this bundle directory
    #[arg(long)]
    bundle: Option<PathBuf>,
    /// Write the verifier JSON to this file instead
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "separate")]
    strays: StrayArg,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Model file (.gsrm)
    #[arg(long)]
    model: Option<PathBuf>,
    /// Bundle directory; its gesture model is used when --model is absent
    #[arg(long)]
    bundle: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SynthKind {
    Gestures,
    Faces,
}

#[derive(Debug, Args)]
struct GenSynthArgs {
    #[arg(long, value_enum, default_value = "gestures")]
    kind: SynthKind,
    /// Output JSONL path
    #[arg(long)]
    out: PathBuf,
    /// Samples per gesture class or embeddings per identity
    #[arg(long, default_value_t = 40)]
    count: usize,
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    /// Comma-separated archetypes (gestures) or identities (faces)
    #[arg(long, value_delimiter = ',')]
    classes: Vec<String>,
}

#[derive(Debug, Args)]
struct ImportNpyArgs {
    input: PathBuf,
    /// Class label for every sample in the file
    #[arg(long)]
    label: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 6)]
    classes: usize,
    /// Append to an existing JSONL file instead of replacing it
    #[arg(long)]
    append: bool,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long)]
    session: Option<PathBuf>,
    #[arg(long)]
    bundle: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InspectArgs {
    /// Model file or bundle directory
    path: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn execute<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match run(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_io() {
                EXIT_IO
            } else {
                EXIT_INVALID
            }
        }
    }
}

fn engine_config(g: &GlobalArgs) -> Result<EngineConfig> {
    let mut config = match &g.config {
        Some(path) => EngineConfig::load(path)?,
        None => EngineConfig::default(),
    };
    if let Some(seed) = g.seed {
        config.seed = Some(seed);
    }
    if let Some(t) = g.threshold_auth {
        config.thresholds.auth_threshold = t;
    }
    if let Some(t) = g.threshold_gesture {
        config.thresholds.gesture_threshold = t;
    }
    config.validate()?;
    Ok(config)
}

fn required(flag: &str, cli: Option<PathBuf>, fallback: &Option<PathBuf>) -> Result<PathBuf> {
    cli.or_else(|| fallback.clone())
        .ok_or_else(|| Error::Usage(format!("--{flag} is required")))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::Io { path: PathBuf::from("<stdout>"), source: e })
}

fn emit_json(out: &mut dyn Write, value: &serde_json::Value) -> Result<()> {
    emit(out, &(serde_json::to_string_pretty(value).expect("json value serializes") + "\n"))
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let config = engine_config(&cli.global)?;
    let json = cli.global.json;
    match cli.command {
        Command::TrainGestures(a) => train_gestures(a, config, json, out),
        Command::TrainFace(a) => train_face(a, config, json, out),
        Command::Eval(a) => eval(a, config, json, out),
        Command::GenSynth(a) => gen_synth(a, config, json, out),
        Command::ImportNpy(a) => import(a, json, out),
        Command::Replay(a) => replay_session(a, config, out),
        Command::Inspect(a) => inspect(a, config, json, out),
    }
}

fn load_verifier_enrollment(
    path: &Path,
    user: &str,
    seed: u64,
    strays: StrayMode,
) -> Result<VerifierModel> {
    let enrollment = load_embeddings_jsonl(path)?;
    let config = VerifierConfig {
        stray_mode: strays,
        ..VerifierConfig::new(user, seed)
    };
    train_verifier(&enrollment, &config, None)
}

fn train_gestures(a: TrainGesturesArgs, mut config: EngineConfig, json: bool, out: &mut dyn Write) -> Result<()> {
    if let Some(e) = a.epochs {
        config.train.epochs = e;
    }
    let train = config.train_config()?;
    let seed = train.seed;
    let data = required("data", a.data, &config.data)?;
    let dir = required("bundle", a.bundle, &config.bundle)?;
    let spec = GestureNetSpec::default();
    let bindings = match &a.bindings {
        Some(path) => BindingTable::from_json(
            &fs::read_to_string(path).map_err(|e| Error::Io { path: path.clone(), source: e })?,
        )?,
        None => default_bindings(),
    };
    let verifier = match (&a.faces, a.user.as_ref().or(config.user.as_ref())) {
        (Some(faces), Some(user)) => Some(load_verifier_enrollment(faces, user, seed, StrayMode::Separate)?),
        (Some(_), None) => return Err(Error::Usage("--faces needs --user".into())),
        (None, _) => None,
    };
    let dataset = load_gesture_jsonl(&data, spec.classes)?;
    let outcome = train_gesture_classifier(&dataset, &spec, &train)?;
    let bundle = EngineBundle::new(outcome.net, verifier, bindings)?;
    bundle.save(&dir)?;
    let last = outcome.history.last().expect("at least one epoch");
    if json {
        emit_json(
            out,
            &json!({
                "bundle": dir.display().to_string(),
                "parameters": bundle.gesture.param_count(),
                "epochs_run": outcome.history.len(),
                "best_epoch": outcome.best_epoch,
                "best_val_loss": last.best_val_loss,
                "verifier": bundle.verifier.is_some(),
            }),
        )
    } else {
        emit(
            out,
            &format!(
                "trained {} samples for {} epochs (best epoch {}, validation loss {:.4})\nwrote bundle {}\n",
                dataset.len(),
                outcome.history.len(),
                outcome.best_epoch,
                last.best_val_loss,
                dir.display()
            ),
        )
    }
}

fn train_face(a: TrainFaceArgs, config: EngineConfig, json: bool, out: &mut dyn Write) -> Result<()> {
    let seed = config.require_seed()?;
    let data = required("data", a.data, &config.data)?;
    let user = a
        .user
        .or(config.user.clone())
        .ok_or_else(|| Error::Usage("--user is required".into()))?;
    let strays = match a.strays {
        StrayArg::Separate => StrayMode::Separate,
        StrayArg::Binary => StrayMode::Binary,
    };
    let model = load_verifier_enrollment(&data, &user, seed, strays)?;
    let target = match (a.model, a.bundle.or(config.bundle.clone())) {
        (Some(file), _) => file,
        (None, Some(dir)) => {
            fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
            dir.join("verifier.json")
        }
        (None, None) => return Err(Error::Usage("--model or --bundle is required".into())),
    };
    fs::write(&target, model.to_json() + "\n").map_err(|e| Error::Io { path: target.clone(), source: e })?;
    if json {
        emit_json(out, &json!({ "verifier": target.display().to_string(), "classes": model.classes }))
    } else {
        emit(out, &format!("classes: {}\nwrote {}\n", model.classes.join(", "), target.display()))
    }
}

fn gesture_model(model: Option<PathBuf>, bundle: Option<PathBuf>, config: &EngineConfig) -> Result<GestureNet> {
    match (model.or(config.model.clone()), bundle.or(config.bundle.clone())) {
        (Some(path), _) => load_model(&path),
        (None, Some(dir)) => load_model(&dir.join("gesture.gsrm")),
        (None, None) => Err(Error::Usage("--model or --bundle is required".into())),
    }
}

fn eval(a: EvalArgs, config: EngineConfig, json: bool, out: &mut dyn Write) -> Result<()> {
    let net = gesture_model(a.model, a.bundle, &config)?;
    let data = required("data", a.data, &config.data)?;
    let dataset = load_gesture_jsonl(&data, net.spec.classes)?;
    let report = evaluate(&net, &dataset)?;
    if json {
        emit_json(out, &serde_json::to_value(report.rounded()).expect("report serializes"))
    } else {
        emit(out, &report.to_string())
    }
}

fn gen_synth(a: GenSynthArgs, config: EngineConfig, json: bool, out: &mut dyn Write) -> Result<()> {
    let seed = config.require_seed()?;
    let written = match a.kind {
        SynthKind::Gestures => {
            let mut spec = SynthGestureSpec {
                samples_per_class: a.count,
                noise_sigma: a.sigma,
                seed,
                ..SynthGestureSpec::default()
            };
            if !a.classes.is_empty() {
                let names: Vec<&str> = a.classes.iter().map(String::as_str).collect();
                spec = SynthGestureSpec::from_names(&names, a.count, a.sigma, seed)?;
            }
            let ds: GestureDataset = synth_gestures(&spec)?;
            write_gesture_jsonl(&ds, &a.out)?;
            ds.len()
        }
        SynthKind::Faces => {
            let ids = if a.classes.is_empty() {
                ["user", "stray-1", "stray-2", "stray-3", "stray-4"].map(String::from).to_vec()
            } else {
                a.classes.clone()
            };
            let faces = synth_embeddings(&ids, a.count, a.sigma, seed)?;
            write_embeddings_jsonl(&faces, &a.out)?;
            faces.len()
        }
    };
    if json {
        emit_json(out, &json!({ "out": a.out.display().to_string(), "records": written }))
    } else {
        emit(out, &format!("wrote {written} records to {}\n", a.out.display()))
    }
}

fn import(a: ImportNpyArgs, json: bool, out: &mut dyn Write) -> Result<()> {
    let mut dataset = import_npy(&a.input, a.label, a.classes)?;
    let imported = dataset.len();
    if a.append && a.out.exists() {
        let mut existing = load_gesture_jsonl(&a.out, a.classes)?;
        existing.extend(dataset)?;
        dataset = existing;
    }
    write_gesture_jsonl(&dataset, &a.out)?;
    if json {
        emit_json(
            out,
            &json!({ "imported": imported, "total": dataset.len(), "out": a.out.display().to_string() }),
        )
    } else {
        emit(out, &format!("imported {imported} samples ({} total) into {}\n", dataset.len(), a.out.display()))
    }
}

fn replay_session(a: ReplayArgs, config: EngineConfig, out: &mut dyn Write) -> Result<()> {
    let session = a.session.ok_or_else(|| Error::Usage("--session is required".into()))?;
    let dir = required("bundle", a.bundle, &config.bundle)?;
    let bundle = EngineBundle::load(&dir)?;
    let events = read_session(&session)?;
    let models = Models {
        gesture: &bundle.gesture,
        face: bundle.require_verifier()?,
    };
    let log = replay(&events, models, &bundle.bindings, &config.thresholds)?;
    emit(out, &render_action_log(&log))
}

fn inspect(a: InspectArgs, config: EngineConfig, json: bool, out: &mut dyn Write) -> Result<()> {
    let path = a
        .path
        .or(a.model)
        .or(config.model.clone())
        .or(config.bundle.clone())
        .ok_or_else(|| Error::Usage("a model path is required".into()))?;
    let (net, bundle) = if path.is_dir() {
        let b = EngineBundle::load(&path)?;
        (b.gesture.clone(), Some(b))
    } else {
        let bytes = fs::read(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        (decode_model(&bytes)?, None)
    };
    if json {
        let layers: Vec<_> = net
            .network
            .layers()
            .iter()
            .zip(net.network.layer_shapes())
            .map(|(l, (t, c))| json!({ "layer": l.name(), "output": [t, c], "params": l.param_count() }))
            .collect();
        let mut doc = json!({
            "spec": net.spec,
            "layers": layers,
            "parameters": net.param_count(),
        });
        if let Some(b) = &bundle {
            doc["bindings"] = serde_json::to_value(&b.bindings).expect("bindings serialize");
            doc["verifier_classes"] = json!(b.verifier.as_ref().map(|v| v.classes.clone()));
        }
        emit_json(out, &doc)
    } else {
        let mut text = net.summary();
        if let Some(b) = &bundle {
            text.push_str(&format!("bound classes: {}\n", b.bindings.iter().count()));
            match &b.verifier {
                Some(v) => text.push_str(&format!("verifier classes: {}\n", v.classes.join(", "))),
                None => text.push_str("verifier: none\n"),
            }
        }
        emit(out, &text)
    }
}

/// Writes a freshly initialized default model; handy for smoke tests.
pub fn write_initial_model(path: &Path, seed: u64) -> Result<()> {
    let net = gessure_core::model::build_gessure_net(&GestureNetSpec::default(), seed)?;
    save_model(&net, path)
}
