//! Command-line interface. Exit codes: 0 success, 1 domain error, 2 usage error.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use djmix_core::cueing::{compatible, compute_cues};
use djmix_core::curves::{default_edges_hz, BandLayout, Interval};
use djmix_core::disc::FeatureSpec;
use djmix_core::fit::OptConfig;
use djmix_core::gan::{GanConfig, GeneratorLoss};
use djmix_core::grad::{finite_diff_check, LossSpec, MixProblem};
use djmix_core::mel::MelConfig;
use djmix_core::mixer::{constrain, linear_crossfade_raw, PairSpectra, ParamLayout, RawParams};
use djmix_core::optim::OptimizerKind;
use djmix_core::Grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;

use crate::audio::{read_wav, to_working_mono, write_wav, WavEncoding, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::formats::{read_json, write_history_csv, write_json, CueFile, GridFile, MixAnnotation, ParamsFile};
use crate::learn::{
    features_under, fit_to_target, gan_pair, initial_generators, random_raw, real_mix_features, target_magnitude,
    train_gan, LossKind, TrainConfig,
};
use crate::prepare::{analyze_pair, prepare_pair, PreparedPair};
use crate::render::{render, RenderConfig, Rendered};
use crate::stft::SpectroConfig;
use crate::strategies::{linear_mix, rule_mix, sum_mix, RulePresets, TransitionType};

#[derive(Debug, Parser)]
#[command(name = "djmix", version, about = "Differentiable DJ transition mixer")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every command. Precedence: flag, then `--config`, then built-in default.
#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// JSON file with default values for the options below
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Number of EQ bands [default: 4]
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Comma-separated band edges in Hz, one per band [default: 20,300,5000,20000]
    #[arg(long, global = true, value_delimiter = ',')]
    pub band_edges: Option<Vec<f64>>,
    /// Analysis window length in seconds [default: 60]
    #[arg(long, global = true)]
    pub window_sec: Option<f64>,
    /// Transition length in bars [default: 8]
    #[arg(long, global = true)]
    pub bars: Option<usize>,
    /// Tie the last fade of each track to the one before it (24 parameters at k=4)
    #[arg(long, global = true)]
    pub tie_last_fade: bool,
    /// Random seed [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a transition from a parameter file
    Render(RenderArgs),
    /// Render a non-learned baseline (sum, linear, rule)
    Baseline(BaselineArgs),
    /// Compute cue points from two beat grids and check compatibility
    Cues(CuesArgs),
    /// Fit mixer parameters to a reference mix (inverse rendering)
    Fit(FitArgs),
    /// Adversarial training against real or synthetic mixes
    GanTrain(GanTrainArgs),
    /// Compare analytic and finite-difference gradients
    Gradcheck(GradcheckArgs),
    /// Print the effective configuration
    Info(InfoArgs),
}

#[derive(Debug, Args)]
pub struct PairArgs {
    /// Outgoing track (WAV)
    #[arg(long)]
    pub a: PathBuf,
    /// Incoming track (WAV)
    #[arg(long)]
    pub b: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// Cue file {c_in_sec, c_out_sec[, b_offset_sec]}
    #[arg(long)]
    pub cues: PathBuf,
    /// Mixer parameter file
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "pcm16")]
    pub encoding: String,
    /// Mask each channel instead of rendering a mono downmix
    #[arg(long)]
    pub per_channel: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Method {
    Sum,
    Linear,
    Rule,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    #[command(flatten)]
    pub pair: PairArgs,
    #[arg(long)]
    pub cues: PathBuf,
    /// Transition type for the rule baseline: V-V, NV-V, V-NV, NV-NV
    #[arg(long = "type", required_if_eq("method", "rule"))]
    pub transition: Option<String>,
    /// Preset table replacing the bundled one
    #[arg(long)]
    pub presets: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "pcm16")]
    pub encoding: String,
    #[arg(long)]
    pub per_channel: bool,
}

#[derive(Debug, Args)]
pub struct CuesArgs {
    /// Beat grid of the outgoing track
    #[arg(long)]
    pub grid_a: PathBuf,
    /// Beat grid of the incoming track
    #[arg(long)]
    pub grid_b: PathBuf,
    /// Write the cue file here
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fail when the tracks are not compatible
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LossArg {
    LogMag,
    LogMel,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InitArg {
    Random,
    Linear,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    #[arg(long)]
    pub cues: PathBuf,
    /// Reference mix on the outgoing track's timeline
    #[arg(long)]
    pub target: PathBuf,
    /// Output parameter file
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, value_enum, default_value = "log-mag")]
    pub loss: LossArg,
    #[arg(long, value_enum, default_value = "adam")]
    pub optimizer: OptimizerArg,
    #[arg(long, value_enum, default_value = "random")]
    pub init: InitArg,
    /// Loss history as CSV (step,loss)
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GanTrainArgs {
    /// Directory of pair subdirectories, each with a.wav, b.wav and cues.json
    #[arg(long, required_unless_present = "synthetic")]
    pub pairs_dir: Option<PathBuf>,
    /// Directory of recorded mixes: name.wav with name.json {boundary_sec[, region_sec]}
    #[arg(long, conflicts_with = "synthetic_real")]
    pub real_dir: Option<PathBuf>,
    /// Build "real" exemplars by mixing held-out pairs: linear, or rule:<type>
    #[arg(long)]
    pub synthetic_real: Option<String>,
    /// Generate this many synthetic training pairs (plus as many held out) instead of reading a corpus
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// Output directory for params_<i>.json, disc.json and history.csv
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub g_lr: Option<f64>,
    #[arg(long)]
    pub d_lr: Option<f64>,
    /// One generator for all pairs
    #[arg(long)]
    pub shared: bool,
    /// Minimize -log D(fake) instead of log(1 - D(fake))
    #[arg(long)]
    pub non_saturating: bool,
    /// Standardize discriminator features with corpus statistics
    #[arg(long)]
    pub feature_norm: bool,
    /// Discriminator-only steps before alternating updates
    #[arg(long)]
    pub d_warmup: Option<usize>,
    /// Time slices per band in the discriminator features
    #[arg(long, default_value_t = 8)]
    pub slices: usize,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 64)]
    pub frames: usize,
    #[arg(long, default_value_t = 129)]
    pub bins: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    /// Parameter file to describe
    #[arg(long)]
    pub params: Option<PathBuf>,
}

/// Values that may come from the config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub k: Option<usize>,
    pub band_edges_hz: Option<Vec<f64>>,
    pub window_sec: Option<f64>,
    pub bars: Option<usize>,
    pub tie_last_fade: Option<bool>,
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub learning_rate: Option<f64>,
    pub g_lr: Option<f64>,
    pub d_lr: Option<f64>,
    pub batch_size: Option<usize>,
}

/// Effective settings after applying precedence.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub k: usize,
    pub band_edges_hz: Vec<f64>,
    pub window_sec: f64,
    pub bars: usize,
    pub tie_last_fade: bool,
    pub seed: u64,
    pub stft: SpectroConfig,
    pub mel: MelConfig,
    pub file: ConfigFileRest,
}

/// Command-specific values from the config file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigFileRest {
    pub steps: Option<usize>,
    pub learning_rate: Option<f64>,
    pub g_lr: Option<f64>,
    pub d_lr: Option<f64>,
    pub batch_size: Option<usize>,
}

impl Settings {
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let file: ConfigFile = match &args.config {
            Some(p) => read_json(p)?,
            None => ConfigFile::default(),
        };
        let k = args.k.or(file.k).unwrap_or(4);
        if k == 0 {
            return Err(Error::Invalid("k must be at least 1".into()));
        }
        let band_edges_hz = match args.band_edges.clone().or(file.band_edges_hz) {
            Some(e) => e,
            None => default_edges_hz(k),
        };
        let window_sec = args.window_sec.or(file.window_sec).unwrap_or(60.0);
        if !(window_sec > 0.0) {
            return Err(Error::Invalid(format!("window must be positive, got {window_sec}")));
        }
        let settings = Settings {
            k,
            band_edges_hz,
            window_sec,
            bars: args.bars.or(file.bars).unwrap_or(8),
            tie_last_fade: args.tie_last_fade || file.tie_last_fade.unwrap_or(false),
            seed: args.seed.or(file.seed).unwrap_or(0),
            stft: SpectroConfig::default(),
            mel: MelConfig::default(),
            file: ConfigFileRest {
                steps: file.steps,
                learning_rate: file.learning_rate,
                g_lr: file.g_lr,
                d_lr: file.d_lr,
                batch_size: file.batch_size,
            },
        };
        settings.layout()?;
        Ok(settings)
    }

    pub fn layout(&self) -> Result<BandLayout> {
        Ok(BandLayout::from_hz(self.k, &self.band_edges_hz, SAMPLE_RATE as f64)?)
    }

    pub fn param_layout(&self) -> ParamLayout {
        ParamLayout::new(self.k, self.tie_last_fade)
    }
}

/// Parse `argv` (including the program name) and run the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn print_json(value: &serde_json::Value) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(value).expect("serializable"));
}

pub fn execute(cli: &Cli) -> Result<()> {
    let settings = Settings::resolve(&cli.common)?;
    match &cli.command {
        Command::Render(a) => cmd_render(&settings, a),
        Command::Baseline(a) => cmd_baseline(&settings, a),
        Command::Cues(a) => cmd_cues(&settings, a),
        Command::Fit(a) => cmd_fit(&settings, a),
        Command::GanTrain(a) => cmd_gan_train(&settings, a),
        Command::Gradcheck(a) => cmd_gradcheck(&settings, a),
        Command::Info(a) => cmd_info(&settings, a),
    }
}

fn load_pair(settings: &Settings, pair: &PairArgs, cues: &Path) -> Result<PreparedPair> {
    let x1 = read_wav(&pair.a)?;
    let x2 = read_wav(&pair.b)?;
    let cues = read_json::<CueFile>(cues)?.to_cues()?;
    prepare_pair(&x1, &x2, &cues, settings.window_sec)
}

fn write_rendered(r: &Rendered, out: &Path, encoding: &str) -> Result<()> {
    write_wav(&r.clip, out, encoding.parse::<WavEncoding>()?)?;
    print_json(&json!({
        "out": out,
        "samples": r.clip.len(),
        "sample_rate": r.clip.sample_rate(),
        "peak_gain": r.peak_gain,
    }));
    Ok(())
}

fn cmd_render(settings: &Settings, a: &RenderArgs) -> Result<()> {
    let file: ParamsFile = read_json(&a.params)?;
    let encoding: WavEncoding = a.encoding.parse()?;
    let pair = load_pair(settings, &a.pair, &a.cues)?;
    let cfg = RenderConfig { stft: settings.stft, per_channel: a.per_channel };
    let r = render(&pair, &file.params(), &file.layout()?, &cfg)?;
    write_rendered(
        &r,
        &a.out,
        match encoding {
            WavEncoding::Pcm16 => "pcm16",
            WavEncoding::Pcm24 => "pcm24",
            WavEncoding::Float32 => "float32",
        },
    )
}

fn cmd_baseline(settings: &Settings, a: &BaselineArgs) -> Result<()> {
    a.encoding.parse::<WavEncoding>()?;
    let transition = a.transition.as_deref().map(str::parse::<TransitionType>).transpose()?;
    let presets = match &a.presets {
        Some(p) => RulePresets::load(p)?,
        None => RulePresets::builtin(),
    };
    let pair = load_pair(settings, &a.pair, &a.cues)?;
    let cfg = RenderConfig { stft: settings.stft, per_channel: a.per_channel };
    let r = match a.method {
        Method::Sum => sum_mix(&pair)?,
        Method::Linear => linear_mix(&pair)?,
        Method::Rule => rule_mix(&pair, &presets, transition.expect("required by clap"), &cfg)?,
    };
    write_rendered(&r, &a.out, &a.encoding)
}

fn cmd_cues(settings: &Settings, a: &CuesArgs) -> Result<()> {
    let g1 = read_json::<GridFile>(&a.grid_a)?.to_grid()?;
    let g2 = read_json::<GridFile>(&a.grid_b)?.to_grid()?;
    let compat = compatible(&g1, &g2);
    if a.strict && !compat.compatible {
        return Err(Error::Invalid(format!("tracks are not compatible: {}", compat.reasons.join("; "))));
    }
    let cues = compute_cues(&g1, &g2, settings.bars)?;
    let file = CueFile::from(&cues);
    if let Some(out) = &a.out {
        write_json(out, &file)?;
    }
    print_json(&json!({
        "c_in_sec": cues.c_in,
        "c_out_sec": cues.c_out,
        "c_mid_sec": cues.mid(),
        "b_offset_sec": cues.b_offset,
        "bars": settings.bars,
        "compatible": compat.compatible,
        "bpm_diff": compat.bpm_diff,
        "key_distance": compat.key_distance,
        "reasons": compat.reasons,
    }));
    Ok(())
}

fn optimizer(arg: OptimizerArg) -> OptimizerKind {
    match arg {
        OptimizerArg::Adam => OptimizerKind::adam(),
        OptimizerArg::Sgd => OptimizerKind::Sgd,
    }
}

fn cmd_fit(settings: &Settings, a: &FitArgs) -> Result<()> {
    let pair = load_pair(settings, &a.pair, &a.cues)?;
    let target_clip = read_wav(&a.target)?;
    let target = target_magnitude(&to_working_mono(&target_clip)?, &pair, &settings.stft)?;
    let analysis = analyze_pair(&pair, &settings.stft)?;
    let layout = settings.layout()?;
    let pl = settings.param_layout();
    let init = match a.init {
        InitArg::Random => random_raw(pl, &mut ChaCha8Rng::seed_from_u64(settings.seed)),
        InitArg::Linear => linear_crossfade_raw(pl),
    };
    let opt = OptConfig {
        steps: a.steps.or(settings.file.steps).unwrap_or(200),
        learning_rate: a.lr.or(settings.file.learning_rate).unwrap_or(1e-2),
        optimizer: optimizer(a.optimizer),
        seed: settings.seed,
    };
    let loss = match a.loss {
        LossArg::LogMag => LossKind::LogMag,
        LossArg::LogMel => LossKind::LogMel,
    };
    let outcome = fit_to_target(&analysis, &target, &layout, init, loss, &opt, &settings.stft)?;
    write_json(&a.out, &ParamsFile::new(&outcome.params, &settings.band_edges_hz, settings.tie_last_fade))?;
    if let Some(h) = &a.history {
        let mut text = String::from("step,loss\n");
        for (i, l) in outcome.history.iter().enumerate() {
            text.push_str(&format!("{i},{l}\n"));
        }
        crate::formats::write_atomic(h, |f| f.write_all(text.as_bytes()))?;
    }
    print_json(&json!({
        "out": a.out,
        "initial_loss": outcome.history[0],
        "final_loss": outcome.history.last(),
        "steps": opt.steps,
    }));
    Ok(())
}

fn list_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    out.sort();
    Ok(out)
}

fn corpus_pairs(settings: &Settings, dir: &Path) -> Result<Vec<PreparedPair>> {
    let mut pairs = Vec::new();
    for sub in list_dir(dir)?.into_iter().filter(|p| p.is_dir()) {
        let args = PairArgs { a: sub.join("a.wav"), b: sub.join("b.wav") };
        pairs.push(load_pair(settings, &args, &sub.join("cues.json"))?);
    }
    if pairs.is_empty() {
        return Err(Error::Invalid(format!("no pair directories in {}", dir.display())));
    }
    Ok(pairs)
}

fn cmd_gan_train(settings: &Settings, a: &GanTrainArgs) -> Result<()> {
    let layout = settings.layout()?;
    let pl = settings.param_layout();
    let spec = FeatureSpec::from_layout(&layout, a.slices);
    let (train, held_out): (Vec<PreparedPair>, Vec<PreparedPair>) = match (a.synthetic, &a.pairs_dir) {
        (Some(n), _) => {
            let geometry = crate::synth::SyntheticPairSpec { spread_db: 3.0, ..Default::default() };
            let make = |offset: u64| -> Result<Vec<PreparedPair>> {
                (0..n as u64)
                    .map(|i| crate::synth::synthetic_pair(settings.seed * 1000 + offset + i, &geometry))
                    .collect()
            };
            (make(0)?, make(500)?)
        }
        (None, Some(dir)) => {
            let all = corpus_pairs(settings, dir)?;
            if a.synthetic_real.is_some() && all.len() < 2 {
                return Err(Error::Invalid(
                    "synthetic real exemplars need at least two pairs (train + held out)".into(),
                ));
            }
            let split = if a.real_dir.is_some() { all.len() } else { all.len().div_ceil(2) };
            let mut all = all;
            let held = all.split_off(split);
            (all, held)
        }
        (None, None) => unreachable!("clap requires --pairs-dir or --synthetic"),
    };
    let gan_pairs: Vec<_> = train.iter().map(|p| gan_pair(p, &settings.stft, &spec)).collect::<Result<_>>()?;
    let real: Vec<Vec<f64>> = match &a.real_dir {
        Some(dir) => {
            let mut feats = Vec::new();
            for wav in list_dir(dir)?.into_iter().filter(|p| p.extension().is_some_and(|e| e == "wav")) {
                let ann: MixAnnotation = read_json(&wav.with_extension("json"))?;
                let region_sec = ann.region_sec.unwrap_or(16.0);
                let mono = to_working_mono(&read_wav(&wav)?)?;
                feats.push(real_mix_features(
                    &mono,
                    ann.boundary_sec,
                    region_sec,
                    settings.window_sec,
                    &settings.stft,
                    &spec,
                )?);
            }
            feats
        }
        None => {
            let how = a.synthetic_real.as_deref().unwrap_or("linear");
            let held: Vec<_> = held_out.iter().map(|p| gan_pair(p, &settings.stft, &spec)).collect::<Result<_>>()?;
            match how.strip_prefix("rule:") {
                None if how == "linear" => {
                    let lin = linear_crossfade_raw(pl);
                    held.iter().map(|p| features_under(p, &lin, &layout)).collect::<Result<_>>()?
                }
                Some(t) => {
                    let presets = RulePresets::builtin();
                    let t: TransitionType = t.parse()?;
                    held.iter()
                        .map(|p| {
                            let (params, rule_layout) = presets.bind(t, p.region)?;
                            let mix = djmix_core::mixer::mix_magnitude(&params, &p.spectra, &rule_layout)?;
                            Ok(p.pooling.features(&mix)?)
                        })
                        .collect::<Result<_>>()?
                }
                None => {
                    return Err(Error::Invalid(format!("unknown synthetic real corpus '{how}' (linear, rule:<type>)")))
                }
            }
        }
    };
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        steps: a.steps.or(settings.file.steps).unwrap_or(defaults.steps),
        batch_size: a.batch.or(settings.file.batch_size).unwrap_or(defaults.batch_size),
        seed: settings.seed,
        shared: a.shared,
        gan: GanConfig {
            g_lr: a.g_lr.or(settings.file.g_lr).unwrap_or(defaults.gan.g_lr),
            d_lr: a.d_lr.or(settings.file.d_lr).unwrap_or(defaults.gan.d_lr),
            generator_loss: if a.non_saturating { GeneratorLoss::NonSaturating } else { GeneratorLoss::MinMax },
            ..defaults.gan
        },
        param_layout: pl,
        normalize: a.feature_norm,
        d_warmup: a.d_warmup.unwrap_or(defaults.d_warmup),
    };
    let init = initial_generators(gan_pairs.len(), &cfg);
    let outcome = train_gan(&gan_pairs, &real, &layout, &cfg, init)?;

    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let mut written = Vec::new();
    for (i, p) in gan_pairs.iter().enumerate() {
        let g = &outcome.generators[if cfg.shared { 0 } else { i }];
        let params = constrain(g, p.region, &layout)?;
        let path = a.out_dir.join(format!("params_{i}.json"));
        write_json(&path, &ParamsFile::new(&params, &settings.band_edges_hz, settings.tie_last_fade))?;
        written.push(path);
    }
    write_json(&a.out_dir.join("disc.json"), &json!({"weights": outcome.disc.weights, "bias": outcome.disc.bias}))?;
    write_history_csv(&a.out_dir.join("history.csv"), &outcome.history_rows())?;
    let last = outcome.history.last();
    print_json(&json!({
        "pairs": gan_pairs.len(),
        "real_exemplars": real.len(),
        "steps": cfg.steps,
        "params": written,
        "final_d_loss": last.map(|m| m.d_loss),
        "final_mean_d_fake": last.map(|m| m.mean_d_fake),
    }));
    Ok(())
}

fn cmd_gradcheck(settings: &Settings, a: &GradcheckArgs) -> Result<()> {
    if a.frames < 2 || a.bins < 2 {
        return Err(Error::Invalid("gradcheck needs at least 2 frames and 2 bins".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let grid = |rng: &mut ChaCha8Rng| Grid::from_fn(a.frames, a.bins, |_, _| rng.gen_range(0.0..2.0));
    let pair = PairSpectra::new(grid(&mut rng), grid(&mut rng))?;
    let loss = LossSpec::log_mag(grid(&mut rng));
    let layout = settings.layout()?;
    let region = Interval::new(0.25, 0.75);
    let problem = MixProblem::new(&pair, region, &layout, &loss)?;
    let raw: RawParams = random_raw(settings.param_layout(), &mut rng);
    let report = finite_diff_check(&problem, &raw, a.eps)?;
    print_json(&json!({
        "seed": settings.seed,
        "k": settings.k,
        "frames": a.frames,
        "bins": a.bins,
        "eps": a.eps,
        "parameters": report.entries.len(),
        "checked": report.checked().count(),
        "kink_adjacent": report.flagged_count(),
        "pass_fraction_1e-3": report.pass_fraction(1e-3),
        "max_rel_error": report.max_rel_error,
        "p99_rel_error": report.p99_rel_error,
    }));
    Ok(())
}

fn cmd_info(settings: &Settings, a: &InfoArgs) -> Result<()> {
    let (k, edges, tie) = match &a.params {
        Some(p) => {
            let file: ParamsFile = read_json(p)?;
            file.layout()?;
            (file.k, file.band_edges_hz, file.tie_last_fade || settings.tie_last_fade)
        }
        None => (settings.k, settings.band_edges_hz.clone(), settings.tie_last_fade),
    };
    print_json(&json!({
        "k": k,
        "band_edges_hz": edges,
        "tie_last_fade": tie,
        "parameter_count": ParamLayout::new(k, tie).len(),
        "sample_rate": SAMPLE_RATE,
        "fft_size": settings.stft.fft_size,
        "hop": settings.stft.hop,
        "window": settings.stft.window.name(),
        "n_mels": settings.mel.n_mels,
        "window_sec": settings.window_sec,
        "bars": settings.bars,
        "seed": settings.seed,
    }));
    Ok(())
}
