//! Command-line front end: train / eval / gradcheck / paramcount / synth.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bintabl::checkpoint::{self, CheckpointConfig};
use bintabl::data::fi2010::{self, Fi2010Layout, LabelConvention};
use bintabl::data::synthetic::{generate_synthetic, SynthConfig};
use bintabl::data::{make_windows, DayData, SeriesBatch, SplitSpec, WINDOW_LEN};
use bintabl::error::{Category, Error, Result};
use bintabl::gradcheck::{self, Target};
use bintabl::layers::network::{Arch, ModelSpec, NormKind};
use bintabl::metrics::{compute_metrics_avg, Averaging, EvalReport};
use bintabl::train::{run_protocol, Regularizer, TrainConfig};

const DATA_DIR_ENV: &str = "BINTABL_DATA_DIR";

#[derive(Parser)]
#[command(
    name = "bintabl",
    about = "Bilinear-normalization TABL networks for order-book movement prediction",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one or more runs and report per-run and median metrics.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Verify analytic gradients against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Print the trainable parameter count of an architecture.
    Paramcount(ParamcountArgs),
    /// Write a synthetic dataset as day files.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ArchArg {
    B,
    C,
}

impl From<ArchArg> for Arch {
    fn from(a: ArchArg) -> Arch {
        match a {
            ArchArg::B => Arch::B,
            ArchArg::C => Arch::C,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    Bin,
    Dain,
    Bn,
    None,
}

impl From<NormArg> for NormKind {
    fn from(n: NormArg) -> NormKind {
        match n {
            NormArg::Bin => NormKind::Bin,
            NormArg::Dain => NormKind::Dain,
            NormArg::Bn => NormKind::BatchNorm,
            NormArg::None => NormKind::None,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RegArg {
    Decay,
    Maxnorm,
}

#[derive(Clone, Copy, ValueEnum)]
enum AvgArg {
    Macro,
    Weighted,
}

impl From<AvgArg> for Averaging {
    fn from(a: AvgArg) -> Averaging {
        match a {
            AvgArg::Macro => Averaging::Macro,
            AvgArg::Weighted => Averaging::Weighted,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelConventionArg {
    Fi2010,
    Zero,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset path: a directory of day files, a file with a `.days`
    /// sidecar, or a single-day file. Defaults to $BINTABL_DATA_DIR.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Generate data instead of loading: "default" or a comma list such as
    /// "seed=7,regimes=6,events=400,offset=8,vol=0.02,momentum=0.6,theta=0.015".
    #[arg(long, conflicts_with = "data")]
    synthetic: Option<String>,
    /// First row of the 40-row feature block in loaded files.
    #[arg(long, default_value_t = 0)]
    feature_row_start: usize,
    /// Encoding of label rows in loaded files.
    #[arg(long, value_enum, default_value_t = LabelConventionArg::Fi2010)]
    label_convention: LabelConventionArg,
    /// Days in the training split; the rest evaluate. Defaults to 7 for
    /// loaded data and to 2/3 of the regimes for synthetic data.
    #[arg(long)]
    train_days: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    arch: ArchArg,
    #[arg(long, value_enum, default_value_t = NormArg::Bin)]
    norm: NormArg,
    #[arg(long, default_value_t = 10)]
    horizon: u32,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value_t = RegArg::Maxnorm)]
    reg: RegArg,
    #[arg(long, default_value_t = 5)]
    runs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Checkpoint path for the run closest to the median F1.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 80)]
    epochs: usize,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    #[arg(long, value_enum, default_value_t = AvgArg::Macro)]
    avg: AvgArg,
    /// Run the feature path of BiN with the divisor exactly as printed
    /// (temporal std; needs square inputs).
    #[arg(long)]
    bin_eq6c_literal: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Evaluate only the test split instead of every loaded day.
    #[arg(long)]
    test_split_only: bool,
    #[arg(long, value_enum, default_value_t = AvgArg::Macro)]
    avg: AvgArg,
}

#[derive(Args)]
struct GradcheckArgs {
    /// One family, or everything when omitted.
    #[arg(long, value_enum)]
    layer: Option<LayerArg>,
    #[arg(long, default_value_t = gradcheck::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum LayerArg {
    Bin,
    Dain,
    Bn,
    Bl,
    Tabl,
    Full,
}

#[derive(Args)]
struct ParamcountArgs {
    #[arg(long, value_enum)]
    arch: ArchArg,
    #[arg(long, value_enum, default_value_t = NormArg::None)]
    norm: NormArg,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for the day files.
    #[arg(long)]
    out: PathBuf,
    /// Generator configuration, as for --synthetic.
    #[arg(long, default_value = "default")]
    cfg: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::Paramcount(args) => cmd_paramcount(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err.category() {
                Category::Config => ExitCode::from(2),
                Category::Data => ExitCode::from(3),
                Category::Numeric => ExitCode::from(4),
            }
        }
    }
}

fn parse_synth_config(spec: &str) -> Result<SynthConfig> {
    let mut cfg = SynthConfig::default();
    if spec == "default" {
        return Ok(cfg);
    }
    for part in spec.split(',') {
        let (key, value) = part.split_once('=').ok_or_else(|| {
            Error::config(format!("synthetic option {part:?} is not key=value"))
        })?;
        let bad = |what: &str| Error::config(format!("synthetic option {key}: {what}"));
        match key {
            "seed" => cfg.seed = value.parse().map_err(|_| bad("not an integer"))?,
            "regimes" => cfg.regimes = value.parse().map_err(|_| bad("not an integer"))?,
            "events" => {
                cfg.events_per_regime = value.parse().map_err(|_| bad("not an integer"))?
            }
            "offset" => cfg.offset_scale = value.parse().map_err(|_| bad("not a number"))?,
            "vol" => cfg.vol_scale = value.parse().map_err(|_| bad("not a number"))?,
            "momentum" => cfg.momentum = value.parse().map_err(|_| bad("not a number"))?,
            "reversion" => cfg.reversion = value.parse().map_err(|_| bad("not a number"))?,
            "theta" => cfg.theta = value.parse().map_err(|_| bad("not a number"))?,
            "base" => cfg.base_price = value.parse().map_err(|_| bad("not a number"))?,
            "tick" => cfg.tick = value.parse().map_err(|_| bad("not a number"))?,
            "spread" => cfg.spread = value.parse().map_err(|_| bad("not a number"))?,
            "volume" => cfg.base_volume = value.parse().map_err(|_| bad("not a number"))?,
            "vsigma" => cfg.volume_sigma = value.parse().map_err(|_| bad("not a number"))?,
            other => return Err(Error::config(format!("unknown synthetic option {other:?}"))),
        }
    }
    Ok(cfg)
}

struct LoadedData {
    days: Vec<DayData>,
    default_train_days: usize,
}

fn load_days(args: &DataArgs) -> Result<LoadedData> {
    if let Some(spec) = &args.synthetic {
        let cfg = parse_synth_config(spec)?;
        let days = generate_synthetic(&cfg)?;
        let default_train_days = (2 * cfg.regimes).div_ceil(3).max(1);
        return Ok(LoadedData {
            days,
            default_train_days,
        });
    }
    let path = match &args.data {
        Some(p) => p.clone(),
        None => std::env::var_os(DATA_DIR_ENV)
            .map(PathBuf::from)
            .ok_or_else(|| {
                Error::config(format!(
                    "no data source: pass --data, --synthetic, or set ${DATA_DIR_ENV}"
                ))
            })?,
    };
    let layout = Fi2010Layout {
        feature_row_start: args.feature_row_start,
        label_convention: match args.label_convention {
            LabelConventionArg::Fi2010 => LabelConvention::Fi2010,
            LabelConventionArg::Zero => LabelConvention::ZeroBased,
        },
        ..Fi2010Layout::default()
    };
    Ok(LoadedData {
        days: fi2010::load_dataset(&path, &layout)?,
        default_train_days: SplitSpec::fi2010().train_days,
    })
}

fn split_windows(
    loaded: &LoadedData,
    train_days: Option<usize>,
    horizon: u32,
) -> Result<(SeriesBatch, SeriesBatch)> {
    let spec = SplitSpec {
        train_days: train_days.unwrap_or(loaded.default_train_days),
    };
    let (train_days, test_days) = spec.split(&loaded.days)?;
    Ok((
        make_windows(train_days, WINDOW_LEN, horizon)?,
        make_windows(test_days, WINDOW_LEN, horizon)?,
    ))
}

fn cmd_train(args: TrainArgs) -> Result<ExitCode> {
    let arch = Arch::from(args.arch);
    let norm = NormKind::from(args.norm);
    if args.bin_eq6c_literal && !matches!(norm, NormKind::Bin) {
        return Err(Error::config(
            "--bin-eq6c-literal only applies with --norm bin",
        ));
    }
    let spec = ModelSpec {
        arch,
        norm,
        bin_literal_divisor: args.bin_eq6c_literal,
    };
    let cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        regularizer: match args.reg {
            RegArg::Decay => Regularizer::Decay(1e-3),
            RegArg::Maxnorm => Regularizer::MaxNorm(10.0),
        },
        horizon: args.horizon,
        runs: args.runs,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let loaded = load_days(&args.data)?;
    let (train_data, test_data) = split_windows(&loaded, args.data.train_days, args.horizon)?;
    eprintln!(
        "training {norm}-{arch}(TABL) horizon {}: {} train windows, {} test windows",
        args.horizon,
        train_data.len(),
        test_data.len()
    );

    let result = run_protocol(
        &spec,
        &train_data,
        &test_data,
        &cfg,
        args.avg.into(),
        |run, record| eprintln!("run {run} {}", record.to_line()),
    )?;

    print!("{}", result.report.to_table());
    println!();
    print!("{}", result.report.to_records());

    if let Some(out) = &args.out {
        let run_index = result.report.median_run_index();
        let config = CheckpointConfig {
            arch,
            norm,
            train: cfg,
            run_index,
            bin_literal_divisor: args.bin_eq6c_literal,
        };
        checkpoint::save(out, &result.models[run_index], &config)?;
        eprintln!("checkpoint (run {run_index}) written to {}", out.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(args: EvalArgs) -> Result<ExitCode> {
    let (net, config) = checkpoint::load(&args.checkpoint)?;
    let loaded = load_days(&args.data)?;
    let data = if args.test_split_only {
        split_windows(&loaded, args.data.train_days, config.train.horizon)?.1
    } else {
        make_windows(&loaded.days, WINDOW_LEN, config.train.horizon)?
    };
    eprintln!(
        "evaluating {}-{}(TABL) horizon {} on {} windows",
        config.norm,
        config.arch,
        config.train.horizon,
        data.len()
    );
    let confusion = bintabl::train::evaluate(&net, &data)?;
    let metrics = compute_metrics_avg(&confusion, args.avg.into());
    let report = EvalReport::from_runs(vec![metrics], args.avg.into());
    print!("{}", report.to_table());
    println!();
    print!("{}", report.to_records());
    Ok(ExitCode::SUCCESS)
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<ExitCode> {
    let targets: Vec<Target> = match args.layer {
        Some(LayerArg::Bin) => vec![Target::Bin, Target::BinLiteral],
        Some(LayerArg::Dain) => vec![Target::Dain],
        Some(LayerArg::Bn) => vec![Target::BatchNorm],
        Some(LayerArg::Bl) => vec![Target::Bilinear],
        Some(LayerArg::Tabl) => vec![Target::Tabl],
        Some(LayerArg::Full) => vec![
            Target::Network(Arch::B, NormKind::Bin),
            Target::Network(Arch::C, NormKind::Bin),
        ],
        None => vec![
            Target::Bin,
            Target::BinLiteral,
            Target::Dain,
            Target::BatchNorm,
            Target::Bilinear,
            Target::Tabl,
            Target::Network(Arch::B, NormKind::Bin),
            Target::Network(Arch::C, NormKind::Bin),
        ],
    };
    let mut all_ok = true;
    for target in targets {
        let shapes: &[(usize, usize)] = match target {
            Target::Network(..) => &[(40, 10)],
            Target::BinLiteral => &[(5, 5), (10, 10)],
            _ => &[(4, 5), (3, 7), (40, 10)],
        };
        for &(d, t) in shapes {
            let report = gradcheck::check(target, d, t, args.seed, args.tol)?;
            for line in report.lines() {
                println!("{line}");
            }
            all_ok &= report.passed();
        }
    }
    if all_ok {
        println!("gradcheck: PASS at {}", args.tol);
        Ok(ExitCode::SUCCESS)
    } else {
        Err(Error::contract(format!(
            "gradcheck: FAIL at tolerance {}",
            args.tol
        )))
    }
}

fn cmd_paramcount(args: ParamcountArgs) -> Result<ExitCode> {
    let mut rng = bintabl::Rng::new(0);
    let net = bintabl::build_network(args.arch.into(), args.norm.into(), &mut rng);
    println!("{}", net.count_params());
    Ok(ExitCode::SUCCESS)
}

fn cmd_synth(args: SynthArgs) -> Result<ExitCode> {
    let mut cfg = parse_synth_config(&args.cfg)?;
    // Written files carry the standard five label tracks so they load with
    // the default layout (and as FI-2010-shaped fixtures).
    cfg.horizons = vec![10, 20, 30, 50, 100];
    let days = generate_synthetic(&cfg)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Error::io(args.out.display().to_string(), e))?;
    for (i, day) in days.iter().enumerate() {
        let path = args.out.join(format!("day{i:02}.txt"));
        fi2010::write_day_file(&path, day, LabelConvention::ZeroBased)?;
    }
    eprintln!("{} day files written to {}", days.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}
