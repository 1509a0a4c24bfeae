mod config;
mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use mrf_inn::checkpoint;
use mrf_inn::dictionary::{
    build_dictionary, build_from_params, expand_grid, split_dictionary, stratified_sample, Dictionary, GridSpec,
};
use mrf_inn::evaluation::{
    fwd_bwd_correlate, heatmap_diff, metrics, snr_sweep, Correlation, HeatMap, HeatParam, MetricsReport,
    SnrSweepResult, DEFAULT_REPETITIONS,
};
use mrf_inn::experiment::DESK_TRAIN_ENTRIES;
use mrf_inn::inn::ModelKind;
use mrf_inn::report;
use mrf_inn::seed;
use mrf_inn::sim::{reference_signal, ScheduleFile, SequenceSchedule, TissueParams, DEFAULT_LENGTH, PARAM_NAMES};
use mrf_inn::training::{train_with_progress, write_log_csv, BwdLossDims, TrainConfig, TrainedModel};
use mrf_inn::{Error, Result};

use config::RunConfig;
use manifest::{dictionary_inputs, hash_inputs, RunRecord};

#[derive(Debug, Parser)]
#[command(name = "mrf-inn", version, about = "MR fingerprinting reconstruction with invertible networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    /// ~5000 stratified training entries, 20 epochs, batch 50.
    Desk,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LossDims {
    M,
    Full,
}

impl From<LossDims> for BwdLossDims {
    fn from(d: LossDims) -> Self {
        match d {
            LossDims::M => BwdLossDims::Params,
            LossDims::Full => BwdLossDims::Full,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the built-in grids, the reference schedule and a desk run config.
    Init {
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a dictionary over a parameter grid.
    SimulateDict {
        #[arg(long)]
        grid: PathBuf,
        /// Schedule TOML; the reference schedule when omitted.
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Output base path; writes `<out>.manifest`, `<out>.params.bin`, `<out>.fp.bin`.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the schedule file's fat shift.
        #[arg(long, allow_hyphen_values = true)]
        fat_shift: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Stratified (FF x T1 water) subsample of roughly this many entries.
        #[arg(long, conflicts_with = "preset")]
        entries: Option<usize>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
    },
    /// Split a dictionary into two random parts.
    SplitDict {
        #[arg(long)]
        dict: PathBuf,
        /// Share of entries going to `--first`.
        #[arg(long, default_value_t = 0.2)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        first: PathBuf,
        #[arg(long)]
        second: PathBuf,
    },
    /// Train one model and keep the checkpoint with the best validation R².
    Train {
        #[arg(long)]
        model: String,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        /// Training configuration TOML (keys of the `[train]` table of a run config).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        bwd_loss_dims: Option<LossDims>,
    },
    /// Noise-free accuracy table.
    Evaluate {
        #[arg(long, num_args = 1.., required = true)]
        models: Vec<PathBuf>,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo robustness over SNR levels.
    SnrSweep {
        #[arg(long, num_args = 1.., required = true)]
        models: Vec<PathBuf>,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated dB levels, strictly increasing.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
        #[arg(long, default_value_t = DEFAULT_REPETITIONS)]
        repetitions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random subset of the test set; all entries when omitted.
        #[arg(long)]
        max_entries: Option<usize>,
    },
    /// Relative-error difference `A - B` over the FF x T1 water grid.
    Heatmap {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Backward error against forward agreement for an invertible model.
    Correlate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline from a run config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Init { out } => cmd_init(&out),
        Command::SimulateDict {
            grid,
            schedule,
            out,
            fat_shift,
            seed,
            entries,
            preset,
        } => {
            let entries = entries.or(preset.map(|_| DESK_TRAIN_ENTRIES));
            cmd_simulate_dict(&grid, schedule.as_deref(), &out, fat_shift, seed, entries)
        }
        Command::SplitDict {
            dict,
            fraction,
            seed,
            first,
            second,
        } => cmd_split_dict(&dict, fraction, seed, &first, &second),
        Command::Train {
            model,
            train,
            val,
            config,
            out,
            preset,
            seed,
            bwd_loss_dims,
        } => {
            let kind: ModelKind = model.parse()?;
            let mut cfg = load_train_config(config.as_deref(), preset)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(d) = bwd_loss_dims {
                cfg.bwd_loss_dims = d.into();
            }
            let mut inputs = dictionary_inputs(&train);
            inputs.extend(dictionary_inputs(&val));
            inputs.extend(config);
            cmd_train(kind, &train, &val, &cfg, &out, &inputs)
        }
        Command::Evaluate { models, test, out } => cmd_evaluate(&models, &test, &out),
        Command::SnrSweep {
            models,
            test,
            out,
            levels,
            repetitions,
            seed,
            max_entries,
        } => {
            let levels = levels.unwrap_or_else(|| mrf_inn::evaluation::DEFAULT_SNR_LEVELS.to_vec());
            cmd_snr_sweep(&models, &test, &out, &levels, repetitions, seed, max_entries)
        }
        Command::Heatmap { a, b, test, param, out } => cmd_heatmap(&a, &b, &test, param.parse()?, &out),
        Command::Correlate { model, test, out } => cmd_correlate(&model, &test, &out),
        Command::Run { config, preset } => cmd_run(&config, preset),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn load_schedule(path: Option<&Path>) -> Result<ScheduleFile> {
    match path {
        Some(p) => ScheduleFile::load(p),
        None => Ok(ScheduleFile {
            fat_shift: mrf_inn::sim::DEFAULT_FAT_SHIFT_HZ,
            schedule: SequenceSchedule::reference(DEFAULT_LENGTH),
        }),
    }
}

fn load_train_config(path: Option<&Path>, preset: Option<Preset>) -> Result<TrainConfig> {
    let base = match preset {
        Some(Preset::Desk) => TrainConfig::desk(),
        None => TrainConfig::default(),
    };
    let Some(path) = path else {
        return Ok(base);
    };
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    // Keys in the file override the preset.
    let mut merged = toml::Table::try_from(&base).map_err(|e| Error::Config(e.to_string()))?;
    let overrides: toml::Table = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    merged.extend(overrides);
    let cfg: TrainConfig = merged
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_init(out: &Path) -> Result<()> {
    create_dir(out)?;
    GridSpec::standard_training().save(out.join("training_grid.toml"))?;
    GridSpec::standard_testing().save(out.join("testing_grid.toml"))?;
    load_schedule(None)?.save(out.join("schedule.toml"))?;
    let run = RunConfig {
        out_dir: PathBuf::from("desk"),
        schedule: Some(PathBuf::from("schedule.toml")),
        training_grid: Some(PathBuf::from("training_grid.toml")),
        testing_grid: Some(PathBuf::from("testing_grid.toml")),
        training_entries: Some(DESK_TRAIN_ENTRIES),
        validation_fraction: 0.2,
        seed: 0,
        models: ModelKind::ALL.iter().map(|k| k.name().to_string()).collect(),
        snr_levels: vec![15.0, 25.0, 35.0, 45.0],
        snr_repetitions: 25,
        snr_max_entries: Some(2000),
        train: TrainConfig::desk(),
    };
    let text = toml::to_string(&run).map_err(|e| Error::Config(e.to_string()))?;
    let path = out.join("desk.toml");
    fs::write(&path, text).map_err(|e| Error::Io { path, source: e })?;
    println!("wrote training_grid.toml, testing_grid.toml, schedule.toml, desk.toml to {}", out.display());
    Ok(())
}

fn simulate(
    grid: &GridSpec,
    schedule: &ScheduleFile,
    seed_value: u64,
    entries: Option<usize>,
) -> Result<Dictionary> {
    match entries {
        None => build_dictionary(grid, &schedule.schedule, schedule.fat_shift, seed_value),
        Some(target) => {
            let all: Vec<TissueParams> = expand_grid(grid)?;
            let chosen = stratified_sample(&all, target, seed::sub_seed(seed_value, "desk-train"));
            build_from_params(
                &chosen,
                &schedule.schedule,
                schedule.fat_shift,
                Some(grid.clone()),
                seed_value,
                &format!("stratified({target})"),
            )
        }
    }
}

fn cmd_simulate_dict(
    grid_path: &Path,
    schedule_path: Option<&Path>,
    out: &Path,
    fat_shift: Option<f64>,
    seed_value: u64,
    entries: Option<usize>,
) -> Result<()> {
    let grid = GridSpec::load(grid_path)?;
    let mut schedule = load_schedule(schedule_path)?;
    if let Some(shift) = fat_shift {
        schedule.fat_shift = shift;
    }
    let start = Instant::now();
    let dict = simulate(&grid, &schedule, seed_value, entries)?;
    dict.save(out)?;
    println!(
        "N={} T={} simulated in {:.2}s -> {}",
        dict.len(),
        dict.length(),
        start.elapsed().as_secs_f64(),
        out.display()
    );
    let mut inputs = vec![grid_path.to_path_buf()];
    inputs.extend(schedule_path.map(Path::to_path_buf));
    RunRecord::new("simulate-dict", Some(seed_value), hash_inputs(&inputs)?, vec![out.display().to_string()])
        .append_to(&parent_dir(out))
}

fn cmd_split_dict(dict_path: &Path, fraction: f64, seed_value: u64, first: &Path, second: &Path) -> Result<()> {
    let dict = Dictionary::load(dict_path)?;
    let (a, b) = split_dictionary(&dict, fraction, seed_value)?;
    a.save(first)?;
    b.save(second)?;
    println!("{} -> {} + {}", dict.len(), a.len(), b.len());
    let record = RunRecord::new(
        "split-dict",
        Some(seed_value),
        hash_inputs(&dictionary_inputs(dict_path))?,
        vec![first.display().to_string(), second.display().to_string()],
    );
    record.append_to(&parent_dir(first))?;
    if parent_dir(second) != parent_dir(first) {
        record.append_to(&parent_dir(second))?;
    }
    Ok(())
}

fn train_one(kind: ModelKind, train: &Dictionary, val: &Dictionary, cfg: &TrainConfig, out: &Path) -> Result<(TrainedModel, Vec<String>)> {
    let start = Instant::now();
    let outcome = train_with_progress(kind, train, val, cfg, |e| {
        println!(
            "{kind} epoch {:>3}: loss fwd {:.3e} bwd {:.3e}, val R² {:.4}",
            e.epoch, e.train_loss_fwd, e.train_loss_bwd, e.val_r2_mean
        );
    })?;
    let ckpt = out.join(format!("{kind}.ckpt"));
    let log = out.join(format!("{kind}_log.csv"));
    checkpoint::save(&outcome.best, &ckpt)?;
    write_log_csv(&outcome.log, &log)?;
    println!(
        "{kind}: best epoch {} with validation R² {:.4}, {} parameters, {:.1}s",
        outcome.best_epoch,
        outcome.best_r2,
        outcome.best.network.param_count(),
        start.elapsed().as_secs_f64()
    );
    Ok((outcome.best, vec![ckpt.display().to_string(), log.display().to_string()]))
}

fn cmd_train(kind: ModelKind, train: &Path, val: &Path, cfg: &TrainConfig, out: &Path, inputs: &[PathBuf]) -> Result<()> {
    create_dir(out)?;
    let train_dict = Dictionary::load(train)?;
    let val_dict = Dictionary::load(val)?;
    let (_, outputs) = train_one(kind, &train_dict, &val_dict, cfg, out)?;
    RunRecord::new("train", Some(cfg.seed), hash_inputs(inputs)?, outputs).append_to(out)
}

fn load_models(paths: &[PathBuf], test: &Dictionary) -> Result<Vec<(String, TrainedModel)>> {
    paths
        .iter()
        .map(|p| {
            let model = checkpoint::load(p)?;
            if model.fingerprint_length() != test.length() {
                return Err(Error::Shape(format!(
                    "{} expects fingerprints of length {}, test dictionary has {}",
                    p.display(),
                    model.fingerprint_length(),
                    test.length()
                )));
            }
            Ok((model_label(p, &model), model))
        })
        .collect()
}

fn model_label(path: &Path, model: &TrainedModel) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| model.kind.name().to_string())
}

fn write(path: &Path, text: &str) -> Result<String> {
    report::write_text(path, text)?;
    Ok(path.display().to_string())
}

fn print_metrics(label: &str, r: &MetricsReport) {
    println!("{label} ({} entries)", r.entries);
    for (name, p) in PARAM_NAMES.iter().zip(&r.params) {
        println!(
            "  {name:<8} MAE {:>10.4}  MRE {:>7.2} ± {:>6.2} %  R² {:.4}",
            p.mae, p.mre, p.mre_sd, p.r2
        );
    }
}

fn evaluate_models(models: &[(String, TrainedModel)], test: &Dictionary, out: &Path) -> Result<Vec<String>> {
    let truth = test.param_matrix();
    let features = test.feature_matrix();
    let mut csv = MetricsReport::CSV_HEADER.to_string();
    for (label, model) in models {
        let report = metrics(truth.view(), model.estimate(features.view())?.view())?;
        print_metrics(label, &report);
        csv.push_str(&report.to_csv(label));
    }
    Ok(vec![write(&out.join("metrics.csv"), &csv)?])
}

fn cmd_evaluate(paths: &[PathBuf], test_path: &Path, out: &Path) -> Result<()> {
    create_dir(out)?;
    let test = Dictionary::load(test_path)?;
    let models = load_models(paths, &test)?;
    let outputs = evaluate_models(&models, &test, out)?;
    let mut inputs = paths.to_vec();
    inputs.extend(dictionary_inputs(test_path));
    RunRecord::new("evaluate", None, hash_inputs(&inputs)?, outputs).append_to(out)
}

fn sweep_models(
    models: &[(String, TrainedModel)],
    test: &Dictionary,
    out: &Path,
    levels: &[f64],
    repetitions: usize,
    seed_value: u64,
    max_entries: Option<usize>,
) -> Result<(Vec<SnrSweepResult>, Vec<String>)> {
    let subset;
    let test = match max_entries {
        Some(k) if k < test.len() => {
            let (chosen, _) = mrf_inn::dictionary::split_indices(test.len(), k as f64 / test.len() as f64, seed::sub_seed(seed_value, "sweep-subset"));
            subset = test.subset(&chosen, &format!("sweep-subset({k})"));
            &subset
        }
        _ => test,
    };
    let signal = reference_signal(test.schedule(), test.manifest.fat_shift)?;
    let refs: Vec<(&str, &TrainedModel)> = models.iter().map(|(l, m)| (l.as_str(), m)).collect();
    let start = Instant::now();
    let results = snr_sweep(&refs, test, levels, repetitions, signal, seed_value)?;
    let mut csv = SnrSweepResult::CSV_HEADER.to_string();
    for r in &results {
        csv.push_str(&r.to_csv());
        for level in &r.levels {
            let cells: Vec<String> = level.mre_mean.iter().map(|m| format!("{m:.2}")).collect();
            println!("{} {:>5.1} dB: MRE % [{}]", r.model, level.snr_db, cells.join(", "));
        }
    }
    println!(
        "{} entries x {repetitions} repetitions x {} levels in {:.1}s",
        test.len(),
        levels.len(),
        start.elapsed().as_secs_f64()
    );
    let mut outputs = vec![write(&out.join("snr_sweep.csv"), &csv)?];
    for (j, name) in PARAM_NAMES.iter().enumerate() {
        let svg = report::sweep_svg(&results, j, &format!("MRE of {name} versus SNR"));
        outputs.push(write(&out.join(format!("snr_sweep_{name}.svg")), &svg)?);
    }
    Ok((results, outputs))
}

fn cmd_snr_sweep(
    paths: &[PathBuf],
    test_path: &Path,
    out: &Path,
    levels: &[f64],
    repetitions: usize,
    seed_value: u64,
    max_entries: Option<usize>,
) -> Result<()> {
    create_dir(out)?;
    let test = Dictionary::load(test_path)?;
    let models = load_models(paths, &test)?;
    let (_, outputs) = sweep_models(&models, &test, out, levels, repetitions, seed_value, max_entries)?;
    let mut inputs = paths.to_vec();
    inputs.extend(dictionary_inputs(test_path));
    RunRecord::new("snr-sweep", Some(seed_value), hash_inputs(&inputs)?, outputs).append_to(out)
}

fn heatmap_files(map: &HeatMap, title: &str, out: &Path) -> Result<Vec<String>> {
    let name = map.param.name();
    println!("{title}: mean cell over FF >= 0.7 rows {:.3} pp", map.mean_over_rows(0.7));
    Ok(vec![
        write(&out.join(format!("heatmap_{name}.csv")), &format!("{}{}", HeatMap::CSV_HEADER, map.to_csv()))?,
        write(&out.join(format!("heatmap_{name}.svg")), &report::heatmap_svg(map, title))?,
    ])
}

fn cmd_heatmap(a: &Path, b: &Path, test_path: &Path, param: HeatParam, out: &Path) -> Result<()> {
    create_dir(out)?;
    let test = Dictionary::load(test_path)?;
    let models = load_models(&[a.to_path_buf(), b.to_path_buf()], &test)?;
    let map = heatmap_diff(&models[0].1, &models[1].1, &test, param)?;
    let title = format!("{} relative error: {} minus {}", param.name(), models[0].0, models[1].0);
    let outputs = heatmap_files(&map, &title, out)?;
    let mut inputs = vec![a.to_path_buf(), b.to_path_buf()];
    inputs.extend(dictionary_inputs(test_path));
    RunRecord::new("heatmap", None, hash_inputs(&inputs)?, outputs).append_to(out)
}

fn correlation_files(corr: &Correlation, label: &str, out: &Path) -> Result<Vec<String>> {
    println!("{label}: Spearman rho = {:.4} over {} entries", corr.rho, corr.mre.len());
    Ok(vec![
        write(&out.join("correlation.csv"), &format!("{}{}", Correlation::CSV_HEADER, corr.to_csv()))?,
        write(
            &out.join("correlation.svg"),
            &report::correlation_svg(corr, &format!("{label}: backward error vs forward agreement")),
        )?,
    ])
}

fn cmd_correlate(path: &Path, test_path: &Path, out: &Path) -> Result<()> {
    create_dir(out)?;
    let test = Dictionary::load(test_path)?;
    let models = load_models(&[path.to_path_buf()], &test)?;
    let (label, model) = &models[0];
    if !model.kind.is_invertible() {
        return Err(Error::Config(format!("{label} is a {} model without a forward direction", model.kind)));
    }
    let corr = fwd_bwd_correlate(model, &test)?;
    let outputs = correlation_files(&corr, label, out)?;
    let mut inputs = vec![path.to_path_buf()];
    inputs.extend(dictionary_inputs(test_path));
    RunRecord::new("correlate", None, hash_inputs(&inputs)?, outputs).append_to(out)
}

fn cmd_run(config_path: &Path, preset: Option<Preset>) -> Result<()> {
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(Preset::Desk) = preset {
        cfg.training_entries = Some(DESK_TRAIN_ENTRIES);
        cfg.train = TrainConfig {
            seed: cfg.train.seed,
            ..TrainConfig::desk()
        };
    }
    let out = cfg.out_dir.clone();
    create_dir(&out)?;
    let schedule = load_schedule(cfg.schedule.as_deref())?;
    let training_grid = match &cfg.training_grid {
        Some(p) => GridSpec::load(p)?,
        None => GridSpec::standard_training(),
    };
    let testing_grid = match &cfg.testing_grid {
        Some(p) => GridSpec::load(p)?,
        None => GridSpec::standard_testing(),
    };

    let start = Instant::now();
    let train_dict = simulate(&training_grid, &schedule, cfg.seed, cfg.training_entries)?;
    let testing = simulate(&testing_grid, &schedule, cfg.seed, None)?;
    let (val, test) = split_dictionary(&testing, cfg.validation_fraction, seed::sub_seed(cfg.seed, "desk-split"))?;
    println!(
        "dictionaries: train {}, validation {}, test {} ({:.1}s)",
        train_dict.len(),
        val.len(),
        test.len(),
        start.elapsed().as_secs_f64()
    );
    let mut outputs = Vec::new();
    for (dict, name) in [(&train_dict, "train"), (&val, "val"), (&test, "test")] {
        let base = out.join(name);
        dict.save(&base)?;
        outputs.push(base.display().to_string());
    }

    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = cfg.seed;
    let mut models = Vec::new();
    for kind in cfg.kinds()? {
        let (model, files) = train_one(kind, &train_dict, &val, &train_cfg, &out)?;
        outputs.extend(files);
        models.push((kind.name().to_string(), model));
    }

    outputs.extend(evaluate_models(&models, &test, &out)?);
    outputs.extend(sweep_models(&models, &test, &out, &cfg.snr_levels, cfg.snr_repetitions, cfg.seed, cfg.snr_max_entries)?.1);
    let find = |k: ModelKind| models.iter().find(|(l, _)| l == k.name()).map(|(_, m)| m);
    if let (Some(bwd), Some(inn)) = (find(ModelKind::InnBwd), find(ModelKind::Inn)) {
        for param in [HeatParam::T1H2o, HeatParam::T1Fat] {
            let map = heatmap_diff(bwd, inn, &test, param)?;
            outputs.extend(heatmap_files(&map, &format!("{} relative error: inn_bwd minus inn", param.name()), &out)?);
        }
    }
    if let Some(inn) = find(ModelKind::Inn) {
        outputs.extend(correlation_files(&fwd_bwd_correlate(inn, &test)?, "inn", &out)?);
    }
    let mut inputs = vec![config_path.to_path_buf()];
    inputs.extend(cfg.inputs());
    RunRecord::new("run", Some(cfg.seed), hash_inputs(&inputs)?, outputs).append_to(&out)
}
