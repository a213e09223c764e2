use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use oncoie::corpus::{generate_corpus, read_jsonl, write_jsonl, Report};
use oncoie::ensemble::{vote_reports, VoteConfig};
use oncoie::eval::evaluate;
use oncoie::mrc::{self, build_mrc, build_mrc_vocab, load_mrc, save_mrc, sweep_tau, train_mrc};
use oncoie::taggers::{
    build_tagger, build_vocab, load_model, save_model, train, train_split, TrainHistory,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::{Cli, CliError, Command};

/// Rejection thresholds tried when `mrc-train` gets a dev set.
const TAU_GRID: usize = 21;

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed.or(cfg.seed) {
        cfg.apply_seed(seed);
    }
    if let Some(name) = &cli.model {
        cfg.tagger.name = name.parse()?;
    }
    let out = cli.out.clone();
    let need_out = || {
        out.clone()
            .ok_or_else(|| CliError::Usage("--out DIR is required for this command".into()))
    };
    match cli.command {
        Command::Gen { n } => {
            if let Some(n) = n {
                cfg.synthetic.n_reports = n;
            }
            let dir = need_out()?;
            cfg.echo(&dir)?;
            let reports = generate_corpus(&cfg.synthetic)?;
            write_jsonl(&reports, &dir.join("corpus.jsonl"))?;
            info!("wrote {} reports", reports.len());
        }
        Command::Preprocess { input } => {
            let dir = need_out()?;
            cfg.echo(&dir)?;
            let reports = read_jsonl(&input)?;
            let total = reports.len();
            let keywords = cfg.keywords();
            let kept: Vec<Report> = reports
                .into_iter()
                .filter_map(|mut r| r.preprocess(&keywords, &cfg.split).then_some(r))
                .collect();
            info!("kept {} of {total} reports, dropped {}", kept.len(), total - kept.len());
            write_jsonl(&kept, &dir.join("preprocessed.jsonl"))?;
            write_json(
                &dir.join("preprocess_summary.json"),
                &serde_json::json!({ "input": total, "kept": kept.len(), "dropped": total - kept.len() }),
            )?;
        }
        Command::Train { input, dev } => {
            let dir = need_out()?;
            cfg.echo(&dir)?;
            let reports = read_jsonl(&input)?;
            let vocab = build_vocab(&reports, cfg.tagger.min_char_freq, &[]);
            let model = build_tagger(&cfg.tagger, vocab)?;
            let (model, history) = match dev {
                Some(path) => train_split(model, &reports, &read_jsonl(&path)?, &cfg.train)?,
                None => train(model, &reports, &cfg.train)?,
            };
            save_model(&model, &dir)?;
            write_history(&dir, &history)?;
        }
        Command::Predict { model_dir, input } => {
            let dir = need_out()?;
            cfg.echo(&dir)?;
            let model = load_model(&model_dir)?;
            let preds: Vec<Report> = read_jsonl(&input)?.iter().map(|r| model.predict_report(r)).collect();
            write_jsonl(&preds, &dir.join("predictions.jsonl"))?;
            info!("{} tagged {} reports", model.config().name, preds.len());
        }
        Command::Ensemble { predictions } => {
            if let Some(t) = &cli.threshold {
                let t = t
                    .parse::<usize>()
                    .map_err(|_| CliError::Usage(format!("ensemble threshold must be a vote count, got `{t}`")))?;
                cfg.vote_threshold = Some(t);
            }
            let dir = need_out()?;
            let models = predictions
                .iter()
                .map(|p| read_jsonl(p))
                .collect::<oncoie::Result<Vec<_>>>()?;
            let vote = VoteConfig {
                threshold: cfg.vote_threshold,
            };
            let threshold = vote.resolve(models.len()).map_err(|e| CliError::Usage(e.to_string()))?;
            cfg.vote_threshold = Some(threshold);
            cfg.echo(&dir)?;
            let fused = vote_reports(&models, &vote)?;
            write_jsonl(&fused, &dir.join("fused.jsonl"))?;
            info!("fused {} models at threshold {threshold}", models.len());
        }
        Command::MrcTrain { input, dev } => {
            if let Some(t) = &cli.threshold {
                cfg.mrc.tau = parse_tau(t)?;
            }
            let dir = need_out()?;
            let reports = read_jsonl(&input)?;
            let dev = dev.map(|p| read_jsonl(&p)).transpose()?.unwrap_or_default();
            let model = build_mrc(&cfg.mrc, build_mrc_vocab(&reports, cfg.mrc.min_char_freq))?;
            let (mut model, history) = train_mrc(model, &reports, &dev, &cfg.train)?;
            if cli.threshold.is_none() && !dev.is_empty() {
                let taus: Vec<f64> = (0..TAU_GRID).map(|i| i as f64 * 2.0 / (TAU_GRID - 1) as f64).collect();
                let sweep = sweep_tau(&model, &dev, &taus)?;
                let (tau, prf) = sweep
                    .iter()
                    .fold(sweep[0], |best, &cur| if cur.1.f1 > best.1.f1 { cur } else { best });
                info!("rejection threshold {tau:.1} (dev f1 {:.4})", prf.f1);
                model.config_mut().tau = tau;
                cfg.mrc.tau = tau;
            }
            cfg.echo(&dir)?;
            save_mrc(&model, &dir)?;
            write_history(&dir, &history)?;
        }
        Command::MrcPredict { model_dir, input } => {
            let dir = need_out()?;
            let mut model = load_mrc(&model_dir)?;
            if let Some(t) = &cli.threshold {
                model.config_mut().tau = parse_tau(t)?;
            }
            cfg.mrc = model.config().clone();
            cfg.echo(&dir)?;
            let preds = read_jsonl(&input)?
                .iter()
                .map(|r| mrc::mrc_predict_report(r, &model))
                .collect::<oncoie::Result<Vec<_>>>()?;
            write_jsonl(&preds, &dir.join("predictions.jsonl"))?;
        }
        Command::Eval { gold, predictions } => {
            let report = evaluate(&read_jsonl(&gold)?, &read_jsonl(&predictions)?)?;
            print!("{}", report.to_table());
            if let Some(dir) = out {
                cfg.echo(&dir)?;
                write_json(&dir.join("eval.json"), &report)?;
            }
        }
    }
    Ok(())
}

fn parse_tau(text: &str) -> Result<f64, CliError> {
    text.parse::<f64>()
        .ok()
        .filter(|t| (0.0..=2.0).contains(t))
        .ok_or_else(|| CliError::Usage(format!("MRC threshold must be a number in [0, 2], got `{text}`")))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(oncoie::Error::from)?;
    fs::write(path, text + "\n").map_err(oncoie::Error::from)?;
    Ok(())
}

/// Per-epoch loss and dev scores; wall time goes to the log only so reruns
/// stay byte-identical.
fn write_history(dir: &Path, history: &TrainHistory) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Epoch<'a> {
        epoch: usize,
        train_loss: f64,
        dev: &'a oncoie::eval::Prf,
    }
    let epochs: Vec<Epoch> = history
        .epochs
        .iter()
        .map(|e| {
            info!("epoch {}: {:.2}s", e.epoch, e.seconds);
            Epoch {
                epoch: e.epoch,
                train_loss: e.train_loss,
                dev: &e.dev,
            }
        })
        .collect();
    let path: PathBuf = dir.join("history.json");
    write_json(&path, &serde_json::json!({ "best_epoch": history.best_epoch, "epochs": epochs }))
}
