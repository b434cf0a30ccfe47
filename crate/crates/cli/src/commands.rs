use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use neurocomm::data::{generate_synthetic, LabeledSpikeSet, SyntheticSpec};
use neurocomm::fl::{FlExperiment, Phase, TrainingLog};
use neurocomm::jscc::{evaluate_accuracy_vs_snr, evaluate_accuracy_vs_time_at_snr, fit, TrainOptions};
use neurocomm::paramfile::{load_pipeline, save_pipeline, Manifest};
use neurocomm::seed::{self, stream};
use neurocomm::spkt::{load_spkt, save_spkt};
use neurocomm::{Pipeline, PipelineConfig, Scheme};
use rayon::prelude::*;

use crate::error::{config_err, CliError, CliResult};
use crate::output::{num, write_text, Csv};
use crate::settings::{positive, probability, Settings};
use crate::{FlTrainArgs, GenDataArgs, JsccEvalArgs, JsccTrainArgs};

pub const JSCC_EPOCHS: usize = 4;
pub const JSCC_LR: f64 = 0.002;
pub const JSCC_ENCODER_LR: f64 = 0.02;

pub fn gen_data(a: GenDataArgs) -> CliResult<()> {
    let mut s = Settings::load(a.config.as_deref())?;
    let d = SyntheticSpec::default();
    let spec = SyntheticSpec {
        class_count: positive("classes", s.value("classes", a.classes, d.class_count)?)?,
        channels: positive("channels", s.value("channels", a.channels, d.channels)?)?,
        horizon: positive("horizon", s.value("horizon", a.horizon, d.horizon)?)?,
        count: s.value("count", a.count, d.count)?,
        pattern_density: probability("density", s.value("density", a.density, d.pattern_density)?)?,
        noise_flip: probability("flip", s.value("flip", a.flip, d.noise_flip)?)?,
        active_rate: probability("active-rate", s.value("active-rate", a.active_rate, d.active_rate)?)?,
        background_rate: probability(
            "background-rate",
            s.value("background-rate", a.background_rate, d.background_rate)?,
        )?,
        offset: s.value("offset", a.offset, 0)?,
        seed: s.value("seed", a.seed, 0)?,
    };
    if spec.class_count > 256 {
        return config_err("--classes must be at most 256 for SPKT labels");
    }
    let out = s.path("out", a.out, false)?;
    s.check_unused()?;
    save_spkt(&generate_synthetic(&spec)?, &out)?;
    Ok(())
}

fn load_set(key: &str, path: &Path) -> CliResult<LabeledSpikeSet> {
    load_spkt(path).map_err(|e| CliError::Data(format!("--{key} {}: {e}", path.display())))
}

pub fn fl_train(a: FlTrainArgs) -> CliResult<()> {
    let mut s = Settings::load(a.config.as_deref())?;
    let data = s.path("data", a.data, true)?;
    let test = s.path("test", a.test, true)?;
    let devices = s.optional("devices", a.devices)?;
    let delta_t = s.list("delta-t", a.delta_t, vec![1, 10])?;
    let delta_j = s.list("delta-j", a.delta_j, vec![1, 8, 80])?;
    let lr = s.value("lr", a.lr, 0.05)?;
    let rounds = positive("rounds", s.value("rounds", a.rounds, 40)?)?;
    let hidden = s.value("hidden", a.hidden, 16)?;
    let repeats = positive("repeats", s.value("repeats", a.repeats, 3)?)?;
    let seed = s.value("seed", a.seed, 0)?;
    let out = s.path("out", a.out, false)?;
    s.check_unused()?;
    if delta_t.iter().chain(&delta_j).any(|&v| v == 0) {
        return config_err("--delta-t and --delta-j entries must be positive");
    }
    if !(lr.is_finite() && lr >= 0.0) {
        return config_err(format!("--lr must be finite and >= 0, got {lr}"));
    }

    let train = load_set("data", &data)?;
    let test = load_set("test", &test)?;
    if test.channels() != train.channels() || test.horizon() != train.horizon() {
        return Err(CliError::Data("--test shape differs from --data".into()));
    }
    let classes = train.class_count().max(test.class_count());
    let devices = devices.unwrap_or(train.class_count());
    if devices == 0 || devices > train.class_count() {
        return config_err(format!(
            "--devices must lie in 1..={} so that every device holds data",
            train.class_count()
        ));
    }
    let assignment: BTreeMap<usize, usize> = (0..train.class_count()).map(|c| (c, c % devices)).collect();
    // Fail on a bad schedule before any training.
    for &dt in &delta_t {
        for &dj in &delta_j {
            neurocomm::FlSchedule::for_rounds(dt, dj, rounds, train.horizon())?;
        }
    }

    let points: Vec<(usize, usize, usize)> = delta_t
        .iter()
        .flat_map(|&dt| delta_j.iter().flat_map(move |&dj| (0..repeats).map(move |r| (dt, dj, r))))
        .collect();
    let logs = points
        .par_iter()
        .map(|&(dt, dj, r)| -> CliResult<TrainingLog> {
            let mut e = FlExperiment::one_class_per_device(classes, dt, dj, rounds);
            e.assignment = assignment.clone();
            e.hidden = hidden;
            e.local.learning_rate = lr;
            Ok(e.run(&train, &test, seed::derive(seed, stream::REPEAT, r as u64))?)
        })
        .collect::<CliResult<Vec<_>>>()?;

    let mut columns = vec!["delta_t", "delta_j", "round", "phase", "wall_step", "accuracy_mean"];
    let rep_names: Vec<String> = (1..=repeats).map(|r| format!("accuracy_rep{r}")).collect();
    columns.extend(rep_names.iter().map(String::as_str));
    let mut csv = Csv::new(&s.header("fl-train"), &columns);
    for (chunk, point) in logs.chunks(repeats).zip(points.chunks(repeats)) {
        let (dt, dj, _) = point[0];
        let last = chunk[0].rounds;
        for round in 1..=last + 1 {
            for phase in [Phase::RoundStart, Phase::RoundEnd] {
                if round > last && phase == Phase::RoundEnd {
                    continue;
                }
                let accs: Vec<f64> = chunk
                    .iter()
                    .map(|log| log.device_mean(round, phase).unwrap_or(f64::NAN))
                    .collect();
                let wall = chunk[0]
                    .records
                    .iter()
                    .find(|r| r.round == round && r.phase == phase)
                    .map_or(0, |r| r.wall_step);
                let mean = accs.iter().sum::<f64>() / accs.len() as f64;
                let mut row = vec![
                    dt.to_string(),
                    dj.to_string(),
                    round.to_string(),
                    match phase {
                        Phase::RoundStart => "start",
                        Phase::RoundEnd => "end",
                    }
                    .to_string(),
                    wall.to_string(),
                    num(mean),
                ];
                row.extend(accs.iter().map(|&a| num(a)));
                csv.row(&row);
            }
        }
    }
    csv.write(&out)
}

fn parse_rate(raw: &str) -> CliResult<(usize, usize)> {
    let (n, d) = raw.split_once('/').unwrap_or((raw, "1"));
    match (n.trim().parse(), d.trim().parse()) {
        (Ok(n), Ok(d)) if n > 0 && d > 0 => Ok((n, d)),
        _ => config_err(format!("--rate must be a positive integer or fraction such as 1/2, got {raw:?}")),
    }
}

fn baseline_flag(raw: Option<String>) -> CliResult<bool> {
    match raw.as_deref() {
        None | Some("none") => Ok(false),
        Some("uncoded") => Ok(true),
        Some(other) => config_err(format!("--baseline must be uncoded or none, got {other:?}")),
    }
}

/// Where `jscc-train --baseline uncoded` stores the uncoded receiver.
pub fn baseline_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".uncoded");
    PathBuf::from(s)
}

pub fn jscc_train(a: JsccTrainArgs) -> CliResult<()> {
    let mut s = Settings::load(a.config.as_deref())?;
    let data = s.path("data", a.data, true)?;
    let scheme: Scheme = s
        .value("scheme", a.scheme, "neurojscc".to_string())?
        .parse()
        .map_err(|e: neurocomm::Error| CliError::Config(format!("--scheme: {e}")))?;
    let rate = s.value("rate", a.rate, "1".to_string())?;
    let (rate_num, rate_den) = parse_rate(&rate)?;
    let train_snr = s.optional("train-snr-db", a.train_snr_db)?;
    let epochs = s.value("epochs", a.epochs, JSCC_EPOCHS)?;
    let lr = s.value("lr", a.lr, JSCC_LR)?;
    let encoder_lr = s.value("encoder-lr", a.encoder_lr, JSCC_ENCODER_LR)?;
    let decoder_hidden = s.optional("decoder-hidden", a.decoder_hidden)?;
    let decay = s.value("eligibility-decay", a.eligibility_decay, 1.0)?;
    let baseline = baseline_flag(s.optional("baseline", a.baseline)?)?;
    let seed = s.value("seed", a.seed, 0)?;
    let out = s.path("out", a.out, false)?;
    let log_path = a.log;
    s.check_unused()?;
    if !(0.0..=1.0).contains(&decay) {
        return config_err(format!("--eligibility-decay must lie in [0, 1], got {decay}"));
    }

    let train = load_set("data", &data)?;
    let mut cfg = PipelineConfig::new(scheme, train.channels(), train.horizon());
    cfg.d_v = train.class_count().max(2);
    cfg.rate_num = rate_num;
    cfg.rate_den = rate_den;
    cfg.learning_rate = lr;
    cfg.encoder_learning_rate = Some(encoder_lr);
    cfg.decoder_hidden = decoder_hidden;
    cfg.rule.eligibility_decay = decay;
    cfg.validate()?;

    let mut jobs = vec![(cfg.clone(), train_snr, 0u64)];
    if baseline {
        let mut u = cfg.clone();
        u.scheme = Scheme::Uncoded;
        u.rate_num = 1;
        u.rate_den = 1;
        u.encoder_learning_rate = None;
        // The uncoded receiver does not depend on the link; it learns clean data.
        jobs.push((u, None, 1));
    }
    let trained = jobs
        .into_par_iter()
        .map(|(cfg, snr, index)| -> CliResult<(Pipeline, Vec<f64>)> {
            let mut p = Pipeline::new(cfg, seed::derive(seed, stream::INIT, index))?;
            let history = fit(
                &mut p,
                &train,
                &TrainOptions {
                    epochs,
                    snr_db: snr,
                    seed: seed::derive(seed, stream::TRAIN, index),
                },
            )?;
            Ok((p, history))
        })
        .collect::<CliResult<Vec<_>>>()?;

    let mut extra = Manifest::default();
    extra.set("seed", seed);
    extra.set("epochs", epochs);
    extra.set("train_snr_db", train_snr.map_or("none".into(), |v| v.to_string()));
    extra.set("data", data.display());
    let mut csv = Csv::new(&s.header("jscc-train"), &["scheme", "epoch", "mean_bound"]);
    for (i, (p, history)) in trained.iter().enumerate() {
        let path = if i == 0 { out.clone() } else { baseline_path(&out) };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(neurocomm::Error::from)?;
        }
        save_pipeline(p, &path, &extra)?;
        for (e, b) in history.iter().enumerate() {
            csv.row(&[p.config.scheme.name().to_string(), (e + 1).to_string(), num(*b)]);
        }
    }
    if let Some(path) = log_path {
        csv.write(&path)?;
    }
    Ok(())
}

fn load_model(key: &str, path: &Path) -> CliResult<Pipeline> {
    let (p, _) = load_pipeline(path).map_err(|e| match CliError::from(e) {
        CliError::Config(m) | CliError::Data(m) => CliError::Data(format!("--{key} {}: {m}", path.display())),
    })?;
    Ok(p)
}

pub fn jscc_eval(a: JsccEvalArgs) -> CliResult<()> {
    let mut s = Settings::load(a.config.as_deref())?;
    let model = s.path("model", a.model, true)?;
    let test = s.path("test", a.test, true)?;
    let snr_db = s.value("snr-db", a.snr_db, -8.0)?;
    let grid = s.list("snr-grid", a.snr_grid, vec![-12.0, -8.0, -4.0, 0.0, 6.0])?;
    let repeats = positive("repeats", s.value("repeats", a.repeats, 3)?)?;
    let baseline = baseline_flag(s.optional("baseline", a.baseline)?)?;
    let seed = s.value("seed", a.seed, 0)?;
    let out = s.path("out", a.out, false)?;
    s.check_unused()?;
    if grid.is_empty() {
        return config_err("--snr-grid is empty");
    }

    let test = load_set("test", &test)?;
    let mut models = vec![load_model("model", &model)?];
    if baseline {
        models.push(load_model("baseline", &baseline_path(&model))?);
    }
    for m in &models {
        if m.config.d_o != test.channels() || m.config.horizon != test.horizon() {
            return Err(CliError::Data(format!(
                "--test has shape {}x{}, the {} model expects {}x{}",
                test.channels(),
                test.horizon(),
                m.config.scheme.name(),
                m.config.d_o,
                m.config.horizon
            )));
        }
    }
    let curves = models
        .par_iter()
        .map(|m| -> CliResult<(Vec<f64>, Vec<f64>)> {
            Ok((
                evaluate_accuracy_vs_time_at_snr(m, &test, snr_db, repeats, seed)?,
                evaluate_accuracy_vs_snr(m, &test, &grid, repeats, seed)?,
            ))
        })
        .collect::<CliResult<Vec<_>>>()?;

    let names: Vec<&str> = models.iter().map(|m| m.config.scheme.name()).collect();
    let header = s.header("jscc-eval");
    let mut time = Csv::new(&header, &[&["t"], names.as_slice()].concat());
    for t in 0..test.horizon() {
        let mut row = vec![(t + 1).to_string()];
        row.extend(curves.iter().map(|c| num(c.0[t])));
        time.row(&row);
    }
    let mut snr = Csv::new(&header, &[&["snr_db"], names.as_slice()].concat());
    for (g, &db) in grid.iter().enumerate() {
        let mut row = vec![db.to_string()];
        row.extend(curves.iter().map(|c| num(c.1[g])));
        snr.row(&row);
    }
    time.write(&out.join("accuracy_vs_time.csv"))?;
    snr.write(&out.join("accuracy_vs_snr.csv"))?;
    write_text(&out.join("plot.py"), &plot_script(snr_db))
}

fn plot_script(snr_db: f64) -> String {
    format!(
        r##"# Generated by neurocomm jscc-eval. Usage: python plot.py
import csv
import os

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def read(name):
    with open(os.path.join(HERE, name)) as f:
        rows = [r for r in csv.reader(f) if r and not r[0].startswith("#")]
    head, body = rows[0], rows[1:]
    return head, [[float(v) for v in r] for r in body]


fig, axes = plt.subplots(1, 2, figsize=(10, 4))
for ax, (name, xlabel, title) in zip(
    axes,
    [
        ("accuracy_vs_time.csv", "time step", "SNR = {snr_db} dB"),
        ("accuracy_vs_snr.csv", "SNR (dB)", "final-step accuracy"),
    ],
):
    head, body = read(name)
    xs = [r[0] for r in body]
    for j, label in enumerate(head[1:], start=1):
        ax.plot(xs, [r[j] for r in body], marker="o" if "snr" in name else None, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("test accuracy")
    ax.set_title(title)
    ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(HERE, "accuracy.png"), dpi=150)
"##
    )
}
