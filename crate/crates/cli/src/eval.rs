use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use ndarray::{concatenate, Array2, Axis};
use serde::Serialize;
use serde_json::{json, Value};

use sppkit::datagen::{PairFile, PAIR_MAGIC};
use sppkit::eval::{
    auc, kl_divergence, log_err, pd_at_pfa, roc_pooled, segsnr, KlForm, DEFAULT_KL_EPS, DEFAULT_LABEL_THRESHOLD,
    DEFAULT_PFA,
};
use sppkit::noise::NOISE_FLOOR;
use sppkit::signal::read_wav;
use sppkit::spp_stat::SppMap;
use sppkit::{load_any_dump, DumpKind};

use crate::error::{usage, CliError, CliResult};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Mean absolute log-spectral distance between noise tracks, dB.
    Logerr,
    /// Pooled ROC curve of SPP estimates against oracle targets.
    Roc,
    Auc,
    /// Detection probability at `--pfa`.
    Pd,
    /// Mean segmental SNR of enhanced WAVs against clean WAVs, dB.
    Segsnr,
    /// KL divergence of SPP estimates from oracle targets.
    Kl,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum KlFormArg {
    TargetTerm,
    FullBinary,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    metric: Metric,
    /// Reference input; repeat to pool over utterances. Dumps, PairFiles
    /// (their target) or WAV files for segsnr.
    #[arg(long = "reference", required = true)]
    reference: Vec<PathBuf>,
    /// Estimate input, paired with `--reference` in order.
    #[arg(long = "estimate", required = true)]
    estimate: Vec<PathBuf>,
    /// Targets at or above this value are labeled speech.
    #[arg(long, default_value_t = DEFAULT_LABEL_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = DEFAULT_PFA)]
    pfa: f64,
    #[arg(long, default_value_t = DEFAULT_KL_EPS)]
    kl_eps: f64,
    #[arg(long, value_enum, default_value = "target-term")]
    kl_form: KlFormArg,
    /// Power floor applied before taking logs in logerr.
    #[arg(long, default_value_t = NOISE_FLOOR)]
    floor: f64,
    /// Seed recorded in the output record.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the ROC table (threshold,pfa,pd) here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// A matrix from a dump, or the target block of a PairFile.
fn load_matrix(path: &Path) -> CliResult<Array2<f64>> {
    let mut magic = [0u8; 4];
    let head = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    magic.copy_from_slice(head.get(..4).unwrap_or(b"????"));
    if &magic == PAIR_MAGIC {
        return Ok(PairFile::load(path)?.target.data);
    }
    let (kind, m) = load_any_dump(path)?;
    if kind == DumpKind::Features {
        eprintln!("warning: {} holds features, not probabilities or a noise track", path.display());
    }
    Ok(m)
}

fn load_maps(paths: &[PathBuf]) -> CliResult<Vec<SppMap>> {
    paths.iter().map(|p| Ok(SppMap::new(load_matrix(p)?)?)).collect()
}

fn pooled(ms: Vec<Array2<f64>>) -> CliResult<Array2<f64>> {
    let views: Vec<_> = ms.iter().map(|m| m.view()).collect();
    concatenate(Axis(1), &views).map_err(|e| CliError::Validation(format!("inputs do not stack: {e}")))
}

fn compute(args: &EvalArgs) -> CliResult<Value> {
    let spp =
        || -> CliResult<(Vec<SppMap>, Vec<SppMap>)> { Ok((load_maps(&args.reference)?, load_maps(&args.estimate)?)) };
    Ok(match args.metric {
        Metric::Logerr => {
            let r: Vec<_> = args.reference.iter().map(|p| load_matrix(p)).collect::<CliResult<_>>()?;
            let e: Vec<_> = args.estimate.iter().map(|p| load_matrix(p)).collect::<CliResult<_>>()?;
            json!(log_err(&pooled(r)?, &pooled(e)?, args.floor)?)
        }
        Metric::Roc | Metric::Auc | Metric::Pd => {
            let (truth, est) = spp()?;
            let curve = roc_pooled(est.iter().zip(&truth), args.threshold)?;
            if let Some(path) = &args.csv {
                let mut table = String::from("threshold,pfa,pd\n");
                let thresholds = std::iter::once(f64::INFINITY).chain(curve.thresholds.iter().copied());
                for (t, (pfa, pd)) in thresholds.zip(&curve.points) {
                    table.push_str(&format!("{t},{pfa},{pd}\n"));
                }
                std::fs::write(path, table).map_err(|e| CliError::io(path, e))?;
            }
            match args.metric {
                Metric::Auc => json!(auc(&curve)),
                Metric::Pd => json!(pd_at_pfa(&curve, args.pfa).map_err(usage)?),
                _ => json!({ "auc": auc(&curve), "points": curve.points, "thresholds": curve.thresholds }),
            }
        }
        Metric::Kl => {
            let (truth, est) = spp()?;
            let t = SppMap::new(pooled(truth.into_iter().map(|m| m.data).collect())?)?;
            let e = SppMap::new(pooled(est.into_iter().map(|m| m.data).collect())?)?;
            let form = match args.kl_form {
                KlFormArg::TargetTerm => KlForm::TargetTerm,
                KlFormArg::FullBinary => KlForm::FullBinary,
            };
            json!(kl_divergence(&t, &e, args.kl_eps, form)?)
        }
        Metric::Segsnr => {
            let mut sum = 0.0;
            for (r, e) in args.reference.iter().zip(&args.estimate) {
                sum += segsnr(&read_wav(r)?, &read_wav(e)?)?;
            }
            json!(sum / args.reference.len() as f64)
        }
    })
}

pub fn run(args: EvalArgs) -> CliResult<()> {
    if args.reference.len() != args.estimate.len() {
        return Err(CliError::Usage(format!(
            "{} --reference inputs but {} --estimate inputs",
            args.reference.len(),
            args.estimate.len()
        )));
    }
    let value = compute(&args)?;
    let mut config = json!({ "inputs": args.reference.len() });
    match args.metric {
        Metric::Logerr => config["floor"] = json!(args.floor),
        Metric::Roc | Metric::Auc => config["threshold"] = json!(args.threshold),
        Metric::Pd => {
            config["threshold"] = json!(args.threshold);
            config["pfa"] = json!(args.pfa);
        }
        Metric::Kl => {
            config["eps"] = json!(args.kl_eps);
            config["form"] = json!(match args.kl_form {
                KlFormArg::TargetTerm => "target_term",
                KlFormArg::FullBinary => "full_binary",
            });
        }
        Metric::Segsnr => {}
    }
    let record = json!({ "metric": args.metric, "value": value, "config": config, "seed": args.seed });
    crate::emit(&record)
}
