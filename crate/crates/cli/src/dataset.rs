use std::path::PathBuf;

use clap::{Args, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use sppkit::datagen::{make_pair_draft, CleanSource, MixSpec, NoiseKind, NoiseSource, PairFile, MIN_SPEECH_DURATION_S};
use sppkit::{NormStats, StftConfig};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, ValueEnum)]
pub enum NoiseArg {
    White,
    Pink,
    Modulated,
    /// Cycle through white, pink and modulated.
    Mixed,
}

#[derive(Args)]
pub struct DatasetArgs {
    #[arg(long)]
    count: usize,
    #[arg(long, allow_hyphen_values = true, default_value_t = -10.0)]
    snr_min: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 10.0)]
    snr_max: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Utterance length in seconds.
    #[arg(long, default_value_t = 3.0)]
    duration: f64,
    #[arg(long, value_enum, default_value = "mixed")]
    noise: NoiseArg,
}

#[derive(Serialize)]
struct Entry {
    file: String,
    seed: u64,
    snr_db: f64,
    noise: NoiseKind,
}

#[derive(Serialize)]
struct Manifest {
    seed: u64,
    count: usize,
    snr_min_db: f64,
    snr_max_db: f64,
    duration_s: f64,
    stft: StftConfig,
    norm_stats: NormStats,
    pairs: Vec<Entry>,
}

fn noise_kind(arg: NoiseArg, i: usize) -> NoiseKind {
    match arg {
        NoiseArg::White => NoiseKind::White,
        NoiseArg::Pink => NoiseKind::Pink,
        NoiseArg::Modulated => NoiseKind::Modulated,
        NoiseArg::Mixed => NoiseKind::ALL[i % NoiseKind::ALL.len()],
    }
}

pub fn run(args: DatasetArgs) -> CliResult<()> {
    if !(args.snr_min.is_finite() && args.snr_max.is_finite() && args.snr_min <= args.snr_max) {
        return Err(CliError::Usage(format!(
            "need finite --snr-min <= --snr-max, got {} and {}",
            args.snr_min, args.snr_max
        )));
    }
    if !(args.duration >= MIN_SPEECH_DURATION_S && args.duration.is_finite()) {
        return Err(CliError::Usage(format!("--duration must be at least {MIN_SPEECH_DURATION_S} s")));
    }
    // every per-utterance draw comes from one stream, so the set does not
    // depend on the worker count
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let specs: Vec<(MixSpec, NoiseKind)> = (0..args.count)
        .map(|i| {
            let kind = noise_kind(args.noise, i);
            let spec = MixSpec {
                snr_db: rng.random_range(args.snr_min..=args.snr_max),
                seed: rng.random(),
                duration_s: args.duration,
                clean: CleanSource::Speechlike,
                noise: NoiseSource::Synth(kind),
            };
            (spec, kind)
        })
        .collect();

    let config = StftConfig::default();
    let drafts = specs
        .par_iter()
        .map(|(spec, _)| {
            let mix = spec.render()?;
            make_pair_draft(&mix.clean, &mix.noise, spec.snr_db, spec.seed, config)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let stats = if drafts.is_empty() {
        NormStats::identity()
    } else {
        NormStats::from_features(drafts.iter().map(|d| &d.features))?
    };

    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let names: Vec<String> = (0..drafts.len()).map(|i| format!("pair_{i:05}.sppd")).collect();
    drafts
        .par_iter()
        .zip(&names)
        .try_for_each(|(draft, name)| PairFile::from_draft(draft, stats)?.save(args.out.join(name)))?;

    let manifest = Manifest {
        seed: args.seed,
        count: args.count,
        snr_min_db: args.snr_min,
        snr_max_db: args.snr_max,
        duration_s: args.duration,
        stft: config,
        norm_stats: stats,
        pairs: specs
            .iter()
            .zip(names)
            .map(|((spec, kind), file)| Entry { file, seed: spec.seed, snr_db: spec.snr_db, noise: *kind })
            .collect(),
    };
    let path = args.out.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, json + "\n").map_err(|e| CliError::io(&path, e))?;
    eprintln!("wrote {} pairs to {}", args.count, args.out.display());
    Ok(())
}
