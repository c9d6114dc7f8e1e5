use std::path::PathBuf;

use clap::{Args, ValueEnum};

use sppkit::enhance::{enhance, EnhanceConfig, SppSource};
use sppkit::lsa::DdVariant;
use sppkit::signal::{log_power, read_wav, stft, write_wav, WavEncoding, DEFAULT_POWER_FLOOR};
use sppkit::spp_stat::FixedPriorParams;
use sppkit::{load_model, save_dump, DumpKind, TrackerKind};

use crate::error::{usage, CliError, CliResult};

#[derive(Clone, Copy, ValueEnum)]
pub enum SppArg {
    Stat,
    Nn,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum TrackerArg {
    Subopt,
    Opt,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum DdArg {
    Periodogram,
    Classical,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum EncodingArg {
    Pcm16,
    Float32,
}

#[derive(Args)]
pub struct EnhanceArgs {
    /// Noisy input WAV.
    input: PathBuf,
    /// Enhanced output WAV.
    output: PathBuf,
    #[arg(long, value_enum, default_value = "stat")]
    spp: SppArg,
    /// Model bundle (.sppm); required with `--spp nn`.
    #[arg(long, required_if_eq("spp", "nn"))]
    model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "subopt")]
    tracker: TrackerArg,
    #[arg(long, default_value_t = EnhanceConfig::default().alpha_snr)]
    alpha_snr: f64,
    #[arg(long, value_enum, default_value = "periodogram")]
    dd: DdArg,
    #[arg(long, allow_hyphen_values = true, default_value_t = EnhanceConfig::default().xi_floor_db)]
    xi_floor_db: f64,
    #[arg(long, default_value_t = EnhanceConfig::default().gain_floor)]
    gain_floor: f64,
    /// Fixed a priori SNR under speech presence, dB.
    #[arg(long, allow_hyphen_values = true, default_value_t = FixedPriorParams::default().xi_h1_db)]
    xi_h1_db: f64,
    /// Prior ratio p(H0)/p(H1).
    #[arg(long, default_value_t = FixedPriorParams::default().alpha_prior)]
    prior_ratio: f64,
    #[arg(long, default_value_t = FixedPriorParams::default().beta)]
    beta: f64,
    #[arg(long, default_value_t = FixedPriorParams::default().lambda_cap)]
    lambda: f64,
    #[arg(long, default_value_t = EnhanceConfig::default().noise_smoothing)]
    noise_smoothing: f64,
    #[arg(long, default_value_t = EnhanceConfig::default().init_frames)]
    init_frames: usize,
    #[arg(long, value_enum, default_value = "float32")]
    encoding: EncodingArg,
    /// Write feature, SPP, noise and gain dumps here.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
}

impl EnhanceArgs {
    fn config(&self) -> EnhanceConfig {
        EnhanceConfig {
            alpha_snr: self.alpha_snr,
            xi_floor_db: self.xi_floor_db,
            gain_floor: self.gain_floor,
            spp_source: match self.spp {
                SppArg::Stat => SppSource::Statistical,
                SppArg::Nn => SppSource::Neural,
            },
            tracker: match self.tracker {
                TrackerArg::Subopt => TrackerKind::Suboptimal,
                TrackerArg::Opt => TrackerKind::Optimal,
            },
            dd_variant: match self.dd {
                DdArg::Periodogram => DdVariant::Periodogram,
                DdArg::Classical => DdVariant::Classical,
            },
            prior: FixedPriorParams {
                xi_h1_db: self.xi_h1_db,
                alpha_prior: self.prior_ratio,
                beta: self.beta,
                lambda_cap: self.lambda,
            },
            noise_smoothing: self.noise_smoothing,
            init_frames: self.init_frames,
            ..EnhanceConfig::default()
        }
    }
}

pub fn run(args: EnhanceArgs) -> CliResult<()> {
    let config = args.config();
    config.validate().map_err(usage)?;
    if args.model.is_some() && matches!(args.spp, SppArg::Stat) {
        return Err(CliError::Usage("--model is only used with --spp nn".into()));
    }
    let model = args.model.as_ref().map(load_model).transpose()?;
    let noisy = read_wav(&args.input)?;
    let (out, diag) = enhance(&noisy, &config, model.as_ref())?;
    let encoding = match args.encoding {
        EncodingArg::Pcm16 => WavEncoding::Pcm16,
        EncodingArg::Float32 => WavEncoding::Float32,
    };
    write_wav(&args.output, &out, encoding)?;
    if let Some(dir) = &args.dump_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let features = log_power(&stft(&noisy, config.stft)?, DEFAULT_POWER_FLOOR)?;
        save_dump(dir.join("features.sppf"), DumpKind::Features, &features.data)?;
        save_dump(dir.join("spp.sppp"), DumpKind::Spp, &diag.spp.data)?;
        save_dump(dir.join("noise.sppn"), DumpKind::Noise, &diag.noise)?;
        save_dump(dir.join("gain.sppg"), DumpKind::Gain, &diag.gain)?;
    }
    eprintln!("enhanced {} ({} samples, {} frames)", args.input.display(), out.len(), diag.gain.ncols());
    Ok(())
}
