use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use sppkit::load_model;
use sppkit::nn::write_golden;

use crate::error::{CliError, CliResult};

#[derive(Args)]
pub struct InfoArgs {
    /// Model bundle (.sppm).
    model: PathBuf,
}

#[derive(Args)]
pub struct GoldenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of consecutive seeds starting at `--seed`.
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long)]
    out: PathBuf,
}

pub fn info(args: InfoArgs) -> CliResult<()> {
    let bundle = load_model(&args.model)?;
    let tensors: Vec<_> =
        bundle.tensors.iter().map(|(name, t)| json!({ "name": name, "shape": t.shape(), "params": t.len() })).collect();
    let record = json!({
        "variant": bundle.descriptor.variant.name(),
        "param_count": bundle.param_count(),
        "descriptor": bundle.descriptor,
        "norm_stats": bundle.norm_stats,
        "tensors": tensors,
    });
    crate::emit(&record)
}

pub fn gen_golden(args: GoldenArgs) -> CliResult<()> {
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let mut written = 0;
    for seed in args.seed..args.seed.saturating_add(args.count) {
        written += write_golden(seed, &args.out)?.len();
    }
    eprintln!("wrote {written} fixture files to {}", args.out.display());
    Ok(())
}
