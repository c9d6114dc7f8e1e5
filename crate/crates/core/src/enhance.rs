//! Frame-by-frame enhancement: SPP, noise PSD, a posteriori SNR,
//! decision-directed a priori SNR, LSA gain, resynthesis.

use ndarray::{Array1, Array2, ArrayView1, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsa::{aposteriori_snr, dd_apriori_snr, lsa_gain, DdState, DdVariant, XI_FLOOR_DB};
use crate::nn::{model_forward, ModelBundle};
use crate::noise::{
    init_noise_psd, optimal_mmse_step, suboptimal_mmse_frame, NoiseTrackerState, TrackerKind, DEFAULT_INIT_FRAMES,
    DEFAULT_SMOOTHING, NOISE_FLOOR,
};
use crate::signal::{log_power, normalize, AudioBuffer, Stft, StftConfig, DEFAULT_POWER_FLOOR};
use crate::spp_stat::{posterior_spp_fixed_prior, smooth_and_clamp, FixedPriorParams, SppMap, SppSmootherState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SppSource {
    /// Fixed-prior posterior with recursive smoothing and its own optimal
    /// noise tracker.
    #[default]
    Statistical,
    Neural,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnhanceConfig {
    pub alpha_snr: f64,
    pub xi_floor_db: f64,
    /// Lower bound on the gain; 0 disables it.
    pub gain_floor: f64,
    pub spp_source: SppSource,
    pub tracker: TrackerKind,
    pub dd_variant: DdVariant,
    pub prior: FixedPriorParams,
    /// Smoothing factor of the optimal tracker.
    pub noise_smoothing: f64,
    pub init_frames: usize,
    pub stft: StftConfig,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        EnhanceConfig {
            alpha_snr: 0.9,
            xi_floor_db: XI_FLOOR_DB,
            gain_floor: 0.0,
            spp_source: SppSource::Statistical,
            tracker: TrackerKind::Suboptimal,
            dd_variant: DdVariant::Periodogram,
            prior: FixedPriorParams::default(),
            noise_smoothing: DEFAULT_SMOOTHING,
            init_frames: DEFAULT_INIT_FRAMES,
            stft: StftConfig::default(),
        }
    }
}

impl EnhanceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha_snr) {
            return Err(Error::InvalidConfig(format!("alpha_snr must be in [0,1), got {}", self.alpha_snr)));
        }
        if !(0.0..=1.0).contains(&self.gain_floor) {
            return Err(Error::InvalidConfig(format!("gain_floor must be in [0,1], got {}", self.gain_floor)));
        }
        if !self.xi_floor_db.is_finite() {
            return Err(Error::InvalidConfig(format!("xi floor must be finite, got {}", self.xi_floor_db)));
        }
        if !(self.noise_smoothing > 0.0 && self.noise_smoothing < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "noise smoothing must be in (0,1), got {}",
                self.noise_smoothing
            )));
        }
        if self.init_frames == 0 {
            return Err(Error::InvalidConfig("init_frames must be >= 1".into()));
        }
        self.prior.validate()?;
        self.stft.validate()
    }
}

/// Frame-recursive statistical SPP estimator. It owns an optimal MMSE noise
/// tracker whose previous estimate feeds the posterior; during the tracker's
/// initialization frames the SPP is 0.
#[derive(Debug, Clone)]
pub struct StatSpp {
    pub params: FixedPriorParams,
    pub smoother: SppSmootherState,
    pub tracker: NoiseTrackerState,
}

impl StatSpp {
    pub fn new(bins: usize, params: FixedPriorParams, c: f64, init_frames: usize) -> Result<Self> {
        params.validate()?;
        Ok(StatSpp {
            params,
            smoother: SppSmootherState::new(bins),
            tracker: NoiseTrackerState::new(bins, c, init_frames)?,
        })
    }

    /// Starts from a known noise PSD instead of the leading-frame average.
    pub fn with_noise_psd(psd: Array1<f64>, params: FixedPriorParams, c: f64) -> Result<Self> {
        params.validate()?;
        Ok(StatSpp {
            params,
            smoother: SppSmootherState::new(psd.len()),
            tracker: NoiseTrackerState::from_psd(psd, c)?,
        })
    }

    pub fn noise_psd(&self) -> &Array1<f64> {
        &self.tracker.phi_n_hat
    }

    pub fn step(&mut self, y_pow: ArrayView1<f64>) -> Result<Array1<f64>> {
        if !self.tracker.is_initialized() {
            init_noise_psd(&mut self.tracker, y_pow)?;
            let zeros = Array1::zeros(y_pow.len());
            smooth_and_clamp(zeros.view(), &mut self.smoother, &self.params)?;
            return Ok(zeros);
        }
        let mut raw = Array1::zeros(y_pow.len());
        let mut failure = None;
        Zip::from(&mut raw).and(&y_pow).and(&self.tracker.phi_n_hat).for_each(|p, &y, &n| {
            *p = posterior_spp_fixed_prior(y, n.max(NOISE_FLOOR), &self.params).unwrap_or_else(|e| {
                failure.get_or_insert(e);
                0.0
            });
        });
        if let Some(e) = failure {
            return Err(e);
        }
        let p = smooth_and_clamp(raw.view(), &mut self.smoother, &self.params)?;
        optimal_mmse_step(&mut self.tracker, p.view(), y_pow)?;
        Ok(p)
    }

    /// Runs over a whole `(bins, frames)` periodogram.
    pub fn run(&mut self, y_pow: &Array2<f64>) -> Result<SppMap> {
        let mut out = Array2::zeros(y_pow.dim());
        for (l, frame) in y_pow.columns().into_iter().enumerate() {
            out.column_mut(l).assign(&self.step(frame)?);
        }
        SppMap::new(out)
    }
}

/// Per-bin intermediate results of one enhancement run, each `(bins, frames)`.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub spp: SppMap,
    pub noise: Array2<f64>,
    pub gain: Array2<f64>,
}

/// Enhances `noisy`. A model is required for the neural SPP source and
/// rejected otherwise. The output has the input's length; samples past the
/// last full frame are zero.
pub fn enhance(
    noisy: &AudioBuffer,
    config: &EnhanceConfig,
    model: Option<&ModelBundle>,
) -> Result<(AudioBuffer, Diagnostics)> {
    config.validate()?;
    noisy.validate()?;
    let bins = config.stft.num_bins();
    match (config.spp_source, model) {
        (SppSource::Neural, None) => {
            return Err(Error::InvalidConfig("neural SPP needs a model bundle".into()));
        }
        (SppSource::Neural, Some(m)) if m.descriptor.num_bins != bins => {
            return Err(Error::ModelMismatch(format!(
                "model expects {} bins, STFT gives {bins}",
                m.descriptor.num_bins
            )));
        }
        (SppSource::Statistical, Some(_)) => {
            return Err(Error::InvalidConfig("a model bundle is only used with neural SPP".into()));
        }
        _ => {}
    }

    let stft = Stft::new(config.stft)?;
    let spec = stft.analyze(noisy)?;
    let y_pow = spec.power();
    let frames = spec.num_frames();

    let neural = match model {
        Some(m) => {
            let feats = normalize(&log_power(&spec, DEFAULT_POWER_FLOOR)?, m.norm_stats)?;
            Some(model_forward(m, &feats)?)
        }
        None => None,
    };
    let mut stat = StatSpp::new(bins, config.prior, config.noise_smoothing, config.init_frames)?;
    // separate optimal tracker for neural SPP
    let mut tracker = NoiseTrackerState::new(bins, config.noise_smoothing, config.init_frames)?;
    let mut dd = DdState::new(bins);
    let xi_floor = 10f64.powf(config.xi_floor_db / 10.0);

    let mut spp = Array2::zeros((bins, frames));
    let mut noise = Array2::zeros((bins, frames));
    let mut gain = Array2::zeros((bins, frames));
    let mut out = spec.clone();
    for l in 0..frames {
        let y = y_pow.column(l);
        let p = match &neural {
            Some(map) => map.data.column(l).to_owned(),
            None => stat.step(y)?,
        };
        let phi = match (config.tracker, &neural) {
            (TrackerKind::Suboptimal, _) => suboptimal_mmse_frame(p.view(), y, NOISE_FLOOR),
            (TrackerKind::Optimal, None) => stat.noise_psd().mapv(|v| v.max(NOISE_FLOOR)),
            (TrackerKind::Optimal, Some(_)) => {
                if tracker.is_initialized() {
                    optimal_mmse_step(&mut tracker, p.view(), y)?;
                } else {
                    init_noise_psd(&mut tracker, y)?;
                }
                tracker.phi_n_hat.mapv(|v| v.max(NOISE_FLOOR))
            }
        };
        let gamma = Zip::from(&y).and(&phi).map_collect(|&y, &n| aposteriori_snr(y, n, NOISE_FLOOR));
        let xi = dd_apriori_snr(&dd, gamma.view(), config.alpha_snr, xi_floor, config.dd_variant)?;
        let g = Zip::from(&xi).and(&gamma).map_collect(|&x, &gm| lsa_gain(x, gm, config.gain_floor));
        dd.push(y, phi.view(), g.view());

        out.data.column_mut(l).zip_mut_with(&g, |z, &gk| *z *= gk);
        spp.column_mut(l).assign(&p);
        noise.column_mut(l).assign(&phi);
        gain.column_mut(l).assign(&g);
    }

    let mut enhanced = stft.synthesize(&out)?;
    enhanced.samples.resize(noisy.len(), 0.0);
    enhanced.sample_rate = noisy.sample_rate;
    Ok((enhanced, Diagnostics { spp: SppMap::new(spp)?, noise, gain }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{synth_noise, NoiseKind};
    use crate::nn::{random_bundle, ModelVariant};

    #[test]
    fn zero_in_zero_out() {
        let (out, diag) = enhance(&AudioBuffer::zeros(4000), &EnhanceConfig::default(), None).unwrap();
        assert_eq!(out.len(), 4000);
        assert!(out.samples.iter().all(|&v| v == 0.0));
        assert!(diag.gain.iter().all(|&g| g > 0.0 && g <= 1.0));
    }

    #[test]
    fn output_length_and_attenuation_only() {
        let x = synth_noise(NoiseKind::Pink, 1.03, 2).unwrap();
        for tracker in [TrackerKind::Suboptimal, TrackerKind::Optimal] {
            let cfg = EnhanceConfig { tracker, ..Default::default() };
            let (out, diag) = enhance(&x, &cfg, None).unwrap();
            assert_eq!(out.len(), x.len());
            assert!(diag.gain.iter().all(|&g| g > 0.0 && g <= 1.0));
            assert!(diag.noise.iter().all(|&n| n >= NOISE_FLOOR && n.is_finite()));
            assert!(out.power() < x.power());
        }
    }

    #[test]
    fn model_rules() {
        let x = synth_noise(NoiseKind::White, 0.5, 2).unwrap();
        let neural = EnhanceConfig { spp_source: SppSource::Neural, ..Default::default() };
        assert!(matches!(enhance(&x, &neural, None), Err(Error::InvalidConfig(_))));
        let model = random_bundle(ModelVariant::Attention, 1);
        assert!(matches!(enhance(&x, &EnhanceConfig::default(), Some(&model)), Err(Error::InvalidConfig(_))));
        for tracker in [TrackerKind::Suboptimal, TrackerKind::Optimal] {
            let cfg = EnhanceConfig { tracker, ..neural };
            let (out, diag) = enhance(&x, &cfg, Some(&model)).unwrap();
            assert_eq!(out.len(), x.len());
            assert!(diag.spp.data.iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }

    #[test]
    fn bad_config() {
        let x = AudioBuffer::zeros(4000);
        let cfg = EnhanceConfig { alpha_snr: 1.0, ..Default::default() };
        assert!(matches!(enhance(&x, &cfg, None), Err(Error::InvalidConfig(_))));
        assert!(matches!(
            enhance(&AudioBuffer::zeros(100), &EnhanceConfig::default(), None),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn stat_spp_is_zero_while_initializing() {
        let x = synth_noise(NoiseKind::White, 0.5, 3).unwrap();
        let p = crate::signal::stft(&x, StftConfig::default()).unwrap().power();
        let mut s = StatSpp::new(129, FixedPriorParams::default(), 0.8, 12).unwrap();
        let map = s.run(&p).unwrap();
        assert!(map.data.slice(ndarray::s![.., ..12]).iter().all(|&v| v == 0.0));
        assert!(s.tracker.is_initialized());
    }
}
