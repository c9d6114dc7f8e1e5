//! Evaluation metrics: LogErr, ROC/AUC/Pd, KL divergence and segmental SNR.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::AudioBuffer;
use crate::spp_stat::SppMap;

/// Oracle-target threshold that labels a bin as speech.
pub const DEFAULT_LABEL_THRESHOLD: f64 = 0.135;
pub const DEFAULT_PFA: f64 = 0.05;
pub const DEFAULT_KL_EPS: f64 = 1e-7;
pub const SEGSNR_FLOOR_DB: f64 = -10.0;
pub const SEGSNR_CEIL_DB: f64 = 35.0;
pub const SEGSNR_FRAME: usize = 256;
/// Reference frames this far below the loudest one count as silent.
pub const SEGSNR_SILENCE_DB: f64 = 40.0;

fn same_shape(a: &Array2<f64>, b: &Array2<f64>, what: &str) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("{what}: {:?} vs {:?}", a.dim(), b.dim())));
    }
    Ok(())
}

/// Mean absolute log-spectral distance in dB, both inputs floored at `floor`.
pub fn log_err(reference: &Array2<f64>, estimate: &Array2<f64>, floor: f64) -> Result<f64> {
    same_shape(reference, estimate, "log_err")?;
    if !(floor > 0.0) {
        return Err(Error::InvalidConfig(format!("floor must be > 0, got {floor}")));
    }
    if reference.is_empty() {
        return Err(Error::Shape("log_err of empty matrices".into()));
    }
    let mut sum = 0.0;
    Zip::from(reference).and(estimate).for_each(|&r, &e| {
        sum += (10.0 * (r.max(floor) / e.max(floor)).log10()).abs();
    });
    Ok(sum / reference.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(pfa, pd)`, from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    /// Score threshold of every point after the first, descending.
    pub thresholds: Vec<f64>,
}

/// ROC of `scores` against `truth >= label_threshold`.
pub fn roc(scores: &SppMap, truth: &SppMap, label_threshold: f64) -> Result<RocCurve> {
    same_shape(&scores.data, &truth.data, "roc")?;
    roc_from_pairs(scores.data.iter().zip(truth.data.iter()).map(|(&s, &t)| (s, t >= label_threshold)))
}

/// ROC pooled over several utterances.
pub fn roc_pooled<'a, I>(pairs: I, label_threshold: f64) -> Result<RocCurve>
where
    I: IntoIterator<Item = (&'a SppMap, &'a SppMap)>,
{
    let mut all = Vec::new();
    for (s, t) in pairs {
        same_shape(&s.data, &t.data, "roc")?;
        all.extend(s.data.iter().zip(t.data.iter()).map(|(&s, &t)| (s, t >= label_threshold)));
    }
    roc_from_pairs(all)
}

/// Sweeps the decision threshold over every distinct score; a bin is
/// detected when its score is at least the threshold.
pub fn roc_from_pairs(pairs: impl IntoIterator<Item = (f64, bool)>) -> Result<RocCurve> {
    let mut pairs: Vec<(f64, bool)> = pairs.into_iter().collect();
    if let Some((s, _)) = pairs.iter().find(|(s, _)| s.is_nan()) {
        return Err(Error::Domain(format!("score {s} is not a number")));
    }
    let positives = pairs.iter().filter(|(_, l)| *l).count();
    let negatives = pairs.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Domain(format!(
            "ROC needs both classes; got {positives} speech and {negatives} non-speech bins"
        )));
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (p, n) = (positives as f64, negatives as f64);
    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < pairs.len() {
        let s = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == s {
            if pairs[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n, tp as f64 / p));
        thresholds.push(s);
    }
    Ok(RocCurve { points, thresholds })
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve.points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum()
}

/// Detection rate at `pfa_target`, linearly interpolated.
pub fn pd_at_pfa(curve: &RocCurve, pfa_target: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&pfa_target) {
        return Err(Error::Domain(format!("false-alarm rate {pfa_target} outside [0,1]")));
    }
    let pts = &curve.points;
    let i = pts.iter().rposition(|p| p.0 <= pfa_target).unwrap_or(0);
    let Some(&(x1, y1)) = pts.get(i + 1) else {
        return Ok(pts[i].1);
    };
    let (x0, y0) = pts[i];
    if x1 == x0 {
        return Ok(y0.max(y1));
    }
    Ok(y0 + (y1 - y0) * (pfa_target - x0) / (x1 - x0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlForm {
    /// `t ln(t/e)` only; bins whose target is exactly 0 contribute 0.
    #[default]
    TargetTerm,
    /// Bernoulli KL `t ln(t/e) + (1-t) ln((1-t)/(1-e))`.
    FullBinary,
}

/// Mean per-bin divergence of `estimate` from `target`, both clamped into
/// `[eps, 1 - eps]`.
pub fn kl_divergence(target: &SppMap, estimate: &SppMap, eps: f64, form: KlForm) -> Result<f64> {
    same_shape(&target.data, &estimate.data, "kl_divergence")?;
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidConfig(format!("eps must be in (0, 0.5), got {eps}")));
    }
    if target.data.is_empty() {
        return Err(Error::Shape("kl_divergence of empty maps".into()));
    }
    let mut sum = 0.0;
    Zip::from(&target.data).and(&estimate.data).for_each(|&t0, &e| {
        let t = t0.clamp(eps, 1.0 - eps);
        let e = e.clamp(eps, 1.0 - eps);
        sum += match form {
            KlForm::TargetTerm if t0 == 0.0 => 0.0,
            KlForm::TargetTerm => t * (t / e).ln(),
            KlForm::FullBinary => t * (t / e).ln() + (1.0 - t) * ((1.0 - t) / (1.0 - e)).ln(),
        };
    });
    Ok(sum / target.data.len() as f64)
}

/// Mean over non-overlapping frames of `10 log10(P_ref / P_err)`, clamped to
/// `[floor_db, ceil_db]`. Reference frames more than
/// [`SEGSNR_SILENCE_DB`] below the loudest reference frame are skipped.
pub fn segmental_snr(
    reference: &AudioBuffer,
    estimate: &AudioBuffer,
    frame_len: usize,
    floor_db: f64,
    ceil_db: f64,
) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::Shape(format!(
            "segmental SNR needs equal lengths, got {} and {}",
            reference.len(),
            estimate.len()
        )));
    }
    if frame_len == 0 || !(floor_db < ceil_db) {
        return Err(Error::InvalidConfig(format!(
            "frame length {frame_len}, floor {floor_db} dB, ceiling {ceil_db} dB"
        )));
    }
    let energy = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    let frames: Vec<(f64, f64)> = reference
        .samples
        .chunks(frame_len)
        .zip(estimate.samples.chunks(frame_len))
        .map(|(r, e)| (energy(r), r.iter().zip(e).map(|(a, b)| (a - b) * (a - b)).sum()))
        .collect();
    let peak = frames.iter().map(|f| f.0).fold(0.0, f64::max);
    let gate = peak * 10f64.powf(-SEGSNR_SILENCE_DB / 10.0);
    let values: Vec<f64> = frames
        .iter()
        .filter(|(r, _)| *r > 0.0 && *r >= gate)
        .map(|&(r, e)| if e == 0.0 { ceil_db } else { (10.0 * (r / e).log10()).clamp(floor_db, ceil_db) })
        .collect();
    if values.is_empty() {
        return Err(Error::Domain("reference has no active frames".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// [`segmental_snr`] with the default frame, floor and ceiling.
pub fn segsnr(reference: &AudioBuffer, estimate: &AudioBuffer) -> Result<f64> {
    segmental_snr(reference, estimate, SEGSNR_FRAME, SEGSNR_FLOOR_DB, SEGSNR_CEIL_DB)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn map(v: Array2<f64>) -> SppMap {
        SppMap::new(v).unwrap()
    }

    #[test]
    fn log_err_examples() {
        let r = array![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(log_err(&r, &r, 1e-10).unwrap(), 0.0);
        assert!((log_err(&r, &(&r * 10.0), 1e-10).unwrap() - 10.0).abs() < 1e-12);
        let half = array![[0.5, 2.0], [1.5, 4.0]];
        assert!((log_err(&r, &half, 1e-10).unwrap() - 1.505_149_978_319_906).abs() < 1e-9);
        assert!(log_err(&r, &array![[1.0]], 1e-10).is_err());
    }

    #[test]
    fn perfect_detector() {
        let truth = map(array![[0.0, 1.0, 0.0, 1.0]]);
        let c = roc(&truth, &truth, DEFAULT_LABEL_THRESHOLD).unwrap();
        assert!(c.points.contains(&(0.0, 1.0)));
        assert_eq!(auc(&c), 1.0);
        assert_eq!(pd_at_pfa(&c, 0.05).unwrap(), 1.0);
    }

    #[test]
    fn hand_curves() {
        let three = RocCurve { points: vec![(0.0, 0.0), (0.5, 1.0), (1.0, 1.0)], thresholds: vec![] };
        assert!((auc(&three) - 0.75).abs() < 1e-15);
        let diag = RocCurve { points: vec![(0.0, 0.0), (1.0, 1.0)], thresholds: vec![] };
        assert!((auc(&diag) - 0.5).abs() < 1e-15);
        assert!((pd_at_pfa(&diag, 0.05).unwrap() - 0.05).abs() < 1e-15);
        let piece = RocCurve { points: vec![(0.0, 0.0), (0.1, 0.8), (1.0, 1.0)], thresholds: vec![] };
        assert!((pd_at_pfa(&piece, 0.05).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn single_class_is_an_error() {
        let t = map(array![[0.0, 0.1]]);
        assert!(matches!(roc(&t, &t, 0.135), Err(Error::Domain(_))));
    }

    #[test]
    fn random_scores_are_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let pairs: Vec<(f64, bool)> = (0..n).map(|_| (rng.random::<f64>(), rng.random::<bool>())).collect();
        let a = auc(&roc_from_pairs(pairs).unwrap());
        assert!((a - 0.5).abs() < 0.02, "{a}");
    }

    #[test]
    fn curve_is_monotone_with_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pairs: Vec<(f64, bool)> =
            (0..500).map(|_| ((rng.random_range(0..20) as f64) / 20.0, rng.random())).collect();
        let c = roc_from_pairs(pairs).unwrap();
        assert_eq!(c.points[0], (0.0, 0.0));
        assert_eq!(*c.points.last().unwrap(), (1.0, 1.0));
        assert!(c.points.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1));
        assert!(c.thresholds.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn kl_examples() {
        let t = map(array![[0.5]]);
        assert!(
            (kl_divergence(&t, &map(array![[0.25]]), DEFAULT_KL_EPS, KlForm::TargetTerm).unwrap() - 0.5 * 2f64.ln())
                .abs()
                < 1e-12
        );
        assert_eq!(kl_divergence(&t, &t, DEFAULT_KL_EPS, KlForm::TargetTerm).unwrap(), 0.0);
        let zeros = map(array![[0.0, 0.0]]);
        assert_eq!(kl_divergence(&zeros, &map(array![[0.3, 0.9]]), DEFAULT_KL_EPS, KlForm::TargetTerm).unwrap(), 0.0);
        // the target-term form is not a divergence: it goes negative here
        let neg = kl_divergence(&t, &map(array![[0.9]]), DEFAULT_KL_EPS, KlForm::TargetTerm).unwrap();
        assert!(neg < 0.0);
        assert!(kl_divergence(&t, &map(array![[0.9]]), DEFAULT_KL_EPS, KlForm::FullBinary).unwrap() > 0.0);
    }

    #[test]
    fn segsnr_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r: Vec<f64> = (0..256 * 40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let reference = AudioBuffer::new(r.clone());
        assert_eq!(segsnr(&reference, &reference).unwrap(), SEGSNR_CEIL_DB);
        // an all-zero estimate makes the error equal the reference: 0 dB
        assert!(segsnr(&reference, &AudioBuffer::zeros(r.len())).unwrap().abs() < 1e-12);

        // noise scaled to exactly 10 dB below the reference in every frame
        let mut est = Vec::with_capacity(r.len());
        for chunk in r.chunks(256) {
            let n: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..1.0)).collect();
            let pr: f64 = chunk.iter().map(|v| v * v).sum();
            let pn: f64 = n.iter().map(|v| v * v).sum();
            let g = (pr / pn / 10.0).sqrt();
            est.extend(chunk.iter().zip(&n).map(|(a, b)| a + g * b));
        }
        let v = segsnr(&reference, &AudioBuffer::new(est)).unwrap();
        assert!((v - 10.0).abs() < 1e-9, "{v}");
        assert!(segsnr(&reference, &AudioBuffer::zeros(10)).is_err());
    }

    #[test]
    fn segsnr_skips_silent_frames() {
        let mut r = vec![0.0; 256 * 4];
        r[256..512].iter_mut().for_each(|v| *v = 1.0);
        let reference = AudioBuffer::new(r.clone());
        let mut e = r.clone();
        e[0] = 5.0; // error in a silent frame is ignored
        assert_eq!(segsnr(&reference, &AudioBuffer::new(e)).unwrap(), SEGSNR_CEIL_DB);
    }

    proptest! {
        #[test]
        fn auc_invariant_to_monotone_maps(seed in any::<u64>(), shift in -3.0f64..3.0, scale in 0.1f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pairs: Vec<(f64, bool)> = (0..300).map(|_| (rng.random::<f64>(), rng.random::<bool>())).collect();
            pairs[0].1 = true;
            pairs[1].1 = false;
            let a = auc(&roc_from_pairs(pairs.clone()).unwrap());
            let mapped = pairs.iter().map(|&(s, l)| ((scale * s + shift).exp(), l));
            let b = auc(&roc_from_pairs(mapped).unwrap());
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn log_err_is_symmetric(v in prop::collection::vec((1e-6f64..1e6, 1e-6f64..1e6), 1..50)) {
            let a = Array2::from_shape_vec((1, v.len()), v.iter().map(|p| p.0).collect()).unwrap();
            let b = Array2::from_shape_vec((1, v.len()), v.iter().map(|p| p.1).collect()).unwrap();
            let ab = log_err(&a, &b, 1e-10).unwrap();
            prop_assert!((ab - log_err(&b, &a, 1e-10).unwrap()).abs() <= 1e-12 * ab.max(1.0));
        }

        #[test]
        fn full_binary_kl_is_a_divergence(v in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..50)) {
            let t = map(Array2::from_shape_vec((1, v.len()), v.iter().map(|p| p.0).collect()).unwrap());
            let e = map(Array2::from_shape_vec((1, v.len()), v.iter().map(|p| p.1).collect()).unwrap());
            prop_assert!(kl_divergence(&t, &e, DEFAULT_KL_EPS, KlForm::FullBinary).unwrap() >= 0.0);
            prop_assert_eq!(kl_divergence(&t, &t, DEFAULT_KL_EPS, KlForm::FullBinary).unwrap(), 0.0);
        }
    }
}
