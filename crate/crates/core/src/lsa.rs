//! Log-spectral-amplitude gain with decision-directed a priori SNR.

use ndarray::{Array1, ArrayView1, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound of the a priori SNR estimate, in dB.
pub const XI_FLOOR_DB: f64 = -25.0;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

pub fn xi_floor() -> f64 {
    10f64.powf(XI_FLOOR_DB / 10.0)
}

/// Exponential integral `E1(v) = int_v^inf e^-t / t dt` for `v > 0`.
///
/// Power series below 1, continued fraction (modified Lentz) above.
pub fn expint_e1(v: f64) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::Domain(format!("E1 is defined for v > 0, got {v}")));
    }
    if v.is_infinite() {
        return Ok(0.0);
    }
    if v < 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            let kf = k as f64;
            term *= -v / kf;
            let contrib = term / kf;
            sum += contrib;
            if contrib.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        Ok(-EULER_GAMMA - v.ln() - sum)
    } else {
        const TINY: f64 = 1e-300;
        let mut b = v + 1.0;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        Ok(h * (-v).exp())
    }
}

/// `|Y|^2 / phi_n`, with the noise PSD clamped to `floor`.
pub fn aposteriori_snr(y_pow: f64, phi_n_hat: f64, floor: f64) -> f64 {
    y_pow / phi_n_hat.max(floor)
}

/// Limited maximum-likelihood a priori SNR.
pub fn ml_apriori_snr(gamma: f64) -> f64 {
    (gamma - 1.0).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DdVariant {
    /// Previous-frame term `|Y(l-1)|^2 / phi_n(l-1)`.
    #[default]
    Periodogram,
    /// Previous-frame term uses the enhanced amplitude, `G(l-1)^2 |Y(l-1)|^2 / phi_n(l-1)`.
    Classical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdState {
    pub prev_y_pow: Array1<f64>,
    pub prev_phi_n: Array1<f64>,
    pub prev_gain: Array1<f64>,
    pub first_frame: bool,
}

impl DdState {
    pub fn new(bins: usize) -> Self {
        DdState {
            prev_y_pow: Array1::zeros(bins),
            prev_phi_n: Array1::ones(bins),
            prev_gain: Array1::ones(bins),
            first_frame: true,
        }
    }

    /// Records the current frame for the next update.
    pub fn push(&mut self, y_pow: ArrayView1<f64>, phi_n: ArrayView1<f64>, gain: ArrayView1<f64>) {
        self.prev_y_pow.assign(&y_pow);
        self.prev_phi_n.assign(&phi_n);
        self.prev_gain.assign(&gain);
        self.first_frame = false;
    }
}

/// Decision-directed a priori SNR for one frame, floored at `xi_floor`.
/// On the first frame the ML estimate is used.
pub fn dd_apriori_snr(
    state: &DdState,
    gamma: ArrayView1<f64>,
    alpha_snr: f64,
    xi_floor: f64,
    variant: DdVariant,
) -> Result<Array1<f64>> {
    if gamma.len() != state.prev_y_pow.len() {
        return Err(Error::Shape(format!("gamma has {} bins, state has {}", gamma.len(), state.prev_y_pow.len())));
    }
    if state.first_frame {
        return Ok(gamma.mapv(|g| ml_apriori_snr(g).max(xi_floor)));
    }
    let mut out = Array1::zeros(gamma.len());
    Zip::from(&mut out).and(&gamma).and(&state.prev_y_pow).and(&state.prev_phi_n).and(&state.prev_gain).for_each(
        |o, &g, &py, &pn, &pg| {
            let prev = match variant {
                DdVariant::Periodogram => py / pn,
                DdVariant::Classical => pg * pg * py / pn,
            };
            *o = (alpha_snr * prev + (1.0 - alpha_snr) * ml_apriori_snr(g)).max(xi_floor);
        },
    );
    Ok(out)
}

/// LSA gain `xi/(1+xi) * exp(E1(v)/2)` with `v = gamma xi/(1+xi)`, clamped to
/// `[gain_floor, 1]`. As `v -> 0` the gain grows without bound and is
/// clamped to 1.
pub fn lsa_gain(xi: f64, gamma: f64, gain_floor: f64) -> f64 {
    let ratio = xi / (1.0 + xi);
    let v = ratio * gamma;
    let g = if v > 0.0 {
        // v > 0 was checked, so E1 cannot fail
        ratio * (0.5 * expint_e1(v).unwrap_or(f64::INFINITY)).exp()
    } else {
        1.0
    };
    let g = if g.is_nan() { 1.0 } else { g };
    g.min(1.0).max(gain_floor)
}
