//! Survival cohorts driven by latent risk.
//!
//! Death times are exponential with rate `base_hazard * exp(risk)` (months),
//! censoring times are uniform on `[0, c_max]`, independent of death, with
//! `c_max` chosen so the expected censored fraction over the cohort equals
//! the requested rate. A subject is censored when censoring comes first.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{invalid, Result};
use crate::rng;
use crate::survival::SurvivalRecord;

/// Baseline hazard per month (mean survival of 40 months at zero risk).
pub const BASE_HAZARD: f64 = 1.0 / 40.0;

/// Expected censored fraction when censoring is uniform on `[0, c]`:
/// the mean over subjects of `(1 - exp(-λ c)) / (λ c)`.
fn censored_fraction(rates: &[f64], c: f64) -> f64 {
    rates
        .iter()
        .map(|&l| {
            let x = l * c;
            if x < 1e-8 { 1.0 - x / 2.0 } else { -(-x).exp_m1() / x }
        })
        .sum::<f64>()
        / rates.len() as f64
}

pub fn gen_survival(seed: u64, latent_risks: &[f64], censor_rate: f64) -> Result<Vec<SurvivalRecord>> {
    if latent_risks.is_empty() {
        return Err(invalid("empty cohort"));
    }
    if !(0.0..1.0).contains(&censor_rate) {
        return Err(invalid(format!("censor rate must be in [0, 1), got {censor_rate}")));
    }
    if latent_risks.iter().any(|r| !r.is_finite()) {
        return Err(invalid("latent risks must be finite"));
    }
    let rates: Vec<f64> = latent_risks.iter().map(|r| BASE_HAZARD * r.exp()).collect();
    let c_max = if censor_rate > 0.0 {
        // The censored fraction falls from 1 to 0 as c grows.
        let (mut lo, mut hi) = (0.0, 1.0);
        while censored_fraction(&rates, hi) > censor_rate {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if censored_fraction(&rates, mid) > censor_rate {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    } else {
        None
    };
    let mut rng = rng::stream(seed, rng::ids::SURVIVAL);
    rates
        .iter()
        .map(|&rate| {
            let death = Exp::new(rate).map_err(|e| invalid(e.to_string()))?.sample(&mut rng);
            Ok(match c_max {
                Some(c) => {
                    let censor = rng.random::<f64>() * c;
                    if censor < death {
                        SurvivalRecord::new(censor, false)
                    } else {
                        SurvivalRecord::new(death, true)
                    }
                }
                None => SurvivalRecord::new(death, true),
            })
        })
        .collect()
}
