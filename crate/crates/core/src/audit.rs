//! Chi-square uniformity auditing of outcomes across many ceremonies.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transcript::Transcript;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuditError {
    #[error("at least 2 bins are required, got {0}")]
    TooFewBins(u64),
    #[error("no observations")]
    NoObservations,
    #[error("transcripts use different moduli ({0} and {1})")]
    MixedModuli(u64, u64),
    #[error("{bins} bins do not evenly divide modulus {modulus}")]
    UnevenBins { bins: u64, modulus: u64 },
    #[error("session {0:?} has no outcome")]
    Incomplete(String),
}

/// Smallest expected per-bin count for which the chi-square approximation is
/// customarily trusted.
pub const MIN_EXPECTED_COUNT: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformitySummary {
    pub bins: u64,
    pub counts: Vec<u64>,
    pub total: u64,
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
    /// Set when the expected count per bin falls below [`MIN_EXPECTED_COUNT`].
    pub warning: Option<String>,
}

/// Pearson's chi-square test of `counts` against equal bin probabilities.
pub fn chi_square_uniformity(counts: &[u64]) -> Result<UniformitySummary, AuditError> {
    let bins = counts.len() as u64;
    if bins < 2 {
        return Err(AuditError::TooFewBins(bins));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(AuditError::NoObservations);
    }
    let expected = total as f64 / bins as f64;
    // Σ (c - N/B)² / (N/B) = (B·Σc² - N²) / N, with an exact integer numerator
    // so the statistic does not depend on bin order.
    let sum_sq: u128 = counts.iter().map(|&c| u128::from(c) * u128::from(c)).sum();
    let numerator = u128::from(bins) * sum_sq - u128::from(total) * u128::from(total);
    let statistic = numerator as f64 / total as f64;
    let dof = bins - 1;
    let warning = (expected < MIN_EXPECTED_COUNT).then(|| {
        format!("expected count per bin is {expected:.3}, below {MIN_EXPECTED_COUNT}; p-value is approximate")
    });
    Ok(UniformitySummary {
        bins,
        counts: counts.to_vec(),
        total,
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
        warning,
    })
}

/// Upper tail probability of the chi-square distribution.
pub fn chi_square_sf(statistic: f64, dof: u64) -> f64 {
    if statistic <= 0.0 {
        return 1.0;
    }
    gamma_q(dof as f64 / 2.0, statistic / 2.0).clamp(0.0, 1.0)
}

/// Buckets the outcomes of completed ceremonies into `bins` equal-width
/// intervals of `[0, m)` and tests them for uniformity.
pub fn audit_outcomes(transcripts: &[Transcript], bins: u64) -> Result<UniformitySummary, AuditError> {
    if bins < 2 {
        return Err(AuditError::TooFewBins(bins));
    }
    let mut modulus = None;
    let mut outcomes = Vec::with_capacity(transcripts.len());
    for t in transcripts {
        let state = t.state().ok_or_else(|| AuditError::Incomplete(String::new()))?;
        let outcome = state
            .outcome_of()
            .ok_or_else(|| AuditError::Incomplete(state.spec().session_id.clone()))?;
        let m = state.modulus().get();
        match modulus {
            None => modulus = Some(m),
            Some(prev) if prev != m => return Err(AuditError::MixedModuli(prev, m)),
            _ => {}
        }
        outcomes.push(outcome.get());
    }
    let Some(m) = modulus else {
        return Err(AuditError::NoObservations);
    };
    bin_outcomes(&outcomes, m, bins).and_then(|c| chi_square_uniformity(&c))
}

/// Counts of `outcomes` (each in `[0, m)`) per equal-width bin.
pub fn bin_outcomes(outcomes: &[u64], m: u64, bins: u64) -> Result<Vec<u64>, AuditError> {
    if bins < 2 {
        return Err(AuditError::TooFewBins(bins));
    }
    if m % bins != 0 {
        return Err(AuditError::UnevenBins { bins, modulus: m });
    }
    let width = m / bins;
    let mut counts = vec![0u64; bins as usize];
    for &o in outcomes {
        counts[(o / width) as usize] += 1;
    }
    Ok(counts)
}

const EPS: f64 = 1e-10;
const MAX_ITER: usize = 10_000;

/// ln Γ(x) for x > 0, Lanczos approximation (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized upper incomplete gamma Q(a, x) = Γ(a, x) / Γ(a).
///
/// Series for P when x < a + 1, modified Lentz continued fraction for Q
/// otherwise.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0, "shape must be positive");
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_continued_fraction(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}
