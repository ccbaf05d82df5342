//! Information-theoretic quantities: Gaussian entropies, the max-entropy
//! leakage bound, Monte-Carlo mixture entropy and mutual information,
//! MAP misclassification rates, and the secrecy/equivocation report.
//!
//! Internal log-density arithmetic is in natural log with log-sum-exp;
//! values convert to bits only when they leave this module.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{induce, sample_observation, ChannelPair, InducedGmm};
use crate::error::{Error, Result};
use crate::numerics::{cholesky_factor, logdet_psd, sym_eig, symmetrize};
use crate::signal::GmmSource;

const LN_2: f64 = std::f64::consts::LN_2;

/// A Monte-Carlo estimate in bits with its standard error.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
    pub n_samples: usize,
}

/// All rates for one channel realization. Mutual informations are in bits;
/// `rs_lower` is left unclamped so negative secrecy margins stay visible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    pub mi_bob: Estimate,
    pub mi_eve_mc: Estimate,
    pub mi_eve_upper: f64,
    pub rs_lower: f64,
    pub equivocation: Estimate,
    pub code_rate: f64,
    pub map_error: Estimate,
}

fn log2_2pie(m: usize) -> f64 {
    m as f64 * (2.0 * std::f64::consts::PI * std::f64::consts::E).log2()
}

/// ½ log₂[(2πe)^m det Σ], the differential entropy of N(·, Σ) in bits.
pub fn gaussian_entropy(cov: &DMatrix<f64>) -> Result<f64> {
    let ld = logdet_psd(cov)?;
    Ok(0.5 * (log2_2pie(cov.nrows()) + ld / LN_2))
}

fn class_entropy(igmm: &InducedGmm, k: usize) -> Result<f64> {
    gaussian_entropy(&igmm.covs[k]).map_err(|e| match e {
        Error::SingularMatrix { pivot, .. } => Error::RankDeficient {
            class: k + 1,
            ratio: pivot,
        },
        other => other,
    })
}

/// h(z|c) = Σ_k p_k · h(N(·, Σ̃_k)) in bits.
pub fn cond_entropy_given_class(igmm: &InducedGmm) -> Result<f64> {
    let mut h = 0.0;
    for k in 0..igmm.num_classes() {
        if igmm.weights[k] > 0.0 {
            h += igmm.weights[k] * class_entropy(igmm, k)?;
        }
    }
    Ok(h)
}

/// The exact covariance of the mixture: Σ p_k(Σ̃_k + μ̃_kμ̃_kᵀ) − μ_zμ_zᵀ.
pub fn mixture_covariance(igmm: &InducedGmm) -> DMatrix<f64> {
    let m = igmm.dim();
    let mut mix_mean = DVector::<f64>::zeros(m);
    for (mean, &p) in igmm.means.iter().zip(&igmm.weights) {
        mix_mean += mean * p;
    }
    let mut second = DMatrix::<f64>::zeros(m, m);
    for k in 0..igmm.num_classes() {
        let mu = &igmm.means[k];
        second += (&igmm.covs[k] + mu * mu.transpose()) * igmm.weights[k];
    }
    symmetrize(&(second - &mix_mean * mix_mean.transpose()))
}

/// The Gaussian max-entropy upper bound on the leakage I(z;c) in bits:
/// h_G(z) − h(z|c).
pub fn mi_eve_upper(igmm: &InducedGmm) -> Result<f64> {
    let hg = gaussian_entropy(&mixture_covariance(igmm))?;
    Ok(hg - cond_entropy_given_class(igmm)?)
}

/// Precomputed per-component Cholesky machinery for mixture log-densities.
struct MixtureDensity {
    chols: Vec<DMatrix<f64>>,
    /// ln p_k − ½ m ln 2π − Σ_i ln L_k[i,i], per component.
    log_consts: Vec<f64>,
    cum_weights: Vec<f64>,
}

impl MixtureDensity {
    fn new(igmm: &InducedGmm) -> Result<Self> {
        let m = igmm.dim() as f64;
        let mut chols = Vec::with_capacity(igmm.num_classes());
        let mut log_consts = Vec::with_capacity(igmm.num_classes());
        for k in 0..igmm.num_classes() {
            let l = cholesky_factor(&igmm.covs[k]).map_err(|e| match e {
                Error::SingularMatrix { pivot, .. } => Error::RankDeficient {
                    class: k + 1,
                    ratio: pivot,
                },
                other => other,
            })?;
            let log_diag: f64 = (0..l.nrows()).map(|i| l[(i, i)].ln()).sum();
            let log_p = if igmm.weights[k] > 0.0 {
                igmm.weights[k].ln()
            } else {
                f64::NEG_INFINITY
            };
            log_consts.push(log_p - 0.5 * m * (2.0 * std::f64::consts::PI).ln() - log_diag);
            chols.push(l);
        }
        let mut cum = 0.0;
        let cum_weights = igmm
            .weights
            .iter()
            .map(|&w| {
                cum += w;
                cum
            })
            .collect();
        Ok(Self {
            chols,
            log_consts,
            cum_weights,
        })
    }

    /// ln [p_k ν(z; μ̃_k, Σ̃_k)] for one component.
    fn component_log_density(&self, igmm: &InducedGmm, k: usize, z: &DVector<f64>) -> f64 {
        if self.log_consts[k] == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let d = z - &igmm.means[k];
        let u = self.chols[k]
            .solve_lower_triangular(&d)
            .expect("Cholesky factor has positive diagonal");
        self.log_consts[k] - 0.5 * u.norm_squared()
    }

    /// ln p(z) of the mixture via log-sum-exp over components.
    fn log_density(&self, igmm: &InducedGmm, z: &DVector<f64>) -> f64 {
        let logs: Vec<f64> = (0..igmm.num_classes())
            .map(|k| self.component_log_density(igmm, k, z))
            .collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
    }

    fn sample_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cum_weights
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.cum_weights.len() - 1)
    }
}

/// Evaluates ln p(z) of the induced mixture at `z` (natural log). Exposed
/// for normalization checks; estimators use the cached path internally.
pub fn mixture_log_density(igmm: &InducedGmm, z: &DVector<f64>) -> Result<f64> {
    Ok(MixtureDensity::new(igmm)?.log_density(igmm, z))
}

/// Monte-Carlo estimate of the mixture differential entropy h(z) in bits:
/// the sample mean of −log₂ p(z_i) over draws from the mixture itself.
pub fn mc_entropy<R: Rng + ?Sized>(
    igmm: &InducedGmm,
    n_samples: usize,
    rng: &mut R,
) -> Result<Estimate> {
    let density = MixtureDensity::new(igmm)?;
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..n_samples {
        let c = density.sample_component(rng);
        let z = sample_observation(igmm, c, rng);
        let v = -density.log_density(igmm, &z) / LN_2;
        sum += v;
        sumsq += v * v;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = (sumsq / n - mean * mean).max(0.0);
    Ok(Estimate {
        value: mean,
        std_err: (var / n).sqrt(),
        n_samples,
    })
}

/// Monte-Carlo I(z;c) = h(z) − h(z|c) in bits; the conditional term is
/// closed-form, so the standard error is that of the entropy estimate.
/// The raw (possibly slightly negative) value is returned; reports clamp.
pub fn mi_mc<R: Rng + ?Sized>(
    igmm: &InducedGmm,
    n_samples: usize,
    rng: &mut R,
) -> Result<Estimate> {
    let h = mc_entropy(igmm, n_samples, rng)?;
    let hc = cond_entropy_given_class(igmm)?;
    Ok(Estimate {
        value: h.value - hc,
        std_err: h.std_err,
        n_samples,
    })
}

/// Empirical MAP misclassification probability with binomial standard error.
pub fn map_error_rate<R: Rng + ?Sized>(
    igmm: &InducedGmm,
    n_samples: usize,
    rng: &mut R,
) -> Result<Estimate> {
    let density = MixtureDensity::new(igmm)?;
    let mut errors = 0usize;
    for _ in 0..n_samples {
        let c = density.sample_component(rng);
        let z = sample_observation(igmm, c, rng);
        let mut best = 0;
        let mut best_ll = f64::NEG_INFINITY;
        for k in 0..igmm.num_classes() {
            let ll = density.component_log_density(igmm, k, &z);
            if ll > best_ll {
                best_ll = ll;
                best = k;
            }
        }
        if best != c {
            errors += 1;
        }
    }
    let n = n_samples as f64;
    let p = errors as f64 / n;
    Ok(Estimate {
        value: p,
        std_err: (p * (1.0 - p) / n).sqrt(),
        n_samples,
    })
}

/// Smallest eigenvalue of Δ = Σ_z − (Σ p_k ΦΣ_kΦᵀ + σ²I). Δ is the
/// covariance of the discrete mean vector and must be PSD up to roundoff.
pub fn lemma1_gap(src: &GmmSource, phi: &DMatrix<f64>, noise_var: f64) -> Result<f64> {
    let igmm = induce(src, phi, noise_var)?;
    let sigma_z = mixture_covariance(&igmm);
    let m = igmm.dim();
    let mut zero_mean_part = DMatrix::<f64>::zeros(m, m);
    for k in 0..igmm.num_classes() {
        zero_mean_part += &igmm.covs[k] * igmm.weights[k];
    }
    let delta = symmetrize(&(sigma_z - zero_mean_part));
    let eig = sym_eig(&delta)?;
    Ok(eig.eigenvalues[0])
}

const RANK_TOL: f64 = 1e-12;

/// The noiseless achievable secrecy rate for zero-mean classes, in bits:
/// H(c) − ½log₂det(Σ p_k Φ_eΣ_kΦ_eᵀ) + ½Σ p_k log₂det(Φ_eΣ_kΦ_eᵀ).
/// Lies in [0, H(c)] by concavity of log-det.
pub fn low_noise_rate(src: &GmmSource, phi_e: &DMatrix<f64>) -> Result<f64> {
    for (k, class) in src.classes().iter().enumerate() {
        if class.mean.norm() > 1e-12 {
            return Err(Error::InvalidSource(format!(
                "low-noise rate requires zero-mean classes; class {} has nonzero mean",
                k + 1
            )));
        }
    }
    let igmm = induce(src, phi_e, 0.0)?;
    let m = igmm.dim();
    let mut mix = DMatrix::<f64>::zeros(m, m);
    let mut avg_logdet = 0.0;
    for k in 0..igmm.num_classes() {
        let cov = &igmm.covs[k];
        let eig = sym_eig(cov)?;
        let smallest = eig.eigenvalues[0];
        let largest = eig.eigenvalues[eig.eigenvalues.len() - 1];
        if smallest <= RANK_TOL * largest.max(RANK_TOL) {
            return Err(Error::RankDeficient {
                class: k + 1,
                ratio: smallest / largest.max(RANK_TOL),
            });
        }
        avg_logdet += igmm.weights[k] * logdet_psd(cov)? / LN_2;
        mix += cov * igmm.weights[k];
    }
    let hc = src.class_entropy_bits();
    Ok(hc - 0.5 * logdet_psd(&mix)? / LN_2 + 0.5 * avg_logdet)
}

/// Builds the full rate report for one channel realization. Estimates
/// consume the stream in a fixed order (Bob MI, Bob MAP error, Eve MI),
/// so a given stream yields a bit-identical report.
pub fn rate_report<R: Rng + ?Sized>(
    src: &GmmSource,
    chans: &ChannelPair,
    n_samples: usize,
    rng: &mut R,
) -> Result<RateReport> {
    if chans.noise_var <= 0.0 {
        return Err(Error::InvalidSpec(
            "rate_report requires noise_var > 0; use low_noise_rate for the noiseless path".into(),
        ));
    }
    let bob = induce(src, &chans.phi_b, chans.noise_var)?;
    let eve = induce(src, &chans.phi_e, chans.noise_var)?;

    let mut mi_bob = mi_mc(&bob, n_samples, rng)?;
    mi_bob.value = mi_bob.value.max(0.0);
    let map_error = map_error_rate(&bob, n_samples, rng)?;
    let mut mi_eve_mc_est = mi_mc(&eve, n_samples, rng)?;
    mi_eve_mc_est.value = mi_eve_mc_est.value.max(0.0);
    let upper = mi_eve_upper(&eve)?;

    let equivocation = Estimate {
        value: (mi_bob.value - mi_eve_mc_est.value).max(0.0),
        std_err: (mi_bob.std_err.powi(2) + mi_eve_mc_est.std_err.powi(2)).sqrt(),
        n_samples,
    };
    Ok(RateReport {
        rs_lower: mi_bob.value - upper,
        code_rate: mi_bob.value,
        mi_bob,
        mi_eve_mc: mi_eve_mc_est,
        mi_eve_upper: upper,
        equivocation,
        map_error,
    })
}
