//! Experiment orchestration: seeded sweeps over eavesdropper channels,
//! empirical CDF assembly, low-noise rate sweeps, the invariant suite,
//! and deterministic CSV rendering.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{induce, make_bob_dct, make_eve_gaussian, ChannelPair};
use crate::error::{Error, Result};
use crate::info::{
    gaussian_entropy, lemma1_gap, low_noise_rate, map_error_rate, mc_entropy, mi_eve_upper,
    mi_mc, mixture_covariance, rate_report, RateReport,
};
use crate::numerics::{
    cayley_transform, dct_rows, logdet_psd, orthogonality_defect, skew_matrix, symmetrize,
};
use crate::signal::{build_cayley_family, CayleyFamilySpec, GmmSource};

/// How the legitimate channel is produced: the fixed DCT rows, or a fresh
/// Gaussian draw per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BobChannel {
    Dct,
    Gaussian,
}

impl std::fmt::Display for BobChannel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BobChannel::Dct => write!(f, "dct"),
            BobChannel::Gaussian => write!(f, "gaussian"),
        }
    }
}

/// Full description of one experiment run. Identical configs with the same
/// master seed produce byte-identical outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n: usize,
    pub mb: usize,
    pub me: usize,
    pub num_classes: usize,
    pub eps: f64,
    pub snr_db: f64,
    pub power: f64,
    pub n_trials: usize,
    pub n_samples: usize,
    pub master_seed: u64,
    pub bob_channel: BobChannel,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        // antenna ordering: me <= mb - 1 < mb <= n
        if self.mb < 2 || self.mb > self.n {
            return Err(Error::InvalidSpec(format!(
                "need 2 <= mb <= n, got mb={}, n={}",
                self.mb, self.n
            )));
        }
        if self.me == 0 || self.me > self.mb - 1 {
            return Err(Error::InvalidSpec(format!(
                "need 1 <= me <= mb-1, got me={}, mb={}",
                self.me, self.mb
            )));
        }
        if self.n_trials == 0 || self.n_samples == 0 {
            return Err(Error::InvalidSpec("n_trials and n_samples must be positive".into()));
        }
        self.family_spec().validate()
    }

    pub fn family_spec(&self) -> CayleyFamilySpec {
        CayleyFamilySpec {
            n: self.n,
            mb: self.mb,
            num_classes: self.num_classes,
            power: self.power,
            eps: self.eps,
        }
    }

    /// σ² = P / 10^(SNR_dB/10), per-antenna.
    pub fn noise_var(&self) -> f64 {
        self.power / 10f64.powf(self.snr_db / 10.0)
    }
}

/// Independent per-trial stream: one ChaCha instance per (seed, stream id).
/// Stream 0 is reserved for the validation suite; trial t, attempt a uses
/// stream 1 + 2t + a.
pub fn derive_stream(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

fn trial_stream_id(trial: usize, attempt: u64) -> u64 {
    1 + 2 * trial as u64 + attempt
}

/// One completed trial: the stream id it consumed and its rates.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub report: RateReport,
}

/// Per-trial metric selector for CDF queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Equivocation,
    CodeRate,
    /// R_e / R_c; zero when the code rate itself is zero.
    Ratio,
    MiEve,
}

/// A finished CDF run: the config echo plus every trial in index order.
#[derive(Debug, Clone)]
pub struct CdfResult {
    pub config: ScenarioConfig,
    pub trials: Vec<TrialRecord>,
}

fn metric_value(r: &RateReport, metric: Metric) -> f64 {
    match metric {
        Metric::Equivocation => r.equivocation.value,
        Metric::CodeRate => r.code_rate,
        Metric::Ratio => {
            if r.code_rate > 0.0 {
                r.equivocation.value / r.code_rate
            } else {
                0.0
            }
        }
        Metric::MiEve => r.mi_eve_mc.value,
    }
}

impl CdfResult {
    pub fn sorted_values(&self, metric: Metric) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .trials
            .iter()
            .map(|t| metric_value(&t.report, metric))
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Right-continuous empirical CDF: fraction of trials with value <= x.
    pub fn cdf_at(&self, metric: Metric, x: f64) -> f64 {
        let v = self.sorted_values(metric);
        let count = v.partition_point(|&val| val <= x);
        count as f64 / v.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        out.push_str(&format!(
            "# n={} mb={} me={} k={} eps={} snr_db={} power={} trials={} samples={} seed={} bob={}\n",
            c.n, c.mb, c.me, c.num_classes, c.eps, c.snr_db, c.power, c.n_trials, c.n_samples,
            c.master_seed, c.bob_channel
        ));
        out.push_str(
            "trial,seed,mi_bob,mi_bob_se,mi_eve_mc,mi_eve_mc_se,mi_eve_upper,equivocation,code_rate,ratio,map_error\n",
        );
        for t in &self.trials {
            let r = &t.report;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                t.trial,
                t.seed,
                fmt9(r.mi_bob.value),
                fmt9(r.mi_bob.std_err),
                fmt9(r.mi_eve_mc.value),
                fmt9(r.mi_eve_mc.std_err),
                fmt9(r.mi_eve_upper),
                fmt9(r.equivocation.value),
                fmt9(r.code_rate),
                fmt9(metric_value(r, Metric::Ratio)),
                fmt9(r.map_error.value),
            ));
        }
        out
    }
}

/// 9 significant digits.
pub fn fmt9(v: f64) -> String {
    format!("{v:.8e}")
}

fn run_trial(cfg: &ScenarioConfig, trial: usize, attempt: u64) -> Result<TrialRecord> {
    let seed = trial_stream_id(trial, attempt);
    let mut rng = derive_stream(cfg.master_seed, seed);
    let phi_b = match cfg.bob_channel {
        BobChannel::Dct => make_bob_dct(cfg.n, cfg.mb)?,
        BobChannel::Gaussian => make_eve_gaussian(cfg.n, cfg.mb, &mut rng),
    };
    let phi_e = make_eve_gaussian(cfg.n, cfg.me, &mut rng);
    let family = build_cayley_family(&cfg.family_spec())?;
    let chans = ChannelPair::new(phi_b, phi_e, cfg.noise_var())?;
    let report = rate_report(&family.source, &chans, cfg.n_samples, &mut rng)?;
    Ok(TrialRecord {
        trial,
        seed,
        report,
    })
}

/// Runs every trial of the scenario, in parallel, each on its own derived
/// stream. A trial hitting a rank-deficiency is redrawn once on its second
/// stream; two consecutive failures abort the run.
pub fn run_cdf(cfg: &ScenarioConfig) -> Result<CdfResult> {
    cfg.validate()?;
    let trials: Vec<Result<TrialRecord>> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|t| {
            run_trial(cfg, t, 0).or_else(|first| match first {
                Error::RankDeficient { .. } | Error::SingularMatrix { .. } => {
                    run_trial(cfg, t, 1).map_err(|second| Error::TrialFailed {
                        trial: t,
                        detail: format!("{first}; retry: {second}"),
                    })
                }
                other => Err(other),
            })
        })
        .collect();
    let trials = trials.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(CdfResult {
        config: cfg.clone(),
        trials,
    })
}

/// Low-noise rate statistics over Eve channels, at one ε.
#[derive(Debug, Clone, Serialize)]
pub struct LowNoiseRow {
    pub eps: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub n_trials: usize,
}

/// Evaluates the noiseless achievable rate across `cfg.n_trials` Eve draws
/// for each ε in the grid. The configured SNR is ignored on this path.
pub fn run_lownoise_sweep(cfg: &ScenarioConfig, eps_grid: &[f64]) -> Result<Vec<LowNoiseRow>> {
    cfg.validate()?;
    eps_grid
        .iter()
        .map(|&eps| {
            let spec = CayleyFamilySpec {
                eps,
                ..cfg.family_spec()
            };
            let family = build_cayley_family(&spec)?;
            let rates: Vec<Result<f64>> = (0..cfg.n_trials)
                .into_par_iter()
                .map(|t| lownoise_trial(cfg, &family.source, t))
                .collect();
            let rates = rates.into_iter().collect::<Result<Vec<f64>>>()?;
            let mean = rates.iter().sum::<f64>() / rates.len() as f64;
            let min = rates.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            Ok(LowNoiseRow {
                eps,
                mean,
                min,
                max,
                n_trials: rates.len(),
            })
        })
        .collect()
}

fn lownoise_trial(cfg: &ScenarioConfig, src: &GmmSource, trial: usize) -> Result<f64> {
    let attempt0 = {
        let mut rng = derive_stream(cfg.master_seed, trial_stream_id(trial, 0));
        let phi_e = make_eve_gaussian(cfg.n, cfg.me, &mut rng);
        low_noise_rate(src, &phi_e)
    };
    attempt0.or_else(|first| match first {
        Error::RankDeficient { .. } | Error::SingularMatrix { .. } => {
            let mut rng = derive_stream(cfg.master_seed, trial_stream_id(trial, 1));
            let phi_e = make_eve_gaussian(cfg.n, cfg.me, &mut rng);
            low_noise_rate(src, &phi_e).map_err(|second| Error::TrialFailed {
                trial,
                detail: format!("{first}; retry: {second}"),
            })
        }
        other => Err(other),
    })
}

/// CSV for the low-noise sweep.
pub fn lownoise_csv(cfg: &ScenarioConfig, rows: &[LowNoiseRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "# n={} mb={} me={} k={} power={} trials={} seed={}\n",
        cfg.n, cfg.mb, cfg.me, cfg.num_classes, cfg.power, cfg.n_trials, cfg.master_seed
    ));
    out.push_str("eps,mean,min,max,trials\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt9(r.eps),
            fmt9(r.mean),
            fmt9(r.min),
            fmt9(r.max),
            r.n_trials
        ));
    }
    out
}

/// One entry of the validation suite.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of the invariant suite.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            out.push_str(&format!(
                "{:<width$}  {}  {}\n",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.detail,
            ));
        }
        out.push_str(&format!(
            "{}/{} checks passed\n",
            self.checks.iter().filter(|c| c.passed).count(),
            self.checks.len()
        ));
        out
    }
}

/// Test hooks for negative controls; the default injects nothing.
#[derive(Debug, Clone, Copy, Default)]
pub struct ValidationHooks {
    /// Added to every entry of W before the orthogonality check.
    pub perturb_w: Option<f64>,
}

/// Runs the cross-module invariant suite with a given seed.
pub fn run_validate(seed: u64) -> ValidationReport {
    run_validate_with(seed, ValidationHooks::default())
}

pub fn run_validate_with(seed: u64, hooks: ValidationHooks) -> ValidationReport {
    let mut checks = Vec::new();
    let mut rng = derive_stream(seed, 0);
    let mut push = |name: &str, passed: bool, detail: String| {
        checks.push(ValidationCheck {
            name: name.to_string(),
            passed,
            detail,
        });
    };

    // W(eps) orthogonality across a parameter grid
    {
        let mut worst = 0.0f64;
        for &(n, eps) in &[(4usize, 0.5), (10, 0.1), (10, 0.01), (16, 0.005)] {
            let mut w = cayley_transform(&skew_matrix(n, eps).unwrap()).unwrap();
            if let Some(p) = hooks.perturb_w {
                w.iter_mut().for_each(|x| *x += p);
            }
            worst = worst.max(orthogonality_defect(&w));
        }
        push(
            "cayley-orthogonality",
            worst <= 1e-10,
            format!("max defect {worst:.3e} (tol 1e-10)"),
        );
    }

    // trace preservation under conjugation by W
    {
        let w = cayley_transform(&skew_matrix(8, 0.07).unwrap()).unwrap();
        let g = nalgebra::DMatrix::from_fn(8, 8, |_, _| rng.random::<f64>() - 0.5);
        let m = symmetrize(&g);
        let diff = ((&w * &m * w.transpose()).trace() - m.trace()).abs();
        let rel = diff / m.trace().abs().max(1.0);
        push(
            "trace-preservation",
            rel <= 1e-9,
            format!("relative drift {rel:.3e} (tol 1e-9)"),
        );
    }

    // logdet invariance under orthogonal conjugation
    {
        let w = cayley_transform(&skew_matrix(6, 0.2).unwrap()).unwrap();
        let g = nalgebra::DMatrix::from_fn(6, 6, |_, _| rng.random::<f64>() - 0.5);
        let m = symmetrize(&(&g * g.transpose())) + nalgebra::DMatrix::identity(6, 6);
        let diff = (logdet_psd(&(&w * &m * w.transpose())).unwrap() - logdet_psd(&m).unwrap()).abs();
        push(
            "logdet-rotation-invariance",
            diff <= 1e-8,
            format!("deviation {diff:.3e} (tol 1e-8)"),
        );
    }

    // DCT rows mutually orthogonal
    {
        let phi = dct_rows(6, 10).unwrap();
        let mut worst = 0.0f64;
        for a in 0..6 {
            for b in (a + 1)..6 {
                worst = worst.max(phi.row(a).dot(&phi.row(b)).abs());
            }
        }
        push(
            "dct-row-orthogonality",
            worst <= 1e-12,
            format!("max inner product {worst:.3e} (tol 1e-12)"),
        );
    }

    // family traces and power equality up to K=16, eps=0.5
    {
        let mut worst = 0.0f64;
        for &(k, eps) in &[(16usize, 0.5), (8, 0.01), (4, 0.25)] {
            let fam = build_cayley_family(&CayleyFamilySpec {
                n: 10,
                mb: 6,
                num_classes: k,
                power: 1.0,
                eps,
            })
            .unwrap();
            for class in fam.source.classes() {
                worst = worst.max((class.second_moment_trace() - 1.0).abs());
            }
            worst = worst.max((fam.source.power() - 1.0).abs());
        }
        push(
            "family-trace-and-power",
            worst <= 1e-10,
            format!("max deviation from P {worst:.3e} (tol 1e-10)"),
        );
    }

    // Lemma-1 gap on fuzzed nonzero-mean sources
    {
        let mut worst = f64::INFINITY;
        let mut detail = None;
        for _ in 0..20 {
            let src = fuzz_source(&mut rng, 6, 3);
            let phi = make_eve_gaussian(6, 4, &mut rng);
            match lemma1_gap(&src, &phi, 0.05) {
                Ok(gap) => worst = worst.min(gap),
                Err(e) => {
                    detail = Some(format!("error: {e}"));
                    break;
                }
            }
        }
        match detail {
            Some(d) => push("lemma1-gap", false, d),
            None => push(
                "lemma1-gap",
                worst >= -1e-9,
                format!("min eigenvalue {worst:.3e} (tol -1e-9)"),
            ),
        }
    }

    // max-entropy bound on a finite-SNR instance
    {
        let fam = build_cayley_family(&CayleyFamilySpec {
            n: 10,
            mb: 6,
            num_classes: 4,
            power: 1.0,
            eps: 0.05,
        })
        .unwrap();
        let phi = make_eve_gaussian(10, 4, &mut rng);
        let igmm = induce(&fam.source, &phi, 1e-2).unwrap();
        let est = mc_entropy(&igmm, 20_000, &mut rng).unwrap();
        let bound = gaussian_entropy(&mixture_covariance(&igmm)).unwrap();
        push(
            "max-entropy-bound",
            est.value <= bound + 3.0 * est.std_err,
            format!("h = {:.4} <= bound {:.4} + 3se", est.value, bound),
        );
    }

    // Fano chain: from the MAP error to a lower bound on Bob's MI
    {
        let fam = build_cayley_family(&CayleyFamilySpec {
            n: 10,
            mb: 6,
            num_classes: 2,
            power: 1.0,
            eps: 0.01,
        })
        .unwrap();
        let phi_b = make_bob_dct(10, 6).unwrap();
        let sigma2 = 10f64.powf(-3.5);
        let igmm = induce(&fam.source, &phi_b, sigma2).unwrap();
        let perr = map_error_rate(&igmm, 20_000, &mut rng).unwrap();
        let mi = mi_mc(&igmm, 20_000, &mut rng).unwrap();
        let k = fam.source.num_classes() as f64;
        let p = perr.value;
        let h2 = if p > 0.0 && p < 1.0 {
            -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
        } else {
            0.0
        };
        let fano_floor = k.log2() - h2 - p * (k - 1.0).log2();
        push(
            "fano-consistency",
            mi.value >= fano_floor - 3.0 * mi.std_err,
            format!("mi {:.4} >= Fano floor {:.4} - 3se", mi.value, fano_floor),
        );
    }

    // MC entropy estimator against the closed-form Gaussian
    {
        let cov = nalgebra::DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.2, 0.0, 0.2, 0.5]);
        let l = crate::numerics::cholesky_factor(&cov).unwrap();
        let igmm = crate::channel::InducedGmm {
            means: vec![nalgebra::DVector::zeros(3)],
            covs: vec![cov.clone()],
            factors: vec![l],
            weights: vec![1.0],
            noise_var: 0.0,
        };
        let est = mc_entropy(&igmm, 20_000, &mut rng).unwrap();
        let exact = gaussian_entropy(&cov).unwrap();
        push(
            "mc-entropy-oracle",
            (est.value - exact).abs() <= 3.0 * est.std_err,
            format!("estimate {:.4} vs exact {:.4}", est.value, exact),
        );
    }

    // leakage bound vanishes as eps shrinks
    {
        let phi = make_eve_gaussian(10, 4, &mut rng);
        let mut values = Vec::new();
        for &eps in &[1e-2, 1e-3, 1e-4] {
            let fam = build_cayley_family(&CayleyFamilySpec {
                n: 10,
                mb: 6,
                num_classes: 2,
                power: 1.0,
                eps,
            })
            .unwrap();
            let igmm = induce(&fam.source, &phi, 0.0).unwrap();
            values.push(mi_eve_upper(&igmm).unwrap());
        }
        let decreasing = values.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        let vanishes = values[values.len() - 1] < 1e-3;
        let seq = values
            .iter()
            .map(|v| format!("{v:.3e}"))
            .collect::<Vec<_>>()
            .join(", ");
        push(
            "eps-limit-leakage",
            decreasing && vanishes,
            format!("bound sequence [{seq}] (final < 1e-3 bits)"),
        );
    }

    // subspace distinctness at the standard operating points
    {
        let mut clean = true;
        for &(k, eps) in &[(2usize, 0.01), (8, 0.005)] {
            let fam = build_cayley_family(&CayleyFamilySpec {
                n: 10,
                mb: 6,
                num_classes: k,
                power: 1.0,
                eps,
            })
            .unwrap();
            clean &= fam.warnings.is_empty();
        }
        push(
            "subspace-distinctness",
            clean,
            "no subspace-collision warnings at paper operating points".into(),
        );
    }

    // derived streams never collide
    {
        let mut seen = std::collections::HashSet::new();
        let mut distinct = true;
        for s in 0..10_000u64 {
            let mut r = derive_stream(seed, s);
            let prefix = (r.next_u64(), r.next_u64());
            distinct &= seen.insert(prefix);
        }
        push(
            "stream-independence",
            distinct,
            "10^4 derived streams have distinct outputs".into(),
        );
    }

    ValidationReport { checks }
}

fn fuzz_source<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> GmmSource {
    use crate::signal::GaussianClass;
    let k = 2 + (rng.random::<f64>() * 3.0) as usize;
    let mut weights = vec![0.0; k];
    let mut total = 0.0;
    for w in weights.iter_mut() {
        *w = rng.random::<f64>() + 0.05;
        total += *w;
    }
    for w in weights.iter_mut() {
        *w /= total;
    }
    let classes: Vec<GaussianClass> = (0..k)
        .map(|_| {
            let mean = crate::numerics::sample_standard_normal(rng, n);
            let factor = nalgebra::DMatrix::from_fn(n, rank, |_, _| {
                rng.sample::<f64, _>(rand_distr::StandardNormal) * 0.4
            });
            GaussianClass::new(mean, factor).unwrap()
        })
        .collect();
    let power: f64 = classes
        .iter()
        .zip(&weights)
        .map(|(c, &p)| p * c.second_moment_trace())
        .sum();
    GmmSource::new(classes, weights, power * 1.01).unwrap()
}
