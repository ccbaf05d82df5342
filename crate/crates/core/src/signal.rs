//! The transmitter side: Gaussian-mixture codebooks, the Cayley covariance
//! family, power accounting and sampling of (class, signal) pairs.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, cayley_transform, sample_standard_normal, skew_matrix};

/// One mixture component: mean μ and covariance factor L with Σ = LLᵀ.
/// A rank-0 class stores an n×0 factor and is deterministic.
#[derive(Debug, Clone)]
pub struct GaussianClass {
    pub mean: DVector<f64>,
    pub cov_factor: DMatrix<f64>,
}

impl GaussianClass {
    pub fn new(mean: DVector<f64>, cov_factor: DMatrix<f64>) -> Result<Self> {
        if cov_factor.ncols() > 0 && cov_factor.nrows() != mean.len() {
            return Err(Error::DimensionMismatch(format!(
                "mean has dimension {} but factor has {} rows",
                mean.len(),
                cov_factor.nrows()
            )));
        }
        let class = Self { mean, cov_factor };
        if class.cov_factor.ncols() > 0 {
            numerics::check_finite(&class.cov_factor)?;
            let sv = class.cov_factor.singular_values();
            let smallest = sv[sv.len() - 1];
            let largest = sv[0];
            if smallest <= 1e-10 * largest.max(1.0) {
                return Err(Error::InvalidSource(format!(
                    "covariance factor columns are not independent (σ_min={smallest:.3e})"
                )));
            }
        }
        Ok(class)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn rank(&self) -> usize {
        self.cov_factor.ncols()
    }

    /// Materializes Σ = LLᵀ.
    pub fn covariance(&self) -> DMatrix<f64> {
        if self.rank() == 0 {
            DMatrix::zeros(self.dim(), self.dim())
        } else {
            &self.cov_factor * self.cov_factor.transpose()
        }
    }

    /// tr Σ + ‖μ‖², the per-class contribution to the transmit power.
    pub fn second_moment_trace(&self) -> f64 {
        self.cov_factor.norm_squared() + self.mean.norm_squared()
    }
}

/// A K-class Gaussian-mixture codebook with class priors and a transmit
/// power budget. Immutable after construction.
#[derive(Debug, Clone)]
pub struct GmmSource {
    classes: Vec<GaussianClass>,
    weights: Vec<f64>,
    power_budget: f64,
    cum_weights: Vec<f64>,
}

impl GmmSource {
    pub fn new(classes: Vec<GaussianClass>, weights: Vec<f64>, power_budget: f64) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::InvalidSource("at least one class required".into()));
        }
        if classes.len() != weights.len() {
            return Err(Error::InvalidSource(format!(
                "{} classes but {} weights",
                classes.len(),
                weights.len()
            )));
        }
        let n = classes[0].dim();
        if classes.iter().any(|c| c.dim() != n) {
            return Err(Error::InvalidSource("classes differ in dimension".into()));
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidSource("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSource(format!("weights sum to {total}, not 1")));
        }
        let power: f64 = classes
            .iter()
            .zip(&weights)
            .map(|(c, &p)| p * c.second_moment_trace())
            .sum();
        if power > power_budget * (1.0 + 1e-9) {
            return Err(Error::InvalidSource(format!(
                "power {power} exceeds budget {power_budget}"
            )));
        }
        let mut cum = 0.0;
        let cum_weights = weights
            .iter()
            .map(|&w| {
                cum += w;
                cum
            })
            .collect();
        Ok(Self {
            classes,
            weights,
            power_budget,
            cum_weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.classes[0].dim()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[GaussianClass] {
        &self.classes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn power_budget(&self) -> f64 {
        self.power_budget
    }

    /// H(c) in bits.
    pub fn class_entropy_bits(&self) -> f64 {
        -self
            .weights
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.log2())
            .sum::<f64>()
    }

    /// Σ_k p_k (tr Σ_k + ‖μ_k‖²), the average transmit power.
    pub fn power(&self) -> f64 {
        self.classes
            .iter()
            .zip(&self.weights)
            .map(|(c, &p)| p * c.second_moment_trace())
            .sum()
    }

    /// Draws a class index (0-based; reports display 1-based) by inverse CDF
    /// on the cumulative weights.
    pub fn sample_class<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        match self
            .cum_weights
            .iter()
            .position(|&c| u < c)
        {
            Some(k) => k,
            None => self.classes.len() - 1,
        }
    }

    /// x = μ_c + L_c g with g standard normal; the sample lies in the
    /// shifted range space of class c.
    pub fn sample_signal<R: Rng + ?Sized>(&self, c: usize, rng: &mut R) -> DVector<f64> {
        let class = &self.classes[c];
        let g = sample_standard_normal(rng, class.rank());
        if class.rank() == 0 {
            class.mean.clone()
        } else {
            &class.mean + &class.cov_factor * g
        }
    }

    pub fn to_manifest(&self) -> SourceManifest {
        SourceManifest {
            dim: self.dim(),
            power_budget: self.power_budget,
            weights: self.weights.clone(),
            means: self.classes.iter().map(|c| c.mean.iter().copied().collect()).collect(),
            cov_factors: self
                .classes
                .iter()
                .map(|c| MatrixManifest::from_matrix(&c.cov_factor))
                .collect(),
        }
    }

    pub fn from_manifest(m: &SourceManifest) -> Result<Self> {
        let classes = m
            .means
            .iter()
            .zip(&m.cov_factors)
            .map(|(mean, factor)| {
                GaussianClass::new(DVector::from_vec(mean.clone()), factor.to_matrix())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(classes, m.weights.clone(), m.power_budget)
    }
}

/// Row-major matrix payload for JSON manifests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixManifest {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixManifest {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

/// JSON-serializable snapshot of a [`GmmSource`] for reproducibility manifests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceManifest {
    pub dim: usize,
    pub power_budget: f64,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub cov_factors: Vec<MatrixManifest>,
}

/// Parameters of the rotated-subspace covariance family.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CayleyFamilySpec {
    pub n: usize,
    pub mb: usize,
    pub num_classes: usize,
    pub power: f64,
    pub eps: f64,
}

impl CayleyFamilySpec {
    pub fn validate(&self) -> Result<()> {
        if self.mb < 2 {
            return Err(Error::InvalidSpec(format!(
                "mb must be >= 2 (class rank mb-1 would be 0), got {}",
                self.mb
            )));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidSpec("at least 2 classes required".into()));
        }
        if self.n < self.mb {
            return Err(Error::InvalidSpec(format!(
                "n (= {}) must be >= mb (= {})",
                self.n, self.mb
            )));
        }
        if !(self.power > 0.0) || !self.eps.is_finite() {
            return Err(Error::InvalidSpec("power must be positive and eps finite".into()));
        }
        Ok(())
    }
}

/// Two class subspaces found numerically indistinguishable during
/// construction. The classifier argument requires distinct range spaces;
/// the warning surfaces the failure mode instead of erroring.
#[derive(Debug, Clone)]
pub struct SubspaceWarning {
    /// 1-based class indices.
    pub class_a: usize,
    pub class_b: usize,
    /// Largest singular value of the projector difference, sin of the
    /// largest principal angle between the two subspaces.
    pub separation: f64,
}

/// A built Cayley family together with construction diagnostics.
#[derive(Debug, Clone)]
pub struct CayleyFamily {
    pub source: GmmSource,
    pub warnings: Vec<SubspaceWarning>,
}

const ORTHO_DRIFT_TOL: f64 = 1e-12;
const SUBSPACE_TOL: f64 = 1e-8;

/// Builds the K-class zero-mean family Σ_k = (P/(mb−1)) Wᵏ J Wᵏᵀ with
/// J = diag(I_{mb−1}, 0), W the Cayley transform of the ε generator, and
/// uniform priors. Every class has tr Σ_k = P, so the power constraint is
/// met with equality.
pub fn build_cayley_family(spec: &CayleyFamilySpec) -> Result<CayleyFamily> {
    spec.validate()?;
    let n = spec.n;
    let rank = spec.mb - 1;
    let w = cayley_transform(&skew_matrix(n, spec.eps)?)?;
    let scale = (spec.power / rank as f64).sqrt();

    let mut wk = DMatrix::<f64>::identity(n, n);
    let mut bases: Vec<DMatrix<f64>> = Vec::with_capacity(spec.num_classes);
    for _ in 0..spec.num_classes {
        wk = &wk * &w;
        if numerics::orthogonality_defect(&wk) > ORTHO_DRIFT_TOL {
            wk = qr_polish(&wk);
        }
        bases.push(wk.columns(0, rank).into_owned());
    }

    let mut warnings = Vec::new();
    if spec.eps != 0.0 {
        for a in 0..bases.len() {
            for b in (a + 1)..bases.len() {
                let pa = &bases[a] * bases[a].transpose();
                let pb = &bases[b] * bases[b].transpose();
                // distinct range spaces need one positive principal angle,
                // i.e. ‖P_a − P_b‖₂ > 0; the smallest singular value is 0
                // whenever the subspaces merely intersect
                let sv = (pa - pb).singular_values();
                let largest = sv[0];
                if largest <= SUBSPACE_TOL {
                    warnings.push(SubspaceWarning {
                        class_a: a + 1,
                        class_b: b + 1,
                        separation: largest,
                    });
                }
            }
        }
    }

    let classes = bases
        .into_iter()
        .map(|basis| GaussianClass::new(DVector::zeros(n), basis * scale))
        .collect::<Result<Vec<_>>>()?;
    let k = spec.num_classes as f64;
    let source = GmmSource::new(classes, vec![1.0 / k; spec.num_classes], spec.power)?;
    Ok(CayleyFamily { source, warnings })
}

/// Re-orthonormalizes an accumulated power of W via QR, fixing signs so the
/// polished matrix stays close to the input.
fn qr_polish(m: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = m.clone().qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..r.ncols().min(q.ncols()) {
        if r[(j, j)] < 0.0 {
            for i in 0..q.nrows() {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}
