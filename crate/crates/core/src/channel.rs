//! Channel generation and the push-forward of a source mixture through a
//! linear channel with additive white Gaussian noise.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::sample_standard_normal;
use crate::signal::{GmmSource, MatrixManifest};

/// The legitimate and eavesdropper channel matrices with per-antenna noise
/// variance. Frozen for the duration of a trial.
#[derive(Debug, Clone)]
pub struct ChannelPair {
    pub phi_b: DMatrix<f64>,
    pub phi_e: DMatrix<f64>,
    pub noise_var: f64,
}

impl ChannelPair {
    pub fn new(phi_b: DMatrix<f64>, phi_e: DMatrix<f64>, noise_var: f64) -> Result<Self> {
        let n = phi_b.ncols();
        if phi_e.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "phi_b has {} columns but phi_e has {}",
                n,
                phi_e.ncols()
            )));
        }
        if phi_b.nrows() >= n || phi_e.nrows() >= n {
            return Err(Error::InvalidDimension(
                "receiver antenna counts must be below the transmit dimension".into(),
            ));
        }
        if noise_var < 0.0 || !noise_var.is_finite() {
            return Err(Error::InvalidSpec("noise variance must be finite and >= 0".into()));
        }
        Ok(Self {
            phi_b,
            phi_e,
            noise_var,
        })
    }

    pub fn to_manifest(&self) -> ChannelManifest {
        ChannelManifest {
            phi_b: MatrixManifest::from_matrix(&self.phi_b),
            phi_e: MatrixManifest::from_matrix(&self.phi_e),
            noise_var: self.noise_var,
        }
    }
}

/// JSON snapshot of a channel pair; shares the manifest format of the source.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelManifest {
    pub phi_b: MatrixManifest,
    pub phi_e: MatrixManifest,
    pub noise_var: f64,
}

/// The mixture seen at a receiver: component means Φμ_k, covariances
/// ΦΣ_kΦᵀ + σ²I and the source priors. Pushed factors ΦL_k are kept so
/// observations can be drawn even when σ² = 0 leaves covariances singular.
#[derive(Debug, Clone)]
pub struct InducedGmm {
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
    pub factors: Vec<DMatrix<f64>>,
    pub weights: Vec<f64>,
    pub noise_var: f64,
}

impl InducedGmm {
    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn num_classes(&self) -> usize {
        self.means.len()
    }
}

/// First `mb` rows of the n-point orthonormal DCT; the paper's fixed
/// legitimate channel.
pub fn make_bob_dct(n: usize, mb: usize) -> Result<DMatrix<f64>> {
    crate::numerics::dct_rows(mb, n)
}

/// An me×n matrix of i.i.d. standard normal entries.
pub fn make_eve_gaussian<R: Rng + ?Sized>(n: usize, me: usize, rng: &mut R) -> DMatrix<f64> {
    // DMatrix::from_fn iterates column-major; fill row-major so the draw
    // order matches the manifest layout.
    let mut m = DMatrix::zeros(me, n);
    for i in 0..me {
        for j in 0..n {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    m
}

/// Pushes the source mixture through `phi` and adds isotropic noise.
pub fn induce(src: &GmmSource, phi: &DMatrix<f64>, noise_var: f64) -> Result<InducedGmm> {
    if phi.ncols() != src.dim() {
        return Err(Error::DimensionMismatch(format!(
            "channel expects dimension {}, source has {}",
            phi.ncols(),
            src.dim()
        )));
    }
    let m = phi.nrows();
    let mut means = Vec::with_capacity(src.num_classes());
    let mut covs = Vec::with_capacity(src.num_classes());
    let mut factors = Vec::with_capacity(src.num_classes());
    for class in src.classes() {
        let mean = phi * &class.mean;
        let factor = phi * &class.cov_factor;
        let mut cov = if factor.ncols() == 0 {
            DMatrix::zeros(m, m)
        } else {
            &factor * factor.transpose()
        };
        for i in 0..m {
            cov[(i, i)] += noise_var;
        }
        means.push(mean);
        covs.push(crate::numerics::symmetrize(&cov));
        factors.push(factor);
    }
    Ok(InducedGmm {
        means,
        covs,
        factors,
        weights: src.weights().to_vec(),
        noise_var,
    })
}

/// Draws an observation from the induced class-`c` Gaussian:
/// mean + (ΦL_c) g + σ w.
pub fn sample_observation<R: Rng + ?Sized>(
    igmm: &InducedGmm,
    c: usize,
    rng: &mut R,
) -> DVector<f64> {
    let factor = &igmm.factors[c];
    let mut x = igmm.means[c].clone();
    if factor.ncols() > 0 {
        let g = sample_standard_normal(rng, factor.ncols());
        x += factor * g;
    }
    if igmm.noise_var > 0.0 {
        let sigma = igmm.noise_var.sqrt();
        let w = sample_standard_normal(rng, igmm.dim());
        x += w * sigma;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{build_cayley_family, CayleyFamilySpec, GaussianClass};
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cayley(n: usize, mb: usize, k: usize, power: f64, eps: f64) -> GmmSource {
        build_cayley_family(&CayleyFamilySpec {
            n,
            mb,
            num_classes: k,
            power,
            eps,
        })
        .unwrap()
        .source
    }

    #[test]
    fn dct_channel_matches_numerics() {
        let phi = make_bob_dct(10, 6).unwrap();
        assert_eq!((phi.nrows(), phi.ncols()), (6, 10));
        let defect = (&phi * phi.transpose() - DMatrix::identity(6, 6)).norm();
        assert!(defect <= 1e-10);
    }

    #[test]
    fn dct_single_row_constant() {
        let phi = make_bob_dct(8, 1).unwrap();
        for j in 0..8 {
            assert_abs_diff_eq!(phi[(0, j)], (1.0f64 / 8.0).sqrt(), epsilon = 1e-15);
        }
    }

    #[test]
    fn eve_channel_deterministic() {
        let a = make_eve_gaussian(10, 4, &mut ChaCha8Rng::seed_from_u64(33));
        let b = make_eve_gaussian(10, 4, &mut ChaCha8Rng::seed_from_u64(33));
        assert_eq!(a, b);
    }

    #[test]
    fn eve_channel_entry_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let count = 1000 * 40;
        for _ in 0..1000 {
            let m = make_eve_gaussian(10, 4, &mut rng);
            sum += m.iter().sum::<f64>();
            sumsq += m.iter().map(|x| x * x).sum::<f64>();
        }
        let mean = sum / count as f64;
        let var = sumsq / count as f64 - mean * mean;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "var {var}");
    }

    #[test]
    fn eve_square_full_rank() {
        let m = make_eve_gaussian(3, 3, &mut ChaCha8Rng::seed_from_u64(4));
        let sv = m.singular_values();
        assert!(sv[sv.len() - 1] > 1e-12);
    }

    #[test]
    fn induce_pure_noise() {
        let class = GaussianClass::new(DVector::zeros(5), DMatrix::zeros(5, 0)).unwrap();
        let src = GmmSource::new(vec![class], vec![1.0], 1.0).unwrap();
        let phi = make_bob_dct(5, 3).unwrap();
        let igmm = induce(&src, &phi, 1.0).unwrap();
        assert_abs_diff_eq!(igmm.covs[0].clone(), DMatrix::identity(3, 3), epsilon = 1e-14);
        assert_eq!(igmm.means[0], DVector::zeros(3));
    }

    #[test]
    fn induce_identity_channel_noiseless() {
        let src = cayley(6, 4, 2, 1.0, 0.05);
        // identity channel is not a valid ChannelPair (m < n), but induce
        // itself accepts any phi with matching columns
        let eye = DMatrix::<f64>::identity(6, 6);
        let igmm = induce(&src, &eye, 0.0).unwrap();
        for (k, class) in src.classes().iter().enumerate() {
            assert_abs_diff_eq!(igmm.covs[k].clone(), class.covariance(), epsilon = 1e-13);
            assert_eq!(igmm.means[k], class.mean);
        }
    }

    #[test]
    fn induce_matches_triple_product_oracle() {
        let src = cayley(10, 6, 2, 1.0, 0.01);
        let phi = make_bob_dct(10, 6).unwrap();
        let sigma2 = 10f64.powf(-3.5);
        let igmm = induce(&src, &phi, sigma2).unwrap();
        for (k, class) in src.classes().iter().enumerate() {
            let oracle =
                &phi * class.covariance() * phi.transpose() + DMatrix::identity(6, 6) * sigma2;
            assert!((igmm.covs[k].clone() - oracle).norm() <= 1e-12);
        }
    }

    #[test]
    fn induce_rejects_mismatch() {
        let src = cayley(10, 6, 2, 1.0, 0.01);
        let phi = make_bob_dct(8, 4).unwrap();
        assert!(induce(&src, &phi, 0.1).is_err());
    }

    #[test]
    fn observation_deterministic_class() {
        let class = GaussianClass::new(DVector::from_vec(vec![1.0, -1.0, 0.5]), DMatrix::zeros(3, 0))
            .unwrap();
        let src = GmmSource::new(vec![class], vec![1.0], 3.0).unwrap();
        let phi = make_bob_dct(3, 2).unwrap();
        let igmm = induce(&src, &phi, 0.0).unwrap();
        let y = sample_observation(&igmm, 0, &mut ChaCha8Rng::seed_from_u64(0));
        assert_abs_diff_eq!(y, igmm.means[0].clone(), epsilon = 1e-15);
    }

    #[test]
    fn observation_covariance_concentrates() {
        let src = cayley(10, 6, 2, 1.0, 0.01);
        let phi = make_bob_dct(10, 6).unwrap();
        let igmm = induce(&src, &phi, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 100_000;
        let mut acc = DMatrix::<f64>::zeros(6, 6);
        let mut mean = DVector::<f64>::zeros(6);
        for _ in 0..n {
            let y = sample_observation(&igmm, 0, &mut rng);
            acc += &y * y.transpose();
            mean += y;
        }
        mean /= n as f64;
        let cov = acc / n as f64 - &mean * mean.transpose();
        assert!((cov - &igmm.covs[0]).norm() <= 0.05 * igmm.covs[0].norm());
    }

    #[test]
    fn end_to_end_matches_induced_distribution() {
        // sample x then push through phi + noise, vs sampling the induced
        // Gaussian directly; compare per-coordinate means
        let src = cayley(10, 6, 2, 1.0, 0.05);
        let phi = make_bob_dct(10, 6).unwrap();
        let sigma2 = 0.1;
        let igmm = induce(&src, &phi, sigma2).unwrap();
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut m1 = DVector::<f64>::zeros(6);
        let mut s1 = DVector::<f64>::zeros(6);
        for _ in 0..n {
            let x = src.sample_signal(1, &mut rng);
            let y = &phi * x + sample_standard_normal(&mut rng, 6) * sigma2.sqrt();
            for i in 0..6 {
                m1[i] += y[i];
                s1[i] += y[i] * y[i];
            }
        }
        let mut m2 = DVector::<f64>::zeros(6);
        for _ in 0..n {
            let y = sample_observation(&igmm, 1, &mut rng);
            for i in 0..6 {
                m2[i] += y[i];
            }
        }
        for i in 0..6 {
            let mean1 = m1[i] / n as f64;
            let mean2 = m2[i] / n as f64;
            let var = s1[i] / n as f64 - mean1 * mean1;
            let tol = 2.0 * 4.0 * var.sqrt() / (n as f64).sqrt();
            assert!((mean1 - mean2).abs() <= tol, "coordinate {i}: {mean1} vs {mean2}");
        }
    }

    #[test]
    fn eve_pushforward_full_rank_noiseless() {
        let src = cayley(10, 6, 2, 1.0, 0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let phi_e = make_eve_gaussian(10, 4, &mut rng);
            let igmm = induce(&src, &phi_e, 0.0).unwrap();
            for cov in &igmm.covs {
                let eig = crate::numerics::sym_eig(cov).unwrap();
                let smallest = eig.eigenvalues[0];
                let largest = eig.eigenvalues[eig.eigenvalues.len() - 1];
                assert!(smallest > 1e-12 * largest);
            }
        }
    }
}
