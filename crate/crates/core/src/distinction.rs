//! Distinguishing two density matrices with the POVM
//! `{N p_j |phi_j><phi_j|}` of a design, and the fourth-moment bound on the
//! resulting variational distance.
//!
//! With `Delta = rho1 - rho2` and `S_j = <phi_j|Delta|phi_j>` the output
//! distributions differ in l1 by `sum_j N p_j |S_j| = N E|S|`, and
//! `E|S| >= E[S^2]^{3/2} / E[S^4]^{1/2}`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::design::{build_mub_design, mub_state, DesignEnsemble};
use crate::error::{Error, Result};
use crate::haar::haar_state;
use crate::reduce::deterministic_reduce;
use crate::states::{frobenius, hermitian_form, inner, DensityMatrix, PureState};

/// Largest ensemble whose full outcome distribution is materialised.
pub const DISTRIBUTION_LIMIT: u64 = 1 << 26;

pub const FROBENIUS_NOTE: &str =
    "f = sqrt(sum |a_kl|^2); two orthogonal pure states give f = sqrt(2), not 2";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinctionReport {
    #[serde(rename = "N")]
    pub n: u64,
    pub t: u32,
    pub size: u64,
    /// Frobenius norm of `rho1 - rho2`.
    pub f: f64,
    pub l1: f64,
    pub mean_abs_s: f64,
    pub mean_s2: f64,
    pub mean_s4: f64,
    /// Lower bound on `E|S|`.
    pub berger_bound: f64,
    /// `l1 / N >= berger_bound - 1e-12`.
    pub berger_holds: bool,
    /// `f^2 / (N (N+1))`, the exact 2-design value of `E[S^2]`.
    pub design_s2: f64,
    /// `9 f^4 / (N (N+1) (N+2) (N+3))`, the 4-design bound on `E[S^4]`.
    pub design_s4_bound: f64,
    /// `f / 3`, the exact 4-design lower bound on `l1`.
    pub design_l1_bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub haar_baseline: Option<Baseline>,
    pub notes: Vec<String>,
}

fn check_dims(ensemble: &DesignEnsemble, rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != ensemble.dim() {
        return Err(Error::InvalidDensity(format!(
            "density matrix has dimension {}, ensemble {}",
            rho.dim(),
            ensemble.dim()
        )));
    }
    Ok(())
}

/// Outcome probabilities `N p_j <phi_j|rho|phi_j>` in element order.
pub fn povm_distribution(ensemble: &DesignEnsemble, rho: &DensityMatrix) -> Result<Vec<f64>> {
    check_dims(ensemble, rho)?;
    if ensemble.size() > DISTRIBUTION_LIMIT {
        return Err(Error::BudgetExceeded {
            needed: ensemble.size() as u128,
            budget: DISTRIBUTION_LIMIT as u128,
        });
    }
    let n = ensemble.dim() as f64;
    let mut out = Vec::with_capacity(ensemble.size() as usize);
    ensemble.visit(0..ensemble.size(), |w, amps| out.push(n * w * rho.expectation(amps)))?;
    Ok(out)
}

/// `m2^{3/2} / m4^{1/2}`.
pub fn berger_bound(m2: f64, m4: f64) -> Result<f64> {
    if m2.is_nan() || m4.is_nan() || m2 < 0.0 || m4 < 0.0 {
        return Err(Error::InvalidParameter(format!("moments must be non-negative: {m2}, {m4}")));
    }
    if m4 == 0.0 {
        if m2 == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::InvalidParameter("fourth moment vanishes while the second does not".into()));
    }
    Ok(m2.powf(1.5) / m4.sqrt())
}

/// Streams `S_j` once per element, accumulating `E|S|`, `E[S^2]`, `E[S^4]`.
pub fn distinguish(ensemble: &DesignEnsemble, rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<DistinctionReport> {
    check_dims(ensemble, rho1)?;
    check_dims(ensemble, rho2)?;
    let delta = rho1.matrix() - rho2.matrix();
    let n = ensemble.dim();
    let sums = deterministic_reduce(
        ensemble.size(),
        4096,
        |range| -> Result<[f64; 3]> {
            let mut acc = [0.0; 3];
            ensemble.visit(range, |w, amps| {
                let s = hermitian_form(&delta, amps);
                let s2 = s * s;
                acc[0] += w * s.abs();
                acc[1] += w * s2;
                acc[2] += w * s2 * s2;
            })?;
            Ok(acc)
        },
        |a, b| {
            let (a, b) = (a?, b?);
            Ok([a[0] + b[0], a[1] + b[1], a[2] + b[2]])
        },
    )
    .unwrap_or(Ok([0.0; 3]))?;
    let [m1, m2, m4] = sums;
    let f = frobenius(&delta);
    let nf = n as f64;
    let bound = berger_bound(m2, m4)?;
    Ok(DistinctionReport {
        n: n as u64,
        t: ensemble.order(),
        size: ensemble.size(),
        f,
        l1: nf * m1,
        mean_abs_s: m1,
        mean_s2: m2,
        mean_s4: m4,
        berger_bound: bound,
        berger_holds: m1 >= bound - 1e-12,
        design_s2: f * f / (nf * (nf + 1.0)),
        design_s4_bound: 9.0 * f.powi(4) / (nf * (nf + 1.0) * (nf + 2.0) * (nf + 3.0)),
        design_l1_bound: f / 3.0,
        haar_baseline: None,
        notes: vec![FROBENIUS_NOTE.to_string()],
    })
}

/// Haar-random unitary: QR of a complex Gaussian matrix with the phases of
/// `R`'s diagonal moved into `Q`.
pub fn haar_unitary(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let z = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    let qr = z.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Mean over Haar-random orthonormal bases of the l1 distance between the
/// two measurement distributions, with its standard error. Trial `k` draws
/// from its own ChaCha stream.
pub fn haar_baseline(rho1: &DensityMatrix, rho2: &DensityMatrix, trials: u64, seed: u64) -> Result<Baseline> {
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    if rho1.dim() != rho2.dim() {
        return Err(Error::InvalidDensity("density matrices differ in dimension".into()));
    }
    let n = rho1.dim();
    let delta = rho1.matrix() - rho2.matrix();
    let (sum, sq) = deterministic_reduce(
        trials,
        16,
        |range| {
            let mut acc = (0.0, 0.0);
            for trial in range {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(trial);
                let u = haar_unitary(n, &mut rng);
                let l1: f64 = (0..n)
                    .map(|k| {
                        let col: Vec<Complex64> = u.column(k).iter().copied().collect();
                        hermitian_form(&delta, &col).abs()
                    })
                    .sum();
                acc.0 += l1;
                acc.1 += l1 * l1;
            }
            acc
        },
        |a, b| (a.0 + b.0, a.1 + b.1),
    )
    .expect("at least one trial");
    let k = trials as f64;
    let mean = sum / k;
    let var = if trials > 1 { (sq - k * mean * mean) / (k - 1.0) } else { 0.0 };
    Ok(Baseline {
        mean,
        std_error: (var.max(0.0) / k).sqrt(),
        trials,
        seed,
    })
}

/// l1 distance of the MUB-POVM outputs for two vectors of one basis.
pub fn mub_counterexample(n: u64) -> Result<f64> {
    let ensemble = build_mub_design(n)?;
    let nn = n as usize;
    let a = PureState::new(mub_state(nn, 1, 0))?.density();
    let b = PureState::new(mub_state(nn, 1, 1))?.density();
    Ok(distinguish(&ensemble, &a, &b)?.l1)
}

/// A Haar-random pure state and a second one orthogonal to it.
pub fn random_orthogonal_pair(n: usize, rng: &mut ChaCha8Rng) -> Result<(PureState, PureState)> {
    let a = haar_state(n, rng);
    let mut b = haar_state(n, rng);
    let overlap = inner(&a, &b);
    for (bj, aj) in b.iter_mut().zip(&a) {
        *bj -= overlap * aj;
    }
    Ok((PureState::normalized(a)?, PureState::normalized(b)?))
}

/// A random full-rank density matrix `G G^* / tr(G G^*)`.
pub fn random_density(n: usize, rng: &mut ChaCha8Rng) -> Result<DensityMatrix> {
    let g = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    let mut rho = &g * g.adjoint();
    let trace: Complex64 = rho.trace();
    rho /= trace;
    // Restore exact Hermiticity lost to rounding.
    let rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    DensityMatrix::new(rho)
}
