//! Two-stage simulation of the main design POVM.
//!
//! The outcome `(f, g)` is measured as a diagonal measurement `E_f` followed
//! by a phase measurement `E_g`, with `E_{f,g} = sqrt(E_f) E_g sqrt(E_f)`:
//!
//! * `E_f = N / (|F| E[S]) * diag(a_{f,j}^2)`. For fixed `c_1..c_{t-1}` the
//!   operators over `c_0` sum to `I / N^{t-1}`, so those coefficients are
//!   uniform. `c_0` is `i XOR h(j)` where `h` is the polynomial without its
//!   constant term, `j` is drawn from `|psi_j|^2` and `i` is an ancilla
//!   outcome with probability `a(i)^2 / E[S]`. The state collapses to
//!   `A_f psi` renormalised.
//! * `E_g = |chi_g><chi_g| / |G|` with `chi_g(j) = omega_N^{g(j)}`. The
//!   vectors `chi_g` for different `d_1` are not orthogonal once `N >= 4`
//!   (field addition is XOR, not addition mod N), so no Fourier measurement
//!   recovers `d_1`. Stage g samples the exact Born rule instead: the other
//!   coefficients from their marginal, then `d_1` from its conditional.
//!
//! The simulation works with probabilities and state vectors; the ancilla is
//! replaced by the classical distribution of its measured value.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::kwise::{exact_family, FunctionFamily};
use crate::quadrature::{haar_limit_rule, round_rule, QuadratureRule};
use crate::reduce::deterministic_reduce;
use crate::states::PureState;

/// Largest `|F| * |G|` handled by the simulator.
pub const OUTCOME_LIMIT: u64 = 1 << 22;
const SHOTS_PER_CHUNK: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementOutcome {
    /// `c_0..c_{t-1}`, constant term first.
    pub f: Vec<u32>,
    /// `d_0..d_{2t-1}`.
    pub g: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collapsed: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PovmHistogram {
    #[serde(rename = "N")]
    pub n: u64,
    pub t: u32,
    pub shots: u64,
    pub seed: u64,
    pub f_count: u64,
    pub g_count: u64,
    /// Counts indexed by `f_idx * g_count + g_idx`.
    pub counts: Vec<u64>,
}

impl PovmHistogram {
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.shots as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
}

/// Probabilities at or below this are zero up to rounding.
pub const ZERO_PROBABILITY: f64 = 1e-14;

/// Pearson goodness of fit over the cells with positive expected mass. Any
/// count in a zero-probability cell gives `p = 0`.
pub fn chi_square(observed: &[u64], probabilities: &[f64]) -> Result<ChiSquare> {
    if observed.len() != probabilities.len() {
        return Err(Error::InvalidParameter("observed and expected lengths differ".into()));
    }
    let total: u64 = observed.iter().sum();
    let mut statistic = 0.0;
    let mut cells = 0u64;
    let mut impossible = false;
    for (&o, &p) in observed.iter().zip(probabilities) {
        if p > ZERO_PROBABILITY {
            let e = p * total as f64;
            statistic += (o as f64 - e).powi(2) / e;
            cells += 1;
        } else if o > 0 {
            impossible = true;
        }
    }
    if cells < 2 {
        return Err(Error::InvalidParameter("need two cells with positive probability".into()));
    }
    let dof = cells - 1;
    let p_value = if impossible {
        0.0
    } else {
        let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        dist.sf(statistic)
    };
    Ok(ChiSquare { statistic, dof, p_value })
}

/// `sum |freq - p| / 2`.
pub fn total_variation(frequencies: &[f64], probabilities: &[f64]) -> f64 {
    frequencies.iter().zip(probabilities).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0
}

/// Expected total variation between the exact distribution and the
/// histogram of `shots` ideal draws, `sum_i E|X_i - shots p_i| / (2 shots)`
/// with `X_i` binomial, in the normal approximation.
pub fn expected_sampling_tv(probabilities: &[f64], shots: u64) -> f64 {
    let n = shots as f64;
    probabilities
        .iter()
        .map(|&p| (2.0 * p * (1.0 - p) / (PI * n)).sqrt())
        .sum::<f64>()
        / 2.0
}

fn sample_cdf(cdf: &[f64], rng: &mut impl Rng) -> usize {
    let total = *cdf.last().expect("non-empty distribution");
    let u = rng.random::<f64>() * total;
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

fn cumulative(p: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    p.into_iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

fn digits(mut index: u64, base: u64, len: usize) -> Vec<u32> {
    (0..len)
        .map(|_| {
            let d = (index % base) as u32;
            index /= base;
            d
        })
        .collect()
}

/// Stage-g sampler for one input state: a marginal over `g` with `d_1`
/// removed, then a conditional over `d_1`.
struct GSampler {
    rest_cdf: Vec<f64>,
    /// `N` cumulative entries per rest index.
    d1_cdf: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TwoStagePovm {
    n: usize,
    t: u32,
    rule: QuadratureRule,
    f: FunctionFamily,
    g: FunctionFamily,
    /// `a(v)` for every magnitude value `v`.
    value_mag: Vec<f64>,
    mean_norm: f64,
    roots: Vec<Complex64>,
}

impl TwoStagePovm {
    /// Uses the order-t rule rounded to `1/N`, as the main construction does.
    pub fn new(n: u64, t: u32) -> Result<Self> {
        if t == 0 {
            return Err(Error::InvalidParameter("order t must be >= 1".into()));
        }
        let rule = round_rule(&haar_limit_rule(t)?, n)?;
        TwoStagePovm::with_rule(n, t, rule)
    }

    /// `rule` must carry weights that are multiples of `1/N`.
    pub fn with_rule(n: u64, t: u32, rule: QuadratureRule) -> Result<Self> {
        let f = exact_family(n, t)?;
        let g = exact_family(n, 2 * t)?;
        let Some((units, den)) = rule.units() else {
            return Err(Error::RuleNotRounded(n));
        };
        if den != n || units.iter().sum::<u64>() != n {
            return Err(Error::RuleNotRounded(n));
        }
        if f.member_count().saturating_mul(g.member_count()) > OUTCOME_LIMIT {
            return Err(Error::BudgetExceeded {
                needed: f.member_count() as u128 * g.member_count() as u128,
                budget: OUTCOME_LIMIT as u128,
            });
        }
        let sqrt_n = (n as f64).sqrt();
        let mut value_mag = Vec::with_capacity(n as usize);
        for (&u, x) in units.iter().zip(rule.nodes()) {
            value_mag.extend(std::iter::repeat_n(x.abs() / sqrt_n, u as usize));
        }
        let mean_norm = rule.moment(2);
        let roots = (0..n)
            .map(|r| Complex64::from_polar(1.0, 2.0 * PI * r as f64 / n as f64))
            .collect();
        Ok(TwoStagePovm {
            n: n as usize,
            t,
            rule,
            f,
            g,
            value_mag,
            mean_norm,
            roots,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> u32 {
        self.t
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn f_count(&self) -> u64 {
        self.f.member_count()
    }

    pub fn g_count(&self) -> u64 {
        self.g.member_count()
    }

    pub fn f_coefficients(&self, f_idx: u64) -> Vec<u32> {
        digits(f_idx, self.n as u64, self.t as usize)
    }

    pub fn g_coefficients(&self, g_idx: u64) -> Vec<u32> {
        digits(g_idx, self.n as u64, 2 * self.t as usize)
    }

    fn check_state(&self, state: &PureState) -> Result<()> {
        if state.dim() != self.n {
            return Err(Error::InvalidParameter(format!(
                "state has dimension {}, expected {}",
                state.dim(),
                self.n
            )));
        }
        Ok(())
    }

    /// `a_{f,j}` for every point.
    fn magnitudes(&self, f_idx: u64) -> Result<Vec<f64>> {
        Ok(self.f.member_table(f_idx)?.iter().map(|&v| self.value_mag[v as usize]).collect())
    }

    /// Diagonal of `E_f`.
    pub fn stage_f_operator(&self, f_idx: u64) -> Result<Vec<f64>> {
        let scale = self.n as f64 / (self.f_count() as f64 * self.mean_norm);
        Ok(self.magnitudes(f_idx)?.iter().map(|a| scale * a * a).collect())
    }

    /// `<psi|E_f|psi>` for every `f`.
    pub fn stage_f_probabilities(&self, state: &PureState) -> Result<Vec<f64>> {
        self.check_state(state)?;
        (0..self.f_count())
            .map(|f| {
                Ok(self
                    .stage_f_operator(f)?
                    .iter()
                    .zip(state.amplitudes())
                    .map(|(e, a)| e * a.norm_sqr())
                    .sum())
            })
            .collect()
    }

    fn collapse(&self, state: &PureState, f_idx: u64) -> Result<PureState> {
        let amps = self
            .magnitudes(f_idx)?
            .iter()
            .zip(state.amplitudes())
            .map(|(a, z)| z * *a)
            .collect();
        PureState::normalized(amps)
    }

    /// Samples `(c_0..c_{t-1})` and returns the collapsed state.
    pub fn stage_f(&self, state: &PureState, rng: &mut impl Rng) -> Result<(Vec<u32>, PureState)> {
        self.check_state(state)?;
        let n = self.n as u64;
        let mut coeffs = vec![0u32; self.t as usize];
        for c in coeffs.iter_mut().skip(1) {
            *c = rng.random_range(0..n) as u32;
        }
        let point_cdf = cumulative(state.amplitudes().iter().map(|a| a.norm_sqr()));
        let ancilla_cdf = cumulative(self.value_mag.iter().map(|a| a * a));
        let j = sample_cdf(&point_cdf, rng) as u32;
        let i = sample_cdf(&ancilla_cdf, rng) as u32;
        let field = crate::field::Gf2k::new(n.trailing_zeros())?;
        coeffs[0] = i ^ field.eval(&coeffs, j);
        let f_idx = coeffs.iter().rev().fold(0u64, |acc, &c| acc * n + c as u64);
        let collapsed = self.collapse(state, f_idx)?;
        Ok((coeffs, collapsed))
    }

    /// `|<chi_g|phi>|^2 / |G|` for every `g`.
    pub fn stage_g_probabilities(&self, state: &PureState) -> Result<Vec<f64>> {
        self.check_state(state)?;
        let count = self.g_count();
        (0..count)
            .map(|g| {
                let values = self.g.member_table(g)?;
                let overlap: Complex64 = values
                    .iter()
                    .zip(state.amplitudes())
                    .map(|(&v, a)| self.roots[v as usize].conj() * a)
                    .sum();
                Ok(overlap.norm_sqr() / count as f64)
            })
            .collect()
    }

    fn g_sampler(&self, state: &PureState) -> Result<GSampler> {
        let probs = self.stage_g_probabilities(state)?;
        let n = self.n as u64;
        let rest_count = self.g_count() / n;
        let mut rest_mass = Vec::with_capacity(rest_count as usize);
        let mut d1_cdf = Vec::with_capacity(self.g_count() as usize);
        for rest in 0..rest_count {
            let (low, high) = (rest % n, rest / n);
            let cdf = cumulative((0..n).map(|d1| probs[(low + n * (d1 + n * high)) as usize]));
            rest_mass.push(*cdf.last().expect("N >= 2"));
            d1_cdf.extend(cdf);
        }
        Ok(GSampler {
            rest_cdf: cumulative(rest_mass),
            d1_cdf,
        })
    }

    fn sample_g(&self, sampler: &GSampler, rng: &mut impl Rng) -> u64 {
        let n = self.n as u64;
        let rest = sample_cdf(&sampler.rest_cdf, rng) as u64;
        let start = (rest * n) as usize;
        let d1 = sample_cdf(&sampler.d1_cdf[start..start + self.n], rng) as u64;
        rest % n + n * (d1 + n * (rest / n))
    }

    /// Samples `(d_0..d_{2t-1})` by the Born rule.
    pub fn stage_g(&self, state: &PureState, rng: &mut impl Rng) -> Result<Vec<u32>> {
        let sampler = self.g_sampler(state)?;
        Ok(self.g_coefficients(self.sample_g(&sampler, rng)))
    }

    /// Both stages once.
    pub fn measure(&self, state: &PureState, rng: &mut impl Rng, keep_state: bool) -> Result<MeasurementOutcome> {
        let (f, collapsed) = self.stage_f(state, rng)?;
        let g = self.stage_g(&collapsed, rng)?;
        Ok(MeasurementOutcome {
            f,
            g,
            collapsed: keep_state.then(|| collapsed.to_pairs()),
        })
    }

    /// Exact `P(f) P(g | f)` indexed by `f_idx * |G| + g_idx`.
    pub fn composed_distribution(&self, state: &PureState) -> Result<Vec<f64>> {
        let pf = self.stage_f_probabilities(state)?;
        let mut out = Vec::with_capacity((self.f_count() * self.g_count()) as usize);
        for (f_idx, &p) in pf.iter().enumerate() {
            if p > 0.0 {
                let collapsed = self.collapse(state, f_idx as u64)?;
                out.extend(self.stage_g_probabilities(&collapsed)?.iter().map(|q| p * q));
            } else {
                out.extend(std::iter::repeat_n(0.0, self.g_count() as usize));
            }
        }
        Ok(out)
    }

    /// Histogram of `shots` two-stage measurements. Chunk `c` of shots uses
    /// ChaCha stream `c` under `seed`, so the result does not depend on the
    /// thread count.
    pub fn sample(&self, state: &PureState, shots: u64, seed: u64) -> Result<PovmHistogram> {
        self.check_state(state)?;
        let pf = self.stage_f_probabilities(state)?;
        let samplers: Vec<Option<GSampler>> = pf
            .iter()
            .enumerate()
            .map(|(f_idx, &p)| {
                if p > 0.0 {
                    self.g_sampler(&self.collapse(state, f_idx as u64)?).map(Some)
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<_>>()?;
        let n = self.n as u64;
        let field = crate::field::Gf2k::new(n.trailing_zeros())?;
        let point_cdf = cumulative(state.amplitudes().iter().map(|a| a.norm_sqr()));
        let ancilla_cdf = cumulative(self.value_mag.iter().map(|a| a * a));
        let outcomes = (self.f_count() * self.g_count()) as usize;
        let g_count = self.g_count();
        let counts = deterministic_reduce(
            shots,
            SHOTS_PER_CHUNK,
            |range| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(range.start / SHOTS_PER_CHUNK);
                let mut counts = vec![0u64; outcomes];
                let mut coeffs = vec![0u32; self.t as usize];
                for _ in range {
                    coeffs[0] = 0;
                    for c in coeffs.iter_mut().skip(1) {
                        *c = rng.random_range(0..n) as u32;
                    }
                    let j = sample_cdf(&point_cdf, &mut rng) as u32;
                    let i = sample_cdf(&ancilla_cdf, &mut rng) as u32;
                    coeffs[0] = i ^ field.eval(&coeffs, j);
                    let f_idx = coeffs.iter().rev().fold(0u64, |acc, &c| acc * n + c as u64);
                    let sampler = samplers[f_idx as usize]
                        .as_ref()
                        .expect("sampled f has positive probability");
                    let g_idx = self.sample_g(sampler, &mut rng);
                    counts[(f_idx * g_count + g_idx) as usize] += 1;
                }
                counts
            },
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        )
        .unwrap_or_else(|| vec![0; outcomes]);
        Ok(PovmHistogram {
            n,
            t: self.t,
            shots,
            seed,
            f_count: self.f_count(),
            g_count,
            counts,
        })
    }
}

/// Stage f for a dimension-`N` state with an explicit rounded rule.
pub fn stage_f(state: &PureState, t: u32, rule: &QuadratureRule, rng: &mut impl Rng) -> Result<(Vec<u32>, PureState)> {
    TwoStagePovm::with_rule(state.dim() as u64, t, rule.clone())?.stage_f(state, rng)
}

pub fn stage_g(state: &PureState, t: u32, rng: &mut impl Rng) -> Result<Vec<u32>> {
    TwoStagePovm::new(state.dim() as u64, t)?.stage_g(state, rng)
}

pub fn sample_povm(state: &PureState, n: u64, t: u32, shots: u64, seed: u64) -> Result<PovmHistogram> {
    TwoStagePovm::new(n, t)?.sample(state, shots, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(17)
    }

    #[test]
    fn stage_f_operators_resolve_identity() {
        for (n, t) in [(2u64, 1u32), (4, 2), (8, 2), (4, 3)] {
            let povm = TwoStagePovm::new(n, t).unwrap();
            let mut total = vec![0.0; n as usize];
            for f in 0..povm.f_count() {
                for (acc, e) in total.iter_mut().zip(povm.stage_f_operator(f).unwrap()) {
                    *acc += e;
                }
            }
            assert!(total.iter().all(|x| (x - 1.0).abs() < 1e-12), "{n} {t}: {total:?}");
            // Summing over c_0 alone gives I / N^{t-1}.
            for rest in 0..povm.f_count() / n {
                let mut partial = vec![0.0; n as usize];
                for c0 in 0..n {
                    for (acc, e) in partial.iter_mut().zip(povm.stage_f_operator(c0 + n * rest).unwrap()) {
                        *acc += e;
                    }
                }
                let expect = 1.0 / (n as f64).powi(t as i32 - 1);
                assert!(partial.iter().all(|x| (x - expect).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn basis_input_stays_put() {
        let povm = TwoStagePovm::new(8, 2).unwrap();
        let mut r = rng();
        let state = PureState::basis(8, 3);
        let mut level_hits = [0u64; 2];
        let draws = 20_000;
        for _ in 0..draws {
            let (c, collapsed) = povm.stage_f(&state, &mut r).unwrap();
            assert!((collapsed.amplitudes()[3].norm() - 1.0).abs() < 1e-15);
            let value = crate::field::Gf2k::new(3).unwrap().eval(&c, 3);
            let level = if povm.value_mag[value as usize] < 0.4 { 0 } else { 1 };
            level_hits[level] += 1;
        }
        // Level l of f(j) has probability q_l x_l^2 / E[S] given input |j>.
        let nodes = povm.rule.nodes();
        let (units, den) = povm.rule.units().unwrap();
        let inner_mass: f64 = nodes
            .iter()
            .zip(units)
            .filter(|(x, _)| x.abs() / 8f64.sqrt() < 0.4)
            .map(|(x, &u)| u as f64 / den as f64 * x * x)
            .sum::<f64>()
            / povm.mean_norm;
        let observed = level_hits[0] as f64 / draws as f64;
        let se = (inner_mass * (1.0 - inner_mass) / draws as f64).sqrt();
        assert!((observed - inner_mass).abs() < 5.0 * se, "{observed} vs {inner_mass}");
    }

    #[test]
    fn unrounded_rule_is_rejected() {
        let rule = haar_limit_rule(2).unwrap();
        assert!(matches!(TwoStagePovm::with_rule(4, 2, rule), Err(Error::RuleNotRounded(4))));
        let wrong = round_rule(&haar_limit_rule(2).unwrap(), 8).unwrap();
        assert!(matches!(TwoStagePovm::with_rule(4, 2, wrong), Err(Error::RuleNotRounded(4))));
    }

    #[test]
    fn two_point_phase_recovery() {
        // At N = 2 the vectors chi_g with fixed d_0 are orthogonal.
        let povm = TwoStagePovm::new(2, 1).unwrap();
        let mut r = rng();
        for d1 in 0..2u32 {
            let s = if d1 == 0 { 1.0 } else { -1.0 };
            let fourier = PureState::normalized(vec![Complex64::new(1.0, 0.0), Complex64::new(s, 0.0)]).unwrap();
            for _ in 0..50 {
                assert_eq!(povm.stage_g(&fourier, &mut r).unwrap()[1], d1);
            }
        }
    }

    #[test]
    fn uniform_input_gives_dc_when_higher_phases_vanish() {
        let povm = TwoStagePovm::new(4, 2).unwrap();
        let probs = povm.stage_g_probabilities(&PureState::uniform(4)).unwrap();
        for g in 0..povm.g_count() {
            let d = povm.g_coefficients(g);
            if d[2..].iter().all(|&x| x == 0) && d[1] != 0 {
                assert!(probs[g as usize] < 1e-15);
            }
        }
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_of_exact_counts() {
        let c = chi_square(&[25, 25, 50, 0], &[0.25, 0.25, 0.5, 0.0]).unwrap();
        assert_eq!(c.statistic, 0.0);
        assert_eq!(c.dof, 2);
        assert!((c.p_value - 1.0).abs() < 1e-12);
        assert_eq!(chi_square(&[1, 1, 1], &[0.5, 0.5, 0.0]).unwrap().p_value, 0.0);
    }

    #[test]
    fn sampling_is_deterministic() {
        let povm = TwoStagePovm::new(2, 1).unwrap();
        let a = povm.sample(&PureState::uniform(2), 1000, 5).unwrap();
        let b = povm.sample(&PureState::uniform(2), 1000, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts.iter().sum::<u64>(), 1000);
    }
}
