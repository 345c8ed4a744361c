//! Measuring how close an ensemble is to a (t,t)-design.
//!
//! Every monomial of degree at most `(t,t)` is `alpha^I (alpha^*)^J` for a
//! pair of index multisets with `|I|, |J| <= t`, so all ensemble moments sit
//! in the Hermitian matrix `G_{IJ} = sum_i p_i u_I u_J^*`, `u_I = prod_{i in I}
//! alpha_i`. The `|I| = |J| = t` block scaled by `sqrt(d_I d_J)` is the frame
//! operator in the orthonormal multiset basis of the symmetric subspace.
//!
//! Two routes fill `G`:
//!
//! * streamed: accumulate `p u u^*` over every element, with a deterministic
//!   chunked reduction;
//! * factored (product ensembles): `G_{IJ} = Mag(I + J) * Phase(e_I - e_J)`
//!   because element weights and magnitudes depend only on `f` and phases only
//!   on `g`. `Mag` averages `prod b^K` over `f`; `Phase` averages the phase
//!   character over `g`, one factor per phase family. An exactly k-wise
//!   independent family contributes `[e = 0 mod L]` whenever the exponent
//!   vector has at most `k` non-zero entries; anything else is enumerated.

use std::collections::HashMap;
use std::ops::Range;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::{DesignEnsemble, ProductEnsemble, Variant};
use crate::error::{Error, Result};
use crate::haar::{balanced_haar_value, multiset_weight, multisets, symmetric_dim, Monomial};
use crate::kwise::FamilyKind;
use crate::reduce::deterministic_reduce;

/// Tolerance for quantities that are exact in exact arithmetic.
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance for accumulated sums.
pub const SUM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Auto,
    Streamed,
    Factored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MonomialMode {
    Complete,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub route: Route,
    /// Largest symmetric-subspace dimension `M`.
    pub frame_budget: u64,
    /// Largest moment-matrix dimension for the streamed route.
    pub moment_budget: u64,
    /// Largest number of monomials checked; beyond it a fixed stride is used.
    pub monomial_budget: u64,
    /// Elements per reduction chunk.
    pub chunk: u64,
    /// Enumerate every phase family instead of using exact independence.
    pub enumerate_phases: bool,
    pub table: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            route: Route::Auto,
            frame_budget: 2048,
            moment_budget: 512,
            monomial_budget: 1 << 22,
            chunk: 4096,
            enumerate_phases: false,
            table: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonomialRow {
    pub monomial: String,
    pub measured: [f64; 2],
    pub haar: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub variant: Variant,
    #[serde(rename = "N")]
    pub n: u64,
    pub t: u32,
    pub size: u64,
    pub route: Route,
    pub mode: MonomialMode,
    pub measured_epsilon: f64,
    pub frame_dim: u64,
    /// Smallest and largest eigenvalue of the frame operator times `M`.
    pub scaled_eigenvalue_range: [f64; 2],
    pub max_unbalanced_residual: f64,
    pub max_unbalanced_odd_gap: f64,
    pub max_unbalanced_even_gap: f64,
    pub max_relative_balanced_deviation: f64,
    pub second_moment_residual: f64,
    pub off_support_residual: f64,
    pub trace: f64,
    pub weight_sum: f64,
    /// `t!` times the largest relative balanced deviation.
    pub theorem_bound: f64,
    /// Whether `measured_epsilon <= theorem_bound`; absent when the exact
    /// unbalanced and second-moment premises do not hold or do not apply.
    pub theorem_bound_holds: Option<bool>,
    /// Whether all monomial conditions hold at the claimed epsilon.
    pub conditions_hold: Option<bool>,
    pub monomials_checked: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<MonomialRow>>,
}

#[derive(Debug, Clone)]
pub struct FrameOperator {
    /// Multiset basis, lexicographic.
    pub basis: Vec<Vec<usize>>,
    pub matrix: DMatrix<Complex64>,
    pub trace: f64,
    pub off_support_residual: f64,
}

impl FrameOperator {
    /// Eigenvalues times `M`, ascending.
    pub fn scaled_eigenvalues(&self) -> Vec<f64> {
        let m = self.basis.len() as f64;
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .map(|l| l * m)
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn epsilon(&self) -> f64 {
        self.scaled_eigenvalues()
            .iter()
            .map(|l| (l - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

fn counts(n: usize, set: &[usize]) -> Vec<i32> {
    let mut c = vec![0i32; n];
    for &i in set {
        c[i] += 1;
    }
    c
}

fn resolve_route(ensemble: &DesignEnsemble, route: Route) -> Result<Route> {
    match (route, ensemble.product().is_some()) {
        (Route::Auto, true) => Ok(Route::Factored),
        (Route::Auto, false) => Ok(Route::Streamed),
        (Route::Factored, false) => Err(Error::InvalidParameter(
            "the factored route needs a product ensemble".into(),
        )),
        (r, _) => Ok(r),
    }
}

/// `sum_i p_i m(phi_i)`, streamed.
pub fn monomial_expectation(ensemble: &DesignEnsemble, m: &Monomial) -> Result<Complex64> {
    if m.max_index() >= ensemble.dim() {
        return Err(Error::OutOfRange {
            what: "monomial index",
            value: m.max_index() as u64,
            bound: ensemble.dim() as u64,
        });
    }
    let sum = deterministic_reduce(
        ensemble.size(),
        VerifyOptions::default().chunk,
        |range| {
            let mut acc = Complex64::new(0.0, 0.0);
            let res = ensemble.visit(range, |w, amps| acc += m.eval(amps) * w);
            res.map(|_| acc)
        },
        |a, b| Ok(a? + b?),
    );
    sum.unwrap_or(Ok(Complex64::new(0.0, 0.0)))
}

/// Index multisets of sizes `0..=t` with the prefix links used to build
/// `u_I` incrementally, and the index range of each size.
struct Layout {
    sets: Vec<Vec<usize>>,
    links: Vec<Option<(usize, usize)>>,
    blocks: Vec<Range<usize>>,
}

impl Layout {
    fn new(n: usize, t: usize) -> Self {
        let mut sets = Vec::new();
        let mut blocks = Vec::new();
        for s in 0..=t {
            let start = sets.len();
            sets.extend(multisets(n, s));
            blocks.push(start..sets.len());
        }
        let index: HashMap<&[usize], usize> = sets.iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect();
        let links = sets
            .iter()
            .map(|s| s.split_last().map(|(last, rest)| (index[rest], *last)))
            .collect();
        Layout { sets, links, blocks }
    }

    fn block_dim(&self, s: usize) -> usize {
        self.blocks[s].len()
    }
}

/// Streamed accumulation of the blocks `G_s` for the requested sizes, the
/// total weight, and the weight seen by a fixed antisymmetric test vector.
fn streamed_moments(ensemble: &DesignEnsemble, layout: &Layout, sizes: &[usize], t: usize, chunk: u64) -> Result<(Vec<DMatrix<Complex64>>, f64, f64)> {
    let offsets: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, &s| {
            let start = *acc;
            let m = layout.block_dim(s);
            *acc += m * (m + 1) / 2;
            Some(start)
        })
        .collect();
    let len: usize = sizes.iter().map(|&s| layout.block_dim(s) * (layout.block_dim(s) + 1) / 2).sum();
    let probe = AntisymmetricProbe::new(ensemble.dim(), t);
    let d = layout.sets.len();
    type Acc = (Vec<Complex64>, f64, f64);
    let result = deterministic_reduce(
        ensemble.size(),
        chunk,
        |range| -> Result<Acc> {
            let mut acc = vec![Complex64::new(0.0, 0.0); len];
            let mut total = 0.0;
            let mut off = 0.0;
            let mut u = vec![Complex64::new(1.0, 0.0); d];
            ensemble.visit(range, |w, amps| {
                for (k, link) in layout.links.iter().enumerate() {
                    if let Some((parent, last)) = link {
                        u[k] = u[*parent] * amps[*last];
                    }
                }
                for (&s, &offset) in sizes.iter().zip(&offsets) {
                    let block = &u[layout.blocks[s].clone()];
                    let mut pos = offset;
                    for i in 0..block.len() {
                        let wi = block[i] * w;
                        for uj in &block[i..] {
                            acc[pos] += wi * uj.conj();
                            pos += 1;
                        }
                    }
                }
                total += w;
                off += w * probe.overlap(amps);
            })?;
            Ok((acc, total, off))
        },
        |a, b| {
            let (mut a, b) = (a?, b?);
            a.0.iter_mut().zip(&b.0).for_each(|(x, y)| *x += y);
            Ok((a.0, a.1 + b.1, a.2 + b.2))
        },
    )
    .unwrap_or_else(|| Ok((vec![Complex64::new(0.0, 0.0); len], 0.0, 0.0)))?;
    let mut blocks = Vec::with_capacity(sizes.len());
    for (&s, &offset) in sizes.iter().zip(&offsets) {
        let m = layout.block_dim(s);
        let mut g = DMatrix::from_element(m, m, Complex64::new(0.0, 0.0));
        let mut pos = offset;
        for i in 0..m {
            for j in i..m {
                g[(i, j)] = result.0[pos];
                g[(j, i)] = result.0[pos].conj();
                pos += 1;
            }
        }
        blocks.push(g);
    }
    Ok((blocks, result.1, result.2))
}

/// `|<w|phi^{(x)t}>|^2` for `w = (a (x) b - b (x) a) (x) c^{(x)(t-2)}`, which
/// vanishes on the symmetric subspace.
struct AntisymmetricProbe {
    vectors: Option<[Vec<Complex64>; 3]>,
    t: usize,
}

impl AntisymmetricProbe {
    fn new(n: usize, t: usize) -> Self {
        if t < 2 || n < 2 {
            return AntisymmetricProbe { vectors: None, t };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut draw = || -> Vec<Complex64> {
            let v: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v.into_iter().map(|z| z / norm).collect()
        };
        AntisymmetricProbe {
            vectors: Some([draw(), draw(), draw()]),
            t,
        }
    }

    fn overlap(&self, phi: &[Complex64]) -> f64 {
        let Some([a, b, c]) = &self.vectors else {
            return 0.0;
        };
        let dot = |v: &[Complex64]| -> Complex64 { v.iter().zip(phi).map(|(x, y)| x.conj() * y).sum() };
        let (pa, pb, pc) = (dot(a), dot(b), dot(c));
        let amp = (pa * pb - pb * pa) * pc.powu(self.t as u32 - 2);
        amp.norm_sqr()
    }
}

/// Exact-moment evaluator for product ensembles.
struct Factored<'a> {
    ensemble: &'a ProductEnsemble,
    n: usize,
    profiles: Vec<(f64, Vec<f64>)>,
    component_tables: Vec<Option<Vec<u32>>>,
    enumerate: bool,
    mag_cache: HashMap<Vec<usize>, f64>,
    phase_cache: HashMap<(usize, Vec<u32>), Complex64>,
}

/// Elements visited by the antisymmetric probe in the factored route.
const PROBE_SAMPLES: u64 = 4096;
/// Largest `members * N` table enumerated for one phase family.
const PHASE_ENUMERATION_LIMIT: u64 = 1 << 26;

impl<'a> Factored<'a> {
    fn new(ensemble: &'a ProductEnsemble, enumerate: bool) -> Result<Self> {
        let n = ensemble.dim();
        let count = ensemble.f_count();
        if count.saturating_mul(n as u64) > PHASE_ENUMERATION_LIMIT {
            return Err(Error::BudgetExceeded {
                needed: count as u128 * n as u128,
                budget: PHASE_ENUMERATION_LIMIT as u128,
            });
        }
        let profiles = (0..count)
            .map(|f| ensemble.f_profile(f).map(|p| (p.weight, p.mags)))
            .collect::<Result<_>>()?;
        Ok(Factored {
            ensemble,
            n,
            profiles,
            component_tables: vec![None; ensemble.components().len()],
            enumerate,
            mag_cache: HashMap::new(),
            phase_cache: HashMap::new(),
        })
    }

    /// `E_f[weight_f prod_v b_v^{K_v}]` for the multiset `K`.
    fn magnitude(&mut self, joint: Vec<usize>) -> f64 {
        if let Some(v) = self.mag_cache.get(&joint) {
            return *v;
        }
        let mut total = 0.0;
        for (w, mags) in &self.profiles {
            let mut prod = *w;
            for &i in &joint {
                prod *= mags[i];
            }
            total += prod;
        }
        let value = total / self.profiles.len() as f64;
        self.mag_cache.insert(joint, value);
        value
    }

    fn phase(&mut self, gaps: &[i32]) -> Result<Complex64> {
        let mut total = Complex64::new(1.0, 0.0);
        for c in 0..self.ensemble.components().len() {
            let modulus = self.ensemble.components()[c].modulus;
            let reduced: Vec<u32> = gaps.iter().map(|e| e.rem_euclid(modulus as i32) as u32).collect();
            total *= self.component_phase(c, reduced)?;
            if total == Complex64::new(0.0, 0.0) {
                break;
            }
        }
        Ok(total)
    }

    fn component_phase(&mut self, c: usize, reduced: Vec<u32>) -> Result<Complex64> {
        let component = &self.ensemble.components()[c];
        let support = reduced.iter().filter(|&&e| e != 0).count();
        if support == 0 {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let family = &component.family;
        if !self.enumerate
            && family.kind() != FamilyKind::DeltaDependent
            && family.range_size() == component.modulus
            && support as u32 <= family.order()
        {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let key = (c, reduced);
        if let Some(v) = self.phase_cache.get(&key) {
            return Ok(*v);
        }
        if self.component_tables[c].is_none() {
            let count = family.member_count();
            if count.saturating_mul(self.n as u64) > PHASE_ENUMERATION_LIMIT {
                return Err(Error::BudgetExceeded {
                    needed: count as u128 * self.n as u128,
                    budget: PHASE_ENUMERATION_LIMIT as u128,
                });
            }
            let mut table = Vec::with_capacity(count as usize * self.n);
            for i in 0..count {
                table.extend(family.member_table(i)?);
            }
            self.component_tables[c] = Some(table);
        }
        let table = self.component_tables[c].as_ref().expect("filled above");
        let modulus = component.modulus;
        let active: Vec<(usize, u64)> = key
            .1
            .iter()
            .enumerate()
            .filter(|(_, &e)| e != 0)
            .map(|(v, &e)| (v, e as u64))
            .collect();
        let mut hist = vec![0u64; modulus as usize];
        for row in table.chunks_exact(self.n) {
            let r = active.iter().map(|&(v, e)| e * row[v] as u64).sum::<u64>() % modulus;
            hist[r as usize] += 1;
        }
        let members = (table.len() / self.n) as f64;
        let value: Complex64 = hist
            .iter()
            .enumerate()
            .map(|(r, &h)| {
                Complex64::from_polar(h as f64 / members, 2.0 * std::f64::consts::PI * r as f64 / modulus as f64)
            })
            .sum();
        self.phase_cache.insert(key, value);
        Ok(value)
    }

    fn entry(&mut self, a: &[usize], b: &[usize]) -> Result<Complex64> {
        let ca = counts(self.n, a);
        let cb = counts(self.n, b);
        let gaps: Vec<i32> = ca.iter().zip(&cb).map(|(x, y)| x - y).collect();
        let phase = self.phase(&gaps)?;
        if phase == Complex64::new(0.0, 0.0) {
            return Ok(phase);
        }
        let mut joint: Vec<usize> = a.iter().chain(b).copied().collect();
        joint.sort_unstable();
        Ok(phase * self.magnitude(joint))
    }

    /// Probe residual on a strided subsample of at most `samples` elements.
    fn probe(&self, t: usize, samples: u64) -> Result<f64> {
        let probe = AntisymmetricProbe::new(self.n, t);
        let size = self.ensemble.size();
        let stride = (size / samples.max(1)).max(1);
        let mut total = 0.0;
        let mut weight = 0.0;
        let mut index = 0;
        while index < size {
            self.ensemble.visit(index..index + 1, |w, amps| {
                total += w * probe.overlap(amps);
                weight += w;
            })?;
            index += stride;
        }
        Ok(if weight > 0.0 { total / weight } else { 0.0 })
    }
}

fn check_frame_budget(n: usize, t: u32, opts: &VerifyOptions) -> Result<u64> {
    let m = symmetric_dim(n as u64, t);
    if m > opts.frame_budget as u128 {
        return Err(Error::BudgetExceeded {
            needed: m,
            budget: opts.frame_budget as u128,
        });
    }
    Ok(m as u64)
}

fn scale_frame(basis: &[Vec<usize>], mut block: impl FnMut(usize, usize) -> Result<Complex64>) -> Result<DMatrix<Complex64>> {
    let m = basis.len();
    let sqrt_d: Vec<f64> = basis.iter().map(|s| (multiset_weight(s) as f64).sqrt()).collect();
    let mut frame = DMatrix::from_element(m, m, Complex64::new(0.0, 0.0));
    for i in 0..m {
        for j in i..m {
            let v = block(i, j)? * (sqrt_d[i] * sqrt_d[j]);
            frame[(i, j)] = v;
            frame[(j, i)] = v.conj();
        }
    }
    Ok(frame)
}

fn frame_trace(frame: &DMatrix<Complex64>) -> f64 {
    (0..frame.nrows()).map(|i| frame[(i, i)].re).sum()
}

/// The t-fold frame operator in the multiset basis.
pub fn frame_operator(ensemble: &DesignEnsemble, t: u32, opts: &VerifyOptions) -> Result<FrameOperator> {
    let n = ensemble.dim();
    check_frame_budget(n, t, opts)?;
    let basis = multisets(n, t as usize);
    let (matrix, probe) = match resolve_route(ensemble, opts.route)? {
        Route::Factored => {
            let mut fac = Factored::new(ensemble.product().expect("checked"), opts.enumerate_phases)?;
            let matrix = scale_frame(&basis, |i, j| fac.entry(&basis[i], &basis[j]))?;
            (matrix, fac.probe(t as usize, PROBE_SAMPLES)?)
        }
        _ => {
            let layout = Layout::new(n, t as usize);
            let (g, _, probe) = streamed_moments(ensemble, &layout, &[t as usize], t as usize, opts.chunk)?;
            (scale_frame(&basis, |i, j| Ok(g[0][(i, j)]))?, probe)
        }
    };
    let trace = frame_trace(&matrix);
    Ok(FrameOperator {
        basis,
        trace,
        off_support_residual: (1.0 - trace).abs() + probe,
        matrix,
    })
}

/// `max |lambda M - 1|` over the frame-operator spectrum.
pub fn approx_epsilon(ensemble: &DesignEnsemble, t: u32, opts: &VerifyOptions) -> Result<f64> {
    Ok(frame_operator(ensemble, t, opts)?.epsilon())
}

fn factorial(t: u32) -> f64 {
    (1..=t).map(f64::from).product()
}

/// All moment conditions up to degree `(t,t)` together with the frame
/// operator. Only monomials with equal plain and conjugate degree are
/// checked: the others change under a global phase of the state, so no
/// ensemble of states can constrain them. `claimed` is an epsilon to test
/// the balanced condition against.
pub fn check_conditions(ensemble: &DesignEnsemble, t: u32, claimed: Option<f64>, opts: &VerifyOptions) -> Result<VerificationReport> {
    let n = ensemble.dim();
    let frame_dim = check_frame_budget(n, t, opts)?;
    let route = resolve_route(ensemble, opts.route)?;
    let layout = Layout::new(n, t as usize);
    let sizes: Vec<usize> = (1..=t as usize).collect();
    let pairs: u64 = sizes
        .iter()
        .map(|&s| (layout.block_dim(s) * (layout.block_dim(s) + 1) / 2) as u64)
        .sum();
    let stride = pairs.div_ceil(opts.monomial_budget.max(1)).max(1);
    let mode = if stride == 1 {
        MonomialMode::Complete
    } else {
        MonomialMode::Sampled
    };

    let mut dense = Vec::new();
    let mut factored = None;
    let weight_sum;
    let probe;
    match route {
        Route::Factored => {
            let mut fac = Factored::new(ensemble.product().expect("checked"), opts.enumerate_phases)?;
            weight_sum = fac.magnitude(Vec::new());
            probe = fac.probe(t as usize, PROBE_SAMPLES)?;
            factored = Some(fac);
        }
        _ => {
            let dim = layout.sets.len() as u64 - 1;
            if dim > opts.moment_budget {
                return Err(Error::BudgetExceeded {
                    needed: dim as u128,
                    budget: opts.moment_budget as u128,
                });
            }
            let (blocks, total, p) = streamed_moments(ensemble, &layout, &sizes, t as usize, opts.chunk)?;
            dense = blocks;
            weight_sum = total;
            probe = p;
        }
    }
    // Moment of the pair (i, j) inside block s.
    let mut moment = |s: usize, i: usize, j: usize| -> Result<Complex64> {
        match &mut factored {
            Some(f) => {
                let base = layout.blocks[s].start;
                f.entry(&layout.sets[base + i], &layout.sets[base + j])
            }
            None => Ok(dense[s - 1][(i, j)]),
        }
    };

    let mut odd: f64 = 0.0;
    let mut even: f64 = 0.0;
    let mut balanced: f64 = 0.0;
    let mut second: f64 = 0.0;
    let mut checked = 0u64;
    let mut table = opts.table.then(Vec::new);
    let mut pair = 0u64;
    for &s in &sizes {
        let block = &layout.sets[layout.blocks[s].clone()];
        for i in 0..block.len() {
            for j in i..block.len() {
                let sampled = pair.is_multiple_of(stride);
                pair += 1;
                if !sampled && !(i == j && s == 1) {
                    continue;
                }
                let value = moment(s, i, j)?;
                checked += 1;
                let (haar, residual) = if i == j {
                    let c: Vec<u32> = counts(n, &block[i]).iter().filter(|&&c| c > 0).map(|&c| c as u32).collect();
                    let h = balanced_haar_value(n as u64, &c).to_f64().unwrap_or(0.0);
                    let abs = (value - h).norm();
                    balanced = balanced.max(abs / h);
                    if s == 1 {
                        second = second.max(abs);
                    }
                    (h, abs)
                } else {
                    let r = value.norm();
                    let odd_gap = counts(n, &block[i])
                        .iter()
                        .zip(counts(n, &block[j]))
                        .any(|(a, b)| (a - b) % 2 != 0);
                    if odd_gap {
                        odd = odd.max(r);
                    } else {
                        even = even.max(r);
                    }
                    (0.0, r)
                };
                if let Some(rows) = table.as_mut() {
                    rows.push(MonomialRow {
                        monomial: Monomial::from_multisets(&block[i], &block[j])
                            .map(|m| m.to_string())
                            .unwrap_or_default(),
                        measured: [value.re, value.im],
                        haar,
                        residual,
                    });
                }
            }
        }
    }

    let basis: Vec<Vec<usize>> = layout.sets[layout.blocks[t as usize].clone()].to_vec();
    let frame = scale_frame(&basis, |i, j| moment(t as usize, i, j))?;
    let trace = frame_trace(&frame);
    let op = FrameOperator {
        basis,
        trace,
        off_support_residual: (1.0 - trace).abs() + probe,
        matrix: frame,
    };
    let ev = op.scaled_eigenvalues();
    let epsilon = ev.iter().map(|l| (l - 1.0).abs()).fold(0.0, f64::max);
    let unbalanced = odd.max(even);
    let theorem_bound = factorial(t) * balanced;
    let premise = ensemble.variant() != Variant::Improved && unbalanced <= SUM_TOL && second <= SUM_TOL;
    Ok(VerificationReport {
        variant: ensemble.variant(),
        n: n as u64,
        t,
        size: ensemble.size(),
        route,
        mode,
        measured_epsilon: epsilon,
        frame_dim,
        scaled_eigenvalue_range: [ev[0], ev[ev.len() - 1]],
        max_unbalanced_residual: unbalanced,
        max_unbalanced_odd_gap: odd,
        max_unbalanced_even_gap: even,
        max_relative_balanced_deviation: balanced,
        second_moment_residual: second,
        off_support_residual: op.off_support_residual,
        trace,
        weight_sum,
        theorem_bound,
        theorem_bound_holds: premise.then_some(epsilon <= theorem_bound + SUM_TOL),
        conditions_hold: claimed.map(|eps| unbalanced <= SUM_TOL && second <= SUM_TOL && balanced <= eps),
        monomials_checked: checked,
        table,
    })
}

/// `check_conditions` at the ensemble's own order.
pub fn verify(ensemble: &DesignEnsemble, opts: &VerifyOptions) -> Result<VerificationReport> {
    check_conditions(ensemble, ensemble.order(), ensemble.epsilon(), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{build_design, build_mub_design};
    use crate::states::PureState;

    fn streamed() -> VerifyOptions {
        VerifyOptions {
            route: Route::Streamed,
            ..VerifyOptions::default()
        }
    }

    #[test]
    fn single_state_is_extreme() {
        for n in [2usize, 3, 5] {
            let e = DesignEnsemble::custom(n, 1, vec![1.0], vec![PureState::basis(n, 0)]).unwrap();
            let eps = approx_epsilon(&e, 1, &VerifyOptions::default()).unwrap();
            assert!((eps - (n as f64 - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn mub_is_an_exact_two_design() {
        let e = build_mub_design(5).unwrap();
        let report = verify(&e, &VerifyOptions::default()).unwrap();
        assert!(report.measured_epsilon < 1e-10);
        assert!(report.max_unbalanced_residual < 1e-10);
        assert!(report.max_relative_balanced_deviation < 1e-10);
        assert_eq!(report.theorem_bound_holds, Some(true));
        let m: Monomial = "1:1;2:1".parse().unwrap();
        let v = monomial_expectation(&e, &m).unwrap();
        assert!((v - 1.0 / 30.0).norm() < 1e-10);
    }

    #[test]
    fn main_second_moments_and_unbalanced_vanish() {
        let e = build_design(4, 2).unwrap();
        let m: Monomial = "0:1".parse().unwrap();
        assert!((monomial_expectation(&e, &m).unwrap() - 0.25).norm() < 1e-12);
        let m: Monomial = "0:1,0;1:0,1".parse().unwrap();
        assert!(monomial_expectation(&e, &m).unwrap().norm() < 1e-12);
    }

    #[test]
    fn routes_agree_on_small_main_ensembles() {
        for (n, t) in [(2u64, 1u32), (4, 1), (4, 2), (2, 2)] {
            let e = build_design(n, t).unwrap();
            let s = check_conditions(&e, t, None, &streamed()).unwrap();
            let f = check_conditions(&e, t, None, &VerifyOptions::default()).unwrap();
            let fe = check_conditions(
                &e,
                t,
                None,
                &VerifyOptions {
                    enumerate_phases: true,
                    ..VerifyOptions::default()
                },
            )
            .unwrap();
            for r in [&f, &fe] {
                assert!((s.measured_epsilon - r.measured_epsilon).abs() < 1e-10, "n={n} t={t}");
                assert!((s.max_relative_balanced_deviation - r.max_relative_balanced_deviation).abs() < 1e-10);
                assert!((s.max_unbalanced_residual - r.max_unbalanced_residual).abs() < 1e-10);
            }
            assert_eq!(s.monomials_checked, f.monomials_checked);
        }
    }

    #[test]
    fn frame_trace_is_one() {
        let e = build_design(4, 2).unwrap();
        for opts in [streamed(), VerifyOptions::default()] {
            let op = frame_operator(&e, 2, &opts).unwrap();
            assert_eq!(op.basis.len(), 10);
            assert!((op.trace - 1.0).abs() < 1e-10);
            assert!(op.off_support_residual < 1e-12);
        }
    }

    #[test]
    fn budgets_are_enforced() {
        let e = build_design(4, 2).unwrap();
        let opts = VerifyOptions {
            frame_budget: 5,
            ..VerifyOptions::default()
        };
        assert!(matches!(frame_operator(&e, 2, &opts), Err(Error::BudgetExceeded { .. })));
        let opts = VerifyOptions {
            monomial_budget: 10,
            ..VerifyOptions::default()
        };
        let r = check_conditions(&e, 2, None, &opts).unwrap();
        assert_eq!(r.mode, MonomialMode::Sampled);
    }

    #[test]
    fn table_lists_checked_monomials() {
        let e = build_mub_design(2).unwrap();
        let r = check_conditions(
            &e,
            2,
            Some(1e-9),
            &VerifyOptions {
                table: true,
                ..VerifyOptions::default()
            },
        )
        .unwrap();
        assert_eq!(r.table.as_ref().unwrap().len() as u64, r.monomials_checked);
        assert_eq!(r.conditions_hold, Some(true));
    }
}
