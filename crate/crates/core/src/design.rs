//! Weighted ensembles of pure states: the main and improved product
//! constructions, the mutually-unbiased-bases (2,2)-design, and explicit
//! lists.
//!
//! A product ensemble is indexed by a magnitude function `f` and a phase
//! function `g`. Point `j` receives magnitude `|x_l| / sqrt(N)` where level
//! `l` is read off `f(j)` through the cumulative weight units of a rounded
//! quadrature rule, and phase `omega_L^{r_g(j)}`. The state is the
//! normalised vector and its weight is proportional to its squared norm
//! `S_f`. Elements are regenerated from their index on demand.

use std::f64::consts::PI;
use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kwise::{
    binary_exact_family, delta_family, exact_family, exact_polynomial_family,
    pairwise_affine_family, FamilyKind, FamilyParams, FunctionFamily,
};
use crate::quadrature::{haar_limit_rule, round_rule, QuadratureRule};
use crate::states::PureState;

/// Largest phase-residue table kept in memory, in entries.
const PHASE_TABLE_LIMIT: u64 = 1 << 23;
/// Largest `|F| * N` enumerated to normalise a non-exact magnitude family.
const NORM_ENUMERATION_LIMIT: u64 = 1 << 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Main,
    Improved,
    Mub,
    CustomList,
}

pub const MAIN_PHASES: &str = "exp(2 pi i g(j) / N)";
pub const IMPROVED_PHASES: &str = "(-1)^g1(j) exp(2 pi i g2(j) / m)";

/// A phase function family with values read modulo `modulus`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseComponent {
    pub family: FunctionFamily,
    pub modulus: u64,
}

/// Magnitude data of one `f`: `weight = S_f / E[S_f]` and the normalised
/// magnitudes `b_j = a_{f,j} / sqrt(S_f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FProfile {
    pub weight: f64,
    pub mags: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ProductEnsemble {
    n: usize,
    rule: QuadratureRule,
    f: FunctionFamily,
    level_of_value: Vec<u16>,
    level_mag: Vec<f64>,
    mean_norm: f64,
    components: Vec<PhaseComponent>,
    modulus: u64,
    phase_count: u64,
    roots: Vec<Complex64>,
    phase_table: Option<Vec<u32>>,
}

impl ProductEnsemble {
    /// `rule` must be rounded to multiples of `1/m` where `m` is the range
    /// of `f`. Phase moduli must be powers of two.
    pub fn new(n: usize, rule: QuadratureRule, f: FunctionFamily, components: Vec<PhaseComponent>) -> Result<Self> {
        let m_f = f.range_size();
        let Some((units, den)) = rule.units() else {
            return Err(Error::RuleNotRounded(m_f));
        };
        if den != m_f {
            return Err(Error::RuleNotRounded(m_f));
        }
        if f.domain_size() != n as u64 {
            return Err(Error::InvalidParameter("magnitude family has the wrong domain".into()));
        }
        if components.is_empty() {
            return Err(Error::InvalidParameter("at least one phase family is needed".into()));
        }
        let mut level_of_value = Vec::with_capacity(m_f as usize);
        for (l, &u) in units.iter().enumerate() {
            level_of_value.extend(std::iter::repeat_n(l as u16, u as usize));
        }
        let level_mag: Vec<f64> = rule.nodes().iter().map(|x| x.abs() / (n as f64).sqrt()).collect();
        let mut modulus = 1u64;
        let mut phase_count = 1u64;
        for c in &components {
            if c.family.domain_size() != n as u64 {
                return Err(Error::InvalidParameter("phase family has the wrong domain".into()));
            }
            if !c.modulus.is_power_of_two() || c.family.range_size() > c.modulus {
                return Err(Error::InvalidParameter(format!("bad phase modulus {}", c.modulus)));
            }
            modulus = modulus.max(c.modulus);
            phase_count = phase_count
                .checked_mul(c.family.member_count())
                .ok_or_else(|| Error::InvalidParameter("phase family too large".into()))?;
        }
        f.member_count()
            .checked_mul(phase_count)
            .filter(|s| *s < (1u64 << 62))
            .ok_or_else(|| Error::InvalidParameter("ensemble too large to index".into()))?;
        let roots = (0..modulus)
            .map(|r| Complex64::from_polar(1.0, 2.0 * PI * r as f64 / modulus as f64))
            .collect();
        let mut ensemble = ProductEnsemble {
            n,
            rule,
            f,
            level_of_value,
            level_mag,
            mean_norm: 1.0,
            components,
            modulus,
            phase_count,
            roots,
            phase_table: None,
        };
        ensemble.mean_norm = ensemble.compute_mean_norm()?;
        if phase_count.saturating_mul(n as u64) <= PHASE_TABLE_LIMIT {
            let mut table = Vec::with_capacity(phase_count as usize * n);
            for p in 0..phase_count {
                table.extend(ensemble.compute_residues(p)?);
            }
            ensemble.phase_table = Some(table);
        }
        Ok(ensemble)
    }

    /// `E_f[S_f]`: analytic when every value of `f(j)` is uniform, by
    /// enumeration otherwise.
    fn compute_mean_norm(&self) -> Result<f64> {
        if self.f.kind() != FamilyKind::DeltaDependent {
            return Ok(self.rule.moment(2));
        }
        let count = self.f.member_count();
        if count.saturating_mul(self.n as u64) > NORM_ENUMERATION_LIMIT {
            return Err(Error::BudgetExceeded {
                needed: count as u128 * self.n as u128,
                budget: NORM_ENUMERATION_LIMIT as u128,
            });
        }
        let mut total = 0.0;
        for i in 0..count {
            total += self.raw_norm(&self.f.member_table(i)?);
        }
        Ok(total / count as f64)
    }

    fn raw_norm(&self, values: &[u32]) -> f64 {
        values
            .iter()
            .map(|&v| self.level_mag[self.level_of_value[v as usize] as usize].powi(2))
            .sum()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn magnitude_family(&self) -> &FunctionFamily {
        &self.f
    }

    pub fn components(&self) -> &[PhaseComponent] {
        &self.components
    }

    pub fn f_count(&self) -> u64 {
        self.f.member_count()
    }

    pub fn phase_count(&self) -> u64 {
        self.phase_count
    }

    pub fn size(&self) -> u64 {
        self.f_count() * self.phase_count
    }

    /// Modulus `L` of the combined phase residues.
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn mean_norm(&self) -> f64 {
        self.mean_norm
    }

    /// Magnitude `a = |x_l| / sqrt(N)` assigned to magnitude value `v`.
    pub fn value_magnitude(&self, v: u32) -> f64 {
        self.level_mag[self.level_of_value[v as usize] as usize]
    }

    /// Level index of each point under member `f_idx`.
    pub fn levels(&self, f_idx: u64) -> Result<Vec<usize>> {
        Ok(self
            .f
            .member_table(f_idx)?
            .iter()
            .map(|&v| self.level_of_value[v as usize] as usize)
            .collect())
    }

    pub fn f_profile(&self, f_idx: u64) -> Result<FProfile> {
        let mags: Vec<f64> = self.levels(f_idx)?.iter().map(|&l| self.level_mag[l]).collect();
        let norm: f64 = mags.iter().map(|a| a * a).sum();
        let scale = 1.0 / norm.sqrt();
        Ok(FProfile {
            weight: norm / self.mean_norm,
            mags: mags.iter().map(|a| a * scale).collect(),
        })
    }

    fn compute_residues(&self, p_idx: u64) -> Result<Vec<u32>> {
        let mut residues = vec![0u64; self.n];
        let mut rest = p_idx;
        for c in self.components.iter().rev() {
            let count = c.family.member_count();
            let member = c.family.member(rest % count)?;
            rest /= count;
            let scale = self.modulus / c.modulus;
            for (j, r) in residues.iter_mut().enumerate() {
                *r += member.eval(j as u32) as u64 * scale;
            }
        }
        Ok(residues.iter().map(|r| (r % self.modulus) as u32).collect())
    }

    /// Phase exponents `r_g(j)` modulo `L` for phase index `p_idx`.
    pub fn phase_residues(&self, p_idx: u64) -> Result<Vec<u32>> {
        if p_idx >= self.phase_count {
            return Err(Error::OutOfRange {
                what: "phase index",
                value: p_idx,
                bound: self.phase_count,
            });
        }
        match &self.phase_table {
            Some(t) => {
                let start = p_idx as usize * self.n;
                Ok(t[start..start + self.n].to_vec())
            }
            None => self.compute_residues(p_idx),
        }
    }

    pub fn root(&self, residue: u32) -> Complex64 {
        self.roots[residue as usize]
    }

    fn fill_amplitudes(&self, profile: &FProfile, p_idx: u64, out: &mut [Complex64]) -> Result<()> {
        match &self.phase_table {
            Some(t) => {
                let start = p_idx as usize * self.n;
                for (j, o) in out.iter_mut().enumerate() {
                    *o = self.roots[t[start + j] as usize] * profile.mags[j];
                }
            }
            None => {
                let residues = self.compute_residues(p_idx)?;
                for (j, o) in out.iter_mut().enumerate() {
                    *o = self.roots[residues[j] as usize] * profile.mags[j];
                }
            }
        }
        Ok(())
    }

    /// Visits elements `range` in index order as `(weight, amplitudes)`.
    pub fn visit<F: FnMut(f64, &[Complex64])>(&self, range: Range<u64>, mut visit: F) -> Result<()> {
        let total = (self.f_count() * self.phase_count) as f64;
        let mut amps = vec![Complex64::new(0.0, 0.0); self.n];
        let mut current: Option<(u64, FProfile)> = None;
        for index in range {
            let f_idx = index / self.phase_count;
            if current.as_ref().map(|c| c.0) != Some(f_idx) {
                current = Some((f_idx, self.f_profile(f_idx)?));
            }
            let profile = &current.as_ref().expect("set above").1;
            self.fill_amplitudes(profile, index % self.phase_count, &mut amps)?;
            visit(profile.weight / total, &amps);
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Body {
    Product(Box<ProductEnsemble>),
    Mub,
    List {
        weights: Vec<f64>,
        states: Vec<Vec<Complex64>>,
    },
}

#[derive(Debug, Clone)]
pub struct DesignEnsemble {
    variant: Variant,
    n: usize,
    t: u32,
    epsilon: Option<f64>,
    body: Body,
}

fn is_power_of_two(n: u64) -> bool {
    n >= 2 && n.is_power_of_two()
}

pub fn is_prime(n: u64) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
}

/// The main construction: `f` exactly t-wise and `g` exactly 2t-wise
/// independent polynomials over `GF(N)`, magnitudes from the order-t rule
/// rounded to `1/N`, phases `exp(2 pi i g(j) / N)`. Size `N^(3t)`.
pub fn build_design(n: u64, t: u32) -> Result<DesignEnsemble> {
    if !is_power_of_two(n) {
        return Err(Error::NotPowerOfTwo(n));
    }
    if t == 0 {
        return Err(Error::InvalidParameter("order t must be >= 1".into()));
    }
    let rule = round_rule(&haar_limit_rule(t)?, n)?;
    let f = exact_family(n, t)?;
    let g = exact_family(n, 2 * t)?;
    let product = ProductEnsemble::new(n as usize, rule, f, vec![PhaseComponent { family: g, modulus: n }])?;
    Ok(DesignEnsemble {
        variant: Variant::Main,
        n: n as usize,
        t,
        epsilon: None,
        body: Body::Product(Box::new(product)),
    })
}

/// Smallest available family `{0..N-1} -> {0..m-1}` that is at least
/// k-wise δ-dependent; exact constructions win ties.
pub fn smallest_family(n: u64, m: u64, k: u32, delta: f64) -> Result<FunctionFamily> {
    let mut candidates = vec![exact_polynomial_family(n, m, k)];
    if k <= 2 {
        candidates.push(pairwise_affine_family(n, m));
    }
    candidates.push(delta_family(n, m, k, delta));
    let mut best: Option<FunctionFamily> = None;
    let mut first_error = None;
    for c in candidates {
        match c {
            Ok(fam) => {
                if best.as_ref().is_none_or(|b| fam.member_count() < b.member_count()) {
                    best = Some(fam);
                }
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_error.expect("some candidate failed"))
}

/// Magnitude range used by the improved construction.
pub fn improved_magnitude_range(epsilon: f64) -> u64 {
    ((2.0 / epsilon).ceil() as u64).next_power_of_two().max(2)
}

/// Range of the second phase function: the smallest power of two above `t`.
pub fn improved_phase_range(t: u32) -> u64 {
    (t as u64 + 1).next_power_of_two().max(2)
}

/// The improved construction: `f` t-wise δ-dependent into `{0..m_f-1}`,
/// `g1` exactly 2t-wise independent bits, `g2` t-wise δ-dependent into
/// `{0..m2-1}`, phases `(-1)^g1 exp(2 pi i g2 / m2)`, `δ = ε/8`.
pub fn build_design_improved(n: u64, t: u32, epsilon: f64) -> Result<DesignEnsemble> {
    if !is_power_of_two(n) {
        return Err(Error::NotPowerOfTwo(n));
    }
    if t == 0 {
        return Err(Error::InvalidParameter("order t must be >= 1".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0,1), got {epsilon}")));
    }
    let delta = epsilon / 8.0;
    let m_f = improved_magnitude_range(epsilon);
    let m2 = improved_phase_range(t);
    let rule = round_rule(&haar_limit_rule(t)?, m_f)?;
    let f = smallest_family(n, m_f, t, delta)?;
    let g1 = binary_exact_family(n, 2 * t)?;
    let g2 = smallest_family(n, m2, t, delta)?;
    let product = ProductEnsemble::new(
        n as usize,
        rule,
        f,
        vec![
            PhaseComponent { family: g1, modulus: 2 },
            PhaseComponent { family: g2, modulus: m2 },
        ],
    )?;
    Ok(DesignEnsemble {
        variant: Variant::Improved,
        n: n as usize,
        t,
        epsilon: Some(epsilon),
        body: Body::Product(Box::new(product)),
    })
}

/// `N+1` mutually unbiased bases with weights `1/(N(N+1))`: the
/// computational basis and `omega^(a j^2 + b j) / sqrt(N)` for odd primes,
/// the Pauli eigenbases for `N = 2`. Element `(basis, vector)` has index
/// `basis * N + vector`.
pub fn build_mub_design(n: u64) -> Result<DesignEnsemble> {
    if !is_prime(n) {
        return Err(Error::NotPrime(n));
    }
    Ok(DesignEnsemble {
        variant: Variant::Mub,
        n: n as usize,
        t: 2,
        epsilon: None,
        body: Body::Mub,
    })
}

pub fn mub_state(n: usize, basis: usize, vector: usize) -> Vec<Complex64> {
    let mut amps = vec![Complex64::new(0.0, 0.0); n];
    if basis == 0 {
        amps[vector] = Complex64::new(1.0, 0.0);
        return amps;
    }
    let scale = 1.0 / (n as f64).sqrt();
    if n == 2 {
        let sign = if vector == 0 { 1.0 } else { -1.0 };
        amps[0] = Complex64::new(scale, 0.0);
        amps[1] = if basis == 1 {
            Complex64::new(sign * scale, 0.0)
        } else {
            Complex64::new(0.0, sign * scale)
        };
        return amps;
    }
    let a = (basis - 1) as u64;
    let b = vector as u64;
    let nn = n as u64;
    for (j, amp) in amps.iter_mut().enumerate() {
        let j = j as u64;
        let exponent = (a * j % nn * j + b * j) % nn;
        *amp = Complex64::from_polar(scale, 2.0 * PI * exponent as f64 / n as f64);
    }
    amps
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListElement {
    pub weight: f64,
    pub amplitudes: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Families {
    pub f: FamilyParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<FamilyParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g1: Option<FamilyParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g2: Option<FamilyParams>,
}

/// Serialised ensemble: parameters only, never the states (except for
/// explicit lists).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub variant: Variant,
    #[serde(rename = "N")]
    pub n: u64,
    pub t: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_convention: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<QuadratureRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub families: Option<Families>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elements: Option<Vec<ListElement>>,
}

impl DesignEnsemble {
    /// An explicit ensemble. Weights must sum to 1 and states have unit
    /// norm, both within `1e-12`.
    pub fn custom(n: usize, t: u32, weights: Vec<f64>, states: Vec<PureState>) -> Result<Self> {
        if weights.len() != states.len() || weights.is_empty() {
            return Err(Error::InvalidParameter("need one weight per state".into()));
        }
        if states.iter().any(|s| s.dim() != n) {
            return Err(Error::InvalidParameter(format!("states must have dimension {n}")));
        }
        if weights.iter().any(|w| w.is_nan() || *w < 0.0) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter("weights must be non-negative and sum to 1".into()));
        }
        Ok(DesignEnsemble {
            variant: Variant::CustomList,
            n,
            t,
            epsilon: None,
            body: Body::List {
                weights,
                states: states.into_iter().map(PureState::into_amplitudes).collect(),
            },
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> u32 {
        self.t
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    pub fn product(&self) -> Option<&ProductEnsemble> {
        match &self.body {
            Body::Product(p) => Some(p),
            _ => None,
        }
    }

    pub fn rule(&self) -> Option<&QuadratureRule> {
        self.product().map(|p| p.rule())
    }

    pub fn size(&self) -> u64 {
        match &self.body {
            Body::Product(p) => p.size(),
            Body::Mub => (self.n * (self.n + 1)) as u64,
            Body::List { weights, .. } => weights.len() as u64,
        }
    }

    /// Element `index`; for product ensembles `index = f_idx * |P| + p_idx`.
    pub fn element(&self, index: u64) -> Result<(f64, PureState)> {
        if index >= self.size() {
            return Err(Error::OutOfRange {
                what: "element index",
                value: index,
                bound: self.size(),
            });
        }
        let mut out = None;
        self.visit(index..index + 1, |w, amps| out = Some((w, amps.to_vec())))?;
        let (w, amps) = out.expect("one element visited");
        Ok((w, PureState::normalized(amps)?))
    }

    /// Visits elements in `range` in index order as `(weight, amplitudes)`.
    pub fn visit<F: FnMut(f64, &[Complex64])>(&self, range: Range<u64>, mut visit: F) -> Result<()> {
        let range = range.start.min(self.size())..range.end.min(self.size());
        match &self.body {
            Body::Product(p) => p.visit(range, visit),
            Body::Mub => {
                let w = 1.0 / (self.n * (self.n + 1)) as f64;
                for index in range {
                    let i = index as usize;
                    visit(w, &mub_state(self.n, i / self.n, i % self.n));
                }
                Ok(())
            }
            Body::List { weights, states } => {
                for index in range {
                    visit(weights[index as usize], &states[index as usize]);
                }
                Ok(())
            }
        }
    }

    pub fn spec(&self) -> EnsembleSpec {
        let mut spec = EnsembleSpec {
            variant: self.variant,
            n: self.n as u64,
            t: self.t,
            epsilon: self.epsilon,
            size: Some(self.size()),
            phase_convention: None,
            rule: None,
            families: None,
            elements: None,
        };
        match &self.body {
            Body::Product(p) => {
                spec.rule = Some(p.rule().clone());
                let f = p.magnitude_family().params().clone();
                spec.families = Some(match p.components() {
                    [g] => {
                        spec.phase_convention = Some(MAIN_PHASES.into());
                        Families {
                            f,
                            g: Some(g.family.params().clone()),
                            g1: None,
                            g2: None,
                        }
                    }
                    [g1, g2] => {
                        spec.phase_convention = Some(IMPROVED_PHASES.into());
                        Families {
                            f,
                            g: None,
                            g1: Some(g1.family.params().clone()),
                            g2: Some(g2.family.params().clone()),
                        }
                    }
                    _ => unreachable!("product ensembles have one or two phase families"),
                });
            }
            Body::Mub => {}
            Body::List { weights, states } => {
                spec.elements = Some(
                    weights
                        .iter()
                        .zip(states)
                        .map(|(w, s)| ListElement {
                            weight: *w,
                            amplitudes: s.iter().map(|a| [a.re, a.im]).collect(),
                        })
                        .collect(),
                );
            }
        }
        spec
    }

    /// Regenerates an ensemble. Main and improved specs without a rule and
    /// families are rebuilt from `(N, t, epsilon)`.
    pub fn from_spec(spec: &EnsembleSpec) -> Result<Self> {
        let ensemble = match spec.variant {
            Variant::Mub => build_mub_design(spec.n)?,
            Variant::CustomList => {
                let elements = spec
                    .elements
                    .as_ref()
                    .ok_or_else(|| Error::Parse("custom-list spec needs elements".into()))?;
                let states = elements
                    .iter()
                    .map(|e| PureState::new(e.amplitudes.iter().map(|p| Complex64::new(p[0], p[1])).collect()))
                    .collect::<Result<Vec<_>>>()?;
                DesignEnsemble::custom(
                    spec.n as usize,
                    spec.t,
                    elements.iter().map(|e| e.weight).collect(),
                    states,
                )?
            }
            Variant::Main | Variant::Improved => match (&spec.rule, &spec.families) {
                (None, None) => match spec.variant {
                    Variant::Main => build_design(spec.n, spec.t)?,
                    _ => build_design_improved(
                        spec.n,
                        spec.t,
                        spec.epsilon
                            .ok_or_else(|| Error::Parse("improved spec needs epsilon".into()))?,
                    )?,
                },
                (Some(rule), Some(fams)) => {
                    let family = |p: &Option<FamilyParams>, name: &str| -> Result<FunctionFamily> {
                        let p = p.as_ref().ok_or_else(|| Error::Parse(format!("missing family {name}")))?;
                        FunctionFamily::from_params(p)
                    };
                    let f = FunctionFamily::from_params(&fams.f)?;
                    let components = if spec.variant == Variant::Main {
                        let g = family(&fams.g, "g")?;
                        let modulus = g.range_size();
                        vec![PhaseComponent { family: g, modulus }]
                    } else {
                        let g1 = family(&fams.g1, "g1")?;
                        let g2 = family(&fams.g2, "g2")?;
                        let m2 = g2.range_size();
                        vec![
                            PhaseComponent { family: g1, modulus: 2 },
                            PhaseComponent { family: g2, modulus: m2 },
                        ]
                    };
                    DesignEnsemble {
                        variant: spec.variant,
                        n: spec.n as usize,
                        t: spec.t,
                        epsilon: spec.epsilon,
                        body: Body::Product(Box::new(ProductEnsemble::new(
                            spec.n as usize,
                            rule.clone(),
                            f,
                            components,
                        )?)),
                    }
                }
                _ => return Err(Error::Parse("spec needs both rule and families, or neither".into())),
            },
        };
        if let Some(size) = spec.size {
            if size != ensemble.size() {
                return Err(Error::Parse(format!(
                    "spec declares size {size} but regenerates {}",
                    ensemble.size()
                )));
            }
        }
        Ok(ensemble)
    }
}
