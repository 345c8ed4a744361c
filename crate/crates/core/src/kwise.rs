//! Exact k-wise independent and k-wise δ-dependent function families
//! `{0..N-1} -> {0..m-1}`.
//!
//! Families are parametric: a member is identified by its index and decoded
//! on demand, so even very large families are never materialised.
//!
//! Four generators are provided:
//!
//! * polynomials of degree `< k` over `GF(2^s)` (exact, `2^(s k)` members),
//!   optionally keeping only the top `log2 m` bits of the value;
//! * affine maps over `GF(m)^d` (exact for `k <= 2`, `m^(d+1)` members);
//! * the dual of the extended binary BCH code (exact binary, `2^(1 + s e)`
//!   members with `e = floor(k/2)`);
//! * a small-bias sample space (LFSR over a random irreducible feedback
//!   polynomial) pushed through the BCH columns, which gives k-wise
//!   δ-dependence with a member count polynomial in `log N` and `1/δ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Gf2k;

/// Largest LFSR degree the small-bias generator will enumerate.
pub const MAX_LFSR_DEGREE: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    ExactPolynomial,
    PairwiseAffine,
    BinaryExact,
    DeltaDependent,
}

/// JSON parameter block of a family. Members are regenerated from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub kind: FamilyKind,
    #[serde(rename = "N")]
    pub n: u64,
    pub m: u64,
    pub k: u32,
    pub delta: f64,
    /// Reserved; every generator is deterministic in the other parameters.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
enum Generator {
    Polynomial { field: Gf2k, shift: u32 },
    Affine { field: Gf2k, digits: u32 },
    Bch { field: Gf2k, powers: u32 },
    SmallBias {
        field: Gf2k,
        powers: u32,
        bits_per_value: u32,
        lfsr_degree: u32,
        feedback: Vec<u32>,
        seed_len: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionFamily {
    params: FamilyParams,
    generator: Generator,
    members: u64,
}

/// A decoded family member, cheap to evaluate repeatedly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Member {
    Polynomial { field: Gf2k, coeffs: Vec<u32>, shift: u32 },
    Affine { field: Gf2k, coeffs: Vec<u32> },
    /// Output bit `p` is `<z, (1, p, p^3, ..., p^(2e-1))>` over GF(2);
    /// values concatenate `bits_per_value` consecutive bits.
    Linear {
        field: Gf2k,
        constant: u32,
        chunks: Vec<u32>,
        bits_per_value: u32,
    },
}

impl Member {
    #[inline]
    pub fn eval(&self, x: u32) -> u32 {
        match self {
            Member::Polynomial {
                field,
                coeffs,
                shift,
            } => field.eval(coeffs, x) >> shift,
            Member::Affine { field, coeffs } => {
                let q = field.order();
                let mut acc = coeffs[0];
                let mut rest = x;
                for &c in &coeffs[1..] {
                    acc ^= field.mul(c, rest % q);
                    rest /= q;
                }
                acc
            }
            Member::Linear {
                field,
                constant,
                chunks,
                bits_per_value,
            } => {
                let mut value = 0;
                for b in 0..*bits_per_value {
                    let p = x * bits_per_value + b;
                    value = (value << 1) | bch_bit(*field, *constant, chunks, p);
                }
                value
            }
        }
    }
}

#[inline]
fn bch_bit(field: Gf2k, constant: u32, chunks: &[u32], p: u32) -> u32 {
    let p2 = field.mul(p, p);
    let mut power = p;
    let mut parity = constant;
    for &chunk in chunks {
        parity ^= (chunk & power).count_ones() & 1;
        power = field.mul(power, p2);
    }
    parity & 1
}

fn log2_exact(value: u64) -> Result<u32> {
    if value == 0 || !value.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(value));
    }
    Ok(value.trailing_zeros())
}

fn checked_pow(base: u64, exp: u32) -> Result<u64> {
    base.checked_pow(exp).filter(|v| *v < (1u64 << 62)).ok_or_else(|| {
        Error::InvalidParameter(format!("family of {base}^{exp} members is too large to index"))
    })
}

/// Family of all polynomials of degree `<= k-1` over `GF(N)`: exactly k-wise
/// independent. For `k >= N` the restriction to all `N` points is uniform.
pub fn exact_family(n: u64, k: u32) -> Result<FunctionFamily> {
    exact_polynomial_family(n, n, k)
}

/// Polynomials of degree `<= k-1` over `GF(2^s)` with `2^s >= max(N, m)`,
/// keeping the top `log2 m` bits of each value.
pub fn exact_polynomial_family(n: u64, m: u64, k: u32) -> Result<FunctionFamily> {
    let log_n = log2_exact(n)?;
    let log_m = log2_exact(m)?;
    if k == 0 {
        return Err(Error::InvalidParameter("independence order must be >= 1".into()));
    }
    if n < 2 || m < 2 {
        return Err(Error::InvalidParameter("domain and range need at least 2 points".into()));
    }
    let s = if k == 1 { log_m } else { log_n.max(log_m) };
    let field = Gf2k::new(s)?;
    let members = checked_pow(field.order() as u64, k)?;
    Ok(FunctionFamily {
        params: FamilyParams {
            kind: FamilyKind::ExactPolynomial,
            n,
            m,
            k,
            delta: 0.0,
            seed: 0,
        },
        generator: Generator::Polynomial {
            field,
            shift: s - log_m,
        },
        members,
    })
}

/// Affine maps `s_0 + sum_i s_i x_i` over `GF(m)`, with `x` written in base
/// `m`. Exactly pairwise independent.
pub fn pairwise_affine_family(n: u64, m: u64) -> Result<FunctionFamily> {
    log2_exact(n)?;
    let log_m = log2_exact(m)?;
    if m < 2 {
        return Err(Error::InvalidParameter("range needs at least 2 points".into()));
    }
    let field = Gf2k::new(log_m)?;
    let mut digits = 0;
    while checked_pow(m, digits)? < n {
        digits += 1;
    }
    let members = checked_pow(m, digits + 1)?;
    Ok(FunctionFamily {
        params: FamilyParams {
            kind: FamilyKind::PairwiseAffine,
            n,
            m,
            k: 2,
            delta: 0.0,
            seed: 0,
        },
        generator: Generator::Affine { field, digits },
        members,
    })
}

/// Exactly k-wise independent binary functions from the dual of the
/// extended BCH code over `GF(2^s)`, `2^s >= N`.
pub fn binary_exact_family(n: u64, k: u32) -> Result<FunctionFamily> {
    let log_n = log2_exact(n)?;
    if k == 0 {
        return Err(Error::InvalidParameter("independence order must be >= 1".into()));
    }
    let field = Gf2k::new(log_n.max(1))?;
    let powers = k / 2;
    let bits = 1 + field.degree() * powers;
    if bits > 62 {
        return Err(Error::InvalidParameter(format!(
            "binary family with 2^{bits} members is too large to index"
        )));
    }
    Ok(FunctionFamily {
        params: FamilyParams {
            kind: FamilyKind::BinaryExact,
            n,
            m: 2,
            k,
            delta: 0.0,
            seed: 0,
        },
        generator: Generator::Bch { field, powers },
        members: 1 << bits,
    })
}

/// Irreducible polynomials of degree `r` over GF(2), ascending, including
/// the leading bit.
pub fn irreducible_polynomials(r: u32) -> Vec<u32> {
    // Sieve: mark every product of two lower-degree factors.
    let lo = 1u32 << r;
    let hi = 1u32 << (r + 1);
    let mut reducible = vec![false; lo as usize];
    fn clmul(a: u32, b: u32) -> u64 {
        let mut acc = 0u64;
        let mut b = b;
        let mut a = a as u64;
        while b != 0 {
            if b & 1 != 0 {
                acc ^= a;
            }
            b >>= 1;
            a <<= 1;
        }
        acc
    }
    for da in 1..=r / 2 {
        let db = r - da;
        for a in (1u32 << da)..(1u32 << (da + 1)) {
            for b in (1u32 << db)..(1u32 << (db + 1)) {
                let prod = clmul(a, b) as u32;
                reducible[(prod - lo) as usize] = true;
            }
        }
    }
    (lo..hi).filter(|&p| !reducible[(p - lo) as usize]).collect()
}

/// Upper bound on the variational distance of any `k` values of a
/// small-bias family with the given LFSR degree.
fn small_bias_delta_bound(seed_len: u32, order_bits: u32, lfsr_degree: u32, irreducible: usize) -> f64 {
    let bias = (seed_len.saturating_sub(1)) as f64 / (lfsr_degree as f64 * irreducible as f64);
    0.5 * 2f64.powf(order_bits as f64 / 2.0) * bias
}

/// k-wise δ-dependent family `{0..N-1} -> {0..m-1}`: an LFSR small-bias
/// space over the seed of the BCH-dual bit generator, `log2 m` bits per value.
pub fn delta_family(n: u64, m: u64, k: u32, delta: f64) -> Result<FunctionFamily> {
    log2_exact(n)?;
    let log_m = log2_exact(m).map_err(|_| {
        Error::InvalidParameter(format!("unsupported range {m}: must be a power of two >= 2"))
    })?;
    if m < 2 {
        return Err(Error::InvalidParameter("unsupported range 1".into()));
    }
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("independence order must be >= 1".into()));
    }
    let positions = n * log_m as u64;
    let field = Gf2k::new((positions.next_power_of_two().trailing_zeros()).max(1))?;
    let order_bits = k * log_m;
    let powers = order_bits / 2;
    let seed_len = 1 + field.degree() * powers;
    for r in 2..=MAX_LFSR_DEGREE {
        let irreducible_count = count_irreducible(r);
        if small_bias_delta_bound(seed_len, order_bits, r, irreducible_count) <= delta {
            let feedback = irreducible_polynomials(r);
            let members = (feedback.len() as u64) << r;
            return Ok(FunctionFamily {
                params: FamilyParams {
                    kind: FamilyKind::DeltaDependent,
                    n,
                    m,
                    k,
                    delta,
                    seed: 0,
                },
                generator: Generator::SmallBias {
                    field,
                    powers,
                    bits_per_value: log_m,
                    lfsr_degree: r,
                    feedback,
                    seed_len,
                },
                members,
            });
        }
    }
    Err(Error::InvalidParameter(format!(
        "delta {delta} needs an LFSR longer than {MAX_LFSR_DEGREE} bits"
    )))
}

/// Number of monic irreducible polynomials of degree `r` over GF(2)
/// (necklace formula).
pub fn count_irreducible(r: u32) -> usize {
    fn mobius(mut n: u32) -> i64 {
        let mut result = 1;
        let mut p = 2;
        while p * p <= n {
            if n.is_multiple_of(p) {
                n /= p;
                if n.is_multiple_of(p) {
                    return 0;
                }
                result = -result;
            }
            p += 1;
        }
        if n > 1 {
            result = -result;
        }
        result
    }
    let total: i64 = (1..=r)
        .filter(|d| r.is_multiple_of(*d))
        .map(|d| mobius(r / d) * (1i64 << d))
        .sum();
    (total / r as i64) as usize
}

impl FunctionFamily {
    pub fn from_params(params: &FamilyParams) -> Result<Self> {
        match params.kind {
            FamilyKind::ExactPolynomial => exact_polynomial_family(params.n, params.m, params.k),
            FamilyKind::PairwiseAffine => pairwise_affine_family(params.n, params.m),
            FamilyKind::BinaryExact => binary_exact_family(params.n, params.k),
            FamilyKind::DeltaDependent => delta_family(params.n, params.m, params.k, params.delta),
        }
    }

    pub fn params(&self) -> &FamilyParams {
        &self.params
    }

    pub fn kind(&self) -> FamilyKind {
        self.params.kind
    }

    pub fn domain_size(&self) -> u64 {
        self.params.n
    }

    pub fn range_size(&self) -> u64 {
        self.params.m
    }

    pub fn order(&self) -> u32 {
        self.params.k
    }

    pub fn delta(&self) -> f64 {
        self.params.delta
    }

    pub fn member_count(&self) -> u64 {
        self.members
    }

    /// LFSR degree of a small-bias family.
    pub fn lfsr_degree(&self) -> Option<u32> {
        match &self.generator {
            Generator::SmallBias { lfsr_degree, .. } => Some(*lfsr_degree),
            _ => None,
        }
    }

    /// Decodes member `index`. Polynomial indices are little-endian base-q
    /// coefficient vectors with the constant term as the lowest digit.
    pub fn member(&self, index: u64) -> Result<Member> {
        if index >= self.members {
            return Err(Error::OutOfRange {
                what: "member index",
                value: index,
                bound: self.members,
            });
        }
        Ok(match &self.generator {
            Generator::Polynomial { field, shift } => Member::Polynomial {
                field: *field,
                coeffs: base_q_digits(index, field.order() as u64, self.params.k as usize),
                shift: *shift,
            },
            Generator::Affine { field, digits } => Member::Affine {
                field: *field,
                coeffs: base_q_digits(index, field.order() as u64, *digits as usize + 1),
            },
            Generator::Bch { field, powers } => {
                let mask = (1u64 << field.degree()) - 1;
                Member::Linear {
                    field: *field,
                    constant: (index & 1) as u32,
                    chunks: (0..*powers)
                        .map(|i| ((index >> (1 + i * field.degree())) & mask) as u32)
                        .collect(),
                    bits_per_value: 1,
                }
            }
            Generator::SmallBias {
                field,
                powers,
                bits_per_value,
                lfsr_degree,
                feedback,
                seed_len,
            } => {
                let poly = feedback[(index >> lfsr_degree) as usize];
                let start = (index & ((1u64 << lfsr_degree) - 1)) as u32;
                let bits = lfsr_bits(poly, *lfsr_degree, start, *seed_len as usize);
                let s = field.degree() as usize;
                let chunks = (0..*powers as usize)
                    .map(|i| {
                        (0..s).fold(0u32, |acc, b| acc | ((bits[1 + i * s + b] as u32) << b))
                    })
                    .collect();
                Member::Linear {
                    field: *field,
                    constant: bits[0] as u32,
                    chunks,
                    bits_per_value: *bits_per_value,
                }
            }
        })
    }

    pub fn member_eval(&self, index: u64, x: u64) -> Result<u32> {
        if x >= self.params.n {
            return Err(Error::OutOfRange {
                what: "point",
                value: x,
                bound: self.params.n,
            });
        }
        Ok(self.member(index)?.eval(x as u32))
    }

    /// Values of member `index` at every point of the domain.
    pub fn member_table(&self, index: u64) -> Result<Vec<u32>> {
        let member = self.member(index)?;
        Ok((0..self.params.n as u32).map(|x| member.eval(x)).collect())
    }
}

fn base_q_digits(mut index: u64, q: u64, len: usize) -> Vec<u32> {
    let mut digits = Vec::with_capacity(len);
    for _ in 0..len {
        digits.push((index % q) as u32);
        index /= q;
    }
    digits
}

/// Bit `i` is `<start, x^i mod feedback>` over GF(2).
fn lfsr_bits(feedback: u32, degree: u32, start: u32, len: usize) -> Vec<bool> {
    let top = 1u32 << degree;
    let mut power = 1u32;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push((start & power).count_ones() & 1 == 1);
        power <<= 1;
        if power & top != 0 {
            power ^= feedback;
        }
    }
    out
}

/// Maximum over `k`-subsets of points of the variational distance between
/// the induced distribution and uniform on `{0..m-1}^k`. `budget` caps
/// `members * C(N,k) * k` evaluations.
pub fn family_bias(family: &FunctionFamily, k: u32, budget: u128) -> Result<f64> {
    let n = family.domain_size();
    let m = family.range_size();
    let members = family.member_count();
    if k == 0 {
        return Ok(0.0);
    }
    let k_eff = (k as u64).min(n) as u32;
    let subsets = binomial(n as u128, k_eff as u128);
    let needed = subsets
        .saturating_mul(members as u128)
        .saturating_mul(k_eff as u128);
    let cells = (m as u128).saturating_pow(k_eff);
    if needed > budget || cells > budget {
        return Err(Error::BudgetExceeded {
            needed: needed.max(cells),
            budget,
        });
    }
    let tables: Vec<Vec<u32>> = (0..members)
        .map(|i| family.member_table(i))
        .collect::<Result<_>>()?;
    let cells = cells as usize;
    let mut counts = vec![0u64; cells];
    let uniform = 1.0 / cells as f64;
    let mut worst = 0.0f64;
    let mut subset: Vec<usize> = (0..k_eff as usize).collect();
    loop {
        counts.iter_mut().for_each(|c| *c = 0);
        for table in &tables {
            let cell = subset
                .iter()
                .fold(0usize, |acc, &p| acc * m as usize + table[p] as usize);
            counts[cell] += 1;
        }
        let tv = 0.5
            * counts
                .iter()
                .map(|&c| (c as f64 / members as f64 - uniform).abs())
                .sum::<f64>();
        worst = worst.max(tv);
        if !next_combination(&mut subset, n as usize) {
            break;
        }
    }
    Ok(worst)
}

pub(crate) fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Advances a sorted index combination in lexicographic order.
pub(crate) fn next_combination(comb: &mut [usize], n: usize) -> bool {
    let k = comb.len();
    for i in (0..k).rev() {
        if comb[i] < n - k + i {
            comb[i] += 1;
            for j in i + 1..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
