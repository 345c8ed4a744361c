//! Exact Haar expectations of amplitude monomials over the unit sphere of
//! `C^N`, plus the multiset bookkeeping of the symmetric subspace.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One factor `alpha_i^c (alpha_i^*)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Term {
    pub index: usize,
    pub c: u32,
    pub d: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Term>", into = "Vec<Term>")]
pub struct Monomial {
    terms: Vec<Term>,
}

impl TryFrom<Vec<Term>> for Monomial {
    type Error = Error;
    fn try_from(terms: Vec<Term>) -> Result<Self> {
        Monomial::new(terms)
    }
}

impl From<Monomial> for Vec<Term> {
    fn from(m: Monomial) -> Self {
        m.terms
    }
}

impl Monomial {
    /// Terms are sorted by index; indices must be distinct.
    pub fn new(mut terms: Vec<Term>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Parse("monomial needs at least one term".into()));
        }
        terms.sort_by_key(|t| t.index);
        if terms.windows(2).any(|w| w[0].index == w[1].index) {
            return Err(Error::Parse("monomial indices must be distinct".into()));
        }
        Ok(Monomial { terms })
    }

    pub fn balanced(pairs: &[(usize, u32)]) -> Result<Self> {
        Monomial::new(pairs.iter().map(|&(index, c)| Term { index, c, d: c }).collect())
    }

    /// `prod_{i in I} alpha_i prod_{j in J} alpha_j^*` for index multisets.
    pub fn from_multisets(plain: &[usize], conj: &[usize]) -> Result<Self> {
        let mut terms: Vec<Term> = Vec::new();
        for (list, is_conj) in [(plain, false), (conj, true)] {
            for &index in list {
                let pos = match terms.iter().position(|t| t.index == index) {
                    Some(p) => p,
                    None => {
                        terms.push(Term { index, c: 0, d: 0 });
                        terms.len() - 1
                    }
                };
                if is_conj {
                    terms[pos].d += 1;
                } else {
                    terms[pos].c += 1;
                }
            }
        }
        Monomial::new(terms)
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_balanced(&self) -> bool {
        self.terms.iter().all(|t| t.c == t.d)
    }

    /// `(sum c_j, sum d_j)`.
    pub fn degrees(&self) -> (u32, u32) {
        self.terms
            .iter()
            .fold((0, 0), |(a, b), t| (a + t.c, b + t.d))
    }

    pub fn max_index(&self) -> usize {
        self.terms.iter().map(|t| t.index).max().unwrap_or(0)
    }

    pub fn eval(&self, amplitudes: &[Complex64]) -> Complex64 {
        self.terms.iter().fold(Complex64::new(1.0, 0.0), |acc, t| {
            let a = amplitudes[t.index];
            acc * a.powu(t.c) * a.conj().powu(t.d)
        })
    }
}

/// Syntax: terms separated by `;`, each `index:c,d` or `index:c` (the
/// balanced `|alpha_index|^(2c)`). A term list like `1:2,2:0` with several
/// colons reads as comma-separated balanced terms. Indices are 0-based.
impl FromStr for Monomial {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("cannot parse monomial {s:?}"));
        let num = |x: &str| x.trim().parse::<u64>().map_err(|_| bad());
        let mut terms = Vec::new();
        for chunk in s.split(';').map(str::trim).filter(|c| !c.is_empty()) {
            if chunk.matches(':').count() > 1 {
                for part in chunk.split(',') {
                    let (i, c) = part.split_once(':').ok_or_else(bad)?;
                    let c = num(c)? as u32;
                    terms.push(Term { index: num(i)? as usize, c, d: c });
                }
            } else {
                let (i, rest) = chunk.split_once(':').ok_or_else(bad)?;
                let (c, d) = match rest.split_once(',') {
                    Some((c, d)) => (num(c)?, num(d)?),
                    None => (num(rest)?, num(rest)?),
                };
                terms.push(Term {
                    index: num(i)? as usize,
                    c: c as u32,
                    d: d as u32,
                });
            }
        }
        Monomial::new(terms)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|t| format!("{}:{},{}", t.index, t.c, t.d))
            .collect();
        write!(f, "{}", parts.join(";"))
    }
}

/// `E_Haar[m]`: zero unless balanced, else `prod c_j! / (N (N+1) .. (N+d-1))`.
pub fn haar_expectation(n: u64, m: &Monomial) -> Result<BigRational> {
    if let Some(t) = m.terms.iter().find(|t| t.index as u64 >= n) {
        return Err(Error::OutOfRange {
            what: "monomial index",
            value: t.index as u64,
            bound: n,
        });
    }
    if !m.is_balanced() {
        return Ok(BigRational::zero());
    }
    Ok(balanced_haar_value(n, &m.terms.iter().map(|t| t.c).collect::<Vec<_>>()))
}

/// `prod c_j! / (N (N+1) .. (N+d-1))` with `d = sum c_j`.
pub fn balanced_haar_value(n: u64, counts: &[u32]) -> BigRational {
    let numer: BigUint = counts.iter().map(|&c| factorial(c)).product();
    let d: u32 = counts.iter().sum();
    let denom: BigUint = (0..d as u64).map(|i| BigUint::from(n + i)).product();
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}

fn factorial(c: u32) -> BigUint {
    (1..=c as u64).map(BigUint::from).fold(BigUint::one(), |a, b| a * b)
}

/// `C(N+t-1, t)`, the dimension of the symmetric subspace.
pub fn symmetric_dim(n: u64, t: u32) -> u128 {
    crate::kwise::binomial((n + t as u64 - 1) as u128, t as u128)
}

/// `t! / prod c!` over the multiplicities of a sorted index list.
pub fn multiset_weight(indices: &[usize]) -> u128 {
    let t = indices.len() as u128;
    let mut result: u128 = (1..=t).product();
    let mut run = 1u128;
    for i in 1..=indices.len() {
        if i < indices.len() && indices[i] == indices[i - 1] {
            run += 1;
        } else {
            result /= (1..=run).product::<u128>();
            run = 1;
        }
    }
    result
}

/// All sorted multisets of size `t` over `0..n`, in lexicographic order.
pub fn multisets(n: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if t == 0 {
        out.push(Vec::new());
        return out;
    }
    if n == 0 {
        return out;
    }
    let mut cur = vec![0usize; t];
    loop {
        out.push(cur.clone());
        let Some(pos) = (0..t).rev().find(|&i| cur[i] + 1 < n) else {
            break;
        };
        let v = cur[pos] + 1;
        cur[pos..].iter_mut().for_each(|x| *x = v);
    }
    out
}

/// Haar-random unit vector: normalised i.i.d. standard complex Gaussians.
pub fn haar_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|z| *z /= norm);
    v
}
