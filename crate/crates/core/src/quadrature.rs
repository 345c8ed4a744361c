//! Discrete amplitude-magnitude distributions matching the Haar limit
//! moments, and their rounding to multiples of `1/N`.
//!
//! Rules come from the Chebyshev algorithm run in exact rationals followed
//! by the Golub-Welsch eigenproblem. Symmetric moment sequences are solved
//! through `Y = X^2`, whose nodes are split into `±sqrt(y)` with half weight,
//! so odd moments vanish exactly.

use nalgebra::{DMatrix, SymmetricEigen};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RuleFile", into = "RuleFile")]
pub struct QuadratureRule {
    t: u32,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Integer weight units and their common denominator once rounded.
    units: Option<(Vec<u64>, u64)>,
}

#[derive(Serialize, Deserialize)]
struct RuleFile {
    t: u32,
    #[serde(rename = "N")]
    n: Option<u64>,
    nodes: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights_num: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights_den: Option<u64>,
}

impl From<QuadratureRule> for RuleFile {
    fn from(rule: QuadratureRule) -> Self {
        match rule.units {
            Some((units, den)) => RuleFile {
                t: rule.t,
                n: Some(den),
                nodes: rule.nodes,
                weights: None,
                weights_num: Some(units),
                weights_den: Some(den),
            },
            None => RuleFile {
                t: rule.t,
                n: None,
                nodes: rule.nodes,
                weights: Some(rule.weights),
                weights_num: None,
                weights_den: None,
            },
        }
    }
}

impl TryFrom<RuleFile> for QuadratureRule {
    type Error = Error;

    fn try_from(file: RuleFile) -> Result<Self> {
        let rule = match (file.weights_num, file.weights_den, file.weights) {
            (Some(units), Some(den), _) => {
                if den == 0 || units.iter().sum::<u64>() != den {
                    return Err(Error::Parse("weights_num must sum to weights_den".into()));
                }
                QuadratureRule {
                    t: file.t,
                    weights: units.iter().map(|&u| u as f64 / den as f64).collect(),
                    nodes: file.nodes,
                    units: Some((units, den)),
                }
            }
            (None, None, Some(weights)) => QuadratureRule {
                t: file.t,
                nodes: file.nodes,
                weights,
                units: None,
            },
            _ => return Err(Error::Parse("rule needs weights or weights_num/weights_den".into())),
        };
        if rule.nodes.len() != rule.weights.len() || rule.nodes.is_empty() {
            return Err(Error::Parse("nodes and weights differ in length".into()));
        }
        if rule.weights.iter().any(|w| w.is_nan() || *w < 0.0) || rule.nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parse("weights must be non-negative and nodes finite".into()));
        }
        if (rule.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Parse("weights must sum to 1".into()));
        }
        Ok(rule)
    }
}

impl QuadratureRule {
    pub fn order(&self) -> u32 {
        self.t
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integer weight units `N q_l` and `N`, present after rounding.
    pub fn units(&self) -> Option<(&[u64], u64)> {
        self.units.as_ref().map(|(u, d)| (u.as_slice(), *d))
    }

    /// `sum_l q_l x_l^j`.
    pub fn moment(&self, j: u32) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, q)| q * x.powi(j as i32))
            .sum()
    }
}

/// `m_1..m_{2t}`: zero for odd `j`, `(j/2)!` for even `j`.
pub fn limit_moments(t: u32) -> Vec<f64> {
    (1..=2 * t)
        .map(|j| {
            if j % 2 == 1 {
                0.0
            } else {
                (1..=j / 2).map(|i| i as f64).product()
            }
        })
        .collect()
}

/// The rule used by the design builders for order `t`: Gauss on `Y = X^2`
/// with `floor(t/2) + 1` nodes, split symmetrically. It matches every
/// moment up to `2 (2 floor(t/2) + 1) >= 2t`.
pub fn haar_limit_rule(t: u32) -> Result<QuadratureRule> {
    if t == 0 {
        return Err(Error::InvalidParameter("order t must be >= 1".into()));
    }
    let mut rule = gauss_rule(&limit_moments(2 * (t / 2) + 1))?;
    rule.t = t;
    Ok(rule)
}

fn to_rational(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::InvalidMoments(format!("moment {x} is not finite")))
}

/// Recurrence coefficients `(alpha_k, beta_k)` of the monic orthogonal
/// polynomials for moments `mu_0..mu_{2n-1}` (Chebyshev algorithm). Stops
/// early if the measure turns out to be supported on fewer points.
fn chebyshev(mu: &[BigRational]) -> Result<(Vec<BigRational>, Vec<BigRational>)> {
    let n = mu.len() / 2;
    if !mu[0].is_positive() {
        return Err(Error::InvalidMoments("zeroth moment must be positive".into()));
    }
    let mut alpha = vec![&mu[1] / &mu[0]];
    let mut beta = vec![mu[0].clone()];
    let mut prev: Vec<BigRational> = vec![BigRational::zero(); mu.len()];
    let mut cur: Vec<BigRational> = mu.to_vec();
    for k in 1..n {
        let mut next = vec![BigRational::zero(); mu.len()];
        for l in k..(2 * n - k) {
            next[l] = &cur[l + 1] - &alpha[k - 1] * &cur[l] - &beta[k - 1] * &prev[l];
        }
        if next[k].is_negative() {
            return Err(Error::InvalidMoments("Hankel matrix is not positive semidefinite".into()));
        }
        if next[k].is_zero() {
            break;
        }
        alpha.push(&next[k + 1] / &next[k] - &cur[k] / &cur[k - 1]);
        beta.push(&next[k] / &cur[k - 1]);
        prev = cur;
        cur = next;
    }
    Ok((alpha, beta))
}

/// Golub-Welsch: nodes are the Jacobi eigenvalues, weights `mu_0 v_0^2`.
fn golub_welsch(alpha: &[BigRational], beta: &[BigRational]) -> (Vec<f64>, Vec<f64>) {
    let n = alpha.len();
    let f = |r: &BigRational| r.to_f64().unwrap_or(f64::NAN);
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            f(&alpha[i])
        } else if i + 1 == j {
            f(&beta[j]).sqrt()
        } else if j + 1 == i {
            f(&beta[i]).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mu0 = f(&beta[0]);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Minimal Gaussian rule reproducing `moments = [m_1, .., m_K]` (with
/// `m_0 = 1`).
///
/// Symmetric input with `floor(K/2)` odd is solved through `Y = X^2` with
/// `(floor(K/2)+1)/2` nodes before splitting; other symmetric input uses
/// `floor(K/2)+1` nodes directly, one of them at 0. Non-symmetric input
/// needs odd `K`.
pub fn gauss_rule(moments: &[f64]) -> Result<QuadratureRule> {
    if moments.is_empty() {
        return Err(Error::InvalidMoments("need at least one moment".into()));
    }
    let k = moments.len();
    let symmetric = moments.iter().step_by(2).all(|m| *m == 0.0);
    let mut all = vec![BigRational::one()];
    for m in moments {
        all.push(to_rational(*m)?);
    }
    let h = k / 2;
    let (nodes, weights) = if symmetric && h % 2 == 1 {
        let mu: Vec<BigRational> = (0..=h).map(|c| all[2 * c].clone()).collect();
        let (alpha, beta) = chebyshev(&mu)?;
        let (ys, ws) = golub_welsch(&alpha, &beta);
        if ys.iter().any(|y| *y < 0.0) {
            return Err(Error::InvalidMoments("squared variable has negative support".into()));
        }
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(2 * ys.len());
        for (y, w) in ys.iter().zip(&ws) {
            pairs.push((-y.sqrt(), w / 2.0));
            pairs.push((y.sqrt(), w / 2.0));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.into_iter().unzip()
    } else {
        let mut mu = all;
        if symmetric && k.is_multiple_of(2) {
            mu.push(BigRational::zero());
        } else if k.is_multiple_of(2) {
            return Err(Error::InvalidMoments(
                "an odd number of moments is needed for a non-symmetric rule".into(),
            ));
        }
        let (alpha, beta) = chebyshev(&mu)?;
        golub_welsch(&alpha, &beta)
    };
    let rule = QuadratureRule {
        t: h as u32,
        nodes,
        weights,
        units: None,
    };
    for (j, m) in moments.iter().enumerate() {
        let got = rule.moment(j as u32 + 1);
        if (got - m).abs() > 1e-9 * m.abs().max(1.0) {
            return Err(Error::InvalidMoments(format!(
                "moment {} not reproducible: {got} vs {m}",
                j + 1
            )));
        }
    }
    Ok(rule)
}

/// Rounds weights to multiples of `1/N` by largest-remainder apportionment
/// (ties to the lower node index), drops nodes left with no weight and
/// rescales `x_l` so that `q'_l x'_l^2 = q_l x_l^2`. If nodes were dropped,
/// the remaining `x^2` are scaled by a common factor so the second moment
/// stays exactly `sum q x^2`.
pub fn round_rule(rule: &QuadratureRule, n: u64) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be positive".into()));
    }
    let scaled: Vec<f64> = rule.weights.iter().map(|q| q * n as f64).collect();
    let mut units: Vec<u64> = scaled
        .iter()
        .map(|s| {
            let r = s.round();
            if (s - r).abs() < 1e-9 {
                r as u64
            } else {
                s.floor() as u64
            }
        })
        .collect();
    let assigned: u64 = units.iter().sum();
    if assigned > n {
        return Err(Error::InvalidParameter(format!("weights exceed 1 at N={n}")));
    }
    let mut order: Vec<usize> = (0..units.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - units[a] as f64;
        let rb = scaled[b] - units[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take((n - assigned) as usize) {
        units[i] += 1;
    }
    let second: f64 = rule.moment(2);
    let mut nodes = Vec::new();
    let mut kept_units = Vec::new();
    for (i, &u) in units.iter().enumerate() {
        if u == 0 {
            continue;
        }
        let q_new = u as f64 / n as f64;
        let x2 = rule.weights[i] * rule.nodes[i].powi(2) / q_new;
        nodes.push(rule.nodes[i].signum() * x2.sqrt());
        kept_units.push(u);
    }
    if kept_units.len() < units.len() {
        let kept: f64 = nodes
            .iter()
            .zip(&kept_units)
            .map(|(x, &u)| x * x * u as f64 / n as f64)
            .sum();
        if kept > 0.0 {
            let scale = (second / kept).sqrt();
            nodes.iter_mut().for_each(|x| *x *= scale);
        }
    }
    Ok(QuadratureRule {
        t: rule.t,
        weights: kept_units.iter().map(|&u| u as f64 / n as f64).collect(),
        nodes,
        units: Some((kept_units, n)),
    })
}

/// Exact sum of rounded weights, as a rational.
pub fn rounded_weight_sum(rule: &QuadratureRule) -> Option<BigRational> {
    rule.units().map(|(units, den)| {
        BigRational::new(
            BigInt::from(units.iter().sum::<u64>()),
            BigInt::from(den),
        )
    })
}
