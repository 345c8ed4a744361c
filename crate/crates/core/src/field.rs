//! Arithmetic in GF(2^k) with field elements identified with the integers
//! `0..2^k` through their bit pattern (bit `i` is the coefficient of `x^i`).
//!
//! Every degree uses a fixed irreducible modulus from [`MODULI`], so a function
//! family described only by its parameters evaluates identically on every run.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported extension degree.
pub const MAX_DEGREE: u32 = 20;

/// Irreducible (primitive) moduli for `GF(2^k)`, `k = 1..=20`, including the
/// leading `x^k` bit. Index `k - 1`.
pub const MODULI: [u32; MAX_DEGREE as usize] = [
    0b11,      // x + 1
    0x7,       // x^2 + x + 1
    0xB,       // x^3 + x + 1
    0x13,      // x^4 + x + 1
    0x25,      // x^5 + x^2 + 1
    0x43,      // x^6 + x + 1
    0x83,      // x^7 + x + 1
    0x11D,     // x^8 + x^4 + x^3 + x^2 + 1
    0x211,     // x^9 + x^4 + 1
    0x409,     // x^10 + x^3 + 1
    0x805,     // x^11 + x^2 + 1
    0x1053,    // x^12 + x^6 + x^4 + x + 1
    0x201B,    // x^13 + x^4 + x^3 + x + 1
    0x4443,    // x^14 + x^10 + x^6 + x + 1
    0x8003,    // x^15 + x + 1
    0x1100B,   // x^16 + x^12 + x^3 + x + 1
    0x20009,   // x^17 + x^3 + 1
    0x40081,   // x^18 + x^7 + 1
    0x80027,   // x^19 + x^5 + x^2 + x + 1
    0x100009,  // x^20 + x^3 + 1
];

/// The field `GF(2^k)` for a fixed `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gf2k {
    degree: u32,
}

impl Gf2k {
    pub fn new(degree: u32) -> Result<Self> {
        if degree == 0 || degree > MAX_DEGREE {
            return Err(Error::UnsupportedFieldDegree(degree));
        }
        Ok(Gf2k { degree })
    }

    /// The field with exactly `order` elements; `order` must be a power of two.
    pub fn with_order(order: u64) -> Result<Self> {
        if order < 2 || !order.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(order));
        }
        Self::new(order.trailing_zeros())
    }

    #[inline]
    pub fn degree(&self) -> u32 {
        self.degree
    }

    #[inline]
    pub fn order(&self) -> u32 {
        1 << self.degree
    }

    #[inline]
    pub fn modulus(&self) -> u32 {
        MODULI[self.degree as usize - 1]
    }

    pub fn element(&self, value: u32) -> Result<FieldElement> {
        if value >= self.order() {
            return Err(Error::OutOfRange {
                what: "field element",
                value: value as u64,
                bound: self.order() as u64,
            });
        }
        Ok(FieldElement {
            value,
            degree: self.degree,
        })
    }

    /// Addition on raw representatives. Callers guarantee both are `< order`.
    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        a ^ b
    }

    /// Shift-and-add multiplication reduced by the fixed modulus.
    #[inline]
    pub fn mul(&self, mut a: u32, mut b: u32) -> u32 {
        let top = 1u32 << self.degree;
        let modulus = self.modulus();
        let mut acc = 0;
        while b != 0 {
            if b & 1 != 0 {
                acc ^= a;
            }
            b >>= 1;
            a <<= 1;
            if a & top != 0 {
                a ^= modulus;
            }
        }
        acc
    }

    pub fn pow(&self, mut base: u32, mut exp: u64) -> u32 {
        let mut acc = 1;
        while exp != 0 {
            if exp & 1 != 0 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via `a^(2^k - 2)`; `None` for zero.
    pub fn inv(&self, a: u32) -> Option<u32> {
        if a == 0 {
            None
        } else {
            Some(self.pow(a, (self.order() as u64) - 2))
        }
    }

    /// Horner evaluation of `coeffs[0] + coeffs[1] x + ...`.
    #[inline]
    pub fn eval(&self, coeffs: &[u32], x: u32) -> u32 {
        coeffs
            .iter()
            .rev()
            .fold(0, |acc, &c| self.mul(acc, x) ^ c)
    }
}

/// An element of `GF(2^degree)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldElement {
    value: u32,
    degree: u32,
}

impl FieldElement {
    pub fn value(&self) -> u32 {
        self.value
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn field(&self) -> Gf2k {
        Gf2k {
            degree: self.degree,
        }
    }
}

fn same_field(a: &FieldElement, b: &FieldElement) -> Result<Gf2k> {
    if a.degree != b.degree {
        return Err(Error::FieldMismatch {
            left: a.degree,
            right: b.degree,
        });
    }
    Ok(a.field())
}

pub fn gf_add(a: FieldElement, b: FieldElement) -> Result<FieldElement> {
    let field = same_field(&a, &b)?;
    Ok(FieldElement {
        value: field.add(a.value, b.value),
        degree: a.degree,
    })
}

pub fn gf_mul(a: FieldElement, b: FieldElement) -> Result<FieldElement> {
    let field = same_field(&a, &b)?;
    Ok(FieldElement {
        value: field.mul(a.value, b.value),
        degree: a.degree,
    })
}

pub fn gf_inv(a: FieldElement) -> Option<FieldElement> {
    a.field().inv(a.value).map(|value| FieldElement {
        value,
        degree: a.degree,
    })
}

/// A polynomial over `GF(2^k)` with constant term first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolySpec {
    field: Gf2k,
    coefficients: Vec<u32>,
}

impl PolySpec {
    pub fn new(field: Gf2k, coefficients: Vec<u32>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidParameter(
                "polynomial needs at least one coefficient".into(),
            ));
        }
        for &c in &coefficients {
            field.element(c)?;
        }
        Ok(PolySpec {
            field,
            coefficients,
        })
    }

    pub fn from_elements(coefficients: &[FieldElement]) -> Result<Self> {
        let first = coefficients.first().ok_or_else(|| {
            Error::InvalidParameter("polynomial needs at least one coefficient".into())
        })?;
        for c in coefficients {
            same_field(first, c)?;
        }
        Self::new(
            first.field(),
            coefficients.iter().map(|c| c.value).collect(),
        )
    }

    pub fn field(&self) -> Gf2k {
        self.field
    }

    pub fn degree_bound(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[u32] {
        &self.coefficients
    }
}

pub fn poly_eval(p: &PolySpec, x: FieldElement) -> Result<FieldElement> {
    if x.degree != p.field.degree {
        return Err(Error::FieldMismatch {
            left: p.field.degree,
            right: x.degree,
        });
    }
    Ok(FieldElement {
        value: p.field.eval(&p.coefficients, x.value),
        degree: x.degree,
    })
}
