//! Arithmetic in the prime field F_p for small primes.
//!
//! Scalars carry their modulus so that mixed-modulus arithmetic is caught at
//! the point of use instead of producing silently wrong values.

use serde::{Deserialize, Serialize};
use std::fmt;

/// An element of F_p. `value` is always reduced to `0..p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FpScalar {
    value: u32,
    prime: u32,
}

impl FpScalar {
    /// Reduce `value` modulo `prime`. Panics if `prime < 2`.
    pub fn new(value: i64, prime: u32) -> Self {
        assert!(prime >= 2, "modulus must be at least 2");
        let p = prime as i64;
        let v = ((value % p) + p) % p;
        FpScalar { value: v as u32, prime }
    }

    pub fn zero(prime: u32) -> Self {
        Self::new(0, prime)
    }

    pub fn one(prime: u32) -> Self {
        Self::new(1, prime)
    }

    pub fn value(self) -> u32 {
        self.value
    }

    pub fn prime(self) -> u32 {
        self.prime
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    fn check(self, other: Self) {
        assert_eq!(self.prime, other.prime, "mixed moduli: {} vs {}", self.prime, other.prime);
    }

    pub fn add(self, other: Self) -> Self {
        self.check(other);
        Self::new(self.value as i64 + other.value as i64, self.prime)
    }

    pub fn sub(self, other: Self) -> Self {
        self.check(other);
        Self::new(self.value as i64 - other.value as i64, self.prime)
    }

    pub fn neg(self) -> Self {
        Self::new(-(self.value as i64), self.prime)
    }

    pub fn mul(self, other: Self) -> Self {
        self.check(other);
        Self::new(self.value as i64 * other.value as i64, self.prime)
    }

    /// Multiplicative inverse; panics on zero (callers guard).
    pub fn inv(self) -> Self {
        assert!(self.value != 0, "inverse of zero in F_{}", self.prime);
        // p is prime, so a^(p-2) = a^-1 by Fermat.
        self.pow(self.prime as i64 - 2)
    }

    pub fn pow(self, mut e: i64) -> Self {
        let base = if e < 0 {
            e = -e;
            self.inv()
        } else {
            self
        };
        let mut acc = Self::one(self.prime);
        for _ in 0..e {
            acc = acc.mul(base);
        }
        acc
    }
}

impl fmt::Display for FpScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// True iff `n` is a power of the prime `p` (including `p^0 = 1`).
pub fn is_p_power(n: usize, p: u32) -> bool {
    p_power_exponent(n, p).is_some()
}

/// If `n = p^m`, returns `m`.
pub fn p_power_exponent(mut n: usize, p: u32) -> Option<u32> {
    if n == 0 {
        return None;
    }
    let p = p as usize;
    let mut m = 0;
    while n > 1 {
        if n % p != 0 {
            return None;
        }
        n /= p;
        m += 1;
    }
    Some(m)
}

/// Factor `n` as `p^m` for a single prime `p`, if possible.
pub fn prime_power(n: usize) -> Option<(u32, u32)> {
    if n < 2 {
        return None;
    }
    let mut p = 2usize;
    while p * p <= n {
        if n % p == 0 {
            return p_power_exponent(n, p as u32).map(|m| (p as u32, m));
        }
        p += 1;
    }
    Some((n as u32, 1)) // n itself is prime
}
