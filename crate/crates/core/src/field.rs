//! Finite fields `F_q`, `q = p^n`, realized as `F_p[x]/(f)` with a
//! deterministic modulus and generator and an eagerly built discrete-log
//! table.
//!
//! Elements are packed into a `u32` as `c_0 + c_1 p + ... + c_{n-1} p^{n-1}`,
//! where `c_i` is the coefficient of `x^i`. For prime fields the packed value
//! is the residue itself.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ntheory::{is_prime, prime_divisors};

/// Default cap on `q`.
pub const DEFAULT_SIZE_LIMIT: u64 = 1 << 20;

/// An element of some [`FieldSpec`], stored in packed form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement(u32);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);

    /// Packed index in `[0, q)`.
    #[inline]
    pub fn index(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

/// A concrete finite field with its discrete-log machinery.
#[derive(Clone)]
pub struct FieldSpec {
    p: u32,
    n: u32,
    q: u32,
    modulus: Vec<u32>,
    generator: FieldElement,
    /// `exp[i] = g^i` for `i` in `[0, q-1)`.
    exp: Vec<u32>,
    /// `log[x]` for nonzero `x`; `log[0]` is unused.
    log: Vec<u32>,
    /// `Tr(x^i)` for `i < n`.
    trace_basis: Vec<u32>,
    /// Powers `p^i` for `i <= n`.
    radix: Vec<u32>,
}

impl fmt::Debug for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldSpec")
            .field("p", &self.p)
            .field("n", &self.n)
            .field("q", &self.q)
            .field("modulus", &self.modulus)
            .field("generator", &self.format(self.generator))
            .finish()
    }
}

impl PartialEq for FieldSpec {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p
            && self.n == other.n
            && self.modulus == other.modulus
            && self.generator == other.generator
    }
}

impl Eq for FieldSpec {}

/// Serializable summary of a field.
#[derive(Debug, Clone, Serialize)]
pub struct FieldInfo {
    pub p: u32,
    pub n: u32,
    pub q: u32,
    pub modulus: Vec<u32>,
    pub generator: String,
}

/// Builds `F_{p^n}` with the default size limit.
pub fn make_field(p: u64, n: u32) -> Result<FieldSpec> {
    FieldSpec::with_limit(p, n, DEFAULT_SIZE_LIMIT)
}

/// Builds `F_q` from `q` directly.
pub fn make_field_q(q: u64) -> Result<FieldSpec> {
    let (p, n) = crate::ntheory::prime_power(q).ok_or(Error::NotPrimePower(q))?;
    make_field(p, n)
}

impl FieldSpec {
    pub fn with_limit(p: u64, n: u32, limit: u64) -> Result<FieldSpec> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if n == 0 {
            return Err(Error::InvalidInput("extension degree must be >= 1".into()));
        }
        let q = (p as u128).checked_pow(n).unwrap_or(u128::MAX);
        if q > limit as u128 || q > u32::MAX as u128 {
            return Err(Error::TooLarge {
                size: q,
                limit: limit as u128,
            });
        }
        let p32 = p as u32;
        let q32 = q as u32;
        let radix: Vec<u32> = (0..=n).map(|i| p32.pow(i)).collect();

        let modulus = if n == 1 {
            vec![0, 1]
        } else {
            first_irreducible(p, n as usize)
        };
        let m64: Vec<u64> = modulus.iter().map(|&c| c as u64).collect();

        let order = q as u64 - 1;
        let cofactors: Vec<u64> = prime_divisors(order).into_iter().map(|r| order / r).collect();
        let generator = lex_order(p, n as usize)
            .skip(1)
            .find(|coeffs| {
                cofactors.iter().all(|&e| {
                    let h = poly_powmod(coeffs, e, &m64, p);
                    !(h.len() == 1 && h[0] == 1)
                })
            })
            .expect("multiplicative group of a finite field is cyclic");
        let gen_packed = pack(&generator, &radix);

        let mut exp = Vec::with_capacity(order as usize);
        let mut log = vec![u32::MAX; q as usize];
        let mut cur = vec![1u64];
        for i in 0..order {
            let packed = pack(&cur, &radix);
            exp.push(packed);
            log[packed as usize] = i as u32;
            cur = poly_mulmod(&cur, &generator, &m64, p);
        }

        let mut field = FieldSpec {
            p: p32,
            n,
            q: q32,
            modulus,
            generator: FieldElement(gen_packed),
            exp,
            log,
            trace_basis: Vec::new(),
            radix,
        };
        field.trace_basis = (0..n)
            .map(|i| {
                let basis = FieldElement(field.radix[i as usize]);
                let mut acc = FieldElement::ZERO;
                let mut conj = basis;
                for _ in 0..n {
                    acc = field.add(acc, conj);
                    conj = field.pow(conj, p);
                }
                debug_assert!(acc.0 < p32);
                acc.0
            })
            .collect();
        Ok(field)
    }

    #[inline]
    pub fn p(&self) -> u32 {
        self.p
    }

    #[inline]
    pub fn n(&self) -> u32 {
        self.n
    }

    #[inline]
    pub fn q(&self) -> u32 {
        self.q
    }

    /// Order of the multiplicative group.
    #[inline]
    pub fn order(&self) -> u32 {
        self.q - 1
    }

    /// Monic modulus, coefficients low to high.
    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    #[inline]
    pub fn generator(&self) -> FieldElement {
        self.generator
    }

    pub fn info(&self) -> FieldInfo {
        FieldInfo {
            p: self.p,
            n: self.n,
            q: self.q,
            modulus: self.modulus.clone(),
            generator: self.format(self.generator),
        }
    }

    /// Element from a packed index; fails if out of range.
    pub fn element(&self, index: u64) -> Result<FieldElement> {
        if index >= self.q as u64 {
            return Err(Error::InvalidInput(format!(
                "{index} is not a packed element of F_{}",
                self.q
            )));
        }
        Ok(FieldElement(index as u32))
    }

    /// Embeds an integer into the prime subfield.
    pub fn from_int(&self, v: i64) -> FieldElement {
        FieldElement(v.rem_euclid(self.p as i64) as u32)
    }

    pub fn from_coeffs(&self, coeffs: &[u32]) -> Result<FieldElement> {
        if coeffs.len() != self.n as usize || coeffs.iter().any(|&c| c >= self.p) {
            return Err(Error::InvalidInput(format!(
                "expected {} coefficients in [0, {})",
                self.n, self.p
            )));
        }
        Ok(FieldElement(
            coeffs.iter().zip(&self.radix).map(|(c, r)| c * r).sum(),
        ))
    }

    pub fn coeffs(&self, x: FieldElement) -> Vec<u32> {
        let mut v = x.0;
        (0..self.n)
            .map(|_| {
                let c = v % self.p;
                v /= self.p;
                c
            })
            .collect()
    }

    /// Iterates every element in packed order, zero first.
    pub fn elements(&self) -> impl Iterator<Item = FieldElement> {
        (0..self.q).map(FieldElement)
    }

    /// Iterates the nonzero elements as `g^0, g^1, ...`.
    pub fn units_by_log(&self) -> impl Iterator<Item = FieldElement> + '_ {
        self.exp.iter().map(|&x| FieldElement(x))
    }

    #[inline]
    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        let p = self.p;
        if self.n == 1 {
            let s = a.0 + b.0;
            return FieldElement(if s >= p { s - p } else { s });
        }
        let (mut x, mut y, mut out) = (a.0, b.0, 0);
        for &r in &self.radix[..self.n as usize] {
            let d = x % p + y % p;
            out += if d >= p { d - p } else { d } * r;
            x /= p;
            y /= p;
        }
        FieldElement(out)
    }

    #[inline]
    pub fn neg(&self, a: FieldElement) -> FieldElement {
        let p = self.p;
        if self.n == 1 {
            return FieldElement(if a.0 == 0 { 0 } else { p - a.0 });
        }
        let (mut x, mut out) = (a.0, 0);
        for &r in &self.radix[..self.n as usize] {
            let d = x % p;
            out += if d == 0 { 0 } else { p - d } * r;
            x /= p;
        }
        FieldElement(out)
    }

    #[inline]
    pub fn sub(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        if a.0 == 0 || b.0 == 0 {
            return FieldElement::ZERO;
        }
        let e = self.log[a.0 as usize] as u64 + self.log[b.0 as usize] as u64;
        FieldElement(self.exp[(e % self.order() as u64) as usize])
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement> {
        if a.0 == 0 {
            return Err(Error::DivisionByZero);
        }
        let l = self.log[a.0 as usize];
        Ok(FieldElement(self.exp[((self.order() - l) % self.order()) as usize]))
    }

    pub fn div(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// `a^e`, with `0^0 = 1`.
    #[inline]
    pub fn pow(&self, a: FieldElement, e: u64) -> FieldElement {
        if e == 0 {
            return FieldElement::ONE;
        }
        if a.0 == 0 {
            return FieldElement::ZERO;
        }
        let l = self.log[a.0 as usize] as u128 * e as u128;
        FieldElement(self.exp[(l % self.order() as u128) as usize])
    }

    /// Discrete logarithm to the base of the field generator.
    #[inline]
    pub fn dlog(&self, x: FieldElement) -> Result<u32> {
        if x.0 == 0 {
            return Err(Error::DivisionByZero);
        }
        Ok(self.log[x.0 as usize])
    }

    /// `g^e` for any exponent.
    #[inline]
    pub fn gen_pow(&self, e: u64) -> FieldElement {
        FieldElement(self.exp[(e % self.order() as u64) as usize])
    }

    /// Discrete log of `-1`: `(q-1)/2` in odd characteristic, `0` in characteristic 2.
    pub fn log_neg_one(&self) -> u32 {
        if self.p == 2 {
            0
        } else {
            self.order() / 2
        }
    }

    /// Absolute trace `Tr_{F_q/F_p}(x)` as a residue mod `p`.
    #[inline]
    pub fn trace(&self, x: FieldElement) -> u32 {
        if self.n == 1 {
            return x.0;
        }
        let mut v = x.0;
        let mut acc = 0u64;
        for &t in &self.trace_basis {
            acc += (v % self.p) as u64 * t as u64;
            v /= self.p;
        }
        (acc % self.p as u64) as u32
    }

    /// Canonical text: decimal residue for prime fields, `[c0,c1,...]` otherwise.
    pub fn format(&self, x: FieldElement) -> String {
        if self.n == 1 {
            return x.0.to_string();
        }
        let parts: Vec<String> = self.coeffs(x).iter().map(|c| c.to_string()).collect();
        format!("[{}]", parts.join(","))
    }

    /// Parses the canonical text encoding. A bare (possibly negative) integer is
    /// accepted in any field and embedded into the prime subfield.
    pub fn parse(&self, text: &str) -> Result<FieldElement> {
        let t = text.trim();
        if let Some(inner) = t.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let coeffs = inner
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<u32>()
                        .map_err(|_| Error::InvalidInput(format!("bad coefficient in {text:?}")))
                })
                .collect::<Result<Vec<u32>>>()?;
            return self.from_coeffs(&coeffs);
        }
        let v: i64 = t
            .parse()
            .map_err(|_| Error::InvalidInput(format!("cannot parse field element {text:?}")))?;
        Ok(self.from_int(v))
    }
}

fn pack(coeffs: &[u64], radix: &[u32]) -> u32 {
    coeffs
        .iter()
        .zip(radix)
        .map(|(&c, &r)| c as u32 * r)
        .sum()
}

/// Coefficient vectors of length `n` in lexicographic order, `c_0` compared first.
fn lex_order(p: u64, n: usize) -> impl Iterator<Item = Vec<u64>> {
    let total = p.pow(n as u32);
    (0..total).map(move |mut t| {
        let mut v = vec![0u64; n];
        for i in (0..n).rev() {
            v[i] = t % p;
            t /= p;
        }
        v
    })
}

/// First monic irreducible of degree `n` over `F_p`, in lexicographic order
/// of the low-to-high coefficient list.
fn first_irreducible(p: u64, n: usize) -> Vec<u32> {
    lex_order(p, n)
        .map(|mut low| {
            low.push(1);
            low
        })
        .find(|f| is_irreducible(f, p))
        .map(|f| f.into_iter().map(|c| c as u32).collect())
        .expect("irreducible polynomials exist in every degree")
}

// Polynomials over F_p: Vec<u64>, low to high, no trailing zeros (zero = []).

fn trim(mut a: Vec<u64>) -> Vec<u64> {
    while a.last() == Some(&0) {
        a.pop();
    }
    a
}

fn poly_rem(a: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    let mut r = trim(a.to_vec());
    let dm = m.len() - 1;
    let lead_inv = crate::ntheory::pow_mod(m[dm], p - 2, p);
    while r.len() > dm {
        let shift = r.len() - 1 - dm;
        let c = r[r.len() - 1] * lead_inv % p;
        for (i, &mc) in m.iter().enumerate() {
            r[shift + i] = (r[shift + i] + p - c * mc % p) % p;
        }
        r = trim(r);
    }
    r
}

fn poly_mulmod(a: &[u64], b: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut prod = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            prod[i + j] = (prod[i + j] + x * y) % p;
        }
    }
    poly_rem(&prod, m, p)
}

fn poly_powmod(base: &[u64], mut e: u64, m: &[u64], p: u64) -> Vec<u64> {
    let mut acc = poly_rem(&[1], m, p);
    let mut b = poly_rem(base, m, p);
    while e > 0 {
        if e & 1 == 1 {
            acc = poly_mulmod(&acc, &b, m, p);
        }
        b = poly_mulmod(&b, &b, m, p);
        e >>= 1;
    }
    acc
}

fn poly_sub(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let len = a.len().max(b.len());
    let out = (0..len)
        .map(|i| {
            let x = a.get(i).copied().unwrap_or(0);
            let y = b.get(i).copied().unwrap_or(0);
            (x + p - y) % p
        })
        .collect();
    trim(out)
}

fn poly_gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut x = trim(a.to_vec());
    let mut y = trim(b.to_vec());
    while !y.is_empty() {
        let r = poly_rem(&x, &y, p);
        x = y;
        y = r;
    }
    x
}

/// Rabin's test: `f` of degree `n` is irreducible over `F_p` iff
/// `x^{p^n} = x mod f` and `gcd(x^{p^{n/r}} - x, f) = 1` for every prime `r | n`.
pub(crate) fn is_irreducible(f: &[u64], p: u64) -> bool {
    let n = f.len() - 1;
    if n == 0 {
        return false;
    }
    if n == 1 {
        return true;
    }
    let x = vec![0u64, 1];
    let frob = |k: usize| {
        let mut h = poly_rem(&x, f, p);
        for _ in 0..k {
            h = poly_powmod(&h, p, f, p);
        }
        h
    };
    if poly_sub(&frob(n), &poly_rem(&x, f, p), p) != Vec::<u64>::new() {
        return false;
    }
    prime_divisors(n as u64).into_iter().all(|r| {
        let h = poly_sub(&frob(n / r as usize), &x, p);
        let g = poly_gcd(f, &h, p);
        g.len() == 1
    })
}
