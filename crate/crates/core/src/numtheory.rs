//! Arbitrary-precision modular arithmetic and the number-theoretic procedures
//! the scheme and the attacks are built on.
//!
//! Every protocol quantity is a [`Nat`]. Signed values only show up inside
//! [`ext_gcd`] and [`mod_inv`]; everything public is reduced into
//! `[0, modulus)`.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

/// Arbitrary-precision non-negative integer.
pub type Nat = BigUint;

/// Prime factorization as `(prime, exponent)` pairs, primes ascending.
pub type Factors = Vec<(Nat, u32)>;

/// Miller-Rabin rounds used when callers have no reason to pick their own.
pub const DEFAULT_MR_ROUNDS: usize = 32;

/// Trial-division factoring is only attempted below this bound.
const TRIAL_DIVISION_LIMIT_BITS: u64 = 40;

const SMALL_PRIMES: [u64; 54] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191,
    193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251,
];

/// Witnesses that make Miller-Rabin deterministic for every n < 2^64.
const U64_WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumError {
    #[error("modulus must be at least 2")]
    ModulusTooSmall,
    #[error("gcd(0, 0) is undefined")]
    BothZero,
    #[error("{value} is not invertible (gcd with modulus = {gcd})")]
    NotInvertible { value: Nat, gcd: Nat },
    #[error("arguments are not coprime (gcd = {gcd})")]
    NotCoprime { gcd: Nat },
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
    #[error("no common primitive element found in {attempts} candidates")]
    NotFound { attempts: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("malformed hex integer {0:?}")]
    Encoding(String),
}

/// Bézout coefficients: `first * u + second * v = gcd`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bezout {
    pub gcd: Nat,
    pub u: BigInt,
    pub v: BigInt,
}

/// Canonical wire form: lowercase hex, no leading zeros, `"0"` for zero.
pub fn to_hex(value: &Nat) -> String {
    value.to_str_radix(16)
}

/// Strict inverse of [`to_hex`]; rejects anything that is not canonical.
pub fn from_hex(text: &str) -> Result<Nat, NumError> {
    let canonical = !text.is_empty()
        && text.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
        && (text == "0" || !text.starts_with('0'));
    if !canonical {
        return Err(NumError::Encoding(text.to_owned()));
    }
    BigUint::parse_bytes(text.as_bytes(), 16).ok_or_else(|| NumError::Encoding(text.to_owned()))
}

/// Serde adapter encoding [`Nat`] fields in the canonical hex form.
pub mod hex_serde {
    use super::{from_hex, to_hex, Nat};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Nat, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&to_hex(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Nat, D::Error> {
        let text = <std::borrow::Cow<'de, str>>::deserialize(deserializer)?;
        from_hex(&text).map_err(D::Error::custom)
    }
}

/// `base^exponent mod modulus` by square-and-multiply.
pub fn mod_pow(base: &Nat, exponent: &Nat, modulus: &Nat) -> Result<Nat, NumError> {
    if *modulus < Nat::from(2u8) {
        return Err(NumError::ModulusTooSmall);
    }
    Ok(base.modpow(exponent, modulus))
}

pub fn gcd(a: &Nat, b: &Nat) -> Nat {
    a.gcd(b)
}

/// Extended Euclidean algorithm.
pub fn ext_gcd(a: &Nat, b: &Nat) -> Result<Bezout, NumError> {
    if a.is_zero() && b.is_zero() {
        return Err(NumError::BothZero);
    }
    let (mut old_r, mut r) = (BigInt::from(a.clone()), BigInt::from(b.clone()));
    let (mut old_u, mut u) = (BigInt::one(), BigInt::zero());
    let (mut old_v, mut v) = (BigInt::zero(), BigInt::one());
    while !r.is_zero() {
        let quotient = &old_r / &r;
        let next_r = &old_r - &quotient * &r;
        old_r = std::mem::replace(&mut r, next_r);
        let next_u = &old_u - &quotient * &u;
        old_u = std::mem::replace(&mut u, next_u);
        let next_v = &old_v - &quotient * &v;
        old_v = std::mem::replace(&mut v, next_v);
    }
    Ok(Bezout {
        gcd: old_r.to_biguint().expect("remainders stay non-negative"),
        u: old_u,
        v: old_v,
    })
}

/// Reduces a signed value into `[0, modulus)`.
pub fn reduce_signed(value: &BigInt, modulus: &Nat) -> Nat {
    let m = BigInt::from(modulus.clone());
    value
        .mod_floor(&m)
        .to_biguint()
        .expect("floor remainder is non-negative")
}

/// Multiplicative inverse of `a` modulo `modulus`, in `[1, modulus)`.
///
/// A gcd strictly between 1 and `modulus` is a factor of the modulus; callers
/// holding an RSA modulus must treat that as a critical finding.
pub fn mod_inv(a: &Nat, modulus: &Nat) -> Result<Nat, NumError> {
    if *modulus < Nat::from(2u8) {
        return Err(NumError::ModulusTooSmall);
    }
    let reduced = a % modulus;
    let bezout = ext_gcd(&reduced, modulus)?;
    if !bezout.gcd.is_one() {
        return Err(NumError::NotInvertible {
            value: a.clone(),
            gcd: bezout.gcd,
        });
    }
    Ok(reduce_signed(&bezout.u, modulus))
}

fn mul_mod_u64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod_u64(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod_u64(acc, base, m);
        }
        base = mul_mod_u64(base, base, m);
        exp >>= 1;
    }
    acc
}

fn miller_rabin_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &SMALL_PRIMES {
        if n == p {
            return true;
        }
        if n.is_multiple_of(p) {
            return false;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &U64_WITNESSES {
        let mut x = pow_mod_u64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod_u64(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn miller_rabin_witness(n: &Nat, n_minus_1: &Nat, d: &Nat, s: u64, a: &Nat) -> bool {
    let mut x = a.modpow(d, n);
    if x.is_one() || x == *n_minus_1 {
        return true;
    }
    for _ in 1..s {
        x = &x * &x % n;
        if x == *n_minus_1 {
            return true;
        }
    }
    false
}

/// Miller-Rabin primality test.
///
/// Exact for `n < 2^64` (fixed witness set). Above that, the fixed witnesses
/// are followed by `rounds` witnesses drawn from a stream seeded by `n`
/// itself, so the answer is a pure function of the inputs.
pub fn is_probable_prime(n: &Nat, rounds: usize) -> bool {
    if let Some(small) = n.to_u64() {
        return miller_rabin_u64(small);
    }
    if SMALL_PRIMES.iter().any(|&p| (n % p).is_zero()) {
        return false;
    }
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().expect("n > 2^64 so n - 1 > 0");
    let d = &n_minus_1 >> s;
    for &a in &U64_WITNESSES {
        if !miller_rabin_witness(n, &n_minus_1, &d, s, &Nat::from(a)) {
            return false;
        }
    }
    let mut seed = [0u8; 32];
    let digits = n.to_bytes_le();
    for (i, byte) in digits.iter().enumerate() {
        seed[i % 32] ^= byte.rotate_left((i / 32) as u32);
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    let upper = n - 3u32;
    for _ in 0..rounds.max(1) {
        let a = random_below(&upper, &mut rng) + 2u32;
        if !miller_rabin_witness(n, &n_minus_1, &d, s, &a) {
            return false;
        }
    }
    true
}

/// Uniform value in `[0, bound)`. `bound` must be non-zero.
pub fn random_below<R: RngCore + ?Sized>(bound: &Nat, rng: &mut R) -> Nat {
    assert!(!bound.is_zero(), "random_below needs a positive bound");
    let bits = bound.bits();
    let bytes = bits.div_ceil(8) as usize;
    let excess = (bytes as u64 * 8 - bits) as u32;
    let mut buf = vec![0u8; bytes];
    loop {
        rng.fill_bytes(&mut buf);
        buf[0] &= 0xffu8 >> excess;
        let candidate = BigUint::from_bytes_be(&buf);
        if candidate < *bound {
            return candidate;
        }
    }
}

/// Uniform value in `[low, high]`.
pub fn random_range<R: RngCore + ?Sized>(low: &Nat, high: &Nat, rng: &mut R) -> Nat {
    assert!(low <= high, "empty range");
    let span = high - low + 1u32;
    low + random_below(&span, rng)
}

/// Random odd integer with exactly `bits` bits.
fn random_odd_candidate<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Nat {
    if bits <= 64 {
        let mask = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
        let v = (rng.next_u64() & mask) | (1u64 << (bits - 1)) | 1;
        return Nat::from(v);
    }
    let bytes = bits.div_ceil(8) as usize;
    let mut buf = vec![0u8; bytes];
    rng.fill_bytes(&mut buf);
    let mut v = BigUint::from_bytes_be(&buf);
    v &= (Nat::one() << bits) - 1u32;
    v.set_bit(bits - 1, true);
    v.set_bit(0, true);
    v
}

/// A prime of exactly `bits` bits. Deterministic for a given RNG state.
pub fn gen_prime<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Result<Nat, NumError> {
    if bits < 3 {
        return Err(NumError::InvalidArgument("prime size must be at least 3 bits"));
    }
    loop {
        let candidate = random_odd_candidate(bits, rng);
        if is_probable_prime(&candidate, DEFAULT_MR_ROUNDS) {
            return Ok(candidate);
        }
    }
}

fn has_small_factor(n: &Nat) -> bool {
    match n.to_u64() {
        Some(v) => SMALL_PRIMES.iter().any(|&p| v != p && v % p == 0),
        None => SMALL_PRIMES.iter().any(|&p| (n % p).is_zero()),
    }
}

/// A safe prime `p = 2p' + 1` (with `p'` prime) of exactly `bits` bits.
pub fn gen_safe_prime<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Result<Nat, NumError> {
    if bits < 3 {
        return Err(NumError::InvalidArgument("prime size must be at least 3 bits"));
    }
    loop {
        let candidate = random_odd_candidate(bits, rng);
        let half: Nat = &candidate >> 1u32;
        if has_small_factor(&candidate) || has_small_factor(&half) {
            continue;
        }
        if is_probable_prime(&half, DEFAULT_MR_ROUNDS)
            && is_probable_prime(&candidate, DEFAULT_MR_ROUNDS)
        {
            return Ok(candidate);
        }
    }
}

/// Factors `n` by trial division. Only defined below 2^40.
pub fn factor_small(n: &Nat) -> Result<Factors, NumError> {
    if n.bits() > TRIAL_DIVISION_LIMIT_BITS {
        return Err(NumError::Unsupported("trial division is limited to 40-bit inputs"));
    }
    let mut rest = n.to_u64().expect("checked bit length");
    if rest == 0 {
        return Err(NumError::InvalidArgument("cannot factor zero"));
    }
    let mut factors = Factors::new();
    let mut divisor = 2u64;
    while divisor * divisor <= rest {
        let mut exponent = 0u32;
        while rest.is_multiple_of(divisor) {
            rest /= divisor;
            exponent += 1;
        }
        if exponent > 0 {
            factors.push((Nat::from(divisor), exponent));
        }
        divisor += if divisor == 2 { 1 } else { 2 };
    }
    if rest > 1 {
        factors.push((Nat::from(rest), 1));
    }
    Ok(factors)
}

/// Factorization of `p - 1` for a prime `p`: the safe-prime shape `2·p'` is
/// recognised at any size, anything else falls back to trial division.
pub fn factor_prime_minus_one(p: &Nat) -> Result<Factors, NumError> {
    if *p < Nat::from(3u8) {
        return Err(NumError::InvalidArgument("expected an odd prime"));
    }
    let half: Nat = (p - 1u32) >> 1u32;
    if half == Nat::from(2u8) {
        return Ok(vec![(Nat::from(2u8), 2)]);
    }
    if half.is_odd() && is_probable_prime(&half, DEFAULT_MR_ROUNDS) {
        return Ok(vec![(Nat::from(2u8), 1), (half, 1)]);
    }
    factor_small(&(p - 1u32))
}

fn merge_max(into: &mut Factors, other: &Factors) {
    for (prime, exponent) in other {
        match into.iter_mut().find(|(p, _)| p == prime) {
            Some(entry) => entry.1 = entry.1.max(*exponent),
            None => into.push((prime.clone(), *exponent)),
        }
    }
    into.sort();
}

pub fn factors_product(factors: &Factors) -> Nat {
    factors
        .iter()
        .fold(Nat::one(), |acc, (p, k)| acc * p.pow(*k))
}

/// Carmichael function `λ(pq) = lcm(p-1, q-1)` for distinct odd primes,
/// returned together with its factorization.
pub fn carmichael_of_primes(p: &Nat, q: &Nat) -> Result<(Nat, Factors), NumError> {
    let mut factors = factor_prime_minus_one(p)?;
    merge_max(&mut factors, &factor_prime_minus_one(q)?);
    Ok((factors_product(&factors), factors))
}

/// Carmichael function of a small modulus, from its trial-division factorization.
fn carmichael_small(modulus: &Nat) -> Result<Nat, NumError> {
    let mut lambda = Nat::one();
    for (prime, exponent) in factor_small(modulus)? {
        let part = if prime == Nat::from(2u8) {
            match exponent {
                1 => Nat::one(),
                2 => Nat::from(2u8),
                k => Nat::one() << (k - 2),
            }
        } else {
            prime.pow(exponent - 1) * (&prime - 1u32)
        };
        lambda = lambda.lcm(&part);
    }
    Ok(lambda)
}

/// Smallest `t >= 1` with `a^t ≡ 1 (mod modulus)`, for desk-scale moduli
/// (below 2^32).
pub fn multiplicative_order(a: &Nat, modulus: &Nat) -> Result<Nat, NumError> {
    if *modulus < Nat::from(2u8) {
        return Err(NumError::ModulusTooSmall);
    }
    let g = gcd(a, modulus);
    if !g.is_one() {
        return Err(NumError::NotCoprime { gcd: g });
    }
    if modulus.bits() > 32 {
        return Err(NumError::Unsupported(
            "order of large moduli needs a factorization of the group exponent",
        ));
    }
    let lambda = carmichael_small(modulus)?;
    multiplicative_order_with(a, modulus, &factor_small(&lambda)?)
}

/// Multiplicative order given the factorization of a multiple of it
/// (normally `λ(modulus)`).
pub fn multiplicative_order_with(
    a: &Nat,
    modulus: &Nat,
    exponent_factors: &Factors,
) -> Result<Nat, NumError> {
    if *modulus < Nat::from(2u8) {
        return Err(NumError::ModulusTooSmall);
    }
    let g = gcd(a, modulus);
    if !g.is_one() {
        return Err(NumError::NotCoprime { gcd: g });
    }
    let a = a % modulus;
    let mut order = factors_product(exponent_factors);
    if !a.modpow(&order, modulus).is_one() {
        return Err(NumError::InvalidArgument(
            "supplied exponent is not a multiple of the order",
        ));
    }
    for (prime, exponent) in exponent_factors {
        for _ in 0..*exponent {
            let candidate = &order / prime;
            if a.modpow(&candidate, modulus).is_one() {
                order = candidate;
            } else {
                break;
            }
        }
    }
    Ok(order)
}

/// Whether `g` generates the full multiplicative group of the prime field
/// `GF(p)`, given the distinct prime factors of `p - 1`.
pub fn is_primitive_mod_prime(g: &Nat, p: &Nat, p_minus_1_factors: &Factors) -> bool {
    let g = g % p;
    if g.is_zero() {
        return false;
    }
    let p_minus_1 = p - 1u32;
    p_minus_1_factors
        .iter()
        .all(|(r, _)| !g.modpow(&(&p_minus_1 / r), p).is_one())
}

/// Random `g` in `[2, pq - 1]` that is primitive in both `GF(p)` and `GF(q)`.
///
/// Tries `4 * bitlen(pq)` candidates before giving up with
/// [`NumError::NotFound`]; the caller is expected to regenerate primes.
pub fn common_primitive_element<R: RngCore + ?Sized>(
    p: &Nat,
    q: &Nat,
    rng: &mut R,
) -> Result<Nat, NumError> {
    if p == q {
        return Err(NumError::InvalidArgument("p and q must be distinct"));
    }
    let p_factors = factor_prime_minus_one(p)?;
    let q_factors = factor_prime_minus_one(q)?;
    let n = p * q;
    let attempts = 4 * n.bits() as usize;
    let high = &n - 1u32;
    let low = Nat::from(2u8);
    for _ in 0..attempts {
        let g = random_range(&low, &high, rng);
        if is_primitive_mod_prime(&g, p, &p_factors) && is_primitive_mod_prime(&g, q, &q_factors) {
            return Ok(g);
        }
    }
    Err(NumError::NotFound { attempts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn nat(v: u64) -> Nat {
        Nat::from(v)
    }

    fn naive_pow(base: u64, exp: u64, modulus: u64) -> u64 {
        let mut acc = 1 % modulus;
        for _ in 0..exp {
            acc = acc * (base % modulus) % modulus;
        }
        acc
    }

    fn naive_order(a: u64, m: u64) -> u64 {
        let mut x = a % m;
        let mut t = 1;
        while x != 1 {
            x = x * (a % m) % m;
            t += 1;
        }
        t
    }

    fn trial_is_prime(n: u64) -> bool {
        n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn mod_pow_examples() {
        assert_eq!(naive_pow(3, 8, 35), 16);
        assert_eq!(naive_pow(2, 15, 35), 8);
        assert_eq!(mod_pow(&nat(3), &nat(8), &nat(35)).unwrap(), nat(16));
        assert_eq!(mod_pow(&nat(2), &nat(15), &nat(35)).unwrap(), nat(8));
        assert_eq!(mod_pow(&nat(12345), &nat(0), &nat(35)).unwrap(), nat(1));
        assert_eq!(mod_pow(&nat(3), &nat(8), &nat(1)), Err(NumError::ModulusTooSmall));
    }

    #[test]
    fn ext_gcd_examples() {
        let b = ext_gcd(&nat(5), &nat(7)).unwrap();
        assert_eq!((b.gcd, b.u, b.v), (nat(1), BigInt::from(3), BigInt::from(-2)));

        let b = ext_gcd(&nat(42), &nat(0)).unwrap();
        assert_eq!((b.gcd, b.u, b.v), (nat(42), BigInt::one(), BigInt::zero()));

        let b = ext_gcd(&nat(6), &nat(35)).unwrap();
        assert_eq!(b.gcd, nat(1));
        assert_eq!(BigInt::from(6) * &b.u + BigInt::from(35) * &b.v, BigInt::one());

        assert_eq!(ext_gcd(&nat(0), &nat(0)), Err(NumError::BothZero));
    }

    #[test]
    fn mod_inv_examples() {
        assert_eq!(mod_inv(&nat(2), &nat(35)).unwrap(), nat(18));
        assert_eq!(mod_inv(&nat(1), &nat(35)).unwrap(), nat(1));
        assert_eq!(
            mod_inv(&nat(5), &nat(10)),
            Err(NumError::NotInvertible { value: nat(5), gcd: nat(5) })
        );
        assert!(matches!(mod_inv(&nat(35), &nat(35)), Err(NumError::NotInvertible { .. })));
    }

    #[test]
    fn primality_examples() {
        assert!(is_probable_prime(&nat(7), 32));
        assert!(!is_probable_prime(&nat(35), 32));
        assert!(!trial_is_prime(561));
        assert!(!is_probable_prime(&nat(561), 32));
        // Mersenne prime 2^127 - 1 and a product of two 64-bit primes.
        let m127 = (Nat::one() << 127u32) - 1u32;
        assert!(is_probable_prime(&m127, 32));
        let composite = nat(18446744073709551557) * nat(18446744073709551533);
        assert!(!is_probable_prime(&composite, 32));
    }

    #[test]
    fn primality_matches_trial_division_below_5000() {
        for n in 0..5000u64 {
            assert_eq!(is_probable_prime(&nat(n), 4), trial_is_prime(n), "n = {n}");
        }
    }

    #[test]
    fn gen_prime_examples() {
        for seed in 0..20 {
            let p = gen_prime(3, &mut rng(seed)).unwrap();
            assert!(p == nat(5) || p == nat(7));
            let p = gen_prime(8, &mut rng(seed)).unwrap();
            assert!(p >= nat(128) && p <= nat(251) && is_probable_prime(&p, 32));
        }
        assert_eq!(gen_prime(64, &mut rng(9)).unwrap(), gen_prime(64, &mut rng(9)).unwrap());
        let big = gen_prime(160, &mut rng(3)).unwrap();
        assert_eq!(big.bits(), 160);
    }

    #[test]
    fn safe_primes_have_safe_shape() {
        for bits in [3u64, 4, 8, 16, 32, 64, 80] {
            let p = gen_safe_prime(bits, &mut rng(bits)).unwrap();
            assert_eq!(p.bits(), bits);
            assert!(is_probable_prime(&p, 32));
            assert!(is_probable_prime(&((&p - 1u32) >> 1u32), 32));
        }
    }

    #[test]
    fn order_examples() {
        assert_eq!(naive_order(2, 35), 12);
        assert_eq!(naive_order(3, 7), 6);
        assert_eq!(multiplicative_order(&nat(2), &nat(35)).unwrap(), nat(12));
        assert_eq!(multiplicative_order(&nat(1), &nat(35)).unwrap(), nat(1));
        assert_eq!(multiplicative_order(&nat(3), &nat(7)).unwrap(), nat(6));
        assert_eq!(
            multiplicative_order(&nat(5), &nat(35)),
            Err(NumError::NotCoprime { gcd: nat(5) })
        );
        let big = (Nat::one() << 40u32) + 15u32;
        assert!(matches!(multiplicative_order(&nat(3), &big), Err(NumError::Unsupported(_))));
    }

    #[test]
    fn common_primitive_element_toy() {
        // Brute-force every candidate for (5, 7): 3 must be among them.
        let valid: Vec<u64> = (2..35)
            .filter(|&g| g % 5 != 0 && g % 7 != 0)
            .filter(|&g| naive_order(g, 5) == 4 && naive_order(g, 7) == 6)
            .collect();
        assert!(valid.contains(&3));
        let mut found = 0;
        for seed in 0..40 {
            if let Ok(g) = common_primitive_element(&nat(5), &nat(7), &mut rng(seed)) {
                assert!(valid.contains(&g.to_u64().unwrap()), "g = {g}");
                found += 1;
            }
        }
        assert!(found > 30);

        for seed in 0..10 {
            let g = common_primitive_element(&nat(7), &nat(11), &mut rng(seed)).unwrap();
            let g = g.to_u64().unwrap();
            assert_eq!(naive_order(g, 7), 6);
            assert_eq!(naive_order(g, 11), 10);
        }
    }

    #[test]
    fn hex_is_canonical() {
        assert_eq!(to_hex(&nat(0)), "0");
        assert_eq!(to_hex(&nat(255)), "ff");
        assert_eq!(from_hex("ff").unwrap(), nat(255));
        assert_eq!(from_hex("0").unwrap(), nat(0));
        for bad in ["", "0ff", "FF", "00", "-1", "x", " 1"] {
            assert!(from_hex(bad).is_err(), "{bad:?}");
        }
        let wide = (Nat::one() << 4096u32) - 1u32;
        assert_eq!(from_hex(&to_hex(&wide)).unwrap(), wide);
    }

    proptest! {
        #[test]
        fn mod_pow_matches_naive(base in 0u64..1000, exp in 0u64..=12, modulus in 2u64..1000) {
            prop_assert_eq!(
                mod_pow(&nat(base), &nat(exp), &nat(modulus)).unwrap(),
                nat(naive_pow(base, exp, modulus))
            );
        }

        #[test]
        fn bezout_identity(a in any::<u128>(), b in any::<u128>()) {
            prop_assume!(a != 0 || b != 0);
            let (a, b) = (Nat::from(a), Nat::from(b));
            let r = ext_gcd(&a, &b).unwrap();
            prop_assert_eq!(&r.gcd, &a.gcd(&b));
            prop_assert_eq!(
                BigInt::from(a) * &r.u + BigInt::from(b) * &r.v,
                BigInt::from(r.gcd.clone())
            );
        }

        #[test]
        fn inverse_round_trip(a in any::<u64>(), m in 2u64..) {
            let (a, m) = (nat(a), nat(m));
            match mod_inv(&a, &m) {
                Ok(x) => {
                    prop_assert!(x < m && !x.is_zero());
                    prop_assert!((&a * &x % &m).is_one());
                }
                Err(NumError::NotInvertible { gcd, .. }) => prop_assert!(!gcd.is_one()),
                Err(e) => prop_assert!(false, "unexpected {e}"),
            }
        }

        #[test]
        fn order_divides_lambda(p_idx in 0usize..20, q_idx in 0usize..20, a in 2u64..100_000) {
            let primes = [3u64, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73];
            prop_assume!(p_idx != q_idx);
            let (p, q) = (primes[p_idx], primes[q_idx]);
            let m = p * q;
            prop_assume!(a % p != 0 && a % q != 0);
            let lambda = (p - 1).lcm(&(q - 1));
            let order = multiplicative_order(&nat(a), &nat(m)).unwrap();
            prop_assert_eq!(order.clone(), nat(naive_order(a, m)));
            prop_assert!((nat(lambda) % order).is_zero());
        }

        #[test]
        fn primitive_elements_have_full_order(seed in any::<u64>(), bits in 3u64..12) {
            let mut r = rng(seed);
            let p = gen_safe_prime(bits, &mut r).unwrap();
            let q = gen_safe_prime(bits + 1, &mut r).unwrap();
            let again = common_primitive_element(&p, &q, &mut rng(seed));
            if let Ok(g) = common_primitive_element(&p, &q, &mut rng(seed)) {
                prop_assert_eq!(Ok(g.clone()), again);
                prop_assert_eq!(multiplicative_order(&g, &p).unwrap(), &p - 1u32);
                prop_assert_eq!(multiplicative_order(&g, &q).unwrap(), &q - 1u32);
            }
        }
    }
}
