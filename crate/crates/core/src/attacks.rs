//! Forgery constructions against the scheme.
//!
//! Each constructor takes a captured legitimate login plus attacker-side
//! choices and returns a transcript holding the forged [`LoginRequest`]. None
//! of them touch `d`, `p`, `q`, a password or a card nonce. The one exception
//! is [`InverseTsMode::Whitebox`], which is an analysis tool and takes a
//! [`GroupOracle`] built from KIC secrets.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand_core::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numtheory::{
    self, ext_gcd, gcd, hex_serde, mod_inv, multiplicative_order_with, random_range, Factors,
    Nat, NumError,
};
use crate::protocol::{
    KicParams, LoginRequest, ProtocolError, RegistrationEndpoint, SmartCardContents, Timestamp,
    UserCredentials,
};

/// Why an attack could not be mounted against a particular intercept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Infeasible {
    /// `gcd(e, t_a) != 1`.
    SharedFactor {
        #[serde(with = "hex_serde")]
        gcd: Nat,
    },
    NoDivisorInWindow,
    TimestampTooLarge,
    /// A modular inverse the construction needs does not exist.
    NotInvertible {
        #[serde(with = "hex_serde")]
        gcd: Nat,
    },
    RegistrationRefused { detail: String },
    /// The nonce `k` is not a unit modulo `n`.
    NonUnitNonce,
    /// White-box mode was requested without KIC-side analysis access.
    AnalysisRequired,
}

impl fmt::Display for Infeasible {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Infeasible::SharedFactor { gcd } => write!(f, "gcd(e, t_a) = {gcd}"),
            Infeasible::NoDivisorInWindow => f.write_str("no divisor of t inside the window"),
            Infeasible::TimestampTooLarge => f.write_str("timestamp too large for divisor search"),
            Infeasible::NotInvertible { gcd } => write!(f, "required inverse missing (gcd = {gcd})"),
            Infeasible::RegistrationRefused { detail } => write!(f, "KIC refused registration: {detail}"),
            Infeasible::NonUnitNonce => f.write_str("k is not invertible modulo n"),
            Infeasible::AnalysisRequired => f.write_str("white-box mode needs KIC secret access"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttackError {
    #[error("infeasible: {0}")]
    Infeasible(Infeasible),
    /// The intercept exposed a non-trivial factor of the modulus.
    #[error("critical finding: modulus factor {factor}")]
    CriticalFinding { factor: Nat },
}

impl From<Infeasible> for AttackError {
    fn from(reason: Infeasible) -> Self {
        AttackError::Infeasible(reason)
    }
}

/// Inverse of `value` mod `n`, where a missing inverse means the modulus
/// factored.
fn invert_mod_n(value: &Nat, n: &Nat) -> Result<Nat, AttackError> {
    match mod_inv(value, n) {
        Ok(inverse) => Ok(inverse),
        Err(NumError::NotInvertible { gcd, .. }) if gcd != *n => {
            Err(AttackError::CriticalFinding { factor: gcd })
        }
        Err(NumError::NotInvertible { gcd, .. }) => Err(Infeasible::NotInvertible { gcd }.into()),
        Err(_) => Err(Infeasible::NotInvertible { gcd: n.clone() }.into()),
    }
}

/// A login request the eavesdropper captured, kept in its canonical wire form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Intercept {
    pub m: LoginRequest,
    pub captured_at: Timestamp,
    pub wire: String,
}

impl Intercept {
    pub fn capture(m: &LoginRequest, captured_at: Timestamp) -> Self {
        Self {
            wire: m.to_wire(),
            m: m.clone(),
            captured_at,
        }
    }

    pub fn from_wire(line: &str, captured_at: Timestamp) -> Result<Self, ProtocolError> {
        let m = LoginRequest::from_wire(line)?;
        Ok(Self::capture(&m, captured_at))
    }
}

fn forged_from(m: &LoginRequest, x: Nat, y: Nat, t: Timestamp) -> LoginRequest {
    LoginRequest {
        id: m.id.clone(),
        cid: m.cid.clone(),
        x,
        y,
        n: m.n.clone(),
        e: m.e.clone(),
        g: m.g.clone(),
        t,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EuclidForgery {
    pub t_a: Timestamp,
    #[serde(with = "hex_serde")]
    pub u: Nat,
    #[serde(with = "hex_serde")]
    pub v: Nat,
    pub forged: LoginRequest,
}

/// Bézout forgery: with `e·u - t_a·v = 1`, sends `X = (ID^CID)^v`,
/// `Y = (ID^CID)^u` at timestamp `t_a`.
pub fn forge_via_euclid(intercept: &Intercept, t_a: &Timestamp) -> Result<EuclidForgery, AttackError> {
    let m = &intercept.m;
    let shared = gcd(&m.e, t_a.ticks());
    if !shared.is_one() {
        return Err(Infeasible::SharedFactor { gcd: shared }.into());
    }
    let id_gcd = gcd(&m.id, &m.n);
    if !id_gcd.is_one() {
        return Err(AttackError::CriticalFinding { factor: id_gcd });
    }
    let (u, v) = positive_bezout(&m.e, t_a.ticks());
    let base = m.id.modpow(&m.cid, &m.n);
    let x = base.modpow(&v, &m.n);
    let y = base.modpow(&u, &m.n);
    Ok(EuclidForgery {
        t_a: t_a.clone(),
        u,
        v,
        forged: forged_from(m, x, y, t_a.clone()),
    })
}

/// Smallest strictly positive `(u, v)` with `e·u - t·v = 1`, for coprime `e, t`.
fn positive_bezout(e: &Nat, t: &Nat) -> (Nat, Nat) {
    let bezout = ext_gcd(e, t).expect("e > 1");
    let (e_int, t_int) = (BigInt::from(e.clone()), BigInt::from(t.clone()));
    // e·u0 + t·v0 = 1  =>  e·u0 - t·(-v0) = 1; every solution is
    // (u0 + k·t, -v0 + k·e).
    let u0 = bezout.u;
    let v0 = -bezout.v;
    let k_u: BigInt = (-&u0).div_floor(&t_int) + 1;
    let k_v = (-&v0).div_floor(&e_int) + 1;
    let k = k_u.max(k_v);
    let u = u0 + &k * &t_int;
    let v = v0 + &k * &e_int;
    (
        u.to_biguint().expect("shifted to positive"),
        v.to_biguint().expect("shifted to positive"),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TimeFactorForgery {
    #[serde(with = "hex_serde")]
    pub w: Nat,
    pub t_a: Timestamp,
    pub forged: LoginRequest,
}

/// Largest timestamp the divisor search will trial-divide.
pub const MAX_FACTORED_TIMESTAMP: u64 = 1 << 48;

/// Divisors of `t`, ascending.
fn divisors(t: u64) -> Vec<u64> {
    let mut low = Vec::new();
    let mut high = Vec::new();
    let mut d = 1u64;
    while d.saturating_mul(d) <= t {
        if t.is_multiple_of(d) {
            low.push(d);
            if d != t / d {
                high.push(t / d);
            }
        }
        d += 1;
    }
    low.extend(high.into_iter().rev());
    low
}

/// Time-factor forgery: picks the largest divisor `t_a` of the intercepted
/// `t` inside `window` (inclusive), raises `X` to `w = t / t_a` and replays `Y`.
pub fn forge_via_time_factor(
    intercept: &Intercept,
    window: (&Timestamp, &Timestamp),
) -> Result<TimeFactorForgery, AttackError> {
    let m = &intercept.m;
    let t = m
        .t
        .ticks()
        .to_u64()
        .filter(|&t| t <= MAX_FACTORED_TIMESTAMP)
        .ok_or(Infeasible::TimestampTooLarge)?;
    let (lo, hi) = window;
    let t_a = divisors(t)
        .into_iter()
        .rev()
        .map(Nat::from)
        .find(|d| d >= lo.ticks() && d <= hi.ticks())
        .ok_or(Infeasible::NoDivisorInWindow)?;
    let w = m.t.ticks() / &t_a;
    let x = m.x.modpow(&w, &m.n);
    let t_a = Timestamp::new(t_a).expect("divisors are positive");
    Ok(TimeFactorForgery {
        forged: forged_from(m, x, m.y.clone(), t_a.clone()),
        w,
        t_a,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RogueRegistration {
    #[serde(with = "hex_serde")]
    pub id_f: Nat,
    #[serde(with = "hex_serde")]
    pub pw_f: Nat,
    pub rogue_card: SmartCardContents,
    #[serde(with = "hex_serde")]
    pub recovered_s: Nat,
    #[serde(with = "hex_serde")]
    pub y_r: Nat,
    pub t_f: Timestamp,
    pub forged: LoginRequest,
    /// The KIC handed the attacker the victim's CID; only then is
    /// `recovered_s` the victim's card secret.
    pub cid_collision: bool,
}

/// Impersonation through registering `ID^-1`: the rogue card's secret is
/// inverted to recover the victim's `S`, which then signs a fresh login.
pub fn impersonate_via_inverse_registration<E: RegistrationEndpoint + ?Sized>(
    intercept: &Intercept,
    kic: &mut E,
    t_f: &Timestamp,
    rng: &mut dyn RngCore,
) -> Result<RogueRegistration, AttackError> {
    let n = &intercept.m.n;
    let top = n - 1u32;
    let pw_f = random_range(&Nat::one(), &top, rng);
    let rogue = register_inverse_identity(intercept, kic, pw_f, rng)?;
    let y_r = random_range(&Nat::from(2u8), &top, rng);
    Ok(finish_impersonation(intercept, rogue, y_r, t_f))
}

/// Same as [`impersonate_via_inverse_registration`] with the password and
/// the random base `y_r` fixed by the caller.
pub fn impersonate_with_choices<E: RegistrationEndpoint + ?Sized>(
    intercept: &Intercept,
    kic: &mut E,
    pw_f: Nat,
    y_r: Nat,
    t_f: &Timestamp,
    rng: &mut dyn RngCore,
) -> Result<RogueRegistration, AttackError> {
    let rogue = register_inverse_identity(intercept, kic, pw_f, rng)?;
    Ok(finish_impersonation(intercept, rogue, y_r, t_f))
}

struct RogueCard {
    id_f: Nat,
    pw_f: Nat,
    card: SmartCardContents,
    recovered_s: Nat,
}

fn register_inverse_identity<E: RegistrationEndpoint + ?Sized>(
    intercept: &Intercept,
    kic: &mut E,
    pw_f: Nat,
    rng: &mut dyn RngCore,
) -> Result<RogueCard, AttackError> {
    let m = &intercept.m;
    let id_f = invert_mod_n(&m.id, &m.n)?;
    let card = match kic.register(&UserCredentials::new(id_f.clone(), pw_f.clone()), rng) {
        Ok(card) => card,
        Err(ProtocolError::CriticalFinding { factor }) => {
            return Err(AttackError::CriticalFinding { factor })
        }
        Err(other) => {
            return Err(Infeasible::RegistrationRefused {
                detail: other.to_string(),
            }
            .into())
        }
    };
    let recovered_s = invert_mod_n(&card.s, &m.n)?;
    Ok(RogueCard { id_f, pw_f, card, recovered_s })
}

fn finish_impersonation(intercept: &Intercept, rogue: RogueCard, y_r: Nat, t_f: &Timestamp) -> RogueRegistration {
    let m = &intercept.m;
    let x = y_r.modpow(&m.e, &m.n);
    let y = &rogue.recovered_s * y_r.modpow(t_f.ticks(), &m.n) % &m.n;
    RogueRegistration {
        cid_collision: rogue.card.cid == m.cid,
        id_f: rogue.id_f,
        pw_f: rogue.pw_f,
        rogue_card: rogue.card,
        recovered_s: rogue.recovered_s,
        y_r,
        t_f: t_f.clone(),
        forged: forged_from(m, x, y, t_f.clone()),
    }
}

/// Which inverse the inverse-timestamp forgery takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InverseTsMode {
    /// `T·T_f ≡ 1 (mod n)`, exactly as the attack is usually stated.
    Literal,
    /// `T·T_f ≡ 1 (mod λ(n))`. Needs KIC secrets; analysis only.
    Whitebox,
}

/// KIC-side knowledge of the group structure modulo `n`: the Carmichael
/// exponent `λ(n)` and its factorization. Attackers do not have this.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupOracle {
    pub n: Nat,
    pub lambda: Nat,
    pub lambda_factors: Factors,
}

impl GroupOracle {
    pub fn from_kic(kic: &KicParams) -> Result<Self, NumError> {
        let (lambda, lambda_factors) = numtheory::carmichael_of_primes(&kic.p, &kic.q)?;
        Ok(Self {
            n: kic.n.clone(),
            lambda,
            lambda_factors,
        })
    }

    /// Factors a desk-scale modulus (below 2^40) by trial division. Only
    /// square-free products of two odd primes are supported.
    pub fn factor_small(n: &Nat) -> Result<Self, NumError> {
        let factors = numtheory::factor_small(n)?;
        match factors.as_slice() {
            [(p, 1), (q, 1)] if p.is_odd() => {
                let (lambda, lambda_factors) = numtheory::carmichael_of_primes(p, q)?;
                Ok(Self {
                    n: n.clone(),
                    lambda,
                    lambda_factors,
                })
            }
            _ => Err(NumError::Unsupported("modulus is not a product of two odd primes")),
        }
    }

    pub fn order(&self, a: &Nat) -> Result<Nat, NumError> {
        multiplicative_order_with(a, &self.n, &self.lambda_factors)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InverseTimestampForgery {
    pub mode: InverseTsMode,
    pub t_f: Timestamp,
    #[serde(with = "hex_serde")]
    pub k: Nat,
    pub forged: LoginRequest,
    /// `cid·t·t_f ≡ cid (mod ord(id))`, when an oracle was available to
    /// evaluate it.
    pub predicted_success: Option<bool>,
}

/// Inverse-timestamp forgery: `Y = k^T_f`, `X = ID^(-CID·T)·k^e` at timestamp
/// `T_f`, with `T_f` the inverse of the intercepted `T` modulo `n`
/// ([`InverseTsMode::Literal`]) or modulo `λ(n)` ([`InverseTsMode::Whitebox`]).
///
/// The forgery verifies exactly when `ord(ID)` divides `CID·(T·T_f - 1)`;
/// with an oracle, that condition is reported as `predicted_success`.
pub fn forge_via_inverse_timestamp(
    intercept: &Intercept,
    mode: InverseTsMode,
    k: &Nat,
    oracle: Option<&GroupOracle>,
) -> Result<InverseTimestampForgery, AttackError> {
    let m = &intercept.m;
    let t = m.t.ticks();
    let t_f = match mode {
        InverseTsMode::Literal => mod_inv(t, &m.n),
        InverseTsMode::Whitebox => {
            let oracle = oracle.ok_or(Infeasible::AnalysisRequired)?;
            mod_inv(t, &oracle.lambda)
        }
    }
    .map_err(|e| match e {
        NumError::NotInvertible { gcd, .. } => Infeasible::NotInvertible { gcd },
        _ => Infeasible::NotInvertible { gcd: Nat::zero() },
    })?;
    let k_gcd = gcd(k, &m.n);
    if k_gcd == m.n || k.is_zero() {
        return Err(Infeasible::NonUnitNonce.into());
    }
    if !k_gcd.is_one() {
        return Err(AttackError::CriticalFinding { factor: k_gcd });
    }
    let id_inv = invert_mod_n(&m.id, &m.n)?;

    let y = k.modpow(&t_f, &m.n);
    let x = id_inv.modpow(&(&m.cid * t), &m.n) * k.modpow(&m.e, &m.n) % &m.n;
    let predicted_success = match oracle {
        Some(oracle) => {
            let order = oracle
                .order(&m.id)
                .map_err(|_| Infeasible::NotInvertible { gcd: gcd(&m.id, &m.n) })?;
            Some((&m.cid * t * &t_f) % &order == &m.cid % &order)
        }
        None => None,
    };
    let t_f = Timestamp::new(t_f).expect("inverses are non-zero");
    Ok(InverseTimestampForgery {
        mode,
        forged: forged_from(m, x, y, t_f.clone()),
        t_f,
        k: k.clone(),
        predicted_success,
    })
}

/// Uniform unit in `[2, n - 1]`.
pub fn random_unit<R: RngCore + ?Sized>(n: &Nat, rng: &mut R) -> Nat {
    let top = n - 1u32;
    loop {
        let k = random_range(&Nat::from(2u8), &top, rng);
        if gcd(&k, n).is_one() {
            return k;
        }
    }
}
