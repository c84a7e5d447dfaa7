//! The timestamp-based smart-card password scheme: KIC setup, card issuance,
//! login-request construction and server-side verification.

use std::collections::HashSet;
use std::fmt;

use num_integer::Integer;
use num_traits::{One, Zero};
use rand_core::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::numtheory::{
    self, common_primitive_element, gen_safe_prime, hex_serde, mod_inv, mod_pow, random_range,
    Nat, NumError,
};

/// Freshness window used when nothing else is configured.
pub const DEFAULT_DELTA_T: u64 = 60;

/// Fresh prime pairs tried by [`kic_setup`] before giving up.
pub const SETUP_ATTEMPTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Num(#[from] NumError),
    /// An identity shared a factor with the modulus, which factors `n`.
    #[error("critical finding: identity shares factor {factor} with the modulus")]
    CriticalFinding { factor: Nat },
    #[error("invalid credentials: {0}")]
    InvalidCredentials(&'static str),
    #[error("invalid KIC parameters: {0}")]
    InvalidParams(&'static str),
    #[error("key setup failed after {attempts} prime pairs")]
    SetupFailed { attempts: usize },
    #[error("card identifier space exhausted")]
    CidExhausted,
    #[error("registration refused for identity {0}")]
    RegistrationRefused(Nat),
    #[error("malformed login request: {0}")]
    Wire(String),
}

/// Full key material of the key information center.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KicParams {
    #[serde(with = "hex_serde")]
    pub p: Nat,
    #[serde(with = "hex_serde")]
    pub q: Nat,
    #[serde(with = "hex_serde")]
    pub n: Nat,
    #[serde(with = "hex_serde")]
    pub e: Nat,
    #[serde(with = "hex_serde")]
    pub d: Nat,
    #[serde(with = "hex_serde")]
    pub g: Nat,
}

/// The part of [`KicParams`] every card and server sees.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PublicParams {
    #[serde(with = "hex_serde")]
    pub n: Nat,
    #[serde(with = "hex_serde")]
    pub e: Nat,
    #[serde(with = "hex_serde")]
    pub g: Nat,
}

impl KicParams {
    /// Assembles parameters from chosen primes, public exponent and generator,
    /// deriving `n` and `d` and checking every invariant.
    pub fn from_parts(p: Nat, q: Nat, e: Nat, g: Nat) -> Result<Self, ProtocolError> {
        if p == q {
            return Err(ProtocolError::InvalidParams("p and q must be distinct"));
        }
        if !numtheory::is_probable_prime(&p, numtheory::DEFAULT_MR_ROUNDS)
            || !numtheory::is_probable_prime(&q, numtheory::DEFAULT_MR_ROUNDS)
        {
            return Err(ProtocolError::InvalidParams("p and q must be prime"));
        }
        let phi = (&p - 1u32) * (&q - 1u32);
        let d = mod_inv(&e, &phi)
            .map_err(|_| ProtocolError::InvalidParams("e must be coprime to (p-1)(q-1)"))?;
        let params = KicParams { n: &p * &q, p, q, e, d, g };
        params.validate()?;
        Ok(params)
    }

    pub fn totient(&self) -> Nat {
        (&self.p - 1u32) * (&self.q - 1u32)
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.n != &self.p * &self.q {
            return Err(ProtocolError::InvalidParams("n != p*q"));
        }
        let phi = self.totient();
        if self.e <= Nat::one() || self.e >= phi {
            return Err(ProtocolError::InvalidParams("e must lie in (1, (p-1)(q-1))"));
        }
        if !(&self.e * &self.d % &phi).is_one() {
            return Err(ProtocolError::InvalidParams("e*d != 1 mod (p-1)(q-1)"));
        }
        let p_factors = numtheory::factor_prime_minus_one(&self.p)?;
        let q_factors = numtheory::factor_prime_minus_one(&self.q)?;
        if !numtheory::is_primitive_mod_prime(&self.g, &self.p, &p_factors)
            || !numtheory::is_primitive_mod_prime(&self.g, &self.q, &q_factors)
        {
            return Err(ProtocolError::InvalidParams("g is not primitive in both GF(p) and GF(q)"));
        }
        Ok(())
    }

    pub fn public(&self) -> PublicParams {
        PublicParams {
            n: self.n.clone(),
            e: self.e.clone(),
            g: self.g.clone(),
        }
    }

    /// Short SHA-256 fingerprint of the full parameter set, safe to publish.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for value in [&self.p, &self.q, &self.n, &self.e, &self.d, &self.g] {
            hasher.update(numtheory::to_hex(value).as_bytes());
            hasher.update(b":");
        }
        hasher.finalize()[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Generates KIC key material with primes of `bits` bits each.
///
/// Primes are safe primes so that `p - 1` and `q - 1` factor trivially. When
/// no common primitive element turns up, a fresh prime pair is drawn, up to
/// [`SETUP_ATTEMPTS`] times.
pub fn kic_setup<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Result<KicParams, ProtocolError> {
    if bits < 3 {
        return Err(ProtocolError::InvalidParams("primes need at least 3 bits"));
    }
    for _ in 0..SETUP_ATTEMPTS {
        let p = gen_safe_prime(bits, rng)?;
        let q = loop {
            let q = gen_safe_prime(bits, rng)?;
            if q != p {
                break q;
            }
        };
        let phi = (&p - 1u32) * (&q - 1u32);
        let (three, top) = (Nat::from(3u8), &phi - 1u32);
        let e = loop {
            let e = random_range(&three, &top, rng);
            if e.gcd(&phi).is_one() {
                break e;
            }
        };
        let g = match common_primitive_element(&p, &q, rng) {
            Ok(g) => g,
            Err(NumError::NotFound { .. }) => continue,
            Err(other) => return Err(other.into()),
        };
        let d = mod_inv(&e, &phi)?;
        return Ok(KicParams { n: &p * &q, p, q, e, d, g });
    }
    Err(ProtocolError::SetupFailed {
        attempts: SETUP_ATTEMPTS,
    })
}

/// Integer encodings of a user's identity and password.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserCredentials {
    pub id: Nat,
    pub pw: Nat,
}

impl UserCredentials {
    pub fn new(id: Nat, pw: Nat) -> Self {
        Self { id, pw }
    }

    /// Maps textual credentials to integers: big-endian bytes, reduced into
    /// `[2, n - 1]`.
    pub fn from_strings(id: &str, pw: &str, n: &Nat) -> Self {
        Self {
            id: encode_text(id, n),
            pw: encode_text(pw, n),
        }
    }

    pub fn validate(&self, n: &Nat) -> Result<(), ProtocolError> {
        if self.id < Nat::from(2u8) || self.id >= *n {
            return Err(ProtocolError::InvalidCredentials("id must lie in [2, n)"));
        }
        let shared = self.id.gcd(n);
        if !shared.is_one() {
            return Err(ProtocolError::CriticalFinding { factor: shared });
        }
        if self.pw.is_zero() || self.pw >= *n {
            return Err(ProtocolError::InvalidCredentials("pw must lie in [1, n)"));
        }
        Ok(())
    }
}

pub fn encode_text(text: &str, n: &Nat) -> Nat {
    let raw = Nat::from_bytes_be(text.as_bytes());
    raw % (n - 2u32) + 2u32
}

/// Label for the card's one-way function. The card carries it; no phase of
/// the scheme ever evaluates it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FunctionSlot(pub String);

impl Default for FunctionSlot {
    fn default() -> Self {
        FunctionSlot("f".to_owned())
    }
}

/// What the KIC writes into a user's card.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmartCardContents {
    #[serde(with = "hex_serde")]
    pub n: Nat,
    #[serde(with = "hex_serde")]
    pub e: Nat,
    #[serde(with = "hex_serde")]
    pub g: Nat,
    #[serde(with = "hex_serde")]
    pub id: Nat,
    #[serde(with = "hex_serde")]
    pub cid: Nat,
    #[serde(with = "hex_serde")]
    pub s: Nat,
    #[serde(with = "hex_serde")]
    pub h: Nat,
    #[serde(default)]
    pub f_slot: FunctionSlot,
}

/// How the KIC picks card identifiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CidPolicy {
    /// Counter; the first card gets `2`.
    Sequential { next: Nat },
    /// Uniform in `[2, n - 1]`.
    Random,
    /// Always hands out the given value.
    Mirror(Nat),
}

impl CidPolicy {
    pub fn sequential() -> Self {
        CidPolicy::Sequential { next: Nat::from(2u8) }
    }

    pub fn assign<R: RngCore + ?Sized>(&mut self, n: &Nat, rng: &mut R) -> Result<Nat, ProtocolError> {
        match self {
            CidPolicy::Sequential { next } => {
                if *next >= *n {
                    return Err(ProtocolError::CidExhausted);
                }
                let cid = next.clone();
                *next += 1u32;
                Ok(cid)
            }
            CidPolicy::Random => Ok(random_range(&Nat::from(2u8), &(n - 1u32), rng)),
            CidPolicy::Mirror(value) => {
                if *value < Nat::from(2u8) || *value >= *n {
                    return Err(ProtocolError::InvalidParams("mirrored cid must lie in [2, n)"));
                }
                Ok(value.clone())
            }
        }
    }
}

/// Registration steps 4-6: assigns a CID and writes the card.
pub fn issue_card<R: RngCore + ?Sized>(
    kic: &KicParams,
    creds: &UserCredentials,
    cids: &mut CidPolicy,
    rng: &mut R,
) -> Result<SmartCardContents, ProtocolError> {
    creds.validate(&kic.n)?;
    let cid = cids.assign(&kic.n, rng)?;
    let s = mod_pow(&creds.id, &(&cid * &kic.d), &kic.n)?;
    let h = mod_pow(&kic.g, &(&creds.pw * &kic.d), &kic.n)?;
    Ok(SmartCardContents {
        n: kic.n.clone(),
        e: kic.e.clone(),
        g: kic.g.clone(),
        id: creds.id.clone(),
        cid,
        s,
        h,
        f_slot: FunctionSlot::default(),
    })
}

/// Anything that registers users and hands out cards.
pub trait RegistrationEndpoint {
    fn public(&self) -> PublicParams;
    fn register(
        &mut self,
        creds: &UserCredentials,
        rng: &mut dyn RngCore,
    ) -> Result<SmartCardContents, ProtocolError>;
}

/// A key information center with its CID policy and admission rules.
/// Registration takes `&mut self`, which keeps the sequential counter on a
/// single owner.
#[derive(Debug, Clone)]
pub struct Kic {
    params: KicParams,
    cids: CidPolicy,
    registered: HashSet<Nat>,
    refuse_duplicates: bool,
    denied: HashSet<Nat>,
}

impl Kic {
    pub fn new(params: KicParams, cids: CidPolicy) -> Self {
        Self {
            params,
            cids,
            registered: HashSet::new(),
            refuse_duplicates: false,
            denied: HashSet::new(),
        }
    }

    pub fn refuse_duplicates(mut self, refuse: bool) -> Self {
        self.refuse_duplicates = refuse;
        self
    }

    pub fn deny_identity(&mut self, id: Nat) {
        self.denied.insert(id);
    }

    pub fn params(&self) -> &KicParams {
        &self.params
    }

    pub fn cid_policy(&self) -> &CidPolicy {
        &self.cids
    }
}

impl RegistrationEndpoint for Kic {
    fn public(&self) -> PublicParams {
        self.params.public()
    }

    fn register(
        &mut self,
        creds: &UserCredentials,
        rng: &mut dyn RngCore,
    ) -> Result<SmartCardContents, ProtocolError> {
        if self.denied.contains(&creds.id)
            || (self.refuse_duplicates && self.registered.contains(&creds.id))
        {
            return Err(ProtocolError::RegistrationRefused(creds.id.clone()));
        }
        let card = issue_card(&self.params, creds, &mut self.cids, rng)?;
        self.registered.insert(creds.id.clone());
        Ok(card)
    }
}

/// Clock reading attached to a login request. Never zero.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Timestamp(#[serde(with = "hex_serde")] Nat);

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let ticks = hex_serde::deserialize(deserializer)?;
        Timestamp::new(ticks).map_err(serde::de::Error::custom)
    }
}

impl Timestamp {
    pub fn new(ticks: Nat) -> Result<Self, ProtocolError> {
        if ticks.is_zero() {
            return Err(ProtocolError::InvalidParams("timestamps start at 1"));
        }
        Ok(Timestamp(ticks))
    }

    pub fn from_ticks(ticks: u64) -> Self {
        assert!(ticks > 0, "timestamps start at 1");
        Timestamp(Nat::from(ticks))
    }

    pub fn ticks(&self) -> &Nat {
        &self.0
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// The login message `M = {ID, CID, X, Y, n, e, g, T}`.
///
/// Field order here is the wire key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoginRequest {
    #[serde(with = "hex_serde")]
    pub id: Nat,
    #[serde(with = "hex_serde")]
    pub cid: Nat,
    #[serde(with = "hex_serde")]
    pub x: Nat,
    #[serde(with = "hex_serde")]
    pub y: Nat,
    #[serde(with = "hex_serde")]
    pub n: Nat,
    #[serde(with = "hex_serde")]
    pub e: Nat,
    #[serde(with = "hex_serde")]
    pub g: Nat,
    pub t: Timestamp,
}

impl LoginRequest {
    /// Canonical single-line encoding.
    pub fn to_wire(&self) -> String {
        serde_json::to_string(self).expect("login requests always serialize")
    }

    /// Parses a wire line, accepting only the canonical encoding (one trailing
    /// newline is tolerated).
    pub fn from_wire(line: &str) -> Result<Self, ProtocolError> {
        let line = line.strip_suffix('\n').unwrap_or(line);
        let line = line.strip_suffix('\r').unwrap_or(line);
        let request: LoginRequest =
            serde_json::from_str(line).map_err(|e| ProtocolError::Wire(e.to_string()))?;
        if request.to_wire() != line {
            return Err(ProtocolError::Wire("non-canonical encoding".to_owned()));
        }
        Ok(request)
    }
}

/// Login phase with the random exponent drawn from `rng` in `[2, n - 1]`.
pub fn build_login_request<R: RngCore + ?Sized>(
    card: &SmartCardContents,
    pw: &Nat,
    t: &Timestamp,
    rng: &mut R,
) -> LoginRequest {
    let r = random_range(&Nat::from(2u8), &(&card.n - 1u32), rng);
    build_login_request_with_nonce(card, pw, t, &r)
}

/// Login phase with a caller-chosen random exponent `r`.
pub fn build_login_request_with_nonce(
    card: &SmartCardContents,
    pw: &Nat,
    t: &Timestamp,
    r: &Nat,
) -> LoginRequest {
    let x = card.g.modpow(&(pw * r), &card.n);
    let y = &card.s * card.h.modpow(&(r * t.ticks()), &card.n) % &card.n;
    LoginRequest {
        id: card.id.clone(),
        cid: card.cid.clone(),
        x,
        y,
        n: card.n.clone(),
        e: card.e.clone(),
        g: card.g.clone(),
        t: t.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerifyReason {
    FormatId,
    FormatCid,
    StaleTimestamp,
    EquationFailed,
    Ok,
}

impl VerifyReason {
    pub fn as_str(self) -> &'static str {
        match self {
            VerifyReason::FormatId => "FORMAT_ID",
            VerifyReason::FormatCid => "FORMAT_CID",
            VerifyReason::StaleTimestamp => "STALE_TIMESTAMP",
            VerifyReason::EquationFailed => "EQUATION_FAILED",
            VerifyReason::Ok => "OK",
        }
    }
}

impl fmt::Display for VerifyReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyDecision {
    pub accepted: bool,
    pub reason: VerifyReason,
}

impl From<VerifyReason> for VerifyDecision {
    fn from(reason: VerifyReason) -> Self {
        VerifyDecision {
            accepted: reason == VerifyReason::Ok,
            reason,
        }
    }
}

/// Identifier validity rules for the first verification check.
///
/// The default accepts `2 <= id, cid < n` with `gcd(id, n) = 1`. Pinning a
/// server's public parameters additionally rejects messages carrying a
/// different `(n, e, g)` as `FORMAT_ID`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FormatPolicy {
    pub pinned: Option<PublicParams>,
}

impl FormatPolicy {
    pub fn pinned(public: PublicParams) -> Self {
        Self { pinned: Some(public) }
    }

    fn id_ok(&self, m: &LoginRequest) -> bool {
        if let Some(public) = &self.pinned {
            if public.n != m.n || public.e != m.e || public.g != m.g {
                return false;
            }
        }
        m.id >= Nat::from(2u8) && m.id < m.n && m.id.gcd(&m.n).is_one()
    }

    fn cid_ok(&self, m: &LoginRequest) -> bool {
        m.cid >= Nat::from(2u8) && m.cid < m.n
    }
}

/// `Y^e ≡ ID^CID · X^T (mod n)`, evaluated on the message's own `n` and `e`.
pub fn equation_holds(m: &LoginRequest) -> bool {
    if m.n < Nat::from(2u8) {
        return false;
    }
    let lhs = m.y.modpow(&m.e, &m.n);
    let rhs = m.id.modpow(&m.cid, &m.n) * m.x.modpow(m.t.ticks(), &m.n) % &m.n;
    lhs == rhs
}

/// `0 <= server_now - t <= delta_t`.
pub fn is_fresh(t: &Timestamp, server_now: &Timestamp, delta_t: &Nat) -> bool {
    server_now >= t && server_now.ticks() - t.ticks() <= *delta_t
}

/// Server verification: identifier format, freshness, then the equation.
pub fn verify_login(
    m: &LoginRequest,
    server_now: &Timestamp,
    delta_t: &Nat,
    rules: &FormatPolicy,
) -> VerifyDecision {
    let reason = if !rules.id_ok(m) {
        VerifyReason::FormatId
    } else if !rules.cid_ok(m) {
        VerifyReason::FormatCid
    } else if !is_fresh(&m.t, server_now, delta_t) {
        VerifyReason::StaleTimestamp
    } else if !equation_holds(m) {
        VerifyReason::EquationFailed
    } else {
        VerifyReason::Ok
    };
    reason.into()
}
