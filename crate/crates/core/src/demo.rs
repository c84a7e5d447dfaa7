//! Hand-checkable walkthrough on the toy modulus `n = 35`.
//!
//! p = 5, q = 7, e = d = 5, g = 3; the victim has ID = 2, PW = 4, CID = 3 and
//! logs in with r = 2 at T = 6. Every attack is then run against that
//! intercept. Shared by the CLI `demo` command and the browser demo.

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use serde::Serialize;

use crate::attacks::{
    forge_via_euclid, forge_via_inverse_timestamp, forge_via_time_factor,
    impersonate_with_choices, AttackError, GroupOracle, Intercept, InverseTsMode,
};
use crate::numtheory::{hex_serde, Nat};
use crate::protocol::{
    build_login_request_with_nonce, issue_card, verify_login, CidPolicy, FormatPolicy, Kic,
    KicParams, LoginRequest, ProtocolError, SmartCardContents, Timestamp, UserCredentials,
    VerifyReason,
};

/// One forged (or legitimate) message with both sides of the equation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ToyStep {
    pub name: &'static str,
    pub note: String,
    pub message: LoginRequest,
    #[serde(with = "hex_serde")]
    pub lhs: Nat,
    #[serde(with = "hex_serde")]
    pub rhs: Nat,
    pub verdict: VerifyReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ToyWalkthrough {
    pub card: SmartCardContents,
    pub steps: Vec<ToyStep>,
}

fn nat(v: u64) -> Nat {
    Nat::from(v)
}

fn step(name: &'static str, note: String, m: LoginRequest) -> ToyStep {
    let lhs = m.y.modpow(&m.e, &m.n);
    let rhs = m.id.modpow(&m.cid, &m.n) * m.x.modpow(m.t.ticks(), &m.n) % &m.n;
    // The server clock sits exactly on the message timestamp, so only the
    // equation decides.
    let verdict = verify_login(&m, &m.t, &nat(0), &FormatPolicy::default()).reason;
    ToyStep { name, note, message: m, lhs, rhs, verdict }
}

fn attack_failed(e: AttackError) -> ProtocolError {
    match e {
        AttackError::CriticalFinding { factor } => ProtocolError::CriticalFinding { factor },
        AttackError::Infeasible(_) => ProtocolError::InvalidParams("toy attack infeasible"),
    }
}

pub fn toy_walkthrough() -> Result<ToyWalkthrough, ProtocolError> {
    let kic = KicParams::from_parts(nat(5), nat(7), nat(5), nat(3))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let creds = UserCredentials::new(nat(2), nat(4));
    let card = issue_card(&kic, &creds, &mut CidPolicy::Mirror(nat(3)), &mut rng)?;
    let login = build_login_request_with_nonce(&card, &creds.pw, &Timestamp::from_ticks(6), &nat(2));
    let intercept = Intercept::capture(&login, Timestamp::from_ticks(6));
    let mut steps = vec![step(
        "legitimate",
        format!("S = {}, h = {}, r = 2", card.s, card.h),
        login.clone(),
    )];

    let euclid = forge_via_euclid(&intercept, &Timestamp::from_ticks(7)).map_err(attack_failed)?;
    steps.push(step(
        "euclid",
        format!("e·u - t_a·v = 1 with u = {}, v = {}", euclid.u, euclid.v),
        euclid.forged,
    ));

    let window = (&Timestamp::from_ticks(2), &Timestamp::from_ticks(4));
    let factor = forge_via_time_factor(&intercept, window).map_err(attack_failed)?;
    steps.push(step(
        "time-factor",
        format!("w = {}, X replaced by X^w, Y replayed", factor.w),
        factor.forged,
    ));

    let mut endpoint = Kic::new(kic.clone(), CidPolicy::Mirror(nat(3)));
    let rogue = impersonate_with_choices(&intercept, &mut endpoint, nat(9), nat(2), &Timestamp::from_ticks(6), &mut rng)
        .map_err(attack_failed)?;
    steps.push(step(
        "inverse-id",
        format!(
            "registered ID_f = {}, card S = {}, recovered S = {}",
            rogue.id_f, rogue.rogue_card.s, rogue.recovered_s
        ),
        rogue.forged,
    ));

    let oracle = GroupOracle::from_kic(&kic)?;
    let literal = forge_via_inverse_timestamp(&intercept, InverseTsMode::Literal, &nat(2), Some(&oracle))
        .map_err(attack_failed)?;
    steps.push(step(
        "inverse-ts-literal",
        format!("T_f = T^-1 mod n = {}, k = 2", literal.t_f),
        literal.forged,
    ));

    // White-box needs a timestamp invertible mod λ(35) = 12, so T = 5.
    let login5 = build_login_request_with_nonce(&card, &creds.pw, &Timestamp::from_ticks(5), &nat(2));
    let whitebox = forge_via_inverse_timestamp(
        &Intercept::capture(&login5, Timestamp::from_ticks(5)),
        InverseTsMode::Whitebox,
        &nat(2),
        Some(&oracle),
    )
    .map_err(attack_failed)?;
    steps.push(step(
        "inverse-ts-whitebox",
        format!("T = 5, T_f = T^-1 mod λ(n) = {}, k = 2", whitebox.t_f),
        whitebox.forged,
    ));

    Ok(ToyWalkthrough { card, steps })
}
