//! Seeded scenario runner.
//!
//! Every trial sets up a fresh KIC, registers a victim, lets the victim log
//! in while an eavesdropper listens, then mounts the configured attack and
//! records how the server treats the forgery: once on the verification
//! equation alone, once through the full verifier with freshness window.
//!
//! Trial `i` draws from its own ChaCha stream derived from `(seed, i)`, so
//! trials can run in any order (or in parallel) without changing output.

use std::collections::BTreeMap;
use std::io::{self, Write};

use num_traits::{One, ToPrimitive};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attacks::{
    forge_via_euclid, forge_via_inverse_timestamp, forge_via_time_factor,
    impersonate_via_inverse_registration, random_unit, AttackError, GroupOracle, Intercept,
    InverseTsMode,
};
use crate::numtheory::{gcd, random_range, Nat};
use crate::protocol::{
    build_login_request, equation_holds, kic_setup, verify_login, CidPolicy, FormatPolicy, Kic,
    LoginRequest, ProtocolError, RegistrationEndpoint, Timestamp, UserCredentials, VerifyDecision,
    VerifyReason, DEFAULT_DELTA_T,
};

/// Simulated epoch seconds where realistic clocks start by default.
pub const DEFAULT_REALISTIC_START: u64 = 1_700_000_000;

/// Abstract-mode timestamps are drawn from `[2, 2^32]`.
const ABSTRACT_TIME_SPAN: u64 = 1 << 32;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario config: {0}")]
    Config(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    /// A legitimate login was rejected. Always an implementation bug.
    #[error("corrupt trial {trial}: legitimate login rejected with {reason}")]
    CorruptTrial { trial: usize, reason: VerifyReason },
    #[error("trial {trial}: critical finding, modulus factor {factor}")]
    CriticalFinding { trial: usize, factor: Nat },
    #[error("clock error: {0}")]
    Clock(&'static str),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    /// Only the verification equation matters; the scenario places `now`
    /// wherever the forged timestamp needs it.
    #[default]
    Abstract,
    /// A monotone simulated wall clock in seconds; the full freshness check
    /// applies.
    Realistic,
}

impl ClockMode {
    pub fn label(self) -> &'static str {
        match self {
            ClockMode::Abstract => "ABSTRACT",
            ClockMode::Realistic => "REALISTIC",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClockModel {
    mode: ClockMode,
    now: u64,
    delta_t: u64,
}

impl ClockModel {
    pub fn new(mode: ClockMode, now: u64, delta_t: u64) -> Self {
        assert!(now > 0, "clock starts at tick 1 or later");
        Self { mode, now, delta_t }
    }

    pub fn mode(&self) -> ClockMode {
        self.mode
    }

    pub fn now(&self) -> Timestamp {
        Timestamp::from_ticks(self.now)
    }

    pub fn delta_t(&self) -> u64 {
        self.delta_t
    }

    pub fn advance(&mut self, ticks: u64) {
        self.now += ticks;
    }

    /// Moves the clock. Realistic clocks refuse to go backwards.
    pub fn set(&mut self, now: &Timestamp) -> Result<(), HarnessError> {
        let ticks = now
            .ticks()
            .to_u64()
            .ok_or(HarnessError::Clock("timestamp beyond the clock range"))?;
        if self.mode == ClockMode::Realistic && ticks < self.now {
            return Err(HarnessError::Clock("realistic clocks are monotone"));
        }
        self.now = ticks;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CidPolicyKind {
    #[default]
    Sequential,
    Random,
    /// Every card gets the same scenario-chosen CID.
    Mirror,
}

impl CidPolicyKind {
    pub fn label(self) -> &'static str {
        match self {
            CidPolicyKind::Sequential => "SEQUENTIAL",
            CidPolicyKind::Random => "RANDOM",
            CidPolicyKind::Mirror => "MIRROR",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    None,
    Euclid,
    TimeFactor,
    InverseId,
    InverseTsLiteral,
    InverseTsWhitebox,
    /// Negative control: one bit of `x` or `y` flipped after interception.
    Tamper,
}

impl AttackKind {
    pub fn label(self) -> &'static str {
        match self {
            AttackKind::None => "NONE",
            AttackKind::Euclid => "EUCLID",
            AttackKind::TimeFactor => "TIME_FACTOR",
            AttackKind::InverseId => "INVERSE_ID",
            AttackKind::InverseTsLiteral => "INVERSE_TS_LITERAL",
            AttackKind::InverseTsWhitebox => "INVERSE_TS_WHITEBOX",
            AttackKind::Tamper => "TAMPER",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockSettings {
    #[serde(default)]
    pub mode: ClockMode,
    #[serde(default = "default_delta_t")]
    pub delta_t: u64,
    /// First simulated second for realistic clocks.
    #[serde(default = "default_start")]
    pub start: u64,
}

fn default_delta_t() -> u64 {
    DEFAULT_DELTA_T
}

fn default_start() -> u64 {
    DEFAULT_REALISTIC_START
}

impl Default for ClockSettings {
    fn default() -> Self {
        Self {
            mode: ClockMode::default(),
            delta_t: DEFAULT_DELTA_T,
            start: DEFAULT_REALISTIC_START,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub seed: u64,
    pub prime_bits: u64,
    #[serde(default)]
    pub cid_policy: CidPolicyKind,
    pub attack: AttackKind,
    pub trials: usize,
    #[serde(default)]
    pub clock: ClockSettings,
}

fn default_name() -> String {
    "scenario".to_owned()
}

impl ScenarioConfig {
    pub fn new(name: &str, seed: u64, prime_bits: u64, attack: AttackKind, trials: usize) -> Self {
        Self {
            name: name.to_owned(),
            seed,
            prime_bits,
            cid_policy: CidPolicyKind::default(),
            attack,
            trials,
            clock: ClockSettings::default(),
        }
    }

    pub fn with_clock(mut self, mode: ClockMode) -> Self {
        self.clock.mode = mode;
        self
    }

    pub fn with_cid_policy(mut self, policy: CidPolicyKind) -> Self {
        self.cid_policy = policy;
        self
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        if self.prime_bits < 3 {
            return Err(HarnessError::Config("prime_bits must be at least 3".into()));
        }
        if self.clock.start == 0 {
            return Err(HarnessError::Config("clock.start must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScenarioFileShape {
    Many { scenario: Vec<ScenarioConfig> },
    One(ScenarioConfig),
}

/// Parses a TOML scenario file: either one scenario at top level, or a list
/// of `[[scenario]]` tables.
pub fn parse_scenarios(text: &str) -> Result<Vec<ScenarioConfig>, HarnessError> {
    let shape: ScenarioFileShape =
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
    let configs = match shape {
        ScenarioFileShape::Many { scenario } => scenario,
        ScenarioFileShape::One(config) => vec![config],
    };
    if configs.is_empty() {
        return Err(HarnessError::Config("no scenarios defined".into()));
    }
    for config in &configs {
        config.validate()?;
    }
    Ok(configs)
}

/// Wall-clock microseconds per phase. Not part of the determinism contract.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PhaseTimings {
    pub keygen: u64,
    pub login: u64,
    pub attack: u64,
    pub verify: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerdictRecord {
    pub scenario: String,
    pub attack: &'static str,
    pub clock: &'static str,
    pub cid_policy: &'static str,
    pub trial: usize,
    pub feasible: bool,
    pub infeasible_reason: Option<String>,
    /// The verification equation alone.
    pub equation_check: bool,
    /// Full verifier outcome; absent when no forgery could be built.
    pub full_verify: Option<VerifyReason>,
    pub predicted_success: Option<bool>,
    pub cid_collision: Option<bool>,
    pub params_digest: String,
    #[serde(skip)]
    pub timings: PhaseTimings,
}

/// Passive eavesdropper on the login channel. Only accepted logins are kept.
#[derive(Debug, Default, Clone)]
pub struct Eavesdropper {
    log: Vec<Intercept>,
}

impl Eavesdropper {
    pub fn observe(&mut self, m: &LoginRequest, decision: VerifyDecision, clock: &ClockModel) -> Option<&Intercept> {
        if !decision.accepted {
            return None;
        }
        self.log.push(intercept_channel(m, clock));
        self.log.last()
    }

    pub fn log(&self) -> &[Intercept] {
        &self.log
    }
}

/// Captures `m` in canonical wire form, stamped with the clock's current time.
pub fn intercept_channel(m: &LoginRequest, clock: &ClockModel) -> Intercept {
    Intercept::capture(m, clock.now())
}

#[cfg(not(target_arch = "wasm32"))]
mod stopwatch {
    use std::time::Instant;

    pub struct Stopwatch(Instant);

    impl Stopwatch {
        pub fn start() -> Self {
            Stopwatch(Instant::now())
        }

        pub fn lap(&mut self) -> u64 {
            let now = Instant::now();
            let micros = now.duration_since(self.0).as_micros() as u64;
            self.0 = now;
            micros
        }
    }
}

// No monotonic clock on wasm32-unknown-unknown without JS glue.
#[cfg(target_arch = "wasm32")]
mod stopwatch {
    pub struct Stopwatch;

    impl Stopwatch {
        pub fn start() -> Self {
            Stopwatch
        }

        pub fn lap(&mut self) -> u64 {
            0
        }
    }
}

use stopwatch::Stopwatch;

/// Independent stream for trial `index` of a scenario seeded with `seed`.
pub fn trial_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn below(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    random_range(&Nat::from(0u8), &Nat::from(bound - 1), rng)
        .to_u64()
        .expect("bounded by a u64")
}

/// What the attack phase produced, before the server looks at it.
struct Attempt {
    forged: Option<LoginRequest>,
    infeasible: Option<String>,
    predicted_success: Option<bool>,
    cid_collision: Option<bool>,
    server_now: Timestamp,
}

impl Attempt {
    fn infeasible(reason: String, server_now: Timestamp) -> Self {
        Attempt {
            forged: None,
            infeasible: Some(reason),
            predicted_success: None,
            cid_collision: None,
            server_now,
        }
    }

    fn forged(forged: LoginRequest, server_now: Timestamp) -> Self {
        Attempt {
            forged: Some(forged),
            infeasible: None,
            predicted_success: None,
            cid_collision: None,
            server_now,
        }
    }
}

/// Runs every trial of `config`.
pub fn run_scenario(config: &ScenarioConfig) -> Result<Vec<VerdictRecord>, HarnessError> {
    config.validate()?;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..config.trials)
            .into_par_iter()
            .map(|trial| run_trial(config, trial))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..config.trials).map(|trial| run_trial(config, trial)).collect()
    }
}

/// Runs one trial; `run_scenario` is this over `0..trials`.
pub fn run_trial(config: &ScenarioConfig, trial: usize) -> Result<VerdictRecord, HarnessError> {
    let mut rng = trial_rng(config.seed, trial);
    let mut watch = Stopwatch::start();
    let mut timings = PhaseTimings::default();
    let critical = |factor: Nat| HarnessError::CriticalFinding { trial, factor };

    let params = kic_setup(config.prime_bits, &mut rng)?;
    let n = params.n.clone();
    let top = &n - 1u32;
    let policy = match config.cid_policy {
        CidPolicyKind::Sequential => CidPolicy::sequential(),
        CidPolicyKind::Random => CidPolicy::Random,
        CidPolicyKind::Mirror => CidPolicy::Mirror(random_range(&Nat::from(2u8), &top, &mut rng)),
    };
    let digest = params.digest();
    let server_rules = FormatPolicy::pinned(params.public());
    let oracle = GroupOracle::from_kic(&params).map_err(ProtocolError::from)?;
    let mut kic = Kic::new(params, policy);
    timings.keygen = watch.lap();

    let id = random_unit(&n, &mut rng);
    let pw = random_range(&Nat::from(1u8), &top, &mut rng);
    let card = kic.register(&UserCredentials::new(id, pw.clone()), &mut rng)?;

    let delta_t = config.clock.delta_t;
    let delta = Nat::from(delta_t);
    let start = match config.clock.mode {
        ClockMode::Abstract => 2 + below(&mut rng, ABSTRACT_TIME_SPAN - 1),
        ClockMode::Realistic => config.clock.start + below(&mut rng, 86_400),
    };
    let mut clock = ClockModel::new(config.clock.mode, start, delta_t);
    let login = build_login_request(&card, &pw, &clock.now(), &mut rng);
    clock.advance(below(&mut rng, delta_t + 1));
    let decision = verify_login(&login, &clock.now(), &delta, &server_rules);
    let mut eavesdropper = Eavesdropper::default();
    let intercept = eavesdropper
        .observe(&login, decision, &clock)
        .cloned()
        .ok_or(HarnessError::CorruptTrial {
            trial,
            reason: decision.reason,
        })?;
    timings.login = watch.lap();

    // The attacker acts some time after the capture.
    let abstract_mode = clock.mode() == ClockMode::Abstract;
    if !abstract_mode {
        clock.advance(1 + below(&mut rng, delta_t.max(1)));
    }
    let random_abstract_time = |rng: &mut ChaCha8Rng| Timestamp::from_ticks(1 + below(rng, ABSTRACT_TIME_SPAN));

    let attempt = match config.attack {
        AttackKind::None => Attempt::forged(intercept.m.clone(), intercept.captured_at.clone()),
        AttackKind::Tamper => {
            let mut forged = intercept.m.clone();
            let bit = below(&mut rng, n.bits() - 1);
            let target = if rng.next_u32() & 1 == 0 { &mut forged.x } else { &mut forged.y };
            let flipped = !target.bit(bit);
            target.set_bit(bit, flipped);
            Attempt::forged(forged, intercept.captured_at.clone())
        }
        AttackKind::Euclid => {
            // Attacker's own timestamp, nudged until coprime to e.
            let mut t_a = if abstract_mode { random_abstract_time(&mut rng) } else { clock.now() };
            while !gcd(&intercept.m.e, t_a.ticks()).is_one() {
                t_a = Timestamp::new(t_a.ticks() + 1u32).expect("positive");
            }
            let server_now = if abstract_mode {
                t_a.clone()
            } else {
                clock.set(&t_a)?;
                Timestamp::new(t_a.ticks() + below(&mut rng, delta_t + 1)).expect("positive")
            };
            match forge_via_euclid(&intercept, &t_a) {
                Ok(f) => Attempt::forged(f.forged, server_now),
                Err(AttackError::Infeasible(reason)) => Attempt::infeasible(reason.to_string(), server_now),
                Err(AttackError::CriticalFinding { factor }) => return Err(critical(factor)),
            }
        }
        AttackKind::TimeFactor => {
            let t = intercept.m.t.ticks();
            let lo = Timestamp::from_ticks(2);
            let hi = Timestamp::new(t - 1u32).unwrap_or_else(|_| lo.clone());
            match forge_via_time_factor(&intercept, (&lo, &hi)) {
                Ok(f) => {
                    let server_now = if abstract_mode { f.t_a.clone() } else { clock.now() };
                    Attempt::forged(f.forged, server_now)
                }
                Err(AttackError::Infeasible(reason)) => Attempt::infeasible(reason.to_string(), clock.now()),
                Err(AttackError::CriticalFinding { factor }) => return Err(critical(factor)),
            }
        }
        AttackKind::InverseId => {
            let t_f = if abstract_mode { random_abstract_time(&mut rng) } else { clock.now() };
            let server_now = if abstract_mode {
                t_f.clone()
            } else {
                Timestamp::new(t_f.ticks() + below(&mut rng, delta_t + 1)).expect("positive")
            };
            match impersonate_via_inverse_registration(&intercept, &mut kic, &t_f, &mut rng) {
                Ok(rogue) => {
                    let mut attempt = Attempt::forged(rogue.forged, server_now);
                    attempt.cid_collision = Some(rogue.cid_collision);
                    attempt
                }
                Err(AttackError::Infeasible(reason)) => Attempt::infeasible(reason.to_string(), server_now),
                Err(AttackError::CriticalFinding { factor }) => return Err(critical(factor)),
            }
        }
        AttackKind::InverseTsLiteral | AttackKind::InverseTsWhitebox => {
            let mode = if config.attack == AttackKind::InverseTsLiteral {
                InverseTsMode::Literal
            } else {
                InverseTsMode::Whitebox
            };
            let k = random_unit(&n, &mut rng);
            match forge_via_inverse_timestamp(&intercept, mode, &k, Some(&oracle)) {
                Ok(f) => {
                    let server_now = if abstract_mode { f.t_f.clone() } else { clock.now() };
                    let mut attempt = Attempt::forged(f.forged, server_now);
                    attempt.predicted_success = f.predicted_success;
                    attempt
                }
                Err(AttackError::Infeasible(reason)) => Attempt::infeasible(reason.to_string(), clock.now()),
                Err(AttackError::CriticalFinding { factor }) => return Err(critical(factor)),
            }
        }
    };
    timings.attack = watch.lap();

    let (equation_check, full_verify) = match &attempt.forged {
        Some(forged) => {
            let verdict = verify_login(forged, &attempt.server_now, &delta, &server_rules);
            (equation_holds(forged), Some(verdict.reason))
        }
        None => (false, None),
    };
    timings.verify = watch.lap();

    Ok(VerdictRecord {
        scenario: config.name.clone(),
        attack: config.attack.label(),
        clock: config.clock.mode.label(),
        cid_policy: config.cid_policy.label(),
        trial,
        feasible: attempt.forged.is_some(),
        infeasible_reason: attempt.infeasible,
        equation_check,
        full_verify,
        predicted_success: attempt.predicted_success,
        cid_collision: attempt.cid_collision,
        params_digest: digest,
        timings,
    })
}

/// Runs several scenarios back to back.
pub fn run_scenarios(configs: &[ScenarioConfig]) -> Result<Vec<VerdictRecord>, HarnessError> {
    let mut records = Vec::new();
    for config in configs {
        records.extend(run_scenario(config)?);
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReportOptions {
    /// Append per-phase timings to each record line. Timed reports are not
    /// byte-reproducible.
    pub timings: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GroupSummary {
    pub summary: String,
    pub scenario: String,
    pub trials: usize,
    pub feasible: usize,
    pub equation_pass: usize,
    pub full_verify_pass: usize,
    pub predicted_pass: usize,
    pub prediction_mismatches: usize,
    pub cid_collisions: usize,
    pub equation_pass_rate: f64,
}

impl GroupSummary {
    fn new(summary: &str, scenario: &str) -> Self {
        Self {
            summary: summary.to_owned(),
            scenario: scenario.to_owned(),
            ..Self::default()
        }
    }

    fn add(&mut self, record: &VerdictRecord) {
        self.trials += 1;
        self.feasible += record.feasible as usize;
        self.equation_pass += record.equation_check as usize;
        self.full_verify_pass += (record.full_verify == Some(VerifyReason::Ok)) as usize;
        self.predicted_pass += (record.predicted_success == Some(true)) as usize;
        self.prediction_mismatches += record
            .predicted_success
            .is_some_and(|p| p != record.equation_check) as usize;
        self.cid_collisions += (record.cid_collision == Some(true)) as usize;
        self.equation_pass_rate = self.equation_pass as f64 / self.trials as f64;
    }
}

/// Aggregates per `(scenario, attack)` in first-appearance order, plus an
/// overall total.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub groups: Vec<GroupSummary>,
    pub total: GroupSummary,
}

impl ReportSummary {
    pub fn group(&self, scenario: &str) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.scenario == scenario)
    }
}

pub fn summarize(records: &[VerdictRecord]) -> ReportSummary {
    let mut order: Vec<(String, &'static str)> = Vec::new();
    let mut groups: BTreeMap<(String, &'static str), GroupSummary> = BTreeMap::new();
    let mut total = GroupSummary::new("ALL", "*");
    for record in records {
        let key = (record.scenario.clone(), record.attack);
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key.clone());
                GroupSummary::new(record.attack, &record.scenario)
            })
            .add(record);
        total.add(record);
    }
    ReportSummary {
        groups: order.iter().map(|k| groups[k].clone()).collect(),
        total,
    }
}

#[derive(Serialize)]
struct TimedLine<'a> {
    #[serde(flatten)]
    record: &'a VerdictRecord,
    timings_us: &'a PhaseTimings,
}

/// Writes one JSON line per record, a blank line, then one summary line per
/// `(scenario, attack)` group and a final `ALL` line.
pub fn emit_report<W: Write>(
    records: &[VerdictRecord],
    sink: &mut W,
    options: ReportOptions,
) -> io::Result<ReportSummary> {
    for record in records {
        let line = if options.timings {
            serde_json::to_string(&TimedLine {
                record,
                timings_us: &record.timings,
            })
        } else {
            serde_json::to_string(record)
        }
        .map_err(io::Error::other)?;
        writeln!(sink, "{line}")?;
    }
    writeln!(sink)?;
    let summary = summarize(records);
    for group in summary.groups.iter().chain(std::iter::once(&summary.total)) {
        writeln!(sink, "{}", serde_json::to_string(group).map_err(io::Error::other)?)?;
    }
    sink.flush()?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(config: &ScenarioConfig) -> Vec<VerdictRecord> {
        run_scenario(config).unwrap()
    }

    #[test]
    fn baseline_is_complete() {
        for mode in [ClockMode::Abstract, ClockMode::Realistic] {
            let records = run(&ScenarioConfig::new("none", 1, 16, AttackKind::None, 100).with_clock(mode));
            assert_eq!(records.len(), 100);
            assert!(records.iter().all(|r| r.full_verify == Some(VerifyReason::Ok) && r.equation_check));
        }
    }

    #[test]
    fn euclid_records_pass() {
        let records = run(&ScenarioConfig::new("euclid", 2, 32, AttackKind::Euclid, 50));
        assert!(records.iter().all(|r| r.feasible && r.equation_check));
        let realistic = run(&ScenarioConfig::new("euclid-r", 2, 32, AttackKind::Euclid, 50).with_clock(ClockMode::Realistic));
        assert!(realistic.iter().all(|r| r.full_verify == Some(VerifyReason::Ok)));
    }

    #[test]
    fn literal_prediction_matches() {
        let records = run(&ScenarioConfig::new("lit", 3, 16, AttackKind::InverseTsLiteral, 60));
        for r in records.iter().filter(|r| r.feasible) {
            assert_eq!(r.predicted_success, Some(r.equation_check));
        }
    }

    #[test]
    fn time_factor_goes_stale_on_a_real_clock() {
        let config = ScenarioConfig::new("tf", 4, 16, AttackKind::TimeFactor, 40);
        let abstract_records = run(&config);
        let realistic = run(&config.clone().with_clock(ClockMode::Realistic));
        assert!(abstract_records.iter().filter(|r| r.feasible).all(|r| r.full_verify == Some(VerifyReason::Ok)));
        assert!(realistic
            .iter()
            .filter(|r| r.feasible)
            .all(|r| r.equation_check && r.full_verify == Some(VerifyReason::StaleTimestamp)));
    }

    #[test]
    fn trials_are_independent_of_order() {
        let config = ScenarioConfig::new("order", 9, 16, AttackKind::InverseId, 8)
            .with_cid_policy(CidPolicyKind::Mirror);
        let all = run(&config);
        let single = run_trial(&config, 5).unwrap();
        assert_eq!(serde_json::to_string(&all[5]).unwrap(), serde_json::to_string(&single).unwrap());
        assert!(all.iter().all(|r| r.cid_collision == Some(true) && r.equation_check));
    }

    #[test]
    fn eavesdropper_ignores_rejected_logins() {
        let config = ScenarioConfig::new("x", 1, 8, AttackKind::None, 1);
        let mut rng = trial_rng(config.seed, 0);
        let params = kic_setup(8, &mut rng).unwrap();
        let mut kic = Kic::new(params.clone(), CidPolicy::sequential());
        let id = random_unit(&params.n, &mut rng);
        let card = kic.register(&UserCredentials::new(id, Nat::from(5u8)), &mut rng).unwrap();
        let clock = ClockModel::new(ClockMode::Abstract, 100, 60);
        let good = build_login_request(&card, &Nat::from(5u8), &clock.now(), &mut rng);
        let mut bad = good.clone();
        bad.y = (&bad.y + 1u32) % &params.n;

        let mut eve = Eavesdropper::default();
        let rules = FormatPolicy::default();
        let delta = Nat::from(60u8);
        assert!(eve.observe(&bad, verify_login(&bad, &clock.now(), &delta, &rules), &clock).is_none());
        let captured = eve.observe(&good, verify_login(&good, &clock.now(), &delta, &rules), &clock).unwrap();
        assert_eq!(captured.captured_at, clock.now());
        assert_eq!(LoginRequest::from_wire(&captured.wire).unwrap(), good);
        assert_eq!(eve.log().len(), 1);
    }

    #[test]
    fn realistic_clock_is_monotone() {
        let mut clock = ClockModel::new(ClockMode::Realistic, 100, 60);
        assert!(clock.set(&Timestamp::from_ticks(99)).is_err());
        clock.set(&Timestamp::from_ticks(150)).unwrap();
        assert_eq!(clock.now(), Timestamp::from_ticks(150));
        let mut free = ClockModel::new(ClockMode::Abstract, 100, 60);
        free.set(&Timestamp::from_ticks(3)).unwrap();
        assert_eq!(free.now(), Timestamp::from_ticks(3));
    }

    #[test]
    fn empty_report_has_zero_summary() {
        let mut out = Vec::new();
        let summary = emit_report(&[], &mut out, ReportOptions::default()).unwrap();
        assert_eq!(summary.total.trials, 0);
        assert!(summary.groups.is_empty());
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("\n{\"summary\":\"ALL\""));
        assert!(text.contains("\"trials\":0,\"feasible\":0,\"equation_pass\":0,\"full_verify_pass\":0"));
    }

    #[test]
    fn mixed_attacks_group_by_label() {
        let mut records = run(&ScenarioConfig::new("a", 1, 8, AttackKind::None, 3));
        records.extend(run(&ScenarioConfig::new("b", 1, 8, AttackKind::Tamper, 4)));
        records.extend(run(&ScenarioConfig::new("c", 1, 8, AttackKind::Euclid, 2)));
        let mut out = Vec::new();
        let summary = emit_report(&records, &mut out, ReportOptions::default()).unwrap();
        let labels: Vec<_> = summary.groups.iter().map(|g| g.summary.as_str()).collect();
        assert_eq!(labels, ["NONE", "TAMPER", "EUCLID"]);
        assert_eq!(summary.total.trials, 9);
        let text = String::from_utf8(out).unwrap();
        let (body, tail) = text.split_once("\n\n").unwrap();
        assert_eq!(body.lines().count(), 9);
        assert_eq!(tail.lines().count(), 4);
        assert!(!body.contains("timings_us"));

        let mut timed = Vec::new();
        emit_report(&records, &mut timed, ReportOptions { timings: true }).unwrap();
        assert!(String::from_utf8(timed).unwrap().lines().next().unwrap().ends_with('}'));
    }

    #[test]
    fn config_files_parse() {
        let one = parse_scenarios(
            r#"
            name = "solo"
            seed = 7
            prime_bits = 32
            attack = "time-factor"
            trials = 10
            [clock]
            mode = "realistic"
            "#,
        )
        .unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].attack, AttackKind::TimeFactor);
        assert_eq!(one[0].clock.delta_t, DEFAULT_DELTA_T);
        assert_eq!(one[0].cid_policy, CidPolicyKind::Sequential);

        let many = parse_scenarios(
            r#"
            [[scenario]]
            name = "a"
            seed = 1
            prime_bits = 16
            attack = "inverse-ts-whitebox"
            trials = 3
            cid_policy = "mirror"

            [[scenario]]
            name = "b"
            seed = 2
            prime_bits = 16
            attack = "none"
            trials = 1
            "#,
        )
        .unwrap();
        assert_eq!(many.len(), 2);
        assert_eq!(many[0].cid_policy, CidPolicyKind::Mirror);

        assert!(parse_scenarios("seed = 1\nprime_bits = 16\nattack = \"none\"\ntrials = 0").is_err());
        assert!(parse_scenarios("seed = 1\nprime_bits = 2\nattack = \"none\"\ntrials = 1").is_err());
        assert!(parse_scenarios("seed = 1\nprime_bits = 16\nattack = \"bogus\"\ntrials = 1").is_err());
    }
}
