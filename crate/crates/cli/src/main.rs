//! `ywc`: key setup, card issuance, login, verification, forgery attacks and
//! seeded scenario runs from the command line.
//!
//! Exit codes: 0 success, 1 rejected (or forgery failed the equation),
//! 2 input error, 3 attack infeasible.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use serde_json::json;

use ywc_core::attacks::{
    forge_via_euclid, forge_via_inverse_timestamp, forge_via_time_factor,
    impersonate_via_inverse_registration, random_unit, AttackError, GroupOracle, Intercept,
    InverseTsMode,
};
use ywc_core::demo::toy_walkthrough;
use ywc_core::harness::{
    emit_report, parse_scenarios, run_scenarios, AttackKind, CidPolicyKind, ClockMode,
    ClockSettings, ReportOptions, ScenarioConfig,
};
use ywc_core::numtheory::{from_hex, to_hex, Nat};
use ywc_core::protocol::{
    build_login_request, equation_holds, encode_text, kic_setup, verify_login, CidPolicy,
    FormatPolicy, Kic, KicParams, LoginRequest, PublicParams, RegistrationEndpoint,
    SmartCardContents, Timestamp, UserCredentials, VerifyReason, DEFAULT_DELTA_T,
};

const EXIT_REJECT: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(name = "ywc", version, about = "Smart-card password scheme and forgery attack workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate KIC key material; writes public.json and secret.json.
    Keygen(KeygenArgs),
    /// Issue a smart card for a user.
    Register(RegisterArgs),
    /// Build a login request from a card.
    Login(LoginArgs),
    /// Run server-side verification on a login request.
    Verify(VerifyArgs),
    /// Forge a login request from an intercepted one.
    Attack(AttackArgs),
    /// Run seeded trial scenarios and emit a JSON-lines report.
    RunScenario(ScenarioArgs),
    /// Walk through every construction on the toy modulus n = 35.
    Demo(DemoArgs),
}

#[derive(Args)]
struct KeygenArgs {
    /// Bits per prime.
    #[arg(long, default_value_t = 64)]
    bits: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct Credential {
    /// Identity as text.
    #[arg(long, conflicts_with = "id_hex", required_unless_present = "id_hex")]
    id: Option<String>,
    /// Identity as a hex integer.
    #[arg(long)]
    id_hex: Option<String>,
}

#[derive(Args)]
struct Password {
    /// Password as text.
    #[arg(long, conflicts_with = "pw_hex", required_unless_present = "pw_hex")]
    pw: Option<String>,
    /// Password as a hex integer.
    #[arg(long)]
    pw_hex: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CidPolicyArg {
    Sequential,
    Random,
    Mirror,
}

#[derive(Args)]
struct RegisterArgs {
    /// KIC secret file from `keygen`.
    #[arg(long)]
    secret: PathBuf,
    #[command(flatten)]
    id: Credential,
    #[command(flatten)]
    pw: Password,
    /// Each invocation is a fresh KIC, so `sequential` always hands out 2.
    #[arg(long, value_enum, default_value = "sequential")]
    cid_policy: CidPolicyArg,
    /// CID for the mirror policy (hex).
    #[arg(long, required_if_eq("cid_policy", "mirror"))]
    cid: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Card file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LoginArgs {
    #[arg(long)]
    card: PathBuf,
    #[command(flatten)]
    pw: Password,
    /// Timestamp; defaults to the current Unix time.
    #[arg(long)]
    t: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the wire line; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// File holding one login request wire line.
    #[arg(long)]
    login: PathBuf,
    /// Server public parameters; when given, messages for other parameters
    /// are rejected.
    #[arg(long)]
    public: Option<PathBuf>,
    /// Server clock; defaults to the current Unix time.
    #[arg(long)]
    now: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_DELTA_T)]
    delta_t: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AttackArg {
    Euclid,
    TimeFactor,
    InverseId,
    InverseTsLiteral,
    InverseTsWhitebox,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long = "type", value_enum)]
    kind: AttackArg,
    /// File holding the intercepted wire line.
    #[arg(long)]
    intercept: PathBuf,
    /// Forged timestamp (euclid: t_a, default t + 1; inverse-id: T_f,
    /// default the current Unix time).
    #[arg(long = "t-a", visible_alias = "t-f")]
    t_target: Option<u64>,
    /// Divisor window for time-factor, inclusive; default [2, t - 1].
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    window: Option<Vec<u64>>,
    /// KIC secret file acting as the registration service (inverse-id).
    #[arg(long)]
    kic: Option<PathBuf>,
    /// CID policy of that registration service; `mirror` reuses the
    /// intercepted CID.
    #[arg(long, value_enum, default_value = "sequential")]
    cid_policy: CidPolicyArg,
    /// Nonce k for the inverse-timestamp forgeries (hex); random unit by default.
    #[arg(long)]
    k: Option<String>,
    /// KIC secret file. Required for inverse-ts-whitebox; with
    /// inverse-ts-literal it enables the success prediction.
    #[arg(long, value_name = "SECRET_FILE")]
    allow_secret_access: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the forged wire line; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioAttackArg {
    None,
    Euclid,
    TimeFactor,
    InverseId,
    InverseTsLiteral,
    InverseTsWhitebox,
    Tamper,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClockArg {
    Abstract,
    Realistic,
}

#[derive(Args)]
struct ScenarioArgs {
    /// TOML scenario file; overrides the single-scenario flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "type", value_enum, default_value = "none")]
    kind: ScenarioAttackArg,
    #[arg(long, default_value_t = 32)]
    bits: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, value_enum, default_value = "abstract")]
    clock_mode: ClockArg,
    #[arg(long, value_enum, default_value = "sequential")]
    cid_policy: CidPolicyArg,
    #[arg(long, default_value_t = DEFAULT_DELTA_T)]
    delta_t: u64,
    /// Include per-phase timings (makes the report non-reproducible).
    #[arg(long)]
    timings: bool,
    /// Report file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DemoArgs {
    /// Print the walkthrough as JSON.
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Keygen(args) => keygen(args),
        Command::Register(args) => register(args),
        Command::Login(args) => login(args),
        Command::Verify(args) => verify(args),
        Command::Attack(args) => attack(args),
        Command::RunScenario(args) => run_scenario(args),
        Command::Demo(args) => demo(args),
    }
}

fn rng(seed: Option<u64>) -> ChaCha8Rng {
    match seed {
        Some(seed) => ChaCha8Rng::seed_from_u64(seed),
        None => ChaCha8Rng::from_entropy(),
    }
}

fn unix_now() -> Result<u64> {
    Ok(SystemTime::now().duration_since(UNIX_EPOCH)?.as_secs())
}

fn timestamp(ticks: u64) -> Result<Timestamp> {
    Timestamp::new(Nat::from(ticks)).context("timestamp")
}

/// Lenient hex input: optional `0x`, any case.
fn parse_hex(text: &str) -> Result<Nat> {
    let digits = text.strip_prefix("0x").unwrap_or(text).to_ascii_lowercase();
    let digits = digits.trim_start_matches('0');
    from_hex(if digits.is_empty() { "0" } else { digits }).with_context(|| format!("bad hex value {text:?}"))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_or_print(path: Option<&Path>, line: &str) -> Result<()> {
    match path {
        Some(path) => write_file(path, &format!("{line}\n")),
        None => {
            println!("{line}");
            Ok(())
        }
    }
}

fn read_secret(path: &Path) -> Result<KicParams> {
    let params: KicParams = read_json(path)?;
    params.validate().with_context(|| format!("checking {}", path.display()))?;
    Ok(params)
}

fn read_login(path: &Path) -> Result<LoginRequest> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    LoginRequest::from_wire(&text).with_context(|| format!("parsing {}", path.display()))
}

fn credential(text: &Option<String>, hex: &Option<String>, n: &Nat) -> Result<Nat> {
    match (text, hex) {
        (Some(text), _) => Ok(encode_text(text, n)),
        (None, Some(hex)) => parse_hex(hex),
        (None, None) => bail!("missing credential"),
    }
}

fn keygen(args: KeygenArgs) -> Result<u8> {
    let params = kic_setup(args.bits, &mut rng(args.seed))?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let public = args.out.join("public.json");
    let secret = args.out.join("secret.json");
    write_file(&public, &format!("{}\n", serde_json::to_string_pretty(&params.public())?))?;
    write_file(&secret, &format!("{}\n", serde_json::to_string_pretty(&params)?))?;
    eprintln!("public parameters -> {}", public.display());
    eprintln!("KIC secret (keep private) -> {}", secret.display());
    Ok(0)
}

fn cid_policy(arg: CidPolicyArg, mirror: Option<Nat>) -> Result<CidPolicy> {
    Ok(match arg {
        CidPolicyArg::Sequential => CidPolicy::sequential(),
        CidPolicyArg::Random => CidPolicy::Random,
        CidPolicyArg::Mirror => CidPolicy::Mirror(mirror.context("mirror policy needs a CID")?),
    })
}

fn register(args: RegisterArgs) -> Result<u8> {
    let params = read_secret(&args.secret)?;
    let creds = UserCredentials::new(
        credential(&args.id.id, &args.id.id_hex, &params.n)?,
        credential(&args.pw.pw, &args.pw.pw_hex, &params.n)?,
    );
    let mirror = args.cid.as_deref().map(parse_hex).transpose()?;
    let mut kic = Kic::new(params, cid_policy(args.cid_policy, mirror)?);
    let card = kic.register(&creds, &mut rng(args.seed))?;
    write_file(&args.out, &format!("{}\n", serde_json::to_string_pretty(&card)?))?;
    eprintln!("card issued with CID {} -> {}", card.cid, args.out.display());
    Ok(0)
}

fn login(args: LoginArgs) -> Result<u8> {
    let card: SmartCardContents = read_json(&args.card)?;
    let pw = credential(&args.pw.pw, &args.pw.pw_hex, &card.n)?;
    let t = timestamp(match args.t {
        Some(t) => t,
        None => unix_now()?,
    })?;
    let m = build_login_request(&card, &pw, &t, &mut rng(args.seed));
    write_or_print(args.out.as_deref(), &m.to_wire())?;
    Ok(0)
}

fn verify(args: VerifyArgs) -> Result<u8> {
    let m = read_login(&args.login)?;
    let rules = match &args.public {
        Some(path) => FormatPolicy::pinned(read_json::<PublicParams>(path)?),
        None => FormatPolicy::default(),
    };
    let now = timestamp(match args.now {
        Some(now) => now,
        None => unix_now()?,
    })?;
    let decision = verify_login(&m, &now, &Nat::from(args.delta_t), &rules);
    println!("{}", decision.reason);
    Ok(if decision.accepted { 0 } else { EXIT_REJECT })
}

fn attack(args: AttackArgs) -> Result<u8> {
    let wire = fs::read_to_string(&args.intercept)
        .with_context(|| format!("reading {}", args.intercept.display()))?;
    let captured_at = LoginRequest::from_wire(&wire)
        .with_context(|| format!("parsing {}", args.intercept.display()))?
        .t;
    let intercept = Intercept::from_wire(&wire, captured_at)?;
    let t = intercept.m.t.ticks().clone();
    let mut rng = rng(args.seed);
    let secret = args.allow_secret_access.as_deref().map(read_secret).transpose()?;
    if let Some(secret) = &secret {
        if secret.n != intercept.m.n {
            bail!("secret file belongs to a different modulus than the intercept");
        }
    }

    let (forged, details) = match args.kind {
        AttackArg::Euclid => {
            let t_a = match args.t_target {
                Some(t_a) => timestamp(t_a)?,
                None => Timestamp::new(&t + 1u32)?,
            };
            match forge_via_euclid(&intercept, &t_a) {
                Ok(f) => (f.forged, json!({ "t_a": f.t_a, "u": to_hex(&f.u), "v": to_hex(&f.v) })),
                Err(e) => return attack_failed(e),
            }
        }
        AttackArg::TimeFactor => {
            let (lo, hi) = match args.window.as_deref() {
                Some([lo, hi]) => (timestamp(*lo)?, timestamp(*hi)?),
                _ => {
                    let hi = Timestamp::new(&t - 1u32).context("intercepted timestamp too small")?;
                    (Timestamp::from_ticks(2), hi)
                }
            };
            match forge_via_time_factor(&intercept, (&lo, &hi)) {
                Ok(f) => (f.forged, json!({ "w": to_hex(&f.w), "t_a": f.t_a })),
                Err(e) => return attack_failed(e),
            }
        }
        AttackArg::InverseId => {
            let path = args.kic.as_deref().context("inverse-id needs --kic <secret file> as the registration service")?;
            let params = read_secret(path)?;
            let mut kic = Kic::new(params, cid_policy(args.cid_policy, Some(intercept.m.cid.clone()))?);
            let t_f = timestamp(match args.t_target {
                Some(t_f) => t_f,
                None => unix_now()?,
            })?;
            match impersonate_via_inverse_registration(&intercept, &mut kic, &t_f, &mut rng) {
                Ok(r) => (
                    r.forged,
                    json!({
                        "id_f": to_hex(&r.id_f),
                        "rogue_cid": to_hex(&r.rogue_card.cid),
                        "recovered_s": to_hex(&r.recovered_s),
                        "cid_collision": r.cid_collision,
                    }),
                ),
                Err(e) => return attack_failed(e),
            }
        }
        AttackArg::InverseTsLiteral | AttackArg::InverseTsWhitebox => {
            let mode = if args.kind == AttackArg::InverseTsLiteral {
                InverseTsMode::Literal
            } else {
                InverseTsMode::Whitebox
            };
            if mode == InverseTsMode::Whitebox && secret.is_none() {
                bail!("inverse-ts-whitebox needs --allow-secret-access <secret file>");
            }
            let oracle = secret.as_ref().map(GroupOracle::from_kic).transpose()?;
            let k = match &args.k {
                Some(k) => parse_hex(k)?,
                None => random_unit(&intercept.m.n, &mut rng),
            };
            match forge_via_inverse_timestamp(&intercept, mode, &k, oracle.as_ref()) {
                Ok(f) => (
                    f.forged,
                    json!({ "t_f": f.t_f, "k": to_hex(&f.k), "predicted_success": f.predicted_success }),
                ),
                Err(e) => return attack_failed(e),
            }
        }
    };
    let holds = equation_holds(&forged);
    let transcript = json!({
        "attack": args.kind.to_possible_value().map(|v| v.get_name().to_owned()),
        "intercepted": intercept.wire,
        "details": details,
        "forged": forged.to_wire(),
        "equation_holds": holds,
    });
    eprintln!("{transcript}");
    write_or_print(args.out.as_deref(), &forged.to_wire())?;
    Ok(if holds { 0 } else { EXIT_REJECT })
}

fn attack_failed(e: AttackError) -> Result<u8> {
    match e {
        AttackError::Infeasible(reason) => {
            eprintln!("infeasible: {reason}");
            Ok(EXIT_INFEASIBLE)
        }
        AttackError::CriticalFinding { factor } => {
            eprintln!("critical finding: the intercept exposes modulus factor {factor}");
            Ok(EXIT_INPUT)
        }
    }
}

fn run_scenario(args: ScenarioArgs) -> Result<u8> {
    let configs = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_scenarios(&text)?
        }
        None => {
            let attack = match args.kind {
                ScenarioAttackArg::None => AttackKind::None,
                ScenarioAttackArg::Euclid => AttackKind::Euclid,
                ScenarioAttackArg::TimeFactor => AttackKind::TimeFactor,
                ScenarioAttackArg::InverseId => AttackKind::InverseId,
                ScenarioAttackArg::InverseTsLiteral => AttackKind::InverseTsLiteral,
                ScenarioAttackArg::InverseTsWhitebox => AttackKind::InverseTsWhitebox,
                ScenarioAttackArg::Tamper => AttackKind::Tamper,
            };
            let mut config = ScenarioConfig::new("cli", args.seed, args.bits, attack, args.trials);
            config.cid_policy = match args.cid_policy {
                CidPolicyArg::Sequential => CidPolicyKind::Sequential,
                CidPolicyArg::Random => CidPolicyKind::Random,
                CidPolicyArg::Mirror => CidPolicyKind::Mirror,
            };
            config.clock = ClockSettings {
                mode: match args.clock_mode {
                    ClockArg::Abstract => ClockMode::Abstract,
                    ClockArg::Realistic => ClockMode::Realistic,
                },
                delta_t: args.delta_t,
                ..ClockSettings::default()
            };
            config.validate()?;
            vec![config]
        }
    };
    let records = run_scenarios(&configs)?;
    let options = ReportOptions { timings: args.timings };
    let summary = match &args.out {
        Some(path) => {
            let mut file = io::BufWriter::new(
                fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
            );
            emit_report(&records, &mut file, options)?
        }
        None => emit_report(&records, &mut io::stdout().lock(), options)?,
    };
    for group in &summary.groups {
        eprintln!(
            "{} {}: {} trials, {} feasible, equation {}, full verify {}",
            group.scenario, group.summary, group.trials, group.feasible, group.equation_pass, group.full_verify_pass
        );
    }
    Ok(0)
}

fn demo(args: DemoArgs) -> Result<u8> {
    let walk = toy_walkthrough()?;
    let mut out = io::stdout().lock();
    if args.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&walk)?)?;
        return Ok(0);
    }
    let card = &walk.card;
    writeln!(out, "toy KIC: p = 5, q = 7, n = {}, e = {}, d = 5, g = {}", card.n, card.e, card.g)?;
    writeln!(out, "card: ID = {}, CID = {}, S = {}, h = {}", card.id, card.cid, card.s, card.h)?;
    writeln!(out)?;
    for step in &walk.steps {
        let m = &step.message;
        let mark = if step.verdict == VerifyReason::Ok { "==" } else { "!=" };
        writeln!(out, "{:<20} T = {:<3} X = {:<3} Y = {:<3} Y^e = {} {mark} ID^CID·X^T = {}  [{}]",
            step.name, m.t, m.x, m.y, step.lhs, step.rhs, step.verdict)?;
        writeln!(out, "{:<20} {}", "", step.note)?;
    }
    Ok(0)
}
