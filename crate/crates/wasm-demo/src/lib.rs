//! Browser bindings. Every export returns a JSON string; failures come back
//! as `{"error": "..."}` so the page never has to catch exceptions.

use serde::Serialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

use ywc_core::attacks::{forge_via_inverse_timestamp, GroupOracle, Intercept, InverseTsMode};
use ywc_core::harness::{run_scenario, summarize, AttackKind, CidPolicyKind, ClockMode, ScenarioConfig};
use ywc_core::numtheory::{gcd, Nat};
use ywc_core::protocol::{equation_holds, LoginRequest, Timestamp};

/// Browser runs are single-threaded; keep them short.
const MAX_TRIALS: u32 = 2000;
const MAX_PRIME_BITS: u32 = 64;
/// Timestamps swept by the explorer.
const SWEEP_LIMIT: u32 = 400;

fn render<T: Serialize>(result: Result<T, String>) -> String {
    let value = match result {
        Ok(v) => serde_json::to_value(v).unwrap_or_else(|e| json!({ "error": e.to_string() })),
        Err(e) => json!({ "error": e }),
    };
    value.to_string()
}

fn parse_name<T: serde::de::DeserializeOwned>(what: &str, name: &str) -> Result<T, String> {
    serde_json::from_value(Value::String(name.to_owned())).map_err(|_| format!("unknown {what} {name:?}"))
}

/// Every construction on the toy modulus `n = 35`.
#[wasm_bindgen]
pub fn toy_walkthrough() -> String {
    render(ywc_core::demo::toy_walkthrough().map_err(|e| e.to_string()))
}

/// Runs a seeded scenario and returns the summary plus the first few records.
#[wasm_bindgen]
pub fn run_attack_scenario(attack: &str, prime_bits: u32, trials: u32, seed: u32, clock: &str, cid_policy: &str) -> String {
    render((|| {
        if !(3..=MAX_PRIME_BITS).contains(&prime_bits) {
            return Err(format!("prime bits must lie in [3, {MAX_PRIME_BITS}]"));
        }
        if !(1..=MAX_TRIALS).contains(&trials) {
            return Err(format!("trials must lie in [1, {MAX_TRIALS}]"));
        }
        let attack: AttackKind = parse_name("attack", attack)?;
        let config = ScenarioConfig::new("browser", seed.into(), prime_bits.into(), attack, trials as usize)
            .with_clock(parse_name::<ClockMode>("clock mode", clock)?)
            .with_cid_policy(parse_name::<CidPolicyKind>("CID policy", cid_policy)?);
        let records = run_scenario(&config).map_err(|e| e.to_string())?;
        let summary = summarize(&records);
        Ok(json!({
            "summary": summary.total,
            "sample": records.iter().take(8).collect::<Vec<_>>(),
        }))
    })())
}

#[derive(Serialize)]
struct Explorer {
    n: String,
    lambda: String,
    order_id: String,
    literal_t_f: Option<String>,
    literal_predicted: Option<bool>,
    literal_verified: Option<bool>,
    whitebox_t_f: Option<String>,
    whitebox_verified: Option<bool>,
    sweep_limit: u32,
    literal_successes: Vec<u32>,
}

/// Runs both inverse-timestamp variants for a small `n = p·q` and `(id, cid, t)`,
/// then sweeps `t` to list where the literal variant happens to verify.
#[wasm_bindgen]
pub fn inverse_ts_explorer(p: u32, q: u32, id: u32, cid: u32, t: u32) -> String {
    render(explore(p, q, id, cid, t))
}

fn explore(p: u32, q: u32, id: u32, cid: u32, t: u32) -> Result<Explorer, String> {
    if p == q {
        return Err("p and q must differ".into());
    }
    let n = Nat::from(p) * Nat::from(q);
    let oracle = GroupOracle::factor_small(&n).map_err(|e| format!("n = {n}: {e}"))?;
    let (id, cid) = (Nat::from(id), Nat::from(cid));
    if id < Nat::from(2u8) || id >= n || gcd(&id, &n) != Nat::from(1u8) {
        return Err("id must be a unit in [2, n)".into());
    }
    if cid < Nat::from(2u8) || cid >= n {
        return Err("cid must lie in [2, n)".into());
    }
    let order_id = oracle.order(&id).map_err(|e| e.to_string())?;
    // Success depends only on (id, cid, t); x, y, e and k are placeholders.
    let forge = |t: u32, mode| {
        let m = LoginRequest {
            id: id.clone(),
            cid: cid.clone(),
            x: Nat::from(1u8),
            y: Nat::from(1u8),
            n: n.clone(),
            e: Nat::from(3u8),
            g: Nat::from(2u8),
            t: Timestamp::new(Nat::from(t)).ok()?,
        };
        let intercept = Intercept::capture(&m, m.t.clone());
        let k = (2u32..).map(Nat::from).find(|k| gcd(k, &n) == Nat::from(1u8))?;
        forge_via_inverse_timestamp(&intercept, mode, &k, Some(&oracle)).ok()
    };
    let literal = forge(t, InverseTsMode::Literal);
    let whitebox = forge(t, InverseTsMode::Whitebox);
    let literal_successes = (2..=SWEEP_LIMIT)
        .filter(|&s| forge(s, InverseTsMode::Literal).is_some_and(|f| equation_holds(&f.forged)))
        .collect();
    Ok(Explorer {
        n: n.to_string(),
        lambda: oracle.lambda.to_string(),
        order_id: order_id.to_string(),
        literal_t_f: literal.as_ref().map(|f| f.t_f.to_string()),
        literal_predicted: literal.as_ref().and_then(|f| f.predicted_success),
        literal_verified: literal.as_ref().map(|f| equation_holds(&f.forged)),
        whitebox_t_f: whitebox.as_ref().map(|f| f.t_f.to_string()),
        whitebox_verified: whitebox.as_ref().map(|f| equation_holds(&f.forged)),
        sweep_limit: SWEEP_LIMIT,
        literal_successes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: String) -> Value {
        serde_json::from_str(&s).unwrap()
    }

    #[test]
    fn walkthrough_has_every_step() {
        let v = parse(toy_walkthrough());
        let names: Vec<_> = v["steps"].as_array().unwrap().iter().map(|s| s["name"].as_str().unwrap()).collect();
        assert_eq!(names, ["legitimate", "euclid", "time-factor", "inverse-id", "inverse-ts-literal", "inverse-ts-whitebox"]);
        assert_eq!(v["card"]["s"], "8");
    }

    #[test]
    fn scenario_summary() {
        let v = parse(run_attack_scenario("euclid", 16, 10, 1, "abstract", "sequential"));
        assert_eq!(v["summary"]["trials"], 10);
        assert_eq!(v["summary"]["equation_pass"], 10);
        assert_eq!(v["sample"].as_array().unwrap().len(), 8);
        assert!(parse(run_attack_scenario("nope", 16, 10, 1, "abstract", "sequential"))["error"].is_string());
        assert!(parse(run_attack_scenario("none", 16, 0, 1, "abstract", "sequential"))["error"].is_string());
    }

    #[test]
    fn explorer_matches_toy_numbers() {
        let v = parse(inverse_ts_explorer(5, 7, 2, 3, 6));
        assert_eq!((v["lambda"].as_str(), v["order_id"].as_str()), (Some("12"), Some("12")));
        assert_eq!(v["literal_t_f"], "6");
        assert_eq!((v["literal_predicted"].as_bool(), v["literal_verified"].as_bool()), (Some(false), Some(false)));
        // 6 shares a factor with λ = 12.
        assert!(v["whitebox_t_f"].is_null());
        let v = parse(inverse_ts_explorer(5, 7, 2, 3, 5));
        assert_eq!(v["whitebox_verified"].as_bool(), Some(true));
        assert!(parse(inverse_ts_explorer(5, 5, 2, 3, 5))["error"].is_string());
    }

    #[test]
    fn explorer_sweep_agrees_with_prediction() {
        let v = parse(inverse_ts_explorer(11, 23, 3, 4, 7));
        assert!(!v["literal_successes"].as_array().unwrap().is_empty());
        for t in v["literal_successes"].as_array().unwrap() {
            let t = t.as_u64().unwrap() as u32;
            let point = parse(inverse_ts_explorer(11, 23, 3, 4, t));
            assert_eq!(point["literal_predicted"].as_bool(), Some(true), "t = {t}");
        }
    }
}
