use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn ywc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ywc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn ywc")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// keygen, register and login at t = 1000; returns the work directory.
fn enrolled() -> TempDir {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    assert_eq!(code(&ywc(p, &["keygen", "--bits", "24", "--seed", "7", "--out", "kic"])), 0);
    let register = ywc(p, &[
        "register", "--secret", "kic/secret.json", "--id", "alice", "--pw", "hunter2", "--seed", "8",
        "--out", "card.json",
    ]);
    assert_eq!(code(&register), 0, "{}", String::from_utf8_lossy(&register.stderr));
    let login = ywc(p, &[
        "login", "--card", "card.json", "--pw", "hunter2", "--t", "1000", "--seed", "9", "--out", "m.json",
    ]);
    assert_eq!(code(&login), 0);
    dir
}

#[test]
fn demo_prints_toy_values() {
    let dir = TempDir::new().unwrap();
    let out = stdout(&ywc(dir.path(), &["demo"]));
    assert!(out.contains("S = 8, h = 16"));
    assert!(out.contains("X = 29  Y = 22"));
    assert!(out.contains("Y^e = 29 != ID^CID·X^T = 22  [EQUATION_FAILED]"));
    assert!(out.contains("Y^e = 2 == ID^CID·X^T = 2  [OK]"));
}

#[test]
fn public_file_carries_no_secrets() {
    let dir = enrolled();
    let public: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("kic/public.json")).unwrap()).unwrap();
    let keys: Vec<_> = public.as_object().unwrap().keys().cloned().collect();
    assert_eq!(keys, ["e", "g", "n"]);
    let secret = fs::read_to_string(dir.path().join("kic/secret.json")).unwrap();
    assert!(secret.contains("\"d\""));
}

#[test]
fn legitimate_login_and_staleness() {
    let dir = enrolled();
    let p = dir.path();
    let ok = ywc(p, &["verify", "--login", "m.json", "--public", "kic/public.json", "--now", "1030"]);
    assert_eq!((code(&ok), stdout(&ok).trim()), (0, "OK"));
    let stale = ywc(p, &["verify", "--login", "m.json", "--now", "1061"]);
    assert_eq!((code(&stale), stdout(&stale).trim()), (1, "STALE_TIMESTAMP"));
    let wrong = ywc(p, &["login", "--card", "card.json", "--pw", "guess", "--t", "1000", "--seed", "9", "--out", "w.json"]);
    assert_eq!(code(&wrong), 0);
    let rejected = ywc(p, &["verify", "--login", "w.json", "--now", "1000"]);
    assert_eq!((code(&rejected), stdout(&rejected).trim()), (1, "EQUATION_FAILED"));
}

#[test]
fn euclid_forgery_is_accepted() {
    let dir = enrolled();
    let p = dir.path();
    let attack = ywc(p, &["attack", "--type", "euclid", "--intercept", "m.json", "--t-a", "1001", "--out", "f.json"]);
    match code(&attack) {
        0 => {
            let verify = ywc(p, &["verify", "--login", "f.json", "--public", "kic/public.json", "--now", "1001"]);
            assert_eq!((code(&verify), stdout(&verify).trim()), (0, "OK"));
        }
        // gcd(e, 1001) > 1 for this key; the attack must say so.
        3 => assert!(String::from_utf8_lossy(&attack.stderr).contains("gcd(e, t_a)")),
        other => panic!("unexpected exit {other}"),
    }
}

#[test]
fn time_factor_and_inverse_id_forgeries_pass() {
    let dir = enrolled();
    let p = dir.path();
    let tf = ywc(p, &["attack", "--type", "time-factor", "--intercept", "m.json", "--out", "tf.json"]);
    assert_eq!(code(&tf), 0);
    // Largest divisor of 1000 below 1000.
    assert_eq!(code(&ywc(p, &["verify", "--login", "tf.json", "--now", "500"])), 0);

    let id = ywc(p, &[
        "attack", "--type", "inverse-id", "--intercept", "m.json", "--kic", "kic/secret.json", "--cid-policy",
        "mirror", "--t-a", "2000", "--seed", "3", "--out", "id.json",
    ]);
    assert_eq!(code(&id), 0, "{}", String::from_utf8_lossy(&id.stderr));
    let verify = ywc(p, &["verify", "--login", "id.json", "--public", "kic/public.json", "--now", "2000"]);
    assert_eq!(code(&verify), 0);
}

#[test]
fn exit_codes_for_infeasible_and_bad_input() {
    let dir = enrolled();
    let p = dir.path();
    let window = ywc(p, &["attack", "--type", "time-factor", "--intercept", "m.json", "--window", "999", "999"]);
    assert_eq!(code(&window), 3);
    let whitebox = ywc(p, &["attack", "--type", "inverse-ts-whitebox", "--intercept", "m.json"]);
    assert_eq!(code(&whitebox), 2);
    assert!(String::from_utf8_lossy(&whitebox.stderr).contains("--allow-secret-access"));
    // 1000 is even and so is λ(n): no inverse exists.
    let even = ywc(p, &[
        "attack", "--type", "inverse-ts-whitebox", "--intercept", "m.json", "--allow-secret-access",
        "kic/secret.json",
    ]);
    assert_eq!(code(&even), 3);

    fs::write(p.join("bad.json"), "{\"id\":\"02\"}").unwrap();
    assert_eq!(code(&ywc(p, &["verify", "--login", "bad.json", "--now", "5"])), 2);
    assert_eq!(code(&ywc(p, &["verify", "--login", "missing.json"])), 2);
    assert_eq!(code(&ywc(p, &["attack", "--type", "bogus", "--intercept", "m.json"])), 2);
}

#[test]
fn scenario_reports_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    fs::write(
        p.join("s.toml"),
        r#"
[[scenario]]
name = "e"
seed = 11
prime_bits = 16
attack = "euclid"
trials = 20

[[scenario]]
name = "lit"
seed = 11
prime_bits = 16
attack = "inverse-ts-literal"
trials = 20
clock = { mode = "realistic", delta_t = 30 }
"#,
    )
    .unwrap();
    for out in ["a.jsonl", "b.jsonl"] {
        assert_eq!(code(&ywc(p, &["run-scenario", "--config", "s.toml", "--out", out])), 0);
    }
    let a = fs::read(p.join("a.jsonl")).unwrap();
    assert_eq!(a, fs::read(p.join("b.jsonl")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().filter(|l| l.contains("\"trial\"")).count(), 40);
    assert!(text.lines().last().unwrap().contains("\"summary\":\"ALL\""));

    let flags = ywc(p, &["run-scenario", "--type", "tamper", "--bits", "16", "--trials", "5", "--seed", "1"]);
    assert_eq!(code(&flags), 0);
    assert!(stdout(&flags).contains("EQUATION_FAILED"));
    fs::write(p.join("bad.toml"), "seed = 1\nprime_bits = 16\nattack = \"none\"\ntrials = 0\n").unwrap();
    assert_eq!(code(&ywc(p, &["run-scenario", "--config", "bad.toml"])), 2);
}

#[test]
fn euclid_with_t_a_equal_to_e_is_infeasible() {
    let dir = enrolled();
    let p = dir.path();
    let public: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p.join("kic/public.json")).unwrap()).unwrap();
    let e = u64::from_str_radix(public["e"].as_str().unwrap(), 16).unwrap().to_string();
    let out = ywc(p, &["attack", "--type", "euclid", "--intercept", "m.json", "--t-a", &e]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains(&format!("gcd(e, t_a) = {e}")));
}

#[test]
fn tampered_line_is_rejected() {
    let dir = enrolled();
    let p = dir.path();
    let line = fs::read_to_string(p.join("m.json")).unwrap();
    let m: serde_json::Value = serde_json::from_str(&line).unwrap();
    let y = m["y"].as_str().unwrap();
    let flipped = u64::from_str_radix(y, 16).unwrap() ^ 1;
    // Edit in place: the wire format is key-order sensitive.
    let tampered = line.replace(&format!("\"y\":\"{y}\""), &format!("\"y\":\"{flipped:x}\""));
    assert_ne!(tampered, line);
    fs::write(p.join("t.json"), tampered).unwrap();
    let out = ywc(p, &["verify", "--login", "t.json", "--now", "1000"]);
    assert_eq!((code(&out), stdout(&out).trim()), (1, "EQUATION_FAILED"));
}
