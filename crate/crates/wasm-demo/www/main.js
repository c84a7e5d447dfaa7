// Built by `wasm-pack build crates/wasm-demo --target web --out-dir www/pkg`.
import init, { toy_walkthrough, run_attack_scenario, inverse_ts_explorer } from "./pkg/ywc_wasm_demo.js";

const $ = (id) => document.getElementById(id);

function esc(text) {
  return String(text).replace(/[&<>"]/g, (c) => ({ "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;" })[c]);
}

// Wire values are lowercase hex.
const dec = (hex) => BigInt("0x" + hex).toString();

function table(head, rows) {
  const th = head.map((h) => `<th>${esc(h)}</th>`).join("");
  const body = rows.map((r) => "<tr>" + r.map((c) => `<td>${c}</td>`).join("") + "</tr>").join("");
  return `<table><tr>${th}</tr>${body}</table>`;
}

function verdict(reason) {
  return `<span class="${reason === "OK" ? "ok" : "bad"}">${esc(reason)}</span>`;
}

function parse(json, out) {
  const value = JSON.parse(json);
  if (value.error) {
    out.innerHTML = `<p class="bad">${esc(value.error)}</p>`;
    return null;
  }
  return value;
}

function walkthrough() {
  const out = $("walk-out");
  const walk = parse(toy_walkthrough(), out);
  if (!walk) return;
  const c = walk.card;
  const rows = walk.steps.map((s) => [
    esc(s.name), dec(s.message.t), dec(s.message.x), dec(s.message.y),
    `${dec(s.lhs)} ${s.lhs === s.rhs ? "=" : "&ne;"} ${dec(s.rhs)}`, verdict(s.verdict), esc(s.note),
  ]);
  out.innerHTML =
    `<p>card: S = ${dec(c.s)}, h = ${dec(c.h)}</p>` +
    table(["step", "T", "X", "Y", "Y^e vs ID^CID·X^T", "server", "how"], rows);
}

function scenario(event) {
  event.preventDefault();
  const f = new FormData(event.target);
  const out = $("scen-out");
  out.textContent = "running...";
  // Let the browser paint before the synchronous run.
  setTimeout(() => {
    const t0 = performance.now();
    const result = parse(run_attack_scenario(
      f.get("attack"), Number(f.get("bits")), Number(f.get("trials")), Number(f.get("seed")),
      f.get("clock"), f.get("cid"),
    ), out);
    if (!result) return;
    const s = result.summary;
    const rows = [[s.trials, s.feasible, s.equation_pass, s.full_verify_pass, s.predicted_pass, s.cid_collisions,
      s.equation_pass_rate.toFixed(4)]];
    out.innerHTML =
      table(["trials", "feasible", "equation holds", "full verify OK", "predicted pass", "CID collisions", "pass rate"], rows) +
      `<p>${((performance.now() - t0) / 1000).toFixed(2)} s. First records:</p>` +
      `<pre>${esc(result.sample.map((r) => JSON.stringify(r)).join("\n"))}</pre>`;
  }, 10);
}

function explorer(event) {
  event.preventDefault();
  const f = new FormData(event.target);
  const out = $("inv-out");
  const num = (k) => Number(f.get(k));
  const v = parse(inverse_ts_explorer(num("p"), num("q"), num("id"), num("cid"), num("t")), out);
  if (!v) return;
  const yes = (b) => (b === null ? "n/a" : b ? '<span class="ok">verifies</span>' : '<span class="bad">fails</span>');
  out.innerHTML =
    `<p>n = ${v.n}, &lambda;(n) = ${v.lambda}, ord(ID) = ${v.order_id}</p>` +
    table(["variant", "T_f", "predicted", "equation"], [
      ["literal (mod n)", v.literal_t_f ?? "no inverse", yes(v.literal_predicted), yes(v.literal_verified)],
      ["white-box (mod &lambda;)", v.whitebox_t_f ?? "no inverse", "always", yes(v.whitebox_verified)],
    ]) +
    `<p>Literal variant verifies for ${v.literal_successes.length} of the T in [2, ${v.sweep_limit}]` +
    (v.literal_successes.length ? `: ${v.literal_successes.slice(0, 40).join(", ")}${v.literal_successes.length > 40 ? ", ..." : ""}` : "") +
    "</p>";
}

await init();
$("status").textContent = "ready";
$("walk-run").addEventListener("click", walkthrough);
$("scen-form").addEventListener("submit", scenario);
$("inv-form").addEventListener("submit", explorer);
walkthrough();
