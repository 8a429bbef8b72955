// Glue for the demo page. Expects the wasm-bindgen output in ./pkg.
import init, { Demo } from "./pkg/promptfill_web.js";

const $ = (id) => document.getElementById(id);
let demo;

function fmt(p) {
  return p.toFixed(3);
}

function ranked(list) {
  return list.map((r) => `${r.token} ${fmt(r.prob)}`).join("<br>");
}

function showError(el, e) {
  el.innerHTML = `<span class="err">${e}</span>`;
}

let tuned = {};

function setGamma(g) {
  $("gamma").value = g;
  $("gamma-value").textContent = g;
}

function parse() {
  const gamma = parseFloat($("gamma").value);
  try {
    const view = JSON.parse(demo.parse($("utterance").value, $("clause").value, gamma));
    $("sql").textContent = view.sql;
    $("steps").innerHTML = view.clauses.map((c) => {
      const rows = c.steps.map((s, i) => `<tr>
          <td>${i}</td><td class="chosen">${s.chosen}</td>
          <td>${ranked(s.few)}</td><td>${ranked(s.zero)}</td>
          <td>${ranked(s.ensembled)}</td><td>${s.allowed}</td></tr>`).join("");
      return `<h3>${c.clause} (&gamma; = ${c.gamma}): <code>${c.value}</code>${c.off_trie ? " (left the candidate trie)" : ""}</h3>
        <table><tr><th>step</th><th>chosen</th><th>few-shot</th>
        <th>zero-shot, rescaled</th><th>ensemble</th><th>allowed</th></tr>${rows}</table>`;
    }).join("");
  } catch (e) {
    $("sql").textContent = "";
    showError($("steps"), e);
  }
}

function sweep() {
  try {
    const points = JSON.parse(demo.sweep($("utterance").value, $("clause").value));
    $("sweep-table").innerHTML = "<tr><th>&gamma;</th><th>query</th></tr>" +
      points.map((p) => `<tr><td>${p.gamma.toFixed(1)}</td><td><code>${p.sql ?? "parse failed"}</code></td></tr>`).join("");
  } catch (e) {
    showError($("sweep-table"), e);
  }
}

function confidence() {
  try {
    const c = JSON.parse(demo.confidence($("weights").value));
    $("confidence-out").textContent =
      `p1 = ${fmt(c.p1)}, p2 = ${fmt(c.p2)}, MoC = ${fmt(c.moc)}, RoC = ${fmt(c.roc)}`;
  } catch (e) {
    showError($("confidence-out"), e);
  }
}

async function main() {
  await init();
  // let the status line paint before the training pass blocks the thread
  await new Promise((r) => setTimeout(r, 20));
  demo = new Demo();
  $("status").textContent = "Models trained on the bundled ecommerce data.";
  const gammas = JSON.parse(demo.gammas());
  $("tuned").textContent = gammas.map(([c, g]) => `${c} ${g}`).join(", ");
  for (const [c, g] of gammas) {
    tuned[c] = g;
    const o = document.createElement("option");
    o.value = c;
    o.textContent = c;
    $("clause").appendChild(o);
  }
  // the last clause is where zero-shot help matters most in this data
  $("clause").value = gammas[gammas.length - 1][0];
  setGamma(tuned[$("clause").value]);
  $("clause").onchange = (e) => {
    setGamma(tuned[e.target.value]);
    parse();
  };
  for (const s of JSON.parse(demo.samples())) {
    const o = document.createElement("option");
    o.value = s.utterance;
    o.textContent = `[${s.split}] ${s.utterance}`;
    $("samples").appendChild(o);
  }
  $("samples").onchange = (e) => {
    if (e.target.value) {
      $("utterance").value = e.target.value;
      parse();
    }
  };
  $("gamma").oninput = (e) => {
    $("gamma-value").textContent = e.target.value;
    parse();
  };
  $("parse").onclick = parse;
  $("sweep").onclick = sweep;
  $("confidence").onclick = confidence;
  parse();
  confidence();
}

main().catch((e) => showError($("status"), e));
