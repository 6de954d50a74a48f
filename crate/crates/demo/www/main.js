import init, { realization, sweepUsers, derived } from "./pkg/streetperc_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function params() {
  return {
    theta: num("theta"),
    threshold: num("tau"),
    relay_probability: num("p"),
    interference: $("scope").value,
  };
}

function guard(f) {
  return () => {
    $("error").textContent = "";
    try {
      f();
    } catch (e) {
      $("error").textContent = e.message ?? String(e);
    }
  };
}

function showDerived() {
  const req = { params: params(), users_per_street: num("u") };
  const d = JSON.parse(derived(JSON.stringify(req)));
  const fmt = (x) => (x === null ? "inf" : Number(x).toPrecision(4));
  const rows = Object.entries(d.derived).map(([k, v]) => `${k.padEnd(20)} ${fmt(v)}`);
  rows.push(`${"pole_capacity".padEnd(20)} ${fmt(d.pole_capacity)}`);
  rows.push(`${"hop_bound".padEnd(20)} ${fmt(d.hop_bound)}`);
  $("derived").textContent = rows.join("\n");
}

const COLOURS = { "open-direct": "#1a7f37", "open-chain": "#1f5fbf", closed: "#bbb" };

function drawRealization() {
  const req = {
    params: params(),
    users_per_street: num("u"),
    window_side: num("side"),
    seed: num("seed"),
    replication: num("rep"),
  };
  const d = JSON.parse(realization(JSON.stringify(req)));
  const canvas = $("map");
  const ctx = canvas.getContext("2d");
  const view = d.window_side * 1.2;
  const scale = canvas.width / view;
  const px = (x) => canvas.width / 2 + x * scale;
  const py = (y) => canvas.height / 2 - y * scale;
  ctx.clearRect(0, 0, canvas.width, canvas.height);

  const half = d.window_side / 2;
  ctx.strokeStyle = "#000";
  ctx.setLineDash([4, 4]);
  ctx.strokeRect(px(-half), py(half), d.window_side * scale, d.window_side * scale);
  ctx.setLineDash([]);

  const v = d.vertices;
  for (const s of d.streets) {
    const status = d.verdicts[s.id].status;
    ctx.strokeStyle = COLOURS[status];
    ctx.lineWidth = status === "closed" ? 1 : 2.5;
    ctx.beginPath();
    ctx.moveTo(px(v[s.v1].x), py(v[s.v1].y));
    ctx.lineTo(px(v[s.v2].x), py(v[s.v2].y));
    ctx.stroke();
  }

  ctx.fillStyle = "#000";
  for (const id of d.relays) ctx.fillRect(px(v[id].x) - 3, py(v[id].y) - 3, 6, 6);

  ctx.fillStyle = "#d9480f";
  for (const u of d.users) {
    const s = d.streets[u.street_id];
    const a = v[s.v1], b = v[s.v2];
    const t = s.length > 0 ? u.offset / s.length : 0;
    ctx.beginPath();
    ctx.arc(px(a.x + t * (b.x - a.x)), py(a.y + t * (b.y - a.y)), 2, 0, 2 * Math.PI);
    ctx.fill();
  }

  const c = d.crossing;
  $("verdict").textContent =
    `crossing: ${d.percolates ? "yes" : "no"} (vertical ${c.vertical}, horizontal ${c.horizontal})`;
}

function drawSweep() {
  const req = {
    params: params(),
    window_side: num("side"),
    seed: num("seed"),
    replications: num("reps"),
    from: 0,
    to: 10,
    steps: 21,
  };
  const out = JSON.parse(sweepUsers(JSON.stringify(req)));
  const canvas = $("curve");
  const ctx = canvas.getContext("2d");
  const m = 30;
  const w = canvas.width - 2 * m, h = canvas.height - 2 * m;
  const px = (x) => m + ((x - req.from) / (req.to - req.from)) * w;
  const py = (y) => m + (1 - y) * h;
  ctx.clearRect(0, 0, canvas.width, canvas.height);

  ctx.strokeStyle = "#000";
  ctx.lineWidth = 1;
  ctx.strokeRect(m, m, w, h);
  ctx.fillStyle = "#000";
  ctx.fillText("0", m - 12, py(0) + 4);
  ctx.fillText("1", m - 12, py(1) + 4);
  ctx.fillText(String(req.from), px(req.from) - 3, py(0) + 16);
  ctx.fillText(String(req.to), px(req.to) - 8, py(0) + 16);
  ctx.fillText("users per street", m + w / 2 - 40, py(0) + 16);
  ctx.setLineDash([3, 3]);
  ctx.beginPath();
  ctx.moveTo(m, py(0.5));
  ctx.lineTo(m + w, py(0.5));
  ctx.stroke();
  ctx.setLineDash([]);

  const pts = out.points.filter((p) => p.estimate.Ok);
  ctx.strokeStyle = "#1f5fbf";
  for (const p of pts) {
    const e = p.estimate.Ok;
    ctx.beginPath();
    ctx.moveTo(px(p.value), py(e.ci_low));
    ctx.lineTo(px(p.value), py(e.ci_high));
    ctx.stroke();
    ctx.beginPath();
    ctx.arc(px(p.value), py(e.probability), 3, 0, 2 * Math.PI);
    ctx.fill();
  }

  const f = out.fits;
  const lines = [];
  if (!f) {
    lines.push("curve never exceeds 1/2");
  } else {
    lines.push(`peak ${f.peak_probability.toFixed(2)} at U = ${f.peak_value}`);
    for (const [name, fit] of [["rising", f.rising], ["falling", f.falling]]) {
      if (fit.mu_star === null) {
        lines.push(`${name}: ${fit.error}`);
        continue;
      }
      lines.push(`${name}: U* = ${fit.mu_star.toFixed(3)}`);
      ctx.strokeStyle = "#d9480f";
      ctx.beginPath();
      for (let i = 0; i <= 200; i++) {
        const x = req.from + ((req.to - req.from) * i) / 200;
        const y = 1 / (1 + Math.exp(-(fit.a * x + fit.b)));
        i === 0 ? ctx.moveTo(px(x), py(y)) : ctx.lineTo(px(x), py(y));
      }
      ctx.stroke();
    }
    if (f.window) lines.push(`window [${f.window[0].toFixed(3)}, ${f.window[1].toFixed(3)}]`);
  }
  $("fits").textContent = lines.join("\n");
}

await init();
for (const id of ["u", "theta", "tau", "p", "scope"]) $(id).addEventListener("change", guard(showDerived));
$("draw").addEventListener("click", guard(drawRealization));
$("sweep").addEventListener("click", guard(drawSweep));
guard(showDerived)();
guard(drawRealization)();
