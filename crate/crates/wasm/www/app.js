import init, { admissibility, design, simulate } from "./pkg/qpdesign_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const list = (id) => $(id).value.split(",").map((x) => Number(x.trim()));

let region = null;
let current = null;

function status(text, isError) {
  $("status").textContent = text;
  $("status").className = isError ? "error" : "";
}

function call(fn, body) {
  try {
    return JSON.parse(fn(JSON.stringify(body)));
  } catch (e) {
    let err;
    try { err = JSON.parse(e); } catch { err = { code: "internal", message: String(e) }; }
    status(`${err.code}: ${err.message}`, true);
    return null;
  }
}

function plot(canvas, xr, yr) {
  const ctx = canvas.getContext("2d");
  const pad = 36;
  const w = canvas.width - 2 * pad;
  const h = canvas.height - 2 * pad;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w, h);
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.fillText(xr[0].toPrecision(3), pad, canvas.height - pad + 14);
  ctx.fillText(xr[1].toPrecision(3), pad + w - 24, canvas.height - pad + 14);
  ctx.fillText(yr[1].toPrecision(3), 2, pad + 4);
  ctx.fillText(yr[0].toPrecision(3), 2, pad + h);
  const sx = (x) => pad + ((x - xr[0]) / (xr[1] - xr[0])) * w;
  const sy = (y) => pad + h - ((y - yr[0]) / (yr[1] - yr[0])) * h;
  const inv = (px, py) => [xr[0] + ((px - pad) / w) * (xr[1] - xr[0]), yr[0] + ((pad + h - py) / h) * (yr[1] - yr[0])];
  return { ctx, sx, sy, inv };
}

function drawRegion(pick) {
  if (!region) return;
  const r = region.rectangle;
  const p = plot($("cregion"), [r.s0_min, r.s0_max], [r.tau_min, r.tau_max]);
  p.ctx.strokeStyle = "#1f5fbf";
  p.ctx.lineWidth = 1.5;
  for (const line of region.polylines) {
    p.ctx.beginPath();
    line.forEach(([s, t], i) => (i ? p.ctx.lineTo(p.sx(s), p.sy(t)) : p.ctx.moveTo(p.sx(s), p.sy(t))));
    p.ctx.stroke();
  }
  if (pick) {
    p.ctx.strokeStyle = "#c33";
    p.ctx.beginPath();
    p.ctx.moveTo(p.sx(r.s0_min), p.sy(pick));
    p.ctx.lineTo(p.sx(r.s0_max), p.sy(pick));
    p.ctx.stroke();
  }
  region.view = p;
}

function runRegion() {
  const out = call(admissibility, {
    n: num("n"), m: num("m"), a: list("a"), s0_min: num("s0min"), tau_max: num("taumax"),
  });
  if (!out) return;
  region = out;
  drawRegion(null);
  status(`${out.polylines.length} polyline(s) on a ${out.resolution.join("×")} grid`);
}

function runDesign() {
  const half = num("half");
  const out = call(design, {
    n: num("n"), m: num("m"), a: list("a"), tau: num("tau"),
    rect: { x_min: -half, x_max: Math.min(10, half), y_min: -half, y_max: half },
  });
  if (!out) return;
  current = out;
  drawRegion(num("tau"));
  const rect = out.roots.rectangle;
  const p = plot($("cspectrum"), [rect.x_min, rect.x_max], [rect.y_min, rect.y_max]);
  const s0 = out.design.assigned_root;
  p.ctx.strokeStyle = "#c33";
  p.ctx.beginPath();
  p.ctx.moveTo(p.sx(s0), p.sy(rect.y_min));
  p.ctx.lineTo(p.sx(s0), p.sy(rect.y_max));
  p.ctx.stroke();
  for (const [re, im, mult] of out.roots.roots) {
    p.ctx.fillStyle = mult > 1 ? "#c33" : "#1f5fbf";
    p.ctx.beginPath();
    p.ctx.arc(p.sx(re), p.sy(im), 2 + mult, 0, 2 * Math.PI);
    p.ctx.fill();
  }
  const b = out.design.quasipolynomial.b.map((x) => x.toPrecision(6)).join(", ");
  const dom = out.dominance.dominant ? "dominant" : "NOT dominant";
  status(`s₀ = ${s0.toPrecision(6)}, b = [${b}], ${out.roots.roots.length} roots, s₀ ${dom}`);
}

function runSimulate() {
  if (!current) runDesign();
  if (!current) return;
  const out = call(simulate, {
    q: current.design.quasipolynomial, ic: { constant: num("c") }, T: num("T"),
  });
  if (!out) return;
  const lo = Math.min(...out.y);
  const hi = Math.max(...out.y);
  const p = plot($("ctraj"), [out.t[0], out.t[out.t.length - 1]], [Math.min(lo, 0), Math.max(hi, 0) || 1]);
  p.ctx.strokeStyle = "#1f5fbf";
  p.ctx.beginPath();
  out.t.forEach((t, i) => (i ? p.ctx.lineTo(p.sx(t), p.sy(out.y[i])) : p.ctx.moveTo(p.sx(t), p.sy(out.y[i]))));
  p.ctx.stroke();
}

$("cregion").addEventListener("click", (ev) => {
  if (!region) return;
  const box = ev.target.getBoundingClientRect();
  const [, tau] = region.view.inv(ev.clientX - box.left, ev.clientY - box.top);
  if (tau <= 0 || tau > region.rectangle.tau_max) return;
  $("tau").value = tau.toPrecision(4);
  runDesign();
});
$("region").onclick = runRegion;
$("design").onclick = runDesign;
$("simulate").onclick = runSimulate;

await init();
runRegion();
runDesign();
