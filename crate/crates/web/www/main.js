import init, { regress, quantile_samples, quantile, two_slab_path, peak_example } from "./pkg/smre_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function show(id, text, isError = false) {
  const el = $(id);
  el.textContent = text;
  el.className = isError ? "out err" : "out";
}

function guarded(outId, f) {
  return () => {
    try {
      f();
    } catch (e) {
      show(outId, String(e.message ?? e), true);
    }
  };
}

function linePlot(canvas, series) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const all = series.flatMap((s) => Array.from(s.values));
  const lo = Math.min(...all);
  const hi = Math.max(...all);
  const pad = 10;
  const n = series[0].values.length;
  const x = (i) => pad + (i / Math.max(n - 1, 1)) * (w - 2 * pad);
  const y = (v) => h - pad - ((v - lo) / (hi - lo || 1)) * (h - 2 * pad);
  for (const s of series) {
    ctx.strokeStyle = ctx.fillStyle = s.color;
    if (s.dots) {
      s.values.forEach((v, i) => ctx.fillRect(x(i) - 1, y(v) - 1, 2, 2));
    } else {
      ctx.lineWidth = 2;
      ctx.beginPath();
      s.values.forEach((v, i) => (i ? ctx.lineTo(x(i), y(v)) : ctx.moveTo(x(i), y(v))));
      ctx.stroke();
    }
  }
}

function runRegression() {
  const m = num("r-m");
  const sigma = num("r-sigma");
  const seed = BigInt(num("r-seed"));
  const example = peak_example(m, sigma, seed);
  const truth = example.slice(0, m);
  const data = example.slice(m);
  const t0 = performance.now();
  const fit = regress(data, num("r-smax"), sigma, num("r-alpha"), num("r-lambda"), num("r-trials"), seed);
  const seconds = (performance.now() - t0) / 1000;
  const u = fit.estimate;
  linePlot($("r-plot"), [
    { values: data, color: "#999", dots: true },
    { values: truth, color: "#2a7" },
    { values: u, color: "#c33" },
  ]);
  const ise = u.reduce((acc, v, i) => acc + (v - truth[i]) ** 2, 0) / m;
  show(
    "r-out",
    `q = ${fit.q.toFixed(4)}   T(Y - u) = ${fit.final_statistic.toFixed(4)}   ` +
      `iterations = ${fit.iterations} (${fit.converged ? "converged" : "iteration cap"})   ` +
      `mean squared error = ${ise.toExponential(3)}   ${seconds.toFixed(2)} s`,
  );
  fit.free();
}

function runQuantiles() {
  const alpha = num("q-alpha");
  const t0 = performance.now();
  const samples = quantile_samples(num("q-m"), num("q-smax"), 1.0, num("q-trials"), 7n);
  const seconds = (performance.now() - t0) / 1000;
  const q = quantile(samples, alpha);
  const canvas = $("q-plot");
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const lo = Math.min(...samples);
  const hi = Math.max(...samples);
  const bins = 60;
  const counts = new Array(bins).fill(0);
  for (const t of samples) counts[Math.min(bins - 1, Math.floor(((t - lo) / (hi - lo || 1)) * bins))]++;
  const top = Math.max(...counts);
  const bw = (w - 20) / bins;
  ctx.fillStyle = "#68a";
  counts.forEach((c, i) => ctx.fillRect(10 + i * bw, h - 10 - (c / top) * (h - 20), bw - 1, (c / top) * (h - 20)));
  const qx = 10 + ((q - lo) / (hi - lo || 1)) * (w - 20);
  ctx.strokeStyle = "#c33";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(qx, 0);
  ctx.lineTo(qx, h);
  ctx.stroke();
  show("q-out", `${samples.length} samples of T(ε) with σ = 1, range [${lo.toFixed(3)}, ${hi.toFixed(3)}]   ` +
    `${alpha}-quantile q = ${q.toFixed(4)}   ${seconds.toFixed(2)} s`);
}

let start = [2.2, 1.6];

function runDykstra() {
  const canvas = $("d-plot");
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const scale = w / 8;
  const px = (p) => [w / 2 + p[0] * scale, h / 2 - p[1] * scale];
  const dir = (deg) => [Math.cos((deg * Math.PI) / 180), Math.sin((deg * Math.PI) / 180)];
  const a = dir(num("d-a"));
  const b = dir(num("d-b"));
  const qa = num("d-qa");
  const qb = num("d-qb");
  ctx.clearRect(0, 0, w, h);
  for (const [n, q, color] of [[a, qa, "rgba(40,120,200,0.18)"], [b, qb, "rgba(200,120,40,0.18)"]]) {
    const t = [-n[1], n[0]];
    const corner = (s, r) => px([n[0] * s + t[0] * r, n[1] * s + t[1] * r]);
    ctx.fillStyle = color;
    ctx.beginPath();
    ctx.moveTo(...corner(-q, -10));
    ctx.lineTo(...corner(q, -10));
    ctx.lineTo(...corner(q, 10));
    ctx.lineTo(...corner(-q, 10));
    ctx.fill();
  }
  const path = two_slab_path(start[0], start[1], a[0], a[1], qa, b[0], b[1], qb, num("d-steps"));
  ctx.strokeStyle = "#333";
  ctx.lineWidth = 1;
  ctx.beginPath();
  for (let i = 0; i < path.length; i += 2) {
    const [x, y] = px([path[i], path[i + 1]]);
    i ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
  }
  ctx.stroke();
  ctx.fillStyle = "#c33";
  for (let i = 0; i < path.length; i += 2) {
    const [x, y] = px([path[i], path[i + 1]]);
    ctx.fillRect(x - 2, y - 2, 4, 4);
  }
  const end = [path[path.length - 2], path[path.length - 1]];
  show("d-out", `start (${start.map((v) => v.toFixed(3)).join(", ")})   ` +
    `end (${end.map((v) => v.toFixed(4)).join(", ")}) after ${path.length / 2 - 1} projections`);
}

await init();
$("r-run").onclick = guarded("r-out", runRegression);
$("q-run").onclick = guarded("q-out", runQuantiles);
for (const id of ["d-a", "d-qa", "d-b", "d-qb", "d-steps"]) $(id).oninput = guarded("d-out", runDykstra);
$("d-plot").onclick = (ev) => {
  const canvas = $("d-plot");
  const r = canvas.getBoundingClientRect();
  const scale = canvas.width / 8;
  start = [(ev.clientX - r.left - canvas.width / 2) / scale, (canvas.height / 2 - (ev.clientY - r.top)) / scale];
  guarded("d-out", runDykstra)();
};
guarded("d-out", runDykstra)();
