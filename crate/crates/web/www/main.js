import init, { kernelProfile, classifyRings, dimensionCurve } from "./pkg/randumb_web.js";

const COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"];
const EXTENT = 4;

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function report(id, fn) {
  const out = $(id);
  out.classList.remove("err");
  try {
    out.textContent = fn();
  } catch (e) {
    out.classList.add("err");
    out.textContent = String(e.message ?? e);
  }
}

function axes(ctx, w, h, pad) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(pad, pad);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad, h - pad);
  ctx.stroke();
}

function polyline(ctx, xs, ys, color) {
  ctx.strokeStyle = color;
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(x, ys[i]) : ctx.moveTo(x, ys[i])));
  ctx.stroke();
}

function drawKernel() {
  const canvas = $("k-canvas");
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 30;
  const triples = kernelProfile(num("k-bases"), num("k-gamma"), num("k-seed"));
  const n = triples.length / 3;
  const px = (d) => pad + (d / 3) * (w - 2 * pad);
  const py = (v) => h - pad - ((v + 0.2) / 1.2) * (h - 2 * pad);
  axes(ctx, w, h, pad);
  const xs = [], exact = [], approx = [];
  let err = 0;
  for (let i = 0; i < n; i++) {
    const [d, e, a] = triples.slice(3 * i, 3 * i + 3);
    xs.push(px(d));
    exact.push(py(e));
    approx.push(py(a));
    err += Math.abs(e - a);
  }
  polyline(ctx, xs, exact, "#222");
  polyline(ctx, xs, approx, COLORS[3]);
  return `mean |error| ${(err / n).toFixed(4)} over ${n} pairs (black: exact, red: features)`;
}

function drawRegions() {
  const canvas = $("c-canvas");
  const ctx = canvas.getContext("2d");
  const res = 100;
  const run = classifyRings($("c-variant").value, num("c-dim"), num("c-gamma"), num("c-lambda"), num("c-seed"), res);
  const cell = canvas.width / res;
  const grid = run.grid;
  ctx.globalAlpha = 0.35;
  for (let r = 0; r < res; r++) {
    for (let c = 0; c < res; c++) {
      ctx.fillStyle = COLORS[grid[r * res + c] % COLORS.length];
      ctx.fillRect(c * cell, r * cell, cell + 0.5, cell + 0.5);
    }
  }
  ctx.globalAlpha = 1;
  const pts = run.points;
  const labels = run.labels;
  const scale = canvas.width / (2 * EXTENT);
  for (let i = 0; i < labels.length; i++) {
    ctx.fillStyle = COLORS[labels[i] % COLORS.length];
    ctx.fillRect((pts[2 * i] + EXTENT) * scale - 1, (EXTENT - pts[2 * i + 1]) * scale - 1, 2, 2);
  }
  const acc = run.accuracy;
  run.free();
  return `test accuracy ${(100 * acc).toFixed(1)}%`;
}

function drawCurve() {
  const canvas = $("d-canvas");
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 30;
  const dims = new Uint32Array($("d-dims").value.split(",").map((s) => Number(s.trim())));
  const acc = dimensionCurve($("d-variant").value, dims, 1.0, 1e-4, 0);
  axes(ctx, w, h, pad);
  const lx = (d) => pad + (Math.log2(d) / Math.log2(dims[dims.length - 1])) * (w - 2 * pad);
  const ly = (a) => h - pad - a * (h - 2 * pad);
  polyline(ctx, Array.from(dims, lx), Array.from(acc, ly), COLORS[0]);
  return Array.from(dims, (d, i) => `E=${d}: ${(100 * acc[i]).toFixed(1)}%`).join("  ");
}

await init();
$("k-run").onclick = () => report("k-out", drawKernel);
$("c-run").onclick = () => report("c-out", drawRegions);
$("d-run").onclick = () => report("d-out", drawCurve);
report("k-out", drawKernel);
report("c-out", drawRegions);
