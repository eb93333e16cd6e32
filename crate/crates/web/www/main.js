import init, { groundStateCurve, weightProfile, controlRun } from "./pkg/heatctl_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

// Draw each series {x, y, label} on shared axes; `logY` plots log10 of y.
function plot(canvas, series, logY = false) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 40;
  ctx.clearRect(0, 0, w, h);
  const ys = (s) => s.y.map((v) => (logY ? Math.log10(Math.max(v, 1e-300)) : v));
  const all = series.flatMap((s) => ys(s).filter(Number.isFinite));
  const xs = series.flatMap((s) => s.x);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...all), Math.max(...all)];
  if (y0 === y1) { y0 -= 1; y1 += 1; }
  const px = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const py = (y) => h - pad - ((y - y0) / (y1 - y0)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.fillText(y1.toPrecision(3), 2, pad + 4);
  ctx.fillText(y0.toPrecision(3), 2, h - pad);
  ctx.fillText(x0.toPrecision(3), pad, h - pad + 14);
  ctx.fillText(x1.toPrecision(3), w - pad - 20, h - pad + 14);
  series.forEach((s, k) => {
    const y = ys(s);
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.beginPath();
    s.x.forEach((x, i) => (i ? ctx.lineTo(px(x), py(y[i])) : ctx.moveTo(px(x), py(y[i]))));
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(s.label, w - pad - 120, pad + 14 * (k + 1));
  });
}

function guarded(out, f) {
  try {
    f();
  } catch (e) {
    $(out).textContent = `error: ${e.message ?? e}`;
  }
}

$("gs-run").onclick = () => guarded("gs-out", () => {
  const eps = new Float64Array($("gs-eps").value.split(",").map(Number));
  const r = JSON.parse(groundStateCurve(num("gs-mu"), num("gs-n"), eps));
  $("gs-out").textContent = r.eps.map((e, i) => `eps ${e}: lambda0 = ${r.lambda0[i].toFixed(6)}`).join("\n");
  plot($("gs-plot"), [{ x: r.x, y: r.phi0, label: `phi0, eps ${Math.min(...r.eps)}` }]);
});

$("w-run").onclick = () => guarded("w-out", () => {
  const r = JSON.parse(weightProfile(num("w-lambda"), num("w-r0"), num("w-n")));
  $("w-out").textContent = `varpi = ${r.varpi}`;
  plot($("w-plot"), [
    { x: r.x, y: r.psi1, label: "psi1" },
    { x: r.x, y: r.alpha, label: "alpha" },
    { x: r.x, y: r.ln_tau.map((v) => v / Math.max(...r.ln_tau)), label: "ln tau (scaled)" },
  ]);
});

$("c-run").onclick = () => guarded("c-out", () => {
  const r = JSON.parse(controlRun(num("c-mu"), num("c-n"), num("c-nt"), Number($("c-pen").value)));
  $("c-out").textContent =
    `|u(T)|/|u0| = ${r.final_ratio.toExponential(3)}, control cost ${r.control_cost.toExponential(3)}, ` +
    `${r.cg_iters} CG iterations${r.converged ? "" : " (not converged)"}`;
  plot($("c-plot"), [
    { x: r.t, y: r.controlled_norm, label: "controlled" },
    { x: r.t, y: r.free_norm, label: "free" },
  ], true);
});

await init();
