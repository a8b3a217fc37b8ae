import init, { run_convergence, run_sweep, run_excitation } from "./pkg/scalar_attitude_demo.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

function params(section) {
  const out = {};
  for (const el of section.querySelectorAll("input, select")) {
    if (el.type === "checkbox") out[el.name] = el.checked;
    else if (el.type === "number" || el.type === "range") out[el.name] = Number(el.value);
    else out[el.name] = el.value;
  }
  return out;
}

function plot(canvas, x, series, { log = false, hline = null } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 40;
  ctx.clearRect(0, 0, w, h);
  const tf = (v) => (log ? Math.log10(Math.max(v, 1e-16)) : v);
  const ys = series.flatMap((s) => s.y.filter((v) => v !== null).map(tf));
  if (hline !== null) ys.push(tf(hline));
  let lo = Math.min(...ys), hi = Math.max(...ys);
  if (!(hi > lo)) { lo -= 1; hi += 1; }
  const x0 = x[0], x1 = x[x.length - 1] || x0 + 1;
  const px = (v) => pad + ((v - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const py = (v) => h - pad - ((tf(v) - lo) / (hi - lo)) * (h - 2 * pad);

  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.fillText((log ? "1e" : "") + hi.toPrecision(3), 2, pad + 4);
  ctx.fillText((log ? "1e" : "") + lo.toPrecision(3), 2, h - pad);
  ctx.fillText(x0.toFixed(1), pad, h - pad + 14);
  ctx.fillText(x1.toFixed(1), w - pad - 20, h - pad + 14);

  if (hline !== null) {
    ctx.setLineDash([4, 4]);
    ctx.strokeStyle = "#888";
    ctx.beginPath();
    ctx.moveTo(pad, py(hline));
    ctx.lineTo(w - pad, py(hline));
    ctx.stroke();
    ctx.setLineDash([]);
  }
  series.forEach((s, i) => {
    ctx.strokeStyle = COLORS[i % COLORS.length];
    ctx.beginPath();
    let pen = false;
    s.y.forEach((v, k) => {
      if (v === null) { pen = false; return; }
      if (pen) ctx.lineTo(px(x[k]), py(v));
      else { ctx.moveTo(px(x[k]), py(v)); pen = true; }
    });
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(s.label, w - pad - 170, pad + 14 + 13 * i);
  });
}

function guarded(section, fn) {
  const out = section.querySelector(".out");
  try {
    out.classList.remove("err");
    fn(out);
  } catch (e) {
    out.classList.add("err");
    out.textContent = String(e);
  }
}

function convergence() {
  const sec = document.getElementById("conv");
  guarded(sec, (out) => {
    const r = JSON.parse(run_convergence(JSON.stringify(params(sec))));
    plot(sec.querySelector("canvas"), r.t, [
      { label: "attitude error (deg)", y: r.theta_deg },
      { label: "|bias error| (rad/s)", y: r.bias_error },
    ], { log: true });
    out.textContent =
      `final attitude error ${r.final_theta_deg.toExponential(3)} deg, ` +
      `bias error ${r.final_bias_error.toExponential(3)} rad/s`;
  });
}

function sweep() {
  const sec = document.getElementById("sweep");
  guarded(sec, (out) => {
    const r = JSON.parse(run_sweep(JSON.stringify(params(sec))));
    plot(sec.querySelector("canvas"), r.t,
      r.conditions.map((c) => ({ label: c.condition, y: c.lambda_min })),
      { log: true, hline: r.mu });
    out.textContent = r.conditions
      .map((c) => `${c.condition.padEnd(26)} ${c.passed.filter(Boolean).length}/${c.passed.length} windows pass`)
      .join("\n");
  });
}

function excitation() {
  const sec = document.getElementById("pe");
  guarded(sec, (out) => {
    const p = params(sec);
    p.center = [0, 0, 1];
    const r = JSON.parse(run_excitation(JSON.stringify(p)));
    plot(sec.querySelector("canvas"), r.t, [0, 1, 2].map((i) => ({
      label: `alpha_${"xyz"[i]}`,
      y: r.alpha.map((a) => a[i]),
    })));
    out.textContent =
      `eigenvalues ${r.eigenvalues.map((v) => v.toExponential(3)).join(", ")}  ` +
      `class: ${r.class}`;
  });
}

await init();
document.querySelector("#conv button").addEventListener("click", convergence);
document.querySelector("#sweep button").addEventListener("click", sweep);
for (const el of document.querySelectorAll("#pe input")) el.addEventListener("input", excitation);
sweep();
excitation();
