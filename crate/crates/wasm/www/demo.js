import init, { exponent_curves, bound_curve, feasibility_map } from "./pkg/ramc_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function axes(ctx, w, h, pad, xr, yr, xlabel, ylabel) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#444";
  ctx.fillStyle = "#444";
  ctx.font = "12px system-ui";
  ctx.beginPath();
  ctx.moveTo(pad, pad);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad, h - pad);
  ctx.stroke();
  for (let i = 0; i <= 4; i++) {
    const xv = xr[0] + (xr[1] - xr[0]) * i / 4;
    const yv = yr[0] + (yr[1] - yr[0]) * i / 4;
    ctx.fillText(xv.toPrecision(3), pad + (w - 2 * pad) * i / 4 - 10, h - pad + 16);
    ctx.fillText(yv.toPrecision(3), 4, h - pad - (h - 2 * pad) * i / 4 + 4);
  }
  ctx.fillText(xlabel, w / 2, h - 4);
  ctx.fillText(ylabel, pad + 4, pad - 6);
  return (x, y) => [
    pad + (w - 2 * pad) * (x - xr[0]) / (xr[1] - xr[0]),
    h - pad - (h - 2 * pad) * (y - yr[0]) / (yr[1] - yr[0]),
  ];
}

function line(ctx, map, xs, ys, color) {
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  let started = false;
  xs.forEach((x, i) => {
    if (ys[i] === null || !Number.isFinite(ys[i])) return;
    const [px, py] = map(x, ys[i]);
    if (started) ctx.lineTo(px, py); else { ctx.moveTo(px, py); started = true; }
  });
  ctx.stroke();
  ctx.lineWidth = 1;
}

function guarded(msgId, body) {
  const t0 = performance.now();
  try {
    body();
    $(msgId).className = "";
    $(msgId).textContent = `computed in ${(performance.now() - t0).toFixed(0)} ms`;
  } catch (e) {
    $(msgId).className = "err";
    $(msgId).textContent = String(e);
  }
}

function runExponents() {
  guarded("ex-msg", () => {
    const c = JSON.parse(exponent_curves(num("ex-p"), num("ex-q"), num("ex-r"), 60));
    const canvas = $("ex-plot");
    const ctx = canvas.getContext("2d");
    const top = Math.max(...c.em_same, ...c.em_cross, ...c.reference, 1e-3);
    const map = axes(ctx, canvas.width, canvas.height, 40, [0, c.rates.at(-1)], [0, top], "rate", "exponent");
    const clip = (ys) => ys.map((y) => Math.max(y, 0));
    line(ctx, map, c.rates, clip(c.em_same), "#1f77b4");
    line(ctx, map, c.rates, clip(c.em_cross), "#d62728");
    line(ctx, map, c.rates, clip(c.reference), "#2ca02c");
    const [cx] = map(c.capacity, 0);
    ctx.setLineDash([4, 4]);
    ctx.strokeStyle = "#888";
    ctx.beginPath();
    ctx.moveTo(cx, 40);
    ctx.lineTo(cx, canvas.height - 40);
    ctx.stroke();
    ctx.setLineDash([]);
  });
}

function runBound() {
  guarded("bd-msg", () => {
    const nMax = Math.max(10, Math.round(num("bd-n")));
    const step = Math.max(1, Math.ceil(nMax / 100));
    const b = JSON.parse(bound_curve(num("bd-good"), num("bd-bad"), num("bd-low"), num("bd-high"), step, nMax));
    const canvas = $("bd-plot");
    const ctx = canvas.getContext("2d");
    const logs = b.log_bound.map((v) => Math.min(v, 0) / Math.LN10);
    const bottom = Math.min(...logs, -1);
    const map = axes(ctx, canvas.width, canvas.height, 40, [0, b.n.at(-1)], [bottom, 0], "N", "log10 bound");
    line(ctx, map, b.n, logs, "#1f77b4");
    ctx.fillStyle = "#444";
    ctx.fillText(`exponent limit ${b.exponent_limit.toPrecision(4)} nats`, canvas.width - 220, 24);
  });
}

function runMap() {
  guarded("fm-msg", () => {
    const m = JSON.parse(feasibility_map(num("fm-eps"), Math.round(num("fm-grid"))));
    const canvas = $("fm-plot");
    const ctx = canvas.getContext("2d");
    const g = m.rates.length;
    const r = m.rates.at(-1);
    const map = axes(ctx, canvas.width, canvas.height, 40, [0, r], [0, r], "r1", "r2");
    const [x0, y0] = map(0, 0);
    const [x1, y1] = map(r, r);
    const cw = (x1 - x0) / g;
    const ch = (y0 - y1) / g;
    for (let i = 0; i < g; i++) {
      for (let j = 0; j < g; j++) {
        ctx.fillStyle = m.feasible[i * g + j] ? "#9ecae1" : "#f4f4f4";
        ctx.fillRect(x0 + i * cw, y0 - (j + 1) * ch, cw - 1, ch - 1);
      }
    }
    ctx.strokeStyle = "#d62728";
    ctx.lineWidth = 2;
    ctx.beginPath();
    const corner = [
      [0, m.mi_user2],
      [m.mi_sum - m.mi_user2, m.mi_user2],
      [m.mi_user1, m.mi_sum - m.mi_user1],
      [m.mi_user1, 0],
    ];
    corner.forEach(([a, b], k) => {
      const [px, py] = map(a, b);
      if (k) ctx.lineTo(px, py); else ctx.moveTo(px, py);
    });
    ctx.stroke();
    ctx.lineWidth = 1;
  });
}

await init();
$("ex-run").onclick = runExponents;
$("bd-run").onclick = runBound;
$("fm-run").onclick = runMap;
runExponents();
runBound();
runMap();
