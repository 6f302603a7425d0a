import init, { stabilityMap, orderStudy, trajectory } from "./pkg/obreshkov_web.js";

const $ = (id) => document.getElementById(id);

function formValues(form) {
  const out = {};
  for (const el of form.elements) {
    if (!el.name) continue;
    out[el.name] = el.type === "number" ? Number(el.value) : el.value;
  }
  return out;
}

function fail(where, err) {
  where.innerHTML = "";
  const p = document.createElement("p");
  p.className = "err";
  p.textContent = String(err);
  where.appendChild(p);
}

function drawMap() {
  const v = formValues($("map-form"));
  const canvas = $("map");
  const ctx = canvas.getContext("2d");
  const n = canvas.width;
  let data;
  try {
    data = stabilityMap(v.l, v.m, -v.w, v.w, -v.w, v.w, n, n);
  } catch (e) {
    ctx.clearRect(0, 0, n, n);
    $("status").textContent = `stability map: ${e}`;
    return;
  }
  const img = ctx.createImageData(n, n);
  const levels = [0.25, 0.5, 1];
  const band = (x) => levels.findIndex((c) => x <= c);
  for (let row = 0; row < n; row++) {
    for (let col = 0; col < n; col++) {
      const k = row * n + col;
      const r = data[k];
      let rgb = [255, 255, 255];
      if (Number.isNaN(r)) {
        rgb = [200, 0, 0];
      } else {
        if (r <= 1) rgb = [190, 215, 240];
        const here = band(r);
        const right = col + 1 < n ? band(data[k + 1]) : here;
        const below = row + 1 < n ? band(data[k + n]) : here;
        if (here !== right || here !== below) rgb = [30, 30, 30];
      }
      img.data.set([...rgb, 255], 4 * k);
    }
  }
  ctx.putImageData(img, 0, 0);
  ctx.strokeStyle = "#888";
  ctx.beginPath();
  ctx.moveTo(n / 2, 0);
  ctx.lineTo(n / 2, n);
  ctx.moveTo(0, n / 2);
  ctx.lineTo(n, n / 2);
  ctx.stroke();
}

// Log-log axes with one polyline per series.
function plotLogLog(canvas, series, xlabel, ylabel) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, pad = 48;
  ctx.clearRect(0, 0, W, H);
  const pts = series.flatMap((s) => s.points).filter(([x, y]) => x > 0 && y > 0);
  if (pts.length === 0) return;
  const lx = pts.map(([x]) => Math.log10(x)), ly = pts.map(([, y]) => Math.log10(y));
  const x0 = Math.min(...lx), x1 = Math.max(...lx);
  const y0 = Math.floor(Math.min(...ly)), y1 = Math.ceil(Math.max(...ly));
  const sx = (x) => pad + ((Math.log10(x) - x0) / (x1 - x0 || 1)) * (W - 2 * pad);
  const sy = (y) => H - pad - ((Math.log10(y) - y0) / (y1 - y0 || 1)) * (H - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, W - 2 * pad, H - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  for (let e = y0; e <= y1; e += Math.max(1, Math.round((y1 - y0) / 8))) {
    ctx.fillText(`1e${e}`, 4, sy(10 ** e) + 4);
  }
  ctx.fillText(`${xlabel}: 1e${x0.toFixed(2)} .. 1e${x1.toFixed(2)}`, pad, H - 12);
  ctx.fillText(ylabel, pad, pad - 8);
  series.forEach((s, idx) => {
    const color = `hsl(${(idx * 67) % 360} 70% 40%)`;
    ctx.strokeStyle = color;
    ctx.fillStyle = color;
    ctx.beginPath();
    s.points.filter(([x, y]) => x > 0 && y > 0).forEach(([x, y], j) => {
      if (j === 0) ctx.moveTo(sx(x), sy(y));
      else ctx.lineTo(sx(x), sy(y));
    });
    ctx.stroke();
    ctx.fillText(s.label, W - pad - 60, pad + 14 * (idx + 1));
  });
}

function runStudy() {
  const v = formValues($("study-form"));
  const where = $("study-table");
  let report;
  try {
    report = JSON.parse(orderStudy(v.kind, v.seed, v.l, v.m));
  } catch (e) {
    fail(where, e);
    return;
  }
  const rows = report.orders.map((o) =>
    `<tr><td>${o.i}</td><td>${o.slope === null ? "-" : o.slope.toFixed(3)}</td>` +
    `<td>${o.predicted}</td><td>${o.usable_samples}</td><td>${o.status}</td></tr>`);
  where.innerHTML =
    `<p>index k = ${report.k}, tolerance ${report.tolerance}</p>` +
    "<table><tr><th>i</th><th>slope</th><th>predicted</th><th>usable</th><th>status</th></tr>" +
    rows.join("") + "</table>";
  const series = report.orders.map((o) => ({
    label: `i = ${o.i}`,
    points: report.samples.filter((s) => s.i === o.i).map((s) => [s.h, s.error]),
  }));
  plotLogLog($("study"), series, "h", "scaled one-step error");
}

function runTrajectory() {
  const v = formValues($("traj-form"));
  const info = $("traj-info");
  const canvas = $("traj");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  let tr;
  try {
    tr = JSON.parse(trajectory(v.kind, v.seed, v.l, v.m, v.h, v.steps, v.offset));
  } catch (e) {
    info.className = "err";
    info.textContent = String(e);
    return;
  }
  if (v.comp >= tr.computed.length) {
    info.className = "err";
    info.textContent = `component must be below ${tr.computed.length}`;
    return;
  }
  info.className = "";
  info.textContent = `N = ${tr.computed.length}, max |x_n - x_ss(t_n)| = ${tr.max_deviation.toExponential(3)}`;

  const W = canvas.width, H = canvas.height, pad = 40;
  const xs = tr.t, a = tr.computed[v.comp], b = tr.exact[v.comp];
  const lo = Math.min(...a, ...b), hi = Math.max(...a, ...b);
  const sx = (t) => pad + ((t - xs[0]) / (xs[xs.length - 1] - xs[0] || 1)) * (W - 2 * pad);
  const sy = (y) => H - pad - ((y - lo) / (hi - lo || 1)) * (H - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, W - 2 * pad, H - 2 * pad);
  const line = (ys, color, dots) => {
    ctx.strokeStyle = color;
    ctx.fillStyle = color;
    ctx.beginPath();
    ys.forEach((y, j) => (j === 0 ? ctx.moveTo(sx(xs[j]), sy(y)) : ctx.lineTo(sx(xs[j]), sy(y))));
    ctx.stroke();
    if (dots && ys.length <= 400) ys.forEach((y, j) => ctx.fillRect(sx(xs[j]) - 1.5, sy(y) - 1.5, 3, 3));
  };
  line(b, "#2a6", false);
  line(a, "#c33", true);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.fillText(`x_${v.comp}: computed (red), steady state (green)`, pad, pad - 10);
  ctx.fillText(`t = ${xs[0].toFixed(2)} .. ${xs[xs.length - 1].toFixed(2)}`, pad, H - 12);
  ctx.fillText(hi.toPrecision(3), 2, pad + 4);
  ctx.fillText(lo.toPrecision(3), 2, H - pad);
}

function wire(formId, fn) {
  $(formId).addEventListener("submit", (e) => {
    e.preventDefault();
    fn();
  });
}

await init();
$("status").textContent = "";
wire("map-form", drawMap);
wire("study-form", runStudy);
wire("traj-form", runTrajectory);
drawMap();
runStudy();
runTrajectory();
