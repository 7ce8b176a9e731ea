import init, { levelScan, rabiTransfer, couplingCurve } from "./pkg/noon_web.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c"];

function columns(flat, width) {
  const cols = Array.from({ length: width }, () => []);
  for (let i = 0; i < flat.length; i += width) {
    for (let j = 0; j < width; j++) cols[j].push(flat[i + j]);
  }
  return cols;
}

function range(values) {
  let lo = Math.min(...values), hi = Math.max(...values);
  if (hi === lo) { lo -= 1e-9; hi += 1e-9; }
  const pad = 0.05 * (hi - lo);
  return [lo - pad, hi + pad];
}

// Draws each series against x; series flagged `right` get their own scale.
function plot(canvas, x, series) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, m = 50;
  ctx.clearRect(0, 0, w, h);
  const [x0, x1] = range(x);
  const left = series.filter(s => !s.right).flatMap(s => s.y);
  const right = series.filter(s => s.right).flatMap(s => s.y);
  const scales = { left: left.length ? range(left) : [0, 1], right: right.length ? range(right) : [0, 1] };
  const px = v => m + (v - x0) / (x1 - x0) * (w - 2 * m);
  const py = (v, [y0, y1]) => h - m + (v - y0) / (y1 - y0) * -(h - 2 * m);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(m, m, w - 2 * m, h - 2 * m);
  ctx.fillStyle = "#444";
  ctx.font = "12px sans-serif";
  ctx.fillText(x0.toPrecision(4), m, h - m + 16);
  ctx.fillText(x1.toPrecision(4), w - m - 40, h - m + 16);
  ctx.fillText(scales.left[1].toPrecision(4), 2, m + 4);
  ctx.fillText(scales.left[0].toPrecision(4), 2, h - m);
  if (right.length) {
    ctx.fillText(scales.right[1].toPrecision(3), w - m + 4, m + 4);
    ctx.fillText(scales.right[0].toPrecision(3), w - m + 4, h - m);
  }
  series.forEach((s, k) => {
    const sc = s.right ? scales.right : scales.left;
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    s.y.forEach((v, i) => (i ? ctx.lineTo : ctx.moveTo).call(ctx, px(x[i]), py(v, sc)));
    ctx.stroke();
  });
}

function bind(formId, statusId, action) {
  const form = document.getElementById(formId);
  const status = document.getElementById(statusId);
  const run = () => {
    status.textContent = "";
    try {
      action(new FormData(form));
    } catch (e) {
      status.textContent = e.message ?? String(e);
    }
  };
  form.addEventListener("submit", ev => { ev.preventDefault(); run(); });
  run();
}

const deg = v => Number(v) * Math.PI / 180;

await init();

bind("scan-form", "scan-status", f => {
  const [x, e, g] = columns(levelScan(Number(f.get("ga")), Number(f.get("gb")), deg(f.get("theta")), 401), 3);
  plot(document.getElementById("scan-plot"), x, [{ y: e }, { y: g }]);
  const gap = Math.min(...e.map((v, i) => Math.abs(v - g[i])));
  document.getElementById("scan-gap").textContent = `minimum gap ${gap.toExponential(4)}`;
});

bind("rabi-form", "rabi-status", f => {
  const [t, pa, pb, noon] = columns(rabiTransfer(Number(f.get("ga")), deg(f.get("theta")), 301), 4);
  plot(document.getElementById("rabi-plot"), t, [{ y: pa }, { y: pb }, { y: noon }]);
});

bind("coupling-form", "coupling-status", f => {
  const flat = couplingCurve(f.get("kind"), Number(f.get("gmax")), Number(f.get("gother")), 101);
  const [g, geff, shift] = columns(flat, 3);
  plot(document.getElementById("coupling-plot"), g, [{ y: geff }, { y: shift, right: true }]);
});
