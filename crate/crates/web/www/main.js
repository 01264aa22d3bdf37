import init, { band_curve, discriminant_curve, kernel_profile } from "./pkg/kp_web.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

function num(id) {
  return Number(document.getElementById(id).value);
}

// series: array of Float64Array holding (x, y) pairs
function plot(canvasId, series, guides = []) {
  const c = document.getElementById(canvasId);
  const g = c.getContext("2d");
  const pad = 40;
  let [x0, x1, y0, y1] = [Infinity, -Infinity, Infinity, -Infinity];
  for (const s of series) {
    for (let i = 0; i < s.length; i += 2) {
      x0 = Math.min(x0, s[i]); x1 = Math.max(x1, s[i]);
      y0 = Math.min(y0, s[i + 1]); y1 = Math.max(y1, s[i + 1]);
    }
  }
  for (const y of guides) { y0 = Math.min(y0, y); y1 = Math.max(y1, y); }
  if (y1 === y0) { y1 += 1; y0 -= 1; }
  const sx = (x) => pad + (x - x0) / (x1 - x0) * (c.width - 2 * pad);
  const sy = (y) => c.height - pad - (y - y0) / (y1 - y0) * (c.height - 2 * pad);
  g.clearRect(0, 0, c.width, c.height);
  g.strokeStyle = "#999";
  g.strokeRect(pad, pad, c.width - 2 * pad, c.height - 2 * pad);
  g.fillStyle = "#333";
  g.fillText(x0.toPrecision(4), pad, c.height - pad + 14);
  g.fillText(x1.toPrecision(4), c.width - pad - 30, c.height - pad + 14);
  g.fillText(y1.toPrecision(4), 2, pad + 4);
  g.fillText(y0.toPrecision(4), 2, c.height - pad);
  g.setLineDash([4, 4]);
  for (const y of guides) {
    g.beginPath(); g.moveTo(pad, sy(y)); g.lineTo(c.width - pad, sy(y)); g.stroke();
  }
  g.setLineDash([]);
  series.forEach((s, j) => {
    g.strokeStyle = COLORS[j % COLORS.length];
    g.beginPath();
    for (let i = 0; i < s.length; i += 2) {
      if (i === 0) g.moveTo(sx(s[i]), sy(s[i + 1])); else g.lineTo(sx(s[i]), sy(s[i + 1]));
    }
    g.stroke();
  });
}

function guarded(errId, f) {
  const box = document.getElementById(errId);
  try { box.textContent = ""; f(); } catch (e) { box.textContent = String(e.message ?? e); }
}

function drawBands() {
  guarded("bands-err", () => {
    const v = num("bands-v"), first = num("bands-n"), count = num("bands-count");
    const series = [];
    for (let n = first; n < first + count; n++) series.push(band_curve(n, v, 721));
    plot("bands-canvas", series);
  });
}

function drawDisc() {
  guarded("disc-err", () => {
    plot("disc-canvas", [discriminant_curve(num("disc-v"), num("disc-k"), 2000)], [2, -2]);
  });
}

function drawKernel() {
  guarded("ker-err", () => {
    const p = kernel_profile(num("ker-n"), num("ker-v"), num("ker-t"), num("ker-y"), num("ker-cells"), 16);
    plot("ker-canvas", [p]);
  });
}

await init();
document.getElementById("bands-go").onclick = drawBands;
document.getElementById("disc-go").onclick = drawDisc;
document.getElementById("ker-go").onclick = drawKernel;
drawBands();
drawDisc();
drawKernel();
