import init, { pathTriplet, perturbationSweep, valueByHorizon } from "./pkg/insider_web.js";

const status = (msg) => { document.getElementById("status").textContent = msg; };
const num = (id) => Number(document.getElementById(id).value);

function plot(canvas, series, { bars } = {}) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 60;
  ctx.clearRect(0, 0, w, h);
  const xs = series.flatMap((s) => s.x);
  const ys = series.flatMap((s) => s.y.map((y, i) => [y - (s.e ? s.e[i] : 0), y + (s.e ? s.e[i] : 0)]).flat());
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y0 === y1) { y0 -= 1; y1 += 1; }
  const px = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const py = (y) => h - pad - ((y - y0) / (y1 - y0)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#333";
  ctx.font = "22px system-ui";
  ctx.fillText(y1.toPrecision(3), 4, pad + 8);
  ctx.fillText(y0.toPrecision(3), 4, h - pad);
  ctx.fillText(x0.toPrecision(3), pad, h - pad + 28);
  ctx.fillText(x1.toPrecision(3), w - pad - 50, h - pad + 28);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    s.x.forEach((x, i) => (i ? ctx.lineTo(px(x), py(s.y[i])) : ctx.moveTo(px(x), py(s.y[i]))));
    ctx.stroke();
    if (bars && s.e) {
      s.x.forEach((x, i) => {
        ctx.beginPath();
        ctx.moveTo(px(x), py(s.y[i] - s.e[i]));
        ctx.lineTo(px(x), py(s.y[i] + s.e[i]));
        ctx.stroke();
      });
    }
  }
}

function drawPaths() {
  const n = 1000;
  const v = pathTriplet(1, num("p-path"), num("p-t1"), n);
  const k = n + 1;
  const t = Array.from(v.slice(0, k));
  plot(document.getElementById("p-plot"), [
    { x: t, y: Array.from(v.slice(k, 2 * k)), color: "#1f77b4" },
    { x: t, y: Array.from(v.slice(2 * k, 3 * k)), color: "#ff7f0e" },
  ]);
}

function drawSweep() {
  const started = performance.now();
  const v = perturbationSweep(
    1, num("s-paths"), 200, 2.0, num("s-start"), num("s-end"),
    document.getElementById("s-theta").value,
    document.getElementById("s-policy").value === "optimal",
  );
  const rows = [];
  for (let i = 0; i < v.length; i += 3) rows.push([v[i], v[i + 1], v[i + 2]]);
  plot(document.getElementById("s-plot"), [
    { x: rows.map((r) => r[0]), y: rows.map((r) => r[1]), e: rows.map((r) => r[2]), color: "#2ca02c" },
  ], { bars: true });
  const best = rows.reduce((a, b) => (b[1] < a[1] ? b : a));
  status(`argmin y = ${best[0].toFixed(1)}, ${((performance.now() - started) / 1000).toFixed(1)} s`);
}

function drawValue() {
  const t1 = Array.from({ length: 60 }, (_, i) => 1.02 + i * 0.05);
  plot(document.getElementById("v-plot"), [{ x: t1, y: Array.from(valueByHorizon(new Float64Array(t1))), color: "#d62728" }]);
}

const guard = (f) => () => { try { f(); } catch (e) { status(String(e)); } };

await init();
document.getElementById("p-go").addEventListener("click", guard(drawPaths));
document.getElementById("s-go").addEventListener("click", guard(drawSweep));
guard(drawPaths)();
guard(drawValue)();
