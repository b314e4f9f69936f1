import init, { Simulation, linkCurve, initialFractionCurve } from "./pkg/balance_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function plot(canvas, series, { yMin, yMax, xMax, color = "#1f5fa8" }) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#ddd";
  ctx.beginPath();
  ctx.moveTo(0, h - 1);
  ctx.lineTo(w, h - 1);
  ctx.stroke();
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  series.forEach(([x, y], k) => {
    const px = (x / xMax) * w;
    const py = h - ((y - yMin) / (yMax - yMin)) * h;
    k === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
  });
  ctx.stroke();
  ctx.fillStyle = "#555";
  ctx.fillText(yMax.toFixed(2), 4, 12);
  ctx.fillText(yMin.toFixed(2), 4, h - 4);
}

function drawMatrix(canvas, sim) {
  const n = sim.n();
  const w = sim.weights();
  const ctx = canvas.getContext("2d");
  const cell = canvas.width / n;
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) {
      const v = Math.max(-1, Math.min(1, w[i * n + j] / 10));
      const a = Math.round(255 * (1 - Math.abs(v)));
      ctx.fillStyle = v >= 0 ? `rgb(${a},${a},255)` : `rgb(255,${a},${a})`;
      ctx.fillRect(j * cell, i * cell, cell + 0.5, cell + 0.5);
    }
  }
}

let sim = null;
let course = [];
let timer = null;

function frame() {
  if (!sim) return;
  const f = sim.advance(Math.max(50, sim.n() * 5));
  course.push([sim.clock(), f]);
  const xMax = Math.max(1, course[course.length - 1][0]);
  plot($("course"), course, { yMin: 0, yMax: Math.max(0.01, course[0][1]), xMax });
  drawMatrix($("matrix"), sim);
  $("status").textContent =
    `t = ${sim.clock().toFixed(2)}  events = ${sim.events()}  unbalanced = ${f.toFixed(4)}` +
    (sim.isBalanced() ? "  balanced" : "");
  timer = sim.isBalanced() ? null : requestAnimationFrame(frame);
}

function start() {
  if (timer) cancelAnimationFrame(timer);
  sim?.free();
  try {
    sim = new Simulation(num("n"), num("mu"), num("tau"), $("wor").checked, BigInt(num("seed")));
  } catch (e) {
    $("status").textContent = String(e);
    sim = null;
    return;
  }
  course = [[0, sim.unbalancedFraction()]];
  timer = requestAnimationFrame(frame);
}

function drawLink() {
  const points = 200;
  const dur = num("dur");
  try {
    const ys = linkCurve(num("x0"), num("c"), dur, points);
    plot($("link"), Array.from(ys, (y, k) => [(dur * k) / (points - 1), y]), { yMin: -10, yMax: 10, xMax: dur });
  } catch (e) {
    $("status").textContent = String(e);
  }
}

await init();
const mus = initialFractionCurve(-2, 2, 101);
plot($("initial"), Array.from(mus, (y, k) => [k, y]), { yMin: 0, yMax: 1, xMax: 100, color: "#a8321f" });
$("start").onclick = start;
$("pause").onclick = () => {
  if (timer) {
    cancelAnimationFrame(timer);
    timer = null;
  } else if (sim && !sim.isBalanced()) {
    timer = requestAnimationFrame(frame);
  }
};
$("draw-link").onclick = drawLink;
drawLink();
start();
