import init, { evolve_shape, classify_shape, arrival_field } from "./pkg/acsf_wasm.js";

const $ = (id) => document.getElementById(id);
const status = $("status");

function shapeJson() {
  const p = Number($("param").value);
  switch ($("shape").value) {
    case "trefoil":
      return { kind: "fourier", modes: [{ k: 3, cos: p }] };
    case "ellipse":
      return { kind: "ellipse", a: 1 + 10 * p, b: 1 / (1 + 10 * p), angle: 0.4 };
    case "triangle":
      return { kind: "polygon", vertices: [[0, 0], [3, 0], [0.5, 1 + 10 * p]] };
    default:
      return { kind: "polygon", vertices: [[-1, -1], [1, -1], [1, 1], [-1, 1]] };
  }
}

function grid() {
  return Number($("grid").value);
}

async function guarded(label, work) {
  status.className = "";
  status.textContent = `${label}...`;
  await new Promise((r) => setTimeout(r, 20));
  const start = performance.now();
  try {
    work();
    status.textContent = `${label}: ${((performance.now() - start) / 1000).toFixed(2)} s`;
  } catch (e) {
    status.className = "error";
    status.textContent = `${label} failed: ${e.message ?? e}`;
  }
}

function bounds(outlines) {
  let lo = [Infinity, Infinity], hi = [-Infinity, -Infinity];
  for (const pts of outlines) for (const [x, y] of pts) {
    lo = [Math.min(lo[0], x), Math.min(lo[1], y)];
    hi = [Math.max(hi[0], x), Math.max(hi[1], y)];
  }
  const span = Math.max(hi[0] - lo[0], hi[1] - lo[1]) * 1.1;
  return { cx: (lo[0] + hi[0]) / 2, cy: (lo[1] + hi[1]) / 2, span };
}

function drawOutline(ctx, pts, b, style, dash = []) {
  const s = ctx.canvas.width / b.span;
  const w = ctx.canvas.width, h = ctx.canvas.height;
  ctx.beginPath();
  pts.forEach(([x, y], i) => {
    const px = w / 2 + (x - b.cx) * s, py = h / 2 - (y - b.cy) * s;
    i === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
  });
  ctx.closePath();
  ctx.setLineDash(dash);
  ctx.strokeStyle = style;
  ctx.stroke();
  ctx.setLineDash([]);
}

let animation = null;

function runEvolve() {
  const run = JSON.parse(evolve_shape(JSON.stringify(shapeJson()), grid(), 60));
  const flow = $("flow").getContext("2d");
  const b = bounds([run.frames[0].outline]);
  if (animation) cancelAnimationFrame(animation);
  let i = 0;
  const step = () => {
    flow.clearRect(0, 0, flow.canvas.width, flow.canvas.height);
    for (let j = 0; j <= i; j += 5) drawOutline(flow, run.frames[j].outline, b, "#cfd8e3");
    drawOutline(flow, run.frames[i].outline, b, "#1b6ca8");
    flow.fillStyle = "#222";
    flow.fillText(`t = ${run.frames[i].t.toFixed(4)}  (extinction ~ ${run.extinction.toFixed(4)})`, 8, 16);
    if (++i < run.frames.length) animation = requestAnimationFrame(step);
  };
  step();
  plotRatio(run);
}

function plotRatio(run) {
  const ctx = $("ratio").getContext("2d");
  const w = ctx.canvas.width, h = ctx.canvas.height, pad = 40;
  ctx.clearRect(0, 0, w, h);
  const ts = run.frames.map((f) => f.t), rs = run.frames.map((f) => f.ratio);
  const tmax = run.extinction, rmin = Math.min(...rs) - 0.01, rmax = run.sup + 0.01;
  const X = (t) => pad + (t / tmax) * (w - 2 * pad);
  const Y = (r) => h - pad - ((r - rmin) / (rmax - rmin)) * (h - 2 * pad);
  ctx.strokeStyle = "#c0392b";
  ctx.setLineDash([6, 4]);
  ctx.beginPath();
  ctx.moveTo(X(0), Y(run.sup));
  ctx.lineTo(X(tmax), Y(run.sup));
  ctx.stroke();
  ctx.setLineDash([]);
  ctx.strokeStyle = "#1b6ca8";
  ctx.beginPath();
  ts.forEach((t, i) => (i === 0 ? ctx.moveTo(X(t), Y(rs[i])) : ctx.lineTo(X(t), Y(rs[i]))));
  ctx.stroke();
  ctx.fillStyle = "#222";
  ctx.fillText("affine isoperimetric ratio vs t; dashed: 2π^(2/3)", pad, 20);
  ctx.fillText(rmin.toFixed(3), 2, h - pad);
  ctx.fillText(rmax.toFixed(3), 2, pad);
}

function runClassify() {
  const report = JSON.parse(classify_shape(JSON.stringify(shapeJson()), grid(), 6));
  const holder = $("milestones");
  holder.innerHTML = "";
  const rows = ["<tr><th>k</th><th>λ</th><th>eps</th><th>ratio gap</th></tr>"];
  for (const m of report.milestones) {
    const canvas = document.createElement("canvas");
    canvas.width = canvas.height = 150;
    holder.appendChild(canvas);
    const ctx = canvas.getContext("2d");
    const disk = Array.from({ length: 128 }, (_, j) => {
      const a = (2 * Math.PI * j) / 128;
      return [m.disk_radius * Math.cos(a), m.disk_radius * Math.sin(a)];
    });
    const b = bounds([m.outline, disk]);
    drawOutline(ctx, disk, b, "#c0392b", [4, 3]);
    drawOutline(ctx, m.outline, b, "#1b6ca8");
    ctx.fillStyle = "#222";
    ctx.fillText(`k = ${m.k}`, 6, 14);
    rows.push(`<tr><td>${m.k}</td><td>${m.lambda}</td><td>${m.eps.toExponential(3)}</td><td>${m.gap.toExponential(3)}</td></tr>`);
  }
  if (report.failure) rows.push(`<tr><td colspan="4">stopped early: ${report.failure}</td></tr>`);
  $("eps").innerHTML = rows.join("");
}

function runArrival() {
  const f = JSON.parse(arrival_field(JSON.stringify(shapeJson()), grid(), 160));
  const ctx = $("field").getContext("2d");
  const w = ctx.canvas.width;
  const img = ctx.createImageData(f.nx, f.ny);
  const top = f.extinction_time;
  for (let j = 0; j < f.ny; j++) for (let i = 0; i < f.nx; i++) {
    const u = f.u[j * f.nx + i];
    const k = 4 * ((f.ny - 1 - j) * f.nx + i);
    if (u === null) {
      img.data.set([240, 240, 240, 255], k);
      continue;
    }
    const s = u / top;
    const band = Math.floor(s * 12) % 2 === 0 ? 0 : 18;
    img.data.set([30 + 200 * s - band, 80 + 100 * (1 - s) - band, 200 - 150 * s, 255], k);
  }
  const off = new OffscreenCanvas(f.nx, f.ny);
  off.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, w, w);
  ctx.drawImage(off, 0, 0, w, w);
  const verdict = f.log_concave === null ? "not checked" : f.log_concave ? "passes" : "fails";
  $("field-info").textContent =
    `${f.nx} × ${f.ny} nodes, extinction time ${top.toFixed(4)}; ` +
    `-log(h0 - u) convexity at h0 = ${f.concavity_level.toFixed(4)} ${verdict}. Bands are level sets of u.`;
}

$("param").addEventListener("input", () => ($("param-value").textContent = $("param").value));
$("evolve").addEventListener("click", () => guarded("evolve", runEvolve));
$("classify").addEventListener("click", () => guarded("classify", runClassify));
$("arrival").addEventListener("click", () => guarded("arrival", runArrival));

await init();
status.textContent = "ready";
