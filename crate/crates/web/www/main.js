import init, { regret_demo, ddl_demo, trim_spectrum } from "./pkg/dwts_web.js";

const NS = "http://www.w3.org/2000/svg";
const COLORS = { DWTS: "#d62728", LINTS_FULL: "#1f77b4", ORACLE: "#444444" };
const W = 820, H = 320, PAD = 44;

function el(name, attrs, parent) {
  const e = document.createElementNS(NS, name);
  for (const [k, v] of Object.entries(attrs)) e.setAttribute(k, v);
  if (parent) parent.appendChild(e);
  return e;
}

function frame(xmax, ymin, ymax) {
  const svg = el("svg", { width: W, height: H, viewBox: `0 0 ${W} ${H}` });
  const sx = (x) => PAD + (x / Math.max(xmax, 1e-12)) * (W - 2 * PAD);
  const sy = (y) => H - PAD - ((y - ymin) / Math.max(ymax - ymin, 1e-12)) * (H - 2 * PAD);
  el("line", { x1: PAD, y1: H - PAD, x2: W - PAD, y2: H - PAD, stroke: "#999" }, svg);
  el("line", { x1: PAD, y1: PAD, x2: PAD, y2: H - PAD, stroke: "#999" }, svg);
  for (const [v, y] of [[ymin, sy(ymin)], [ymax, sy(ymax)]]) {
    const t = el("text", { x: PAD - 6, y: y + 4, "text-anchor": "end", "font-size": 11 }, svg);
    t.textContent = Number(v.toPrecision(3));
  }
  return { svg, sx, sy };
}

function legend(svg, entries) {
  entries.forEach(([name, color], i) => {
    el("rect", { x: PAD + 10, y: PAD + i * 16, width: 10, height: 10, fill: color }, svg);
    const t = el("text", { x: PAD + 26, y: PAD + 9 + i * 16, "font-size": 12 }, svg);
    t.textContent = name;
  });
}

function values(section) {
  const out = {};
  for (const input of section.querySelectorAll("input")) out[input.name] = Number(input.value);
  return out;
}

function wire(id, render) {
  const section = document.getElementById(id);
  const out = section.querySelector(".out");
  section.querySelector("button").addEventListener("click", () => {
    out.textContent = "working...";
    // let the message paint before the blocking call
    setTimeout(() => {
      try {
        out.replaceChildren(render(values(section)));
      } catch (e) {
        out.innerHTML = "";
        const p = document.createElement("p");
        p.className = "err";
        p.textContent = String(e.message ?? e);
        out.appendChild(p);
      }
    }, 20);
  });
}

function renderRegret(v) {
  const demo = JSON.parse(regret_demo(v.p, v.horizon, v.reps, v.seed));
  const ymax = Math.max(...demo.bands.flatMap((b) => b.q90), 1);
  const { svg, sx, sy } = frame(demo.horizon, 0, ymax);
  for (const b of demo.bands) {
    const color = COLORS[b.policy] ?? "#888";
    const upper = b.q90.map((y, t) => `${sx(t + 1)},${sy(y)}`);
    const lower = b.q10.map((y, t) => `${sx(t + 1)},${sy(y)}`).reverse();
    el("polygon", { points: upper.concat(lower).join(" "), fill: color, "fill-opacity": 0.2, stroke: "none" }, svg);
    el("polyline", { points: b.q50.map((y, t) => `${sx(t + 1)},${sy(y)}`).join(" "), fill: "none", stroke: color, "stroke-width": 2 }, svg);
  }
  legend(svg, demo.bands.map((b) => [b.policy, COLORS[b.policy] ?? "#888"]));
  return svg;
}

function renderDdl(v) {
  const d = JSON.parse(ddl_demo(v.p, v.n, v.psi, v.seed));
  const all = d.lower.concat(d.upper, d.truth, d.naive).filter(Number.isFinite);
  const { svg, sx, sy } = frame(d.truth.length + 1, Math.min(...all, 0), Math.max(...all));
  el("line", { x1: sx(0), y1: sy(0), x2: sx(d.truth.length + 1), y2: sy(0), stroke: "#ccc" }, svg);
  d.truth.forEach((truth, j) => {
    const x = sx(j + 1);
    const covered = d.lower[j] <= truth && truth <= d.upper[j];
    const color = covered ? "#1f77b4" : "#d62728";
    el("line", { x1: x, y1: sy(d.lower[j]), x2: x, y2: sy(d.upper[j]), stroke: color, "stroke-width": 2 }, svg);
    el("circle", { cx: x, cy: sy(d.theta_hat[j]), r: 3, fill: color }, svg);
    el("circle", { cx: x, cy: sy(truth), r: 6, fill: "none", stroke: "#222" }, svg);
    const y = sy(d.naive[j]);
    el("path", { d: `M${x - 4},${y - 4}L${x + 4},${y + 4}M${x - 4},${y + 4}L${x + 4},${y - 4}`, stroke: "#2ca02c" }, svg);
  });
  legend(svg, [["covers truth", "#1f77b4"], ["misses truth", "#d62728"], ["least squares", "#2ca02c"]]);
  return svg;
}

function renderTrim(v) {
  const s = JSON.parse(trim_spectrum(v.p, v.n, v.q, v.seed));
  const { svg, sx, sy } = frame(s.before.length, 0, s.before[0]);
  const w = Math.max((W - 2 * PAD) / s.before.length - 2, 1);
  s.before.forEach((d, i) => {
    el("rect", { x: sx(i), y: sy(d), width: w, height: sy(0) - sy(d), fill: "#bbb" }, svg);
    el("rect", { x: sx(i), y: sy(s.after[i]), width: w, height: sy(0) - sy(s.after[i]), fill: "#d62728", "fill-opacity": 0.7 }, svg);
  });
  el("line", { x1: PAD, y1: sy(s.tau), x2: W - PAD, y2: sy(s.tau), stroke: "#d62728", "stroke-dasharray": "4 3" }, svg);
  return svg;
}

await init();
wire("regret", renderRegret);
wire("ddl", renderDdl);
wire("trim", renderTrim);
