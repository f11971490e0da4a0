import init, { rateCurve, deviationCurve, analyzeCounts, bundledIndex, bundledCsv } from "./pkg/qss_wasm.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

// Log-y line plot; points with y <= 0 break the line.
function plot(canvas, legend, series, { logX = false, xLabel = "", yLabel = "" } = {}) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, pad = { l: 70, r: 15, t: 10, b: 40 };
  ctx.clearRect(0, 0, W, H);
  const fx = logX ? Math.log10 : (x) => x;
  const pts = series.flatMap((s) => s.points.filter(([, y]) => y > 0));
  if (pts.length === 0) {
    ctx.fillText("no positive values", W / 2 - 40, H / 2);
    legend.textContent = "";
    return;
  }
  const xs = pts.map(([x]) => fx(x)), ys = pts.map(([, y]) => Math.log10(y));
  const x0 = Math.min(...xs), x1 = Math.max(...xs) || 1;
  const y0 = Math.floor(Math.min(...ys)), y1 = Math.ceil(Math.max(...ys));
  const X = (x) => pad.l + ((fx(x) - x0) / (x1 - x0 || 1)) * (W - pad.l - pad.r);
  const Y = (y) => H - pad.b - ((Math.log10(y) - y0) / (y1 - y0 || 1)) * (H - pad.t - pad.b);

  ctx.strokeStyle = "#eee";
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  for (let e = y0; e <= y1; e++) {
    const y = Y(10 ** e);
    ctx.beginPath(); ctx.moveTo(pad.l, y); ctx.lineTo(W - pad.r, y); ctx.stroke();
    ctx.fillText(`1e${e}`, 8, y + 4);
  }
  for (let i = 0; i <= 6; i++) {
    const v = x0 + ((x1 - x0) * i) / 6;
    const label = logX ? `1e${v.toFixed(1)}` : v.toFixed(0);
    ctx.fillText(label, pad.l + ((W - pad.l - pad.r) * i) / 6 - 10, H - pad.b + 15);
  }
  ctx.fillText(xLabel, W / 2 - 20, H - 6);
  ctx.save(); ctx.translate(12, H / 2 + 40); ctx.rotate(-Math.PI / 2); ctx.fillText(yLabel, 0, 0); ctx.restore();

  series.forEach((s, i) => {
    ctx.strokeStyle = COLORS[i % COLORS.length];
    ctx.lineWidth = 2;
    ctx.beginPath();
    let pen = false;
    for (const [x, y] of s.points) {
      if (!(y > 0)) { pen = false; continue; }
      pen ? ctx.lineTo(X(x), Y(y)) : ctx.moveTo(X(x), Y(y));
      pen = true;
    }
    ctx.stroke();
  });
  legend.innerHTML = series
    .map((s, i) => `<span style="color:${COLORS[i % COLORS.length]}">&#9632; ${s.label}</span>`)
    .join("");
}

function rows(flat, stride) {
  const out = [];
  for (let i = 0; i < flat.length; i += stride) out.push(Array.from(flat.slice(i, i + stride)));
  return out;
}

function fail(where, e) {
  where.innerHTML = `<span class="err">${e.message ?? e}</span>`;
}

function onRate(ev) {
  ev?.preventDefault();
  const f = document.getElementById("rate-form").elements;
  const legend = document.getElementById("rate-legend");
  const args = [Number(f.ed.value), Number(f.lmax.value), Number(f.step.value)];
  try {
    const n = Number(f.n.value);
    const series = [{ label: `N = ${f.n.value}`, points: rows(rateCurve(n, ...args), 4).map((r) => [r[0], r[3]]) }];
    if (f.inf.checked) {
      series.push({ label: "N = ∞", points: rows(rateCurve(Infinity, ...args), 4).map((r) => [r[0], r[3]]) });
    }
    const reach = series[0].points.filter(([, y]) => y > 0).map(([x]) => x);
    plot(document.getElementById("rate-plot"), legend, series, { xLabel: "L (km)", yLabel: "bits per pulse" });
    legend.insertAdjacentHTML("beforeend", `<span>last positive L: ${reach.length ? Math.max(...reach) : "none"} km</span>`);
  } catch (e) {
    fail(legend, e);
  }
}

function onDeviation(ev) {
  ev?.preventDefault();
  const f = document.getElementById("dev-form").elements;
  const legend = document.getElementById("dev-legend");
  try {
    const r = rows(deviationCurve(Number(f.frac.value), Number(f.eps.value), Number(f.kmin.value), Number(f.kmax.value), 60), 4);
    plot(document.getElementById("dev-plot"), legend, [
      { label: "Kato, optimized", points: r.map((x) => [x[0], x[1]]) },
      { label: "Kato, a = 0", points: r.map((x) => [x[0], x[2]]) },
      { label: "Azuma", points: r.map((x) => [x[0], x[3]]) },
    ], { logX: true, xLabel: "trials k", yLabel: "deviation / k" });
  } catch (e) {
    fail(legend, e);
  }
}

function onTable(ev) {
  ev?.preventDefault();
  const f = document.getElementById("table-form").elements;
  const out = document.getElementById("table-out");
  try {
    out.textContent = analyzeCounts(f.csv.value, Number(f.mu.value), Number(f.px.value), Number(f.n.value));
  } catch (e) {
    fail(out, e);
  }
}

function loadFixture() {
  const f = document.getElementById("table-form").elements;
  const opt = f.fixture.selectedOptions[0];
  f.csv.value = bundledCsv(opt.value) ?? "";
  f.px.value = opt.dataset.px;
  f.mu.value = opt.dataset.mu;
}

await init();
document.getElementById("status").textContent = "";
const select = document.getElementById("table-form").elements.fixture;
for (const line of bundledIndex().trim().split("\n")) {
  const [name, px, mu] = line.split(",");
  const o = new Option(name, name);
  Object.assign(o.dataset, { px, mu });
  select.add(o);
}
select.addEventListener("change", () => { loadFixture(); onTable(); });
document.getElementById("rate-form").addEventListener("submit", onRate);
document.getElementById("dev-form").addEventListener("submit", onDeviation);
document.getElementById("table-form").addEventListener("submit", onTable);
loadFixture();
onRate();
onDeviation();
onTable();
