import init, { Sample, RocExplorer, iqm_names, pai_names } from "./pkg/pixbis_web.js";

const $ = (id) => document.getElementById(id);
const SIZE = 64;

function showError(e) {
  $("error").textContent = e ? String(e.message ?? e) : "";
}

function put(canvas, rgba, side) {
  const ctx = canvas.getContext("2d");
  ctx.putImageData(new ImageData(new Uint8ClampedArray(rgba), side, side), 0, 0);
}

function table(el, rows) {
  el.innerHTML = rows.map(([k, v]) => `<tr><td>${k}</td><td>${v}</td></tr>`).join("");
}

function drawHistogram(hist) {
  const c = $("hist");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  const max = Math.max(...hist, 1e-9);
  const w = c.width / hist.length;
  hist.forEach((v, i) => {
    const h = (v / max) * (c.height - 12);
    ctx.fillStyle = i === hist.length - 1 ? "#b55" : "#357";
    ctx.fillRect(i * w, c.height - h, Math.max(w - 1, 1), h);
  });
  ctx.fillStyle = "#222";
  ctx.fillText("uniform bins 0-57, non-uniform last", 4, 10);
}

function renderSample() {
  let sample;
  try {
    sample = new Sample(
      $("pai").value,
      Number($("strength").value),
      Number($("subject").value),
      Number($("frame").value),
      Number($("seed").value),
      SIZE,
    );
    showError(null);
  } catch (e) {
    showError(e);
    return;
  }
  put($("face"), sample.rgba(), SIZE);
  const names = iqm_names();
  table($("iqm"), Array.from(sample.iqm(), (v, i) => [names[i], v.toFixed(4)]));
  put($("lbp"), sample.lbp_rgba(), SIZE - 2);
  drawHistogram(Array.from(sample.lbp_histogram()));
  sample.free();
}

// Box-Muller draws from a fixed LCG so the explorer is repeatable.
function gaussians(n, mu, sigma, seed) {
  let s = seed >>> 0;
  const u = () => ((s = (Math.imul(s, 1664525) + 1013904223) >>> 0) + 1) / 4294967297;
  return Float64Array.from({ length: n }, () => mu + sigma * Math.sqrt(-2 * Math.log(u())) * Math.cos(2 * Math.PI * u()));
}

function renderRoc() {
  const sigma = Number($("sigma").value);
  const bona = gaussians(200, Number($("mu-b").value), sigma, 1);
  const attack = gaussians(200, Number($("mu-a").value), sigma, 2);
  const ex = new RocExplorer(bona, attack);
  const roc = ex.roc();
  const [eerTau, eer] = ex.eer();
  const tau = Number($("tau").value);
  const [far, frr, hter] = ex.at(tau);

  const c = $("roc");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  ctx.strokeStyle = "#ccc";
  ctx.strokeRect(0.5, 0.5, c.width - 1, c.height - 1);
  ctx.beginPath();
  ctx.moveTo(0, 0);
  ctx.lineTo(c.width, c.height);
  ctx.stroke();
  // x: FAR, y: 1 - FRR
  const px = (f) => f * (c.width - 1);
  const py = (r) => r * (c.height - 1);
  ctx.strokeStyle = "#357";
  ctx.beginPath();
  for (let i = 0; i < roc.length; i += 3) {
    const [x, y] = [px(roc[i + 1]), py(roc[i + 2])];
    i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
  }
  ctx.stroke();
  ctx.fillStyle = "#b55";
  ctx.beginPath();
  ctx.arc(px(far), py(frr), 4, 0, 2 * Math.PI);
  ctx.fill();

  const pct = (v) => (100 * v).toFixed(2) + "%";
  table($("rates"), [
    ["threshold", tau.toFixed(3)],
    ["FAR", pct(far)],
    ["FRR", pct(frr)],
    ["HTER", pct(hter)],
    ["EER", pct(eer)],
    ["EER threshold", eerTau.toFixed(4)],
    ["ROC points", roc.length / 3],
  ]);
  ex.free();
}

await init();
$("pai").innerHTML = pai_names().map((p) => `<option>${p}</option>`).join("");
$("pai").value = "replay_moire";
for (const id of ["pai", "strength", "subject", "frame", "seed"]) {
  $(id).addEventListener("input", () => {
    $("strength-v").textContent = Number($("strength").value).toFixed(2);
    renderSample();
  });
}
for (const id of ["mu-b", "mu-a", "sigma", "tau"]) {
  $(id).addEventListener("input", renderRoc);
}
renderSample();
renderRoc();
