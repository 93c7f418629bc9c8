import init, { renderSlide, ruleSweep, survivalDemo } from "./pkg/chronicity_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function fail(target, err) {
  $(target).innerHTML = `<p class="error">${err.message ?? err}</p>`;
}

function rgb(c) {
  return `rgb(${c[0]},${c[1]},${c[2]})`;
}

function scoreTable(results) {
  const rows = Object.entries(results).map(([name, r]) => {
    const s = r.sub_scores;
    return `<tr><th>${name}</th><td>${s.gs}</td><td>${s.fc}</td><td>${s.if}</td><td>${s.ta}</td><td><b>${r.total}</b></td></tr>`;
  });
  const p = Object.values(results)[0].proportions;
  const pct = (x) => (100 * x).toFixed(1) + "%";
  return `<table><tr><th></th><th>GS</th><th>FC</th><th>IF</th><th>TA</th><th>total</th></tr>
    <tr><th>proportion</th><td>${pct(p.p_gs)}</td><td>${pct(p.p_fc)}</td><td>${pct(p.p_if)}</td><td>${pct(p.p_ta)}</td><td></td></tr>
    ${rows.join("")}</table>`;
}

function drawSlide() {
  try {
    const slide = renderSlide(num("s-w"), num("s-h"), num("s-n"), num("s-gs"), num("s-fc"), num("s-if"), num("s-ta"), BigInt(num("s-seed")));
    const summary = JSON.parse(slide.summary);
    const canvas = $("s-canvas");
    canvas.width = summary.width;
    canvas.height = summary.height;
    const image = new ImageData(new Uint8ClampedArray(slide.pixels), summary.width, summary.height);
    canvas.getContext("2d").putImageData(image, 0, 0);
    slide.free();
    $("s-legend").innerHTML = summary.class_names
      .map((name, i) => `<span><i style="background:${rgb(summary.palette[i])}"></i>${name}</span>`)
      .join("");
    const f = summary.features;
    $("s-out").innerHTML =
      `<p>${f.n_glom_total} glomeruli (${f.n_glom_gs} GS, ${f.n_glom_fc} FC); cortex ${f.area_cortex} px, IF ${f.area_if} px; tubules ${f.area_tubule_total} px, TA ${f.area_ta} px</p>` +
      scoreTable({ conventional: summary.conventional, "nuanced-example": summary.nuanced });
  } catch (err) {
    fail("s-out", err);
  }
}

const SERIES = [["gs", "#463c96"], ["fc", "#288caa"], ["if", "#5aaa5a"], ["ta", "#c84628"]];

function drawSweep() {
  try {
    const sweep = JSON.parse(ruleSweep($("r-rule").value, 200));
    const canvas = $("r-canvas");
    const ctx = canvas.getContext("2d");
    const { width, height } = canvas;
    const pad = 30;
    const maxScore = Math.max(1, ...SERIES.flatMap(([k]) => sweep[k]));
    ctx.clearRect(0, 0, width, height);
    ctx.strokeStyle = "#999";
    ctx.strokeRect(pad, 10, width - pad - 10, height - pad - 10);
    ctx.fillStyle = "#444";
    for (let s = 0; s <= maxScore; s++) {
      ctx.fillText(String(s), 10, height - pad - (s / maxScore) * (height - pad - 20) + 4);
    }
    for (const q of [0, 0.25, 0.5, 0.75, 1]) {
      ctx.fillText(`${q * 100}%`, pad + q * (width - pad - 10) - 10, height - 8);
    }
    SERIES.forEach(([key, colour], i) => {
      ctx.strokeStyle = colour;
      ctx.lineWidth = 2;
      ctx.beginPath();
      sweep.p.forEach((p, j) => {
        const x = pad + p * (width - pad - 10);
        const y = height - pad - (sweep[key][j] / maxScore) * (height - pad - 20) - i * 2;
        j === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
      });
      ctx.stroke();
      ctx.fillStyle = colour;
      ctx.fillText(key.toUpperCase(), width - 60, 24 + 14 * i);
    });
    $("r-out").textContent = `rule "${sweep.rule}"`;
  } catch (err) {
    fail("r-out", err);
  }
}

function drawSurvival() {
  try {
    const demo = JSON.parse(survivalDemo(num("k-n"), num("k-hr"), num("k-c"), BigInt(num("k-seed"))));
    const canvas = $("k-canvas");
    const ctx = canvas.getContext("2d");
    const { width, height } = canvas;
    const pad = 36;
    const tMax = Math.max(...demo.curves.flatMap((c) => c.points.map((p) => p.time)), 1);
    const x = (t) => pad + (t / tMax) * (width - pad - 10);
    const y = (s) => 10 + (1 - s) * (height - pad - 10);
    ctx.clearRect(0, 0, width, height);
    ctx.strokeStyle = "#999";
    ctx.lineWidth = 1;
    ctx.strokeRect(pad, 10, width - pad - 10, height - pad - 10);
    ctx.fillStyle = "#444";
    for (const s of [0, 0.5, 1]) ctx.fillText(s.toFixed(1), 8, y(s) + 4);
    for (let t = 0; t <= tMax; t += Math.max(1, Math.round(tMax / 6))) ctx.fillText(`${t}y`, x(t) - 6, height - 10);
    const colours = ["#288caa", "#c84628"];
    demo.curves.forEach((curve, i) => {
      ctx.strokeStyle = colours[i % 2];
      ctx.lineWidth = 2;
      ctx.beginPath();
      let s = 1;
      ctx.moveTo(x(0), y(1));
      for (const p of curve.points) {
        ctx.lineTo(x(p.time), y(s));
        s = p.survival;
        ctx.lineTo(x(p.time), y(s));
      }
      ctx.stroke();
      ctx.fillStyle = colours[i % 2];
      ctx.fillText(`${curve.label} (n=${curve.n}, events=${curve.events})`, width - 230, 26 + 14 * i);
    });
    const [lo, hi] = demo.hr_ci;
    $("k-out").innerHTML =
      `<p>log-rank chi-square ${demo.logrank_chi_square.toFixed(2)}, p = ${demo.logrank_p.toExponential(2)}; ` +
      `Cox HR ${demo.hazard_ratio.toFixed(2)} (95% CI ${lo.toFixed(2)} to ${hi.toFixed(2)}), p = ${demo.cox_p.toExponential(2)}</p>`;
  } catch (err) {
    fail("k-out", err);
  }
}

await init();
$("s-go").addEventListener("click", drawSlide);
$("r-go").addEventListener("click", drawSweep);
$("k-go").addEventListener("click", drawSurvival);
drawSlide();
drawSweep();
drawSurvival();
