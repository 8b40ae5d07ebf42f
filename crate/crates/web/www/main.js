import init, { models, predict, nomogram, scenarioGrid } from "./pkg/ed_predict_web.js";

const $ = (id) => document.getElementById(id);
const pct = (p) => (100 * p).toFixed(1) + "%";
let catalog = [];

function errorText(e) {
  try {
    const { error } = JSON.parse(e.message);
    return error.field ? `${error.field}: ${error.message}` : error.message;
  } catch {
    return String(e);
  }
}

function currentModel() {
  return catalog.find((m) => m.name === $("model").value);
}

function buildForm() {
  const model = currentModel();
  const old = readRecord();
  const box = $("fields");
  box.innerHTML = "";
  for (const v of model.variables) {
    const label = document.createElement("label");
    label.textContent = v.name.replaceAll("_", " ");
    const select = document.createElement("select");
    select.name = v.name;
    for (let code = v.min_code; code <= v.max_code; code++) {
      const opt = document.createElement("option");
      const text = v.labels.find((l) => l[0] === code);
      opt.value = code;
      opt.textContent = text ? `${code}: ${text[1]}` : String(code);
      select.append(opt);
    }
    if (old[v.name] !== undefined) select.value = old[v.name];
    select.addEventListener("change", refresh);
    label.append(select);
    box.append(label);
  }
  drawNomogram();
  refresh();
}

function readRecord() {
  const record = {};
  for (const s of $("fields").querySelectorAll("select")) record[s.name] = Number(s.value);
  return record;
}

function refresh() {
  const model = $("model").value;
  const record = JSON.stringify(readRecord());
  const cal = $("calibrate").checked;
  try {
    const r = JSON.parse(predict(model, record, cal));
    $("result").className = "";
    $("result").textContent =
      `Probability of ED at ${r.horizon_months} months: ${pct(r.p_ed)} ` +
      `(erectile function retained: ${pct(r.p_retained)}), total points ${r.total_points.toFixed(1)}`;
    $("points").innerHTML =
      "<tr><th>variable</th><th>points</th></tr>" +
      r.points.map((p) => `<tr><td>${p.variable}</td><td>${p.points.toFixed(1)}</td></tr>`).join("");

    const cells = JSON.parse(scenarioGrid(model, record, cal));
    const rows = {};
    for (const c of cells) (rows[c.treatment_label] ??= {})[c.hormone_therapy] = c.p_ed;
    $("grid").innerHTML =
      "<tr><th>treatment</th><th>P(ED), no hormone therapy</th><th>P(ED), hormone therapy</th></tr>" +
      Object.entries(rows)
        .map(([t, h]) => `<tr><td>${t}</td>${[0, 1].map((k) =>
          `<td>${pct(h[k])} <span class="bar" style="width:${(80 * h[k]).toFixed(0)}px"></span></td>`).join("")}</tr>`)
        .join("");
  } catch (e) {
    $("result").className = "error";
    $("result").textContent = errorText(e);
    $("points").innerHTML = $("grid").innerHTML = "";
  }
}

function drawNomogram() {
  const table = JSON.parse(nomogram($("model").value));
  const axes = table.axes
    .map((a) => `<tr><td>${a.variable}</td><td style="text-align:left">${a.ticks
      .map((t) => `${t.code}&rarr;${t.points.toFixed(1)}`).join(", ")}</td></tr>`)
    .join("");
  $("nomogram").innerHTML = "<tr><th>variable</th><th>code &rarr; points</th></tr>" + axes;
}

await init();
catalog = JSON.parse(models());
for (const m of catalog) {
  const opt = document.createElement("option");
  opt.value = m.name;
  opt.textContent = `${m.name} (${m.horizon_months} months)`;
  $("model").append(opt);
}
$("model").addEventListener("change", buildForm);
$("calibrate").addEventListener("change", refresh);
buildForm();
