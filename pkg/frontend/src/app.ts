/**
 * Browser entry point. Wires the session, controller, and API client to a
 * small DOM: paste a transcription, mark a selection as a gap with a
 * letter-count guess, browse ranked restorations, accept or undo splices,
 * and view place/date attribution with a bar chart. State persists in
 * localStorage so a reload keeps the working text.
 */

import { ApiClient } from "./api.js";
import { RestoreController } from "./controller.js";
import { Session } from "./session.js";

const api = new ApiClient("");
const session = Session.loadFrom(localStorage) ?? new Session();
const controller = new RestoreController(api, session);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const textArea = el<HTMLTextAreaElement>("working-text");
const lettersInput = el<HTMLInputElement>("letters");
const gapList = el<HTMLDivElement>("gaps");
const candidatePanel = el<HTMLDivElement>("candidates");
const historyList = el<HTMLDivElement>("history");
const statusLine = el<HTMLDivElement>("status");
const attributionPanel = el<HTMLDivElement>("attribution");

let activeGapId: string | null = null;

function persist(): void {
  session.saveTo(localStorage);
}

function setStatus(message: string, isError = false): void {
  statusLine.textContent = message;
  statusLine.className = isError ? "status error" : "status";
}

function renderGaps(): void {
  gapList.replaceChildren();
  for (const gap of session.gaps) {
    const chip = document.createElement("button");
    const shown = session.workingText.slice(gap.offset, gap.offset + gap.length);
    chip.textContent = `${gap.id}: "${shown}" → ${gap.letters} letters`;
    chip.className = gap.id === activeGapId ? "gap active" : "gap";
    chip.onclick = () => {
      activeGapId = gap.id;
      lettersInput.value = String(gap.letters);
      renderGaps();
      void runQuery();
    };
    gapList.appendChild(chip);
  }
}

function renderHistory(): void {
  historyList.replaceChildren();
  for (const entry of session.history.slice(-12).reverse()) {
    const row = document.createElement("div");
    row.textContent = `${entry.kind} ${entry.gapId} ${entry.detail}`.trim();
    historyList.appendChild(row);
  }
}

function renderCandidates(): void {
  candidatePanel.replaceChildren();
  if (!activeGapId) return;
  const candidates = session.panels.get(activeGapId) ?? [];
  for (const candidate of candidates) {
    const row = document.createElement("div");
    row.className = "candidate";
    const label = document.createElement("span");
    label.textContent = `${candidate.text}  (${candidate.score.toFixed(2)})`;
    if (!candidate.letters_ok) {
      label.textContent += "  [length mismatch]";
      label.className = "mismatch";
    }
    const accept = document.createElement("button");
    accept.textContent = "accept";
    accept.onclick = () => {
      if (!activeGapId) return;
      session.acceptCandidate(activeGapId, candidate.text);
      activeGapId = null;
      refresh();
    };
    row.append(label, accept);
    candidatePanel.appendChild(row);
  }
}

function refresh(): void {
  textArea.value = session.workingText;
  renderGaps();
  renderCandidates();
  renderHistory();
  persist();
}

async function runQuery(): Promise<void> {
  if (!activeGapId) return;
  setStatus("querying…");
  const outcome = await controller.query(activeGapId);
  if (outcome.kind === "error") {
    setStatus(outcome.message, true);
  } else if (outcome.kind === "fresh") {
    setStatus(`${outcome.candidates.length} candidates`);
  }
  refresh();
}

el<HTMLButtonElement>("set-text").onclick = () => {
  session.setText(textArea.value);
  activeGapId = null;
  refresh();
  setStatus("text loaded");
};

el<HTMLButtonElement>("mark-gap").onclick = () => {
  const start = textArea.selectionStart;
  const end = textArea.selectionEnd;
  if (start === end) {
    setStatus("select the damaged region in the text first", true);
    return;
  }
  try {
    const gap = session.markGap(start, end - start, Number(lettersInput.value));
    activeGapId = gap.id;
    refresh();
    void runQuery();
  } catch (error) {
    setStatus(error instanceof Error ? error.message : String(error), true);
  }
};

el<HTMLButtonElement>("requery").onclick = () => {
  if (!activeGapId) return;
  try {
    session.setLetters(activeGapId, Number(lettersInput.value));
  } catch (error) {
    setStatus(error instanceof Error ? error.message : String(error), true);
    return;
  }
  void runQuery();
};

el<HTMLButtonElement>("undo").onclick = () => {
  if (!session.canUndo()) {
    setStatus("nothing to undo", true);
    return;
  }
  session.undo();
  activeGapId = null;
  refresh();
};

el<HTMLButtonElement>("attribute").onclick = async () => {
  attributionPanel.replaceChildren();
  try {
    const [place, date] = await Promise.all([
      controller.attributePlace(),
      controller.attributeDate(),
    ]);
    const places = document.createElement("div");
    places.innerHTML = "<h3>Place</h3>";
    for (const entry of place.labels.slice(0, 3)) {
      const row = document.createElement("div");
      row.textContent = `${entry.label} (${entry.score.toFixed(2)})`;
      places.appendChild(row);
    }
    const dates = document.createElement("div");
    dates.innerHTML = `<h3>Date: ${date.year}</h3>`;
    const peak = Math.max(...date.distribution.map((bin) => bin.p));
    for (const bin of date.distribution) {
      const row = document.createElement("div");
      row.className = "bar-row";
      const bar = document.createElement("span");
      bar.className = "bar";
      bar.style.width = `${Math.round((bin.p / peak) * 160)}px`;
      row.append(`${bin.start}–${bin.end} `, bar, ` ${(bin.p * 100).toFixed(1)}%`);
      dates.appendChild(row);
    }
    attributionPanel.append(places, dates);
  } catch (error) {
    setStatus(error instanceof Error ? error.message : String(error), true);
  }
};

void api.health().then((ok) => setStatus(ok ? "service connected" : "service unreachable", !ok));
refresh();
