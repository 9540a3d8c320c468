/**
 * Workbench session state: the working text, marked gaps, candidate panels,
 * attribution results, and a query/accept history with exact undo.
 *
 * Gaps never overlap and letter-count guesses stay in [1, 20]. Accepting a
 * candidate splices it into the working text (shifting later gaps); undo
 * restores the exact prior text, gaps, and panels.
 */

import type { Candidate } from "./api.js";

export const MAX_GAP_LETTERS = 20;

export interface Gap {
  id: string;
  offset: number;
  length: number;
  letters: number;
}

export interface HistoryEntry {
  kind: "mark" | "query" | "accept" | "undo" | "unmark" | "adjust";
  gapId: string;
  detail: string;
}

interface Snapshot {
  workingText: string;
  gaps: Gap[];
  panels: [string, Candidate[]][];
}

export interface SessionState {
  workingText: string;
  gaps: Gap[];
  history: HistoryEntry[];
}

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

const STORAGE_KEY = "lacuna-workbench-session";

export class Session {
  workingText = "";
  gaps: Gap[] = [];
  panels = new Map<string, Candidate[]>();
  history: HistoryEntry[] = [];
  private undoStack: Snapshot[] = [];
  private nextGapId = 1;

  setText(text: string): void {
    this.workingText = text;
    this.gaps = [];
    this.panels.clear();
    this.undoStack = [];
  }

  markGap(offset: number, length: number, letters: number): Gap {
    if (letters < 1 || letters > MAX_GAP_LETTERS) {
      throw new Error(`letter count must be in [1, ${MAX_GAP_LETTERS}], got ${letters}`);
    }
    if (offset < 0 || length < 1 || offset + length > this.workingText.length) {
      throw new Error(`gap [${offset}, ${offset + length}) outside the text`);
    }
    for (const gap of this.gaps) {
      if (offset < gap.offset + gap.length && gap.offset < offset + length) {
        throw new Error(`gap overlaps existing gap ${gap.id}`);
      }
    }
    const gap: Gap = { id: `g${this.nextGapId++}`, offset, length, letters };
    this.gaps.push(gap);
    this.gaps.sort((a, b) => a.offset - b.offset);
    this.history.push({ kind: "mark", gapId: gap.id, detail: `${letters} letters` });
    return gap;
  }

  gap(gapId: string): Gap {
    const gap = this.gaps.find((g) => g.id === gapId);
    if (!gap) throw new Error(`no such gap ${gapId}`);
    return gap;
  }

  unmarkGap(gapId: string): void {
    this.gap(gapId);
    this.gaps = this.gaps.filter((g) => g.id !== gapId);
    this.panels.delete(gapId);
    this.history.push({ kind: "unmark", gapId, detail: "" });
  }

  setLetters(gapId: string, letters: number): void {
    if (letters < 1 || letters > MAX_GAP_LETTERS) {
      throw new Error(`letter count must be in [1, ${MAX_GAP_LETTERS}], got ${letters}`);
    }
    this.gap(gapId).letters = letters;
    this.history.push({ kind: "adjust", gapId, detail: `letters=${letters}` });
  }

  setPanel(gapId: string, candidates: Candidate[]): void {
    this.panels.set(gapId, candidates);
  }

  recordQuery(gapId: string, letters: number): void {
    this.history.push({ kind: "query", gapId, detail: `letters=${letters}` });
  }

  private snapshot(): Snapshot {
    return {
      workingText: this.workingText,
      gaps: this.gaps.map((g) => ({ ...g })),
      panels: [...this.panels.entries()].map(([k, v]) => [k, v.slice()]),
    };
  }

  acceptCandidate(gapId: string, text: string): void {
    const gap = this.gap(gapId);
    this.undoStack.push(this.snapshot());
    const delta = text.length - gap.length;
    this.workingText =
      this.workingText.slice(0, gap.offset) +
      text +
      this.workingText.slice(gap.offset + gap.length);
    this.gaps = this.gaps.filter((g) => g.id !== gapId);
    for (const other of this.gaps) {
      if (other.offset > gap.offset) other.offset += delta;
    }
    this.panels.delete(gapId);
    this.history.push({ kind: "accept", gapId, detail: text });
  }

  canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  undo(): void {
    const prior = this.undoStack.pop();
    if (!prior) throw new Error("nothing to undo");
    this.workingText = prior.workingText;
    this.gaps = prior.gaps.map((g) => ({ ...g }));
    this.panels = new Map(prior.panels.map(([k, v]) => [k, v.slice()]));
    this.history.push({ kind: "undo", gapId: "", detail: "" });
  }

  toState(): SessionState {
    return {
      workingText: this.workingText,
      gaps: this.gaps.map((g) => ({ ...g })),
      history: this.history.slice(),
    };
  }

  static fromState(state: SessionState): Session {
    const session = new Session();
    session.workingText = state.workingText;
    session.gaps = state.gaps.map((g) => ({ ...g }));
    session.history = state.history.slice();
    session.nextGapId =
      1 + state.gaps.reduce((max, g) => Math.max(max, Number(g.id.slice(1)) || 0), 0);
    return session;
  }

  saveTo(storage: StorageLike): void {
    storage.setItem(STORAGE_KEY, JSON.stringify(this.toState()));
  }

  static loadFrom(storage: StorageLike): Session | null {
    const raw = storage.getItem(STORAGE_KEY);
    if (!raw) return null;
    try {
      return Session.fromState(JSON.parse(raw) as SessionState);
    } catch {
      return null;
    }
  }
}
