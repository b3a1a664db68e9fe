// Smart-keyboard editor: the draft grows only through palette taps, free
// text is allowed only inside value/name tokens, and a registry change
// refreshes the palette (dropping vanished devices) with a visible notice.

import { ApiError, HearthClient } from "./api.js";
import { paletteButton, tokenStrip } from "./render.js";
import type {
  CompletionOptionJson,
  DraftJson,
  InsertionPointJson,
  TokenJson,
} from "./types.js";

export type PromptFn = (label: string, initial: string) => string | null;

export class EditorController {
  draft: DraftJson = { tokens: [] };
  point: InsertionPointJson | null = null;
  palette: CompletionOptionJson[] = [];
  generation = -1;
  notice = "";
  busy = false;

  constructor(
    private readonly client: HearthClient,
    private readonly root: HTMLElement,
    private readonly promptFn: PromptFn = (label, initial) =>
      window.prompt(label, initial),
    private readonly onSaved: (programId: string) => void = () => {},
  ) {}

  programName(): string | null {
    const token = this.draft.tokens[1];
    return token && token.category === "program" ? token.text : null;
  }

  async refreshPalette(noticeText = ""): Promise<void> {
    const reply = await this.client.completionOptions(this.draft);
    this.point = reply.point;
    this.palette = reply.options;
    this.generation = reply.generation;
    this.notice = noticeText;
    this.render();
  }

  /** Called by the stream plumbing whenever the registry generation moves. */
  async onRegistryChange(): Promise<void> {
    if (this.busy) {
      return;
    }
    await this.refreshPalette("the home changed; options were refreshed");
  }

  async tap(option: CompletionOptionJson): Promise<void> {
    if (this.point === null) {
      await this.refreshPalette();
    }
    let text: string | undefined;
    if (option.free_text) {
      const entered = this.promptFn(
        `value for ${option.category}${option.domain_hint ? ` (${option.domain_hint})` : ""}`,
        option.token.text,
      );
      if (entered === null) {
        return;
      }
      text = entered;
    }
    this.busy = true;
    try {
      const reply = await this.client.completionApply(this.draft, this.point!, option, text);
      this.draft = reply.draft;
      this.point = reply.point;
      await this.refreshPalette();
    } catch (err) {
      if (err instanceof ApiError && err.code === "stale-option") {
        await this.refreshPalette("the home changed; options were refreshed");
        return;
      }
      if (err instanceof ApiError) {
        this.notice = err.message;
        this.render();
        return;
      }
      throw err;
    } finally {
      this.busy = false;
    }
  }

  async deleteAt(tokenIndex: number): Promise<void> {
    if (this.point === null) {
      return;
    }
    const reply = await this.client.completionDelete(this.draft, {
      token_index: tokenIndex,
      context: [],
    });
    this.draft = reply.draft;
    this.point = reply.point;
    await this.refreshPalette();
  }

  async loadProgram(programId: string): Promise<void> {
    const reply = await this.client.programTokens(programId);
    this.draft = {
      tokens: reply.tokens.map((t) => ({
        text: t.text,
        category: t.category,
        terminal_key: t.terminal_key,
        value: t.value,
        unknown: t.unknown,
      })),
    };
    await this.refreshPalette();
  }

  clear(): void {
    this.draft = { tokens: [] };
    this.point = null;
    this.notice = "";
    void this.refreshPalette();
  }

  draftText(): string {
    return this.draft.tokens.map((t) => t.text).join(" ");
  }

  async save(): Promise<string | null> {
    const name = this.programName();
    if (name === null) {
      this.notice = "the draft needs a program name before saving";
      this.render();
      return null;
    }
    try {
      await this.client.saveProgram(name, this.draftText());
      this.notice = `saved ${name}`;
      this.render();
      this.onSaved(name);
      return name;
    } catch (err) {
      if (err instanceof ApiError) {
        this.notice = err.message; // e.g. incomplete draft: not yet parseable
        this.render();
        return null;
      }
      throw err;
    }
  }

  async activate(): Promise<boolean> {
    const name = await this.save();
    if (name === null) {
      return false;
    }
    try {
      await this.client.startProgram(name);
      this.notice = `${name} is running`;
      this.render();
      return true;
    } catch (err) {
      if (err instanceof ApiError) {
        this.notice = err.message; // inline validation error, e.g. empty program
        this.render();
        return false;
      }
      throw err;
    }
  }

  render(): void {
    this.root.textContent = "";
    const strip = tokenStrip(this.draft.tokens);
    strip.querySelectorAll(".token").forEach((node, i) => {
      node.addEventListener("dblclick", () => void this.deleteAt(i));
    });
    this.root.appendChild(strip);

    if (this.notice) {
      const note = document.createElement("p");
      note.className = "editor-notice";
      note.textContent = this.notice;
      this.root.appendChild(note);
    }

    const palette = document.createElement("div");
    palette.className = "palette";
    for (const option of this.palette) {
      const btn = paletteButton(option);
      btn.addEventListener("click", () => void this.tap(option));
      palette.appendChild(btn);
    }
    if (!this.palette.length) {
      const done = document.createElement("span");
      done.className = "palette-complete";
      done.textContent = "program is complete";
      palette.appendChild(done);
    }
    this.root.appendChild(palette);

    const controls = document.createElement("div");
    controls.className = "editor-controls";
    const saveBtn = document.createElement("button");
    saveBtn.className = "editor-save";
    saveBtn.textContent = "save";
    saveBtn.addEventListener("click", () => void this.save());
    const activateBtn = document.createElement("button");
    activateBtn.className = "editor-activate";
    activateBtn.textContent = "save + start";
    activateBtn.addEventListener("click", () => void this.activate());
    const clearBtn = document.createElement("button");
    clearBtn.className = "editor-clear";
    clearBtn.textContent = "clear";
    clearBtn.addEventListener("click", () => this.clear());
    controls.append(saveBtn, activateBtn, clearBtn);
    this.root.appendChild(controls);

    const textView = document.createElement("pre");
    textView.className = "editor-text";
    textView.textContent = this.draftText();
    this.root.appendChild(textView);
  }
}
