/** Single-page revision UI wired to the feedback service over HTTP. */

import {
  ApiError,
  OfflineError,
  ServiceClient,
  isExplanation,
  type Attempt,
  type Condition,
  type CriterionEntry,
  type ExplanationDocument,
  type FeedbackReport,
  type PromptDocument,
  type Session,
} from "./api.js";
import {
  buildFeedbackCards,
  buildHistory,
  lengthState,
  paragraphs,
} from "./model.js";

/** Attaches rubric data (scores and cue spans) to a submission. */
export type Scorer = (
  text: string,
) => Promise<Record<string, CriterionEntry>> | Record<string, CriterionEntry>;

const emptyScorer: Scorer = () => ({});

export interface AppOptions {
  client: ServiceClient;
  root: HTMLElement;
  promptId: string;
  condition: Condition;
  /** Resume an existing session instead of creating one. */
  sessionId?: string | null;
  scorer?: Scorer;
  /** Whether scores and score deltas are visible to the learner. */
  showScores?: boolean;
  /** Used to reflect the session id into the page URL; optional. */
  window?: Window | null;
}

interface Elements {
  question: HTMLHeadingElement;
  paragraphList: HTMLOListElement;
  editor: HTMLTextAreaElement;
  counter: HTMLElement;
  submit: HTMLButtonElement;
  errorBanner: HTMLElement;
  errorText: HTMLElement;
  retry: HTMLButtonElement;
  offlineBanner: HTMLElement;
  overall: HTMLElement;
  cards: HTMLElement;
  explanationPanel: HTMLElement;
  explanationTitle: HTMLElement;
  explanationBody: HTMLElement;
  historyBody: HTMLTableSectionElement;
}

export class App {
  readonly client: ServiceClient;
  readonly root: HTMLElement;
  readonly showScores: boolean;
  session: Session | null = null;
  prompt: PromptDocument | null = null;

  private readonly doc: Document;
  private readonly scorer: Scorer;
  private readonly win: Window | null;
  private readonly els: Elements;
  private lastAction: (() => Promise<void>) | null = null;

  constructor(options: AppOptions) {
    this.client = options.client;
    this.root = options.root;
    this.doc = options.root.ownerDocument;
    this.scorer = options.scorer ?? emptyScorer;
    this.showScores = options.showScores ?? false;
    this.win = options.window ?? null;
    this.els = this.buildSkeleton();
  }

  /** Create (or resume) a session, load the prompt, and render the page. */
  static async start(options: AppOptions): Promise<App> {
    const app = new App(options);
    await app.runAction(async () => {
      app.prompt = await app.client.getPrompt(options.promptId);
      app.session = options.sessionId
        ? await app.client.getSession(options.sessionId)
        : await app.client.createSession(options.promptId, options.condition);
      app.reflectSessionUrl();
      app.renderPrompt();
      app.renderHistory();
      const last = app.session.attempts[app.session.attempts.length - 1];
      if (last !== undefined) {
        app.els.editor.value = last.text;
      }
      app.updateCounter();
    });
    return app;
  }

  /** Submit the editor text as a new attempt and render what came back. */
  async submit(): Promise<void> {
    await this.runAction(async () => {
      const session = this.requireSession();
      const text = this.els.editor.value;
      const constraint = this.prompt?.length_constraint ?? null;
      if (!lengthState(text, constraint).ok) {
        return;
      }
      const perCriterion = await this.scorer(text);
      const attempt = await this.client.submitAttempt(session.session_id, {
        text,
        per_criterion: perCriterion,
      });
      const latest = await this.client.latestFeedback(session.session_id);
      if (isExplanation(latest)) {
        this.renderExplanation(latest);
      } else {
        this.renderReport(latest, attempt);
      }
      this.session = await this.client.getSession(session.session_id);
      this.renderHistory();
      this.els.editor.value = attempt.text;
      this.updateCounter();
    });
  }

  async retry(): Promise<void> {
    const action = this.lastAction;
    if (action !== null) {
      await this.runAction(action);
    }
  }

  private requireSession(): Session {
    if (this.session === null) {
      throw new Error("session not started");
    }
    return this.session;
  }

  private reflectSessionUrl(): void {
    if (this.win === null || this.session === null) return;
    try {
      const url = new URL(this.win.location.href);
      url.searchParams.set("session", this.session.session_id);
      this.win.history.replaceState(null, "", url.toString());
    } catch {
      // Environments without history support still work; the URL is a convenience.
    }
  }

  private async runAction(action: () => Promise<void>): Promise<void> {
    this.lastAction = action;
    this.els.errorBanner.hidden = true;
    this.els.offlineBanner.hidden = true;
    try {
      await action();
    } catch (err) {
      if (err instanceof OfflineError) {
        this.els.offlineBanner.hidden = false;
      } else if (err instanceof ApiError) {
        this.els.errorText.textContent = `${err.code}: ${err.message}`;
        this.els.errorBanner.hidden = false;
      } else {
        throw err;
      }
    }
  }

  private renderPrompt(): void {
    const prompt = this.prompt;
    if (prompt === null) return;
    this.els.question.textContent = prompt.question;
    this.els.paragraphList.replaceChildren();
    for (const [i, text] of paragraphs(prompt.prompt_text).entries()) {
      const li = this.doc.createElement("li");
      li.textContent = text;
      li.dataset.paragraph = String(i + 1);
      this.els.paragraphList.append(li);
    }
    this.updateCounter();
  }

  /** Counter shows the Unicode scalar count; submit unlocks inside the bounds. */
  private updateCounter(): void {
    const constraint = this.prompt?.length_constraint ?? null;
    const state = lengthState(this.els.editor.value, constraint);
    this.els.counter.textContent =
      state.min === null || state.max === null
        ? String(state.count)
        : `${state.count} / ${state.min}-${state.max}`;
    this.els.counter.dataset.ok = state.ok ? "true" : "false";
    const closed = this.session?.closed ?? false;
    this.els.submit.disabled = !state.ok || closed;
  }

  private renderReport(report: FeedbackReport, attempt: Attempt): void {
    this.els.explanationPanel.hidden = true;
    this.els.overall.textContent = this.showScores
      ? `${report.overall_message} (${report.total_score}/${report.max_total})`
      : report.overall_message;
    this.els.cards.replaceChildren();
    for (const card of buildFeedbackCards(report, attempt)) {
      const article = this.doc.createElement("article");
      article.className = "card";
      article.dataset.criterion = card.criterionId;
      article.dataset.templateKey = card.templateKey;
      article.dataset.aligned = card.aligned ? "true" : "false";

      const header = this.doc.createElement("header");
      header.textContent = this.showScores
        ? `${card.criterionId} ${card.scoreFraction}`
        : card.criterionId;
      article.append(header);

      const body = this.doc.createElement("p");
      body.className = "feedback-text";
      body.textContent = card.text;
      article.append(body);

      if (card.highlight !== null) {
        const quote = this.doc.createElement("blockquote");
        quote.className = "answer-excerpt";
        const before = this.doc.createElement("span");
        before.textContent = card.highlight.before;
        const cue = this.doc.createElement("mark");
        cue.textContent = card.highlight.cue;
        const after = this.doc.createElement("span");
        after.textContent = card.highlight.after;
        quote.append(before, cue, after);
        article.append(quote);
      }
      this.els.cards.append(article);
    }
  }

  private renderExplanation(doc: ExplanationDocument): void {
    this.els.cards.replaceChildren();
    this.els.overall.textContent = "";
    this.els.explanationTitle.textContent = doc.title;
    this.els.explanationBody.textContent = doc.body;
    this.els.explanationPanel.hidden = false;
  }

  private renderHistory(): void {
    const attempts = this.session?.attempts ?? [];
    this.els.historyBody.replaceChildren();
    for (const row of buildHistory(attempts)) {
      const tr = this.doc.createElement("tr");
      tr.dataset.attempt = String(row.index);
      const cells = [String(row.index), row.submittedAt];
      if (this.showScores) {
        cells.push(String(row.total), row.deltaLabel);
      }
      for (const value of cells) {
        const td = this.doc.createElement("td");
        td.textContent = value;
        tr.append(td);
      }
      this.els.historyBody.append(tr);
    }
  }

  private buildSkeleton(): Elements {
    const d = this.doc;
    const make = <K extends keyof HTMLElementTagNameMap>(
      tag: K,
      id: string,
      className?: string,
    ): HTMLElementTagNameMap[K] => {
      const el = d.createElement(tag);
      el.id = id;
      if (className !== undefined) el.className = className;
      return el;
    };

    const question = make("h2", "question");
    const paragraphList = make("ol", "prompt-paragraphs");
    const promptSection = make("section", "prompt-panel");
    promptSection.append(question, paragraphList);

    const editor = make("textarea", "editor");
    editor.rows = 5;
    const counter = make("div", "char-counter");
    const submit = make("button", "submit");
    submit.type = "button";
    submit.textContent = "Submit answer";
    submit.disabled = true;
    const editorSection = make("section", "editor-panel");
    editorSection.append(editor, counter, submit);

    const errorText = make("span", "error-text");
    const retry = make("button", "retry");
    retry.type = "button";
    retry.textContent = "Retry";
    const errorBanner = make("div", "error-banner");
    errorBanner.hidden = true;
    errorBanner.append(errorText, retry);

    const offlineBanner = make("div", "offline-banner");
    offlineBanner.hidden = true;
    offlineBanner.textContent = "You appear to be offline. Check the connection and retry.";

    const overall = make("div", "overall");
    const cards = make("div", "cards");
    const feedbackSection = make("section", "feedback-panel");
    feedbackSection.append(overall, cards);

    const explanationTitle = make("h3", "explanation-title");
    const explanationBody = make("p", "explanation-body");
    const explanationPanel = make("section", "explanation-panel");
    explanationPanel.hidden = true;
    explanationPanel.append(explanationTitle, explanationBody);

    const historyBody = d.createElement("tbody");
    const historyTable = make("table", "history");
    historyTable.append(historyBody);
    const historySection = make("section", "history-panel");
    historySection.append(historyTable);

    this.root.replaceChildren(
      promptSection,
      editorSection,
      errorBanner,
      offlineBanner,
      feedbackSection,
      explanationPanel,
      historySection,
    );

    editor.addEventListener("input", () => this.updateCounter());
    submit.addEventListener("click", () => {
      void this.submit();
    });
    retry.addEventListener("click", () => {
      void this.retry();
    });

    return {
      question,
      paragraphList,
      editor,
      counter,
      submit,
      errorBanner,
      errorText,
      retry,
      offlineBanner,
      overall,
      cards,
      explanationPanel,
      explanationTitle,
      explanationBody,
      historyBody,
    };
  }
}
