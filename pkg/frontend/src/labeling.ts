// Labeling flow state machine, kept free of DOM concerns so it can be
// driven directly in tests. The predicted label stays hidden until the
// annotator opts to reveal it (anchoring-bias control).

import { ApiRequestError, nextLabelTask, submitLabel } from "./api.js";
import type { LabelTask } from "./types.js";

export interface LabelingApi {
  next(runId: string, constraintId?: string): ReturnType<typeof nextLabelTask>;
  submit(invocationId: string, trueLabel: boolean): ReturnType<typeof submitLabel>;
}

export interface LabelingState {
  task: LabelTask | null;
  remaining: number;
  revealed: boolean;
  labeled: number;
  done: boolean;
  notice: string | null;
}

const liveApi: LabelingApi = {
  next: nextLabelTask,
  submit: submitLabel,
};

export class LabelingFlow {
  state: LabelingState = {
    task: null,
    remaining: 0,
    revealed: false,
    labeled: 0,
    done: false,
    notice: null,
  };

  constructor(
    private runId: string,
    private constraintId?: string,
    private api: LabelingApi = liveApi,
  ) {}

  async start(): Promise<LabelingState> {
    return this.advance();
  }

  private async advance(): Promise<LabelingState> {
    const next = await this.api.next(this.runId, this.constraintId);
    this.state = {
      ...this.state,
      task: next.task,
      remaining: next.remaining,
      revealed: false,
      done: next.task === null,
    };
    return this.state;
  }

  reveal(): LabelingState {
    this.state = { ...this.state, revealed: true };
    return this.state;
  }

  /** The annotator's judgement: do the inputs satisfy the constraint? */
  async submit(satisfied: boolean): Promise<LabelingState> {
    const task = this.state.task;
    if (!task) {
      return this.state;
    }
    try {
      // true_label marks a genuine violation (the positive class).
      await this.api.submit(task.invocation_id, !satisfied);
      this.state = { ...this.state, labeled: this.state.labeled + 1, notice: null };
    } catch (err) {
      if (err instanceof ApiRequestError && err.status === 409) {
        // Another annotator got there first; surface it and move on.
        this.state = { ...this.state, notice: "already labeled by someone else; skipped" };
      } else {
        throw err;
      }
    }
    return this.advance();
  }
}
