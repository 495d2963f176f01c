/**
 * Latest-wins single flight: at most one preview request is in the air;
 * starting a new one aborts the previous. Stale responses never surface.
 */

export class LatestWins {
  private controller: AbortController | null = null;
  private ticket = 0;

  /** Runs ``task`` with an abort signal; resolves null if superseded. */
  async run<T>(task: (signal: AbortSignal) => Promise<T>): Promise<T | null> {
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    const ticket = ++this.ticket;
    try {
      const value = await task(controller.signal);
      return ticket === this.ticket ? value : null;
    } catch (err) {
      if (controller.signal.aborted || ticket !== this.ticket) return null;
      throw err;
    }
  }

  get inFlight(): boolean {
    return this.controller !== null && !this.controller.signal.aborted;
  }
}
