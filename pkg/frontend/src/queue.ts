// Debounced single-flight request queue with cancellation.
//
// The slider can fire dozens of changes per second; the server should
// see at most one request at a time, always the latest. Scheduling a new
// task cancels the pending debounce (its promise resolves null) and
// aborts any in-flight request.

export type Task<T> = (signal: AbortSignal) => Promise<T>

export class RequestQueue {
  private timer: ReturnType<typeof setTimeout> | null = null
  private pendingCancel: (() => void) | null = null
  private inflight: AbortController | null = null
  private generation = 0

  constructor(private readonly debounceMs: number = 150) {}

  get hasInflight(): boolean {
    return this.inflight !== null
  }

  schedule<T>(task: Task<T>): Promise<T | null> {
    const myGeneration = ++this.generation
    this.clearPending()
    this.inflight?.abort()
    this.inflight = null

    return new Promise((resolve, reject) => {
      this.pendingCancel = () => resolve(null)
      this.timer = setTimeout(async () => {
        this.timer = null
        this.pendingCancel = null
        const controller = new AbortController()
        this.inflight = controller
        try {
          const value = await task(controller.signal)
          resolve(myGeneration === this.generation ? value : null)
        } catch (err) {
          if (controller.signal.aborted) resolve(null)
          else reject(err)
        } finally {
          if (this.inflight === controller) this.inflight = null
        }
      }, this.debounceMs)
    })
  }

  cancel(): void {
    this.clearPending()
    this.inflight?.abort()
    this.inflight = null
    this.generation += 1
  }

  private clearPending(): void {
    if (this.timer !== null) clearTimeout(this.timer)
    this.timer = null
    this.pendingCancel?.()
    this.pendingCancel = null
  }
}
