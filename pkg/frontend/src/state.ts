// Session state for the steer-and-listen loop.
//
// Every clip or control change bumps a version; a processed result is
// only accepted if it was requested at the current version, so stale
// responses from superseded requests can never overwrite fresh ones.

import { ProcessResult } from './types.js'

export const CONTROL_STEP = 0.01

export function quantizeControl(value: number): number {
  const clamped = Math.min(1, Math.max(0, value))
  return Math.round(clamped / CONTROL_STEP) * CONTROL_STEP
}

export interface Snapshot {
  clip: Blob | null
  control: number
  result: ProcessResult | null
  version: number
  processing: boolean
}

export class SessionState {
  private clip: Blob | null = null
  private control = 0
  private result: ProcessResult | null = null
  private version = 0
  private processing = false
  private listeners: Array<(snap: Snapshot) => void> = []

  subscribe(listener: (snap: Snapshot) => void): () => void {
    this.listeners.push(listener)
    listener(this.snapshot())
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener)
    }
  }

  snapshot(): Snapshot {
    return {
      clip: this.clip,
      control: this.control,
      result: this.result,
      version: this.version,
      processing: this.processing,
    }
  }

  get currentVersion(): number {
    return this.version
  }

  get isBypass(): boolean {
    return this.control === 0
  }

  setClip(clip: Blob): void {
    this.clip = clip
    this.invalidate()
  }

  setControl(value: number): number {
    const quantized = quantizeControl(value)
    if (quantized !== this.control) {
      this.control = quantized
      this.invalidate()
    }
    return quantized
  }

  setProcessing(flag: boolean): void {
    this.processing = flag
    this.emit()
  }

  // accept a result only if nothing changed since it was requested
  acceptResult(result: ProcessResult, requestedAt: number): boolean {
    if (requestedAt !== this.version) return false
    this.result = result
    this.processing = false
    this.emit()
    return true
  }

  private invalidate(): void {
    this.result = null
    this.version += 1
    this.emit()
  }

  private emit(): void {
    const snap = this.snapshot()
    for (const listener of this.listeners) listener(snap)
  }
}
