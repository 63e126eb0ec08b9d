// Wires the DOM to the session state, the request queue, and the API.

import { ApiClient } from './api.js'
import { renderKernelHeatmap } from './heatmap.js'
import { RequestQueue } from './queue.js'
import { SessionState } from './state.js'
import { ApiError } from './types.js'

export interface AppElements {
  fileInput: HTMLInputElement
  slider: HTMLInputElement
  controlReadout: HTMLElement
  statusLine: HTMLElement
  errorLine: HTMLElement
  originalPlayer: HTMLAudioElement
  processedPlayer: HTMLAudioElement
  strengthReadout: HTMLElement
  heatmapContainer: HTMLElement
}

export class App {
  readonly state = new SessionState()
  private readonly queue: RequestQueue
  private processedUrl: string | null = null

  constructor(
    private readonly api: ApiClient,
    private readonly el: AppElements,
    debounceMs = 150,
  ) {
    this.queue = new RequestQueue(debounceMs)
  }

  start(): void {
    this.el.slider.min = '0'
    this.el.slider.max = '1'
    this.el.slider.step = '0.01'
    this.el.slider.value = '0'
    this.el.fileInput.addEventListener('change', () => {
      const file = this.el.fileInput.files?.[0]
      if (file) this.loadClip(file)
    })
    this.el.slider.addEventListener('input', () => {
      this.setControl(Number(this.el.slider.value))
    })
    this.refreshKernel()
    this.render()
  }

  loadClip(file: File): void {
    this.state.setClip(file)
    this.el.originalPlayer.src = URL.createObjectURL(file)
    this.render()
    void this.requestProcessing()
  }

  setControl(value: number): void {
    const applied = this.state.setControl(value)
    this.el.slider.value = String(applied)
    this.render()
    void this.requestProcessing()
  }

  async requestProcessing(): Promise<void> {
    const snap = this.state.snapshot()
    if (!snap.clip) return
    const requestedAt = this.state.currentVersion
    this.state.setProcessing(true)
    this.clearError()
    try {
      const result = await this.queue.schedule((signal) =>
        this.api.processAudio(snap.clip as Blob, snap.control, signal),
      )
      if (result === null) return // superseded
      if (this.state.acceptResult(result, requestedAt)) {
        if (this.processedUrl) URL.revokeObjectURL(this.processedUrl)
        this.processedUrl = URL.createObjectURL(result.audio)
        this.el.processedPlayer.src = this.processedUrl
      }
    } catch (err) {
      this.state.setProcessing(false)
      this.showError(err)
    }
    this.render()
  }

  async refreshKernel(): Promise<void> {
    try {
      renderKernelHeatmap(this.el.heatmapContainer, await this.api.fetchKernel())
    } catch {
      renderKernelHeatmap(this.el.heatmapContainer, null)
    }
  }

  private render(): void {
    const snap = this.state.snapshot()
    this.el.controlReadout.textContent = this.state.isBypass
      ? `control ${snap.control.toFixed(2)} (bypass)`
      : `control ${snap.control.toFixed(2)}`
    if (snap.processing) {
      this.el.statusLine.textContent = 'processing...'
    } else if (snap.result) {
      this.el.statusLine.textContent = `processed in ${snap.result.processingMs.toFixed(1)} ms`
    } else {
      this.el.statusLine.textContent = snap.clip ? 'ready' : 'load a WAV to begin'
    }
    this.el.strengthReadout.textContent = snap.result
      ? `effect strength (mean magnitude shift): ${snap.result.magnitudeDelta.toExponential(3)}`
      : ''
  }

  private showError(err: unknown): void {
    const text =
      err instanceof ApiError ? `${err.code}: ${err.message}` : err instanceof Error ? err.message : String(err)
    this.el.errorLine.textContent = text
  }

  private clearError(): void {
    this.el.errorLine.textContent = ''
  }
}
