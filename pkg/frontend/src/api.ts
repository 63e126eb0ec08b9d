// Thin fetch client for the processing service. No audio math happens
// here: the server owns the effect, the client just moves bytes.

import { ApiError, HealthReport, KernelReport, ProcessResult } from './types.js'

async function throwApiError(response: Response): Promise<never> {
  let code = `HTTP_${response.status}`
  let message = response.statusText
  try {
    const body = await response.json()
    if (body?.error?.code) {
      code = body.error.code
      message = body.error.message ?? message
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(code, message, response.status)
}

export class ApiClient {
  constructor(private readonly baseUrl: string = '') {}

  async processAudio(file: Blob, control: number, signal?: AbortSignal): Promise<ProcessResult> {
    const form = new FormData()
    form.append('file', file, 'clip.wav')
    form.append('control', String(control))
    const response = await fetch(`${this.baseUrl}/api/process`, {
      method: 'POST',
      body: form,
      signal,
    })
    if (!response.ok) await throwApiError(response)
    const audio = await response.blob()
    return {
      audio,
      processingMs: Number(response.headers.get('X-Processing-Time-Ms') ?? 'NaN'),
      controlValue: Number(response.headers.get('X-Control-Value') ?? String(control)),
      magnitudeDelta: Number(response.headers.get('X-Magnitude-Delta-L1') ?? 'NaN'),
    }
  }

  async fetchKernel(signal?: AbortSignal): Promise<KernelReport> {
    const response = await fetch(`${this.baseUrl}/api/kernel`, { signal })
    if (!response.ok) await throwApiError(response)
    return (await response.json()) as KernelReport
  }

  async fetchHealth(signal?: AbortSignal): Promise<HealthReport> {
    const response = await fetch(`${this.baseUrl}/api/health`, { signal })
    if (!response.ok) await throwApiError(response)
    return (await response.json()) as HealthReport
  }
}
