export interface KernelReport {
  schema_version: number
  kernel: number[][]
  bias: number
  scale: number
  band_response: number[]
  dominant: { row: number; col: number; weight: number }
}

export interface ProcessResult {
  audio: Blob
  processingMs: number
  controlValue: number
  magnitudeDelta: number
}

export interface HealthReport {
  status: string
  checkpoint_digest: string | null
  uptime_seconds: number
}

export class ApiError extends Error {
  readonly code: string
  readonly status: number

  constructor(code: string, message: string, status: number) {
    super(message)
    this.code = code
    this.status = status
  }
}
