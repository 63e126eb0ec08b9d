import { ApiClient } from './api.js'
import { App, AppElements } from './app.js'

function grab<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id)
  if (!el) throw new Error(`missing element #${id}`)
  return el as T
}

const params = new URLSearchParams(window.location.search)
const api = new ApiClient(params.get('api') ?? '')

const elements: AppElements = {
  fileInput: grab<HTMLInputElement>('file-input'),
  slider: grab<HTMLInputElement>('control-slider'),
  controlReadout: grab('control-readout'),
  statusLine: grab('status-line'),
  errorLine: grab('error-line'),
  originalPlayer: grab<HTMLAudioElement>('player-original'),
  processedPlayer: grab<HTMLAudioElement>('player-processed'),
  strengthReadout: grab('strength-readout'),
  heatmapContainer: grab('heatmap'),
}

new App(api, elements).start()
