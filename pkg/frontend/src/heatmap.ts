// Kernel heatmap model and rendering.
//
// Orientation matches the server's documented convention: rows are
// frequency offsets (top row = lower neighbor bin as served), columns
// are time offsets (right column = later frame). Positive weights are
// red, negative blue, zero white.

import { KernelReport } from './types.js'

export interface HeatmapCell {
  row: number
  col: number
  value: number
  color: string
  label: string
}

export function signedColor(value: number, maxAbs: number): string {
  if (!(maxAbs > 0)) return 'rgb(255,255,255)'
  const t = Math.min(1, Math.abs(value) / maxAbs)
  const other = Math.round(255 * (1 - t))
  return value >= 0 ? `rgb(255,${other},${other})` : `rgb(${other},${other},255)`
}

export function buildHeatmapModel(report: KernelReport): HeatmapCell[] {
  const maxAbs = Math.max(...report.kernel.flat().map(Math.abs))
  const cells: HeatmapCell[] = []
  for (let row = 0; row < report.kernel.length; row++) {
    for (let col = 0; col < report.kernel[row].length; col++) {
      const value = report.kernel[row][col]
      cells.push({ row, col, value, color: signedColor(value, maxAbs), label: value.toFixed(3) })
    }
  }
  return cells
}

export function renderKernelHeatmap(container: HTMLElement, report: KernelReport | null): void {
  container.textContent = ''
  if (report === null) {
    const placeholder = document.createElement('p')
    placeholder.className = 'placeholder'
    placeholder.textContent = 'kernel unavailable'
    container.appendChild(placeholder)
    return
  }
  const grid = document.createElement('div')
  grid.className = 'heatmap-grid'
  for (const cell of buildHeatmapModel(report)) {
    const el = document.createElement('div')
    el.className = 'heatmap-cell'
    el.style.backgroundColor = cell.color
    el.textContent = cell.label
    el.title = `freq offset ${cell.row}, time offset ${cell.col}`
    grid.appendChild(el)
  }
  const caption = document.createElement('p')
  caption.className = 'heatmap-caption'
  caption.textContent =
    `bias ${report.bias.toFixed(4)}  scale ${report.scale.toFixed(4)}  ` +
    `band response [${report.band_response.map((v) => v.toFixed(3)).join(', ')}]`
  container.appendChild(grid)
  container.appendChild(caption)
}
