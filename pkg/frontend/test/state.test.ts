import { describe, expect, it } from 'vitest'

import { SessionState, quantizeControl } from '../src/state.js'
import { ProcessResult } from '../src/types.js'

function fakeResult(delta = 0.1): ProcessResult {
  return { audio: new Blob(['x']), processingMs: 5, controlValue: 0.5, magnitudeDelta: delta }
}

describe('quantizeControl', () => {
  it('clamps into the unit interval', () => {
    expect(quantizeControl(-0.3)).toBe(0)
    expect(quantizeControl(1.7)).toBe(1)
  })

  it('snaps to the 0.01 grid', () => {
    expect(quantizeControl(0.123)).toBeCloseTo(0.12, 10)
    expect(quantizeControl(0.567)).toBeCloseTo(0.57, 10)
  })
})

describe('SessionState', () => {
  it('labels control zero as bypass', () => {
    const state = new SessionState()
    expect(state.isBypass).toBe(true)
    state.setControl(0.4)
    expect(state.isBypass).toBe(false)
    state.setControl(0)
    expect(state.isBypass).toBe(true)
  })

  it('invalidates the result when the control moves', () => {
    const state = new SessionState()
    state.setClip(new Blob(['clip']))
    const version = state.currentVersion
    expect(state.acceptResult(fakeResult(), version)).toBe(true)
    expect(state.snapshot().result).not.toBeNull()
    state.setControl(0.25)
    expect(state.snapshot().result).toBeNull()
  })

  it('invalidates the result when the clip changes', () => {
    const state = new SessionState()
    state.setClip(new Blob(['a']))
    state.acceptResult(fakeResult(), state.currentVersion)
    state.setClip(new Blob(['b']))
    expect(state.snapshot().result).toBeNull()
  })

  it('rejects stale results from superseded requests', () => {
    const state = new SessionState()
    state.setClip(new Blob(['clip']))
    const staleVersion = state.currentVersion
    state.setControl(0.9)
    expect(state.acceptResult(fakeResult(), staleVersion)).toBe(false)
    expect(state.snapshot().result).toBeNull()
    expect(state.acceptResult(fakeResult(), state.currentVersion)).toBe(true)
  })

  it('does not invalidate when the quantized control is unchanged', () => {
    const state = new SessionState()
    state.setClip(new Blob(['clip']))
    state.setControl(0.5)
    state.acceptResult(fakeResult(), state.currentVersion)
    state.setControl(0.5004) // same 0.01 bucket
    expect(state.snapshot().result).not.toBeNull()
  })

  it('notifies subscribers with snapshots', () => {
    const state = new SessionState()
    const seen: number[] = []
    const unsubscribe = state.subscribe((snap) => seen.push(snap.control))
    state.setControl(0.2)
    state.setControl(0.8)
    unsubscribe()
    state.setControl(0.1)
    expect(seen).toEqual([0, 0.2, 0.8])
  })
})
