import { describe, expect, it } from 'vitest'
import { mergeEvents, reduceTimeline } from '../src/timeline'
import type { TranscriptEvent } from '../src/types'

function ev(seq: number, event: TranscriptEvent['event'], data: object = {}): TranscriptEvent {
	return { seq, event, data: { data } as Record<string, unknown> }
}

describe('reduceTimeline', () => {
	it('maps events 1:1 preserving order', () => {
		const events = [
			ev(0, 'user_message', { text: 'hi' }),
			ev(1, 'tool_use', { actions: [{ api_name: 'SAXCS' }, { api_name: 'QUANT' }] }),
			ev(2, 'tool_result', { api_name: 'SAXCS', status: 'ok' }),
			ev(3, 'agent_message', { text: 'done' }),
		]
		const items = reduceTimeline(events)
		expect(items.map(i => i.seq)).toEqual([0, 1, 2, 3])
		expect(items[0]!.text).toBe('hi')
		expect(items[1]!.text).toBe('SAXCS, QUANT')
		expect(items[2]!.text).toBe('SAXCS: ok')
	})

	it('captions an empty-actions plan as a clarification', () => {
		const items = reduceTimeline([ev(0, 'tool_use', { actions: [] })])
		expect(items[0]!.text).toBe('(clarification)')
	})
})

describe('mergeEvents', () => {
	it('ignores duplicates from overlapping polls', () => {
		const base = [ev(0, 'user_message'), ev(1, 'agent_message')]
		const merged = mergeEvents(base, [ev(1, 'agent_message'), ev(2, 'user_message')])
		expect(merged.map(e => e.seq)).toEqual([0, 1, 2])
	})

	it('returns the same array when nothing is new', () => {
		const base = [ev(0, 'user_message')]
		expect(mergeEvents(base, [ev(0, 'user_message')])).toBe(base)
	})

	it('rejects a transcript gap', () => {
		expect(() => mergeEvents([ev(0, 'user_message')], [ev(2, 'user_message')])).toThrow(
			/gap/
		)
	})
})
