import type { TranscriptEvent } from './types'

/** One rendered row of the chat timeline. */
export interface TimelineItem {
	seq: number
	kind: TranscriptEvent['event']
	/** user/agent bubble text, tool name, or a short event caption */
	text: string
	reportIds: string[]
}

function caption(ev: TranscriptEvent): string {
	const data = ev.data as Record<string, any>
	switch (ev.event) {
		case 'user_message':
		case 'agent_message':
			return String(data.data?.text ?? '')
		case 'tool_use': {
			const actions = (data.data?.actions ?? []) as { api_name: string }[]
			return actions.length ? actions.map(a => a.api_name).join(', ') : '(clarification)'
		}
		case 'tool_result':
			return `${data.data?.api_name}: ${data.data?.status}`
		case 'synthesis':
			return 'synthesis'
	}
}

/** Map server transcript events to timeline rows, preserving order 1:1.
 *
 * Every event becomes exactly one row; the UI never reorders, drops, or
 * invents rows, so the timeline mirrors the server transcript. */
export function reduceTimeline(events: TranscriptEvent[]): TimelineItem[] {
	return events.map(ev => ({
		seq: ev.seq,
		kind: ev.event,
		text: caption(ev),
		reportIds: [],
	}))
}

/** Append newly polled events after the ones already shown.
 *
 * Events are server-confirmed and sequence-numbered; anything at or
 * below the last known seq is a duplicate from overlapping polls and is
 * ignored. A gap or out-of-order batch is a protocol error. */
export function mergeEvents(
	existing: TranscriptEvent[],
	incoming: TranscriptEvent[]
): TranscriptEvent[] {
	const last = existing.length ? existing[existing.length - 1]!.seq : -1
	const fresh = incoming.filter(ev => ev.seq > last)
	for (let i = 0; i < fresh.length; i++) {
		const expect = last + 1 + i
		if (fresh[i]!.seq !== expect) {
			throw new Error(`transcript gap: got seq ${fresh[i]!.seq}, expected ${expect}`)
		}
	}
	return fresh.length ? existing.concat(fresh) : existing
}
