import { readFileSync, readdirSync } from 'node:fs'
import { join } from 'node:path'
import { describe, expect, it } from 'vitest'
import { labelTexts, renderBullseye } from '../src/bullseye'
import { SessionClient } from '../src/client'
import { mergeEvents, reduceTimeline } from '../src/timeline'
import type {
	BullseyeDocument,
	MessageResponse,
	ReportDocument,
	TranscriptEvent,
} from '../src/types'

/** Corpus dialogues replayed through the real service by
 * scripts/export_fixtures.py: per-turn responses, the final server
 * transcript, and every report document produced. */
interface Fixture {
	id: string
	sequences: string[]
	turns: { user: string; response: MessageResponse }[]
	transcript: TranscriptEvent[]
	reports: Record<string, ReportDocument>
}

const FIXTURE_DIR = join(__dirname, 'fixtures')
const fixtures: Fixture[] = readdirSync(FIXTURE_DIR)
	.filter(f => f.endsWith('.json'))
	.sort()
	.map(f => JSON.parse(readFileSync(join(FIXTURE_DIR, f), 'utf8')) as Fixture)

describe('UI replay of corpus dialogues', () => {
	it('covers three dialogues', () => {
		expect(fixtures.length).toBe(3)
	})

	for (const fixture of fixtures) {
		it(`${fixture.id}: timeline order equals the server transcript`, () => {
			// accumulate events exactly the way the client does, turn by turn
			let events: TranscriptEvent[] = []
			for (const turn of fixture.turns) {
				events = mergeEvents(events, turn.response.events)
			}
			const timeline = reduceTimeline(events)
			expect(timeline.map(i => i.seq)).toEqual(fixture.transcript.map(e => e.seq))
			expect(timeline.map(i => i.kind)).toEqual(fixture.transcript.map(e => e.event))
		})

		it(`${fixture.id}: reconnect replays to an identical timeline`, async () => {
			// a fresh client fed the stored transcript mirrors it exactly
			const client = new SessionClient('http://x', async () =>
				new Response(JSON.stringify({ events: fixture.transcript }), { status: 200 })
			)
			client.sessionId = fixture.id
			await client.fetchTranscript()
			expect(reduceTimeline(client.events).map(i => [i.seq, i.kind])).toEqual(
				fixture.transcript.map(e => [e.seq, e.event])
			)
		})
	}

	const withReports = fixtures.filter(f => Object.keys(f.reports).length > 0)

	it('report fixtures carry bullseye documents', () => {
		expect(withReports.length).toBeGreaterThan(0)
	})

	for (const fixture of withReports) {
		it(`${fixture.id}: bullseye labels match the exported document values`, () => {
			for (const report of Object.values(fixture.reports)) {
				const docs = [report.wall_assessment, report.lge_findings].filter(
					(d): d is BullseyeDocument => d !== null
				)
				expect(docs.length).toBeGreaterThan(0)
				for (const doc of docs) {
					const texts = labelTexts(renderBullseye(doc))
					for (const seg of doc.segments) {
						const expected = seg.value === null ? '—' : String(seg.value)
						expect(texts.get(seg.id)).toBe(expected)
					}
				}
			}
		})

		it(`${fixture.id}: no rendered number is absent from fetched payloads`, () => {
			for (const report of Object.values(fixture.reports)) {
				for (const doc of [report.wall_assessment, report.lge_findings]) {
					if (!doc) continue
					const out = renderBullseye(doc)
					const payload = JSON.stringify(doc)
					for (const label of out.labels) {
						if (label.value === null) continue
						expect(payload).toContain(JSON.stringify(label.value))
					}
				}
			}
		})
	}
})
