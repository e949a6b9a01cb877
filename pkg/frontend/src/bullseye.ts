import type { BullseyeDocument, BullseyeSegment } from './types'

/** Thrown for documents that do not look like an aha17 export. */
export class MalformedBullseyeError extends Error {}

const RING_RADII: Record<string, [number, number]> = {
	basal: [75, 100],
	mid: [50, 75],
	apical: [25, 50],
	apex: [0, 25],
}

export interface SectorLabel {
	id: number
	name: string
	/** exact document value; null when the segment was not measured */
	value: number | null
	/** label text as drawn: String(value) or an em dash */
	text: string
}

export interface BullseyeRendering {
	svg: string
	labels: SectorLabel[]
	orientation: string
}

function assertDocument(doc: BullseyeDocument): void {
	if (!doc || !Array.isArray(doc.segments) || doc.segments.length !== 17) {
		throw new MalformedBullseyeError('document must carry 17 segments')
	}
	for (const seg of doc.segments) {
		if (!(seg.ring in RING_RADII) || typeof seg.theta0_deg !== 'number') {
			throw new MalformedBullseyeError(`bad segment ${JSON.stringify(seg)}`)
		}
	}
}

/** Chart angle of a document angle: theta 0 is the anterior boundary at
 * 12 o'clock, increasing clockwise toward the septum. */
function toXY(r: number, thetaDeg: number): [number, number] {
	const rad = ((thetaDeg - 90) * Math.PI) / 180
	return [120 + r * Math.cos(rad), 120 + r * Math.sin(rad)]
}

function sectorPath(seg: BullseyeSegment): string {
	const [r0, r1] = RING_RADII[seg.ring]!
	if (seg.theta1_deg - seg.theta0_deg >= 360) {
		// full-circle apex: two semicircle arcs
		return (
			`M ${120 - r1} 120 A ${r1} ${r1} 0 1 0 ${120 + r1} 120 ` +
			`A ${r1} ${r1} 0 1 0 ${120 - r1} 120 Z`
		)
	}
	const [x0, y0] = toXY(r1, seg.theta0_deg)
	const [x1, y1] = toXY(r1, seg.theta1_deg)
	const [x2, y2] = toXY(r0, seg.theta1_deg)
	const [x3, y3] = toXY(r0, seg.theta0_deg)
	const large = seg.theta1_deg - seg.theta0_deg > 180 ? 1 : 0
	return (
		`M ${x0} ${y0} A ${r1} ${r1} 0 ${large} 1 ${x1} ${y1} ` +
		`L ${x2} ${y2} A ${r0} ${r0} 0 ${large} 0 ${x3} ${y3} Z`
	)
}

function fill(value: number | null, lo: number, hi: number): string {
	if (value === null) return '#d0d0d0' // unmeasured segment greyed out
	const t = hi > lo ? (value - lo) / (hi - lo) : 0.5
	const shade = Math.round(235 - 160 * Math.min(1, Math.max(0, t)))
	return `rgb(${shade}, ${shade}, 255)`
}

function labelPos(seg: BullseyeSegment): [number, number] {
	const [r0, r1] = RING_RADII[seg.ring]!
	if (seg.ring === 'apex') return [120, 120]
	return toXY((r0 + r1) / 2, (seg.theta0_deg + seg.theta1_deg) / 2)
}

/** Render a polar-map document to standalone SVG.
 *
 * Pure: geometry and labels come entirely from the document; no value
 * is recomputed client-side. Each sector carries data-segment and
 * data-value attributes for hover lookups. */
export function renderBullseye(doc: BullseyeDocument): BullseyeRendering {
	assertDocument(doc)
	const measured = doc.segments.map(s => s.value).filter((v): v is number => v !== null)
	const lo = measured.length ? Math.min(...measured) : 0
	const hi = measured.length ? Math.max(...measured) : 0
	const labels: SectorLabel[] = []
	const parts: string[] = []
	for (const seg of doc.segments) {
		const text = seg.value === null ? '—' : String(seg.value)
		labels.push({ id: seg.id, name: seg.name, value: seg.value, text })
		parts.push(
			`<path d="${sectorPath(seg)}" fill="${fill(seg.value, lo, hi)}" ` +
				`stroke="#444" data-segment="${seg.id}" data-name="${seg.name}" ` +
				`data-value="${seg.value === null ? '' : seg.value}">` +
				`<title>${seg.id} ${seg.name}: ${text}</title></path>`
		)
		const [lx, ly] = labelPos(seg)
		parts.push(
			`<text x="${lx}" y="${ly}" text-anchor="middle" dominant-baseline="middle" ` +
				`font-size="7" data-label-for="${seg.id}">${text}</text>`
		)
	}
	const tag =
		`<text x="6" y="12" font-size="8" data-orientation>` +
		`${doc.quantity} (${doc.statistic}) – ${doc.orientation}</text>`
	const svg =
		`<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 240 240">` +
		`${tag}${parts.join('')}</svg>`
	return { svg, labels, orientation: doc.orientation }
}

/** Label texts keyed by segment id, for tests and DOM sweeps. */
export function labelTexts(rendering: BullseyeRendering): Map<number, string> {
	return new Map(rendering.labels.map(l => [l.id, l.text]))
}
