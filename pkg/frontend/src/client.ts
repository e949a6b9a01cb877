import type {
	MessageResponse,
	ReportDocument,
	ServiceErrorBody,
	TranscriptEvent,
} from './types'
import { mergeEvents } from './timeline'

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>

/** A structured /v1 error body (422/404/...), kept for inline display. */
export class ServiceError extends Error {
	constructor(
		public status: number,
		public body: ServiceErrorBody
	) {
		super(`${body.code}: ${body.message}`)
	}
}

async function unwrap<T>(resp: Response): Promise<T> {
	if (resp.ok) return (await resp.json()) as T
	let body: ServiceErrorBody
	try {
		body = (await resp.json()) as ServiceErrorBody
	} catch {
		body = { code: 'http_error', message: resp.statusText }
	}
	throw new ServiceError(resp.status, body)
}

/** Thin client over the /v1 API with an injected fetch.
 *
 * Holds the locally mirrored transcript; `poll` appends only
 * server-confirmed events, so the timeline can never diverge from the
 * server order. */
export class SessionClient {
	events: TranscriptEvent[] = []
	sessionId: string | null = null

	constructor(
		private baseUrl: string,
		private fetchFn: FetchLike = fetch
	) {}

	async createSession(): Promise<string> {
		const resp = await this.fetchFn(`${this.baseUrl}/v1/sessions`, { method: 'POST' })
		const body = await unwrap<{ session_id: string }>(resp)
		this.sessionId = body.session_id
		this.events = []
		return body.session_id
	}

	private sid(): string {
		if (!this.sessionId) throw new Error('no open session')
		return this.sessionId
	}

	async uploadStudy(kind: string, header: Blob, payload: Blob): Promise<void> {
		const form = new FormData()
		form.append('kind', kind)
		form.append('header', header, 'header.json')
		form.append('payload', payload, 'volume.raw')
		await unwrap(
			await this.fetchFn(`${this.baseUrl}/v1/sessions/${this.sid()}/studies`, {
				method: 'POST',
				body: form,
			})
		)
	}

	async sendMessage(text: string): Promise<MessageResponse> {
		const resp = await this.fetchFn(
			`${this.baseUrl}/v1/sessions/${this.sid()}/messages`,
			{
				method: 'POST',
				headers: { 'content-type': 'application/json' },
				body: JSON.stringify({ text }),
			}
		)
		const body = await unwrap<MessageResponse>(resp)
		this.events = mergeEvents(this.events, body.events)
		return body
	}

	async fetchTranscript(): Promise<TranscriptEvent[]> {
		const resp = await this.fetchFn(
			`${this.baseUrl}/v1/sessions/${this.sid()}/transcript`
		)
		const body = await unwrap<{ events: TranscriptEvent[] }>(resp)
		this.events = mergeEvents(this.events, body.events)
		return this.events
	}

	async fetchReport(reportId: string): Promise<ReportDocument> {
		const resp = await this.fetchFn(`${this.baseUrl}/v1/reports/${reportId}?format=json`)
		return unwrap<ReportDocument>(resp)
	}

	/** Poll the transcript until stopped; network failures call onError
	 * and keep polling (the retry affordance), never dropping events. */
	poll(
		onEvents: (events: TranscriptEvent[]) => void,
		onError: (err: unknown) => void,
		intervalMs = 1000
	): () => void {
		let stopped = false
		const tick = async () => {
			if (stopped) return
			try {
				const before = this.events.length
				await this.fetchTranscript()
				if (this.events.length !== before) onEvents(this.events)
			} catch (err) {
				onError(err)
			}
			if (!stopped) setTimeout(tick, intervalMs)
		}
		void tick()
		return () => {
			stopped = true
		}
	}
}
