import { SessionClient, ServiceError } from './client'
import { renderBullseye } from './bullseye'
import { reduceTimeline } from './timeline'
import type { ReportDocument } from './types'

/** Browser wiring: one session per tab, server-confirmed events only. */

function el<T extends HTMLElement>(id: string): T {
	const node = document.getElementById(id)
	if (!node) throw new Error(`missing #${id}`)
	return node as T
}

function renderTimeline(client: SessionClient): void {
	const list = el<HTMLElement>('timeline')
	list.innerHTML = ''
	for (const item of reduceTimeline(client.events)) {
		const row = document.createElement('div')
		row.className = `event event-${item.kind}`
		row.dataset.seq = String(item.seq)
		row.textContent = `[${item.kind}] ${item.text}`
		list.appendChild(row)
	}
	list.scrollTop = list.scrollHeight
}

function renderReport(report: ReportDocument): void {
	const gallery = el<HTMLElement>('gallery')
	gallery.innerHTML = ''
	for (const doc of [report.wall_assessment, report.lge_findings]) {
		if (!doc) continue
		const holder = document.createElement('div')
		holder.className = 'bullseye'
		try {
			holder.innerHTML = renderBullseye(doc).svg
		} catch (err) {
			holder.className = 'bullseye bullseye-error'
			holder.textContent = `cannot render bullseye: ${err}`
		}
		gallery.appendChild(holder)
	}
	el<HTMLElement>('report').textContent = JSON.stringify(report, null, 1)
}

function showError(err: unknown): void {
	const box = el<HTMLElement>('error')
	box.textContent =
		err instanceof ServiceError ? `${err.body.code}: ${err.body.message}` : String(err)
	box.hidden = false
}

export async function main(): Promise<void> {
	const client = new SessionClient('')
	await client.createSession()
	client.poll(() => renderTimeline(client), showError)

	el<HTMLFormElement>('upload-form').addEventListener('submit', async ev => {
		ev.preventDefault()
		const kind = el<HTMLSelectElement>('upload-kind').value
		const header = el<HTMLInputElement>('upload-header').files?.[0]
		const payload = el<HTMLInputElement>('upload-payload').files?.[0]
		if (!header || !payload) return
		try {
			await client.uploadStudy(kind, header, payload)
			el<HTMLElement>('error').hidden = true
		} catch (err) {
			showError(err) // e.g. 422 sequence_mismatch shown inline
		}
	})

	el<HTMLFormElement>('chat-form').addEventListener('submit', async ev => {
		ev.preventDefault()
		const input = el<HTMLInputElement>('chat-input')
		const text = input.value.trim()
		if (!text) return
		input.value = ''
		try {
			const resp = await client.sendMessage(text)
			renderTimeline(client)
			for (const rid of resp.report_ids) {
				renderReport(await client.fetchReport(rid))
			}
		} catch (err) {
			input.value = text // retry affordance: message text is kept
			showError(err)
		}
	})
}
