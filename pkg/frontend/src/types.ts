/** Payload shapes of the /v1 service. The UI never computes medical
 * values itself; every number shown comes from one of these documents. */

export type Ring = 'basal' | 'mid' | 'apical' | 'apex'

export interface BullseyeSegment {
	id: number
	name: string
	ring: Ring
	theta0_deg: number
	theta1_deg: number
	value: number | null
}

export interface BullseyeDocument {
	quantity: string
	statistic: string
	orientation: string
	segments: BullseyeSegment[]
}

export interface TranscriptEvent {
	seq: number
	event: 'user_message' | 'tool_use' | 'tool_result' | 'synthesis' | 'agent_message'
	data: Record<string, unknown>
}

export interface MeasurementJson {
	name: string
	value: number | null
	unit: string
	source: string
	phase: string
	flags: string[]
}

export interface ReportDocument {
	patient_context: string | null
	function_quantification: { entries: MeasurementJson[] } | null
	wall_assessment: BullseyeDocument | null
	lge_findings: BullseyeDocument | null
	diagnosis: Record<string, unknown>[]
	other_findings: string[]
	impression: string | null
	provenance: Record<string, string>
}

export interface MessageResponse {
	answer: string
	events: TranscriptEvent[]
	report_ids: string[]
}

export interface ServiceErrorBody {
	code: string
	message: string
	detail?: unknown
}
