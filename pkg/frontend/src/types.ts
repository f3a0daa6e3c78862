/** Wire types for the session service. */

export interface TurnPayload {
  question: string;
  response: string;
}

export interface ConversationPayload {
  id: string;
  turns: TurnPayload[];
}

export interface ParagraphPayload {
  text: string;
  doc_id: string;
  index_in_doc: number;
  source_url: string | null;
  recall_score: number;
  rerank_score: number | null;
  final_rank: number | null;
  source_order: number;
}

export interface VerdictPayload {
  paragraph_rank: number;
  helpful: boolean;
  rationale: string | null;
}

export interface TraceEventPayload {
  stage: string;
  kind: string;
  role?: string;
  detail?: string;
  duration_ms?: number;
}

/** Body of POST /v1/sessions/{id}/turns. `trace` is absent for lean clients
 * (?trace=false); its absence means "no provenance panel". */
export interface TurnResultPayload {
  refined_question: { text: string; source_turn_index: number };
  keywords: string[];
  documents_fetched: number;
  top_paragraphs: ParagraphPayload[];
  verdicts: VerdictPayload[];
  response: string;
  trace?: TraceEventPayload[];
}

export interface ApiError {
  status: number;
  detail: string;
}
