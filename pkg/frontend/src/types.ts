/** Payload shapes of the annotation service API. */

export const ENTITY_TYPES = [
  "ARC",
  "CMD",
  "ERR",
  "EXT",
  "ORG",
  "OS",
  "PKG",
  "PRP",
  "SOC",
] as const;

export type EntityType = (typeof ENTITY_TYPES)[number];

export interface CandidatePayload {
  candidate_id: string;
  version: number;
  doc_id: string;
  text: string;
  surface: string;
  token_start: number;
  token_end: number;
  char_start: number;
  char_end: number;
  left_context: string[];
  right_context: string[];
  classifier_confidence: number | null;
  provider_score: number;
  claimed_by?: string;
}

export interface Progress {
  round: number;
  pool: number;
  queued: number;
  labeled: number;
  rejected: number;
  entities: number;
  dict_size: number;
  dict_counts: Record<string, number>;
  dataset_size: number;
  stopped: boolean;
  stop_reason: string | null;
}

export interface LabelRequest {
  candidate_id: string;
  version: number;
  decision: "entity" | "non-entity";
  entity_type?: EntityType;
}

export interface LabelResult {
  candidate_id: string;
  version: number;
  state: "labeled" | "rejected";
}

export interface MetricsReply {
  available: boolean;
  report?: {
    matching: string;
    overall_recall: number;
    macro_f1: number;
    per_class: Record<
      string,
      { gold: number; predicted: number; matched: number; recall: number | null }
    >;
  };
}

/** A picker selection; entity decisions are complete only with a type. */
export type Selection =
  | { decision: "non-entity" }
  | { decision: "entity"; entityType: EntityType };
