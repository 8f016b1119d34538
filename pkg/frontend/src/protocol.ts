/**
 * Wire protocol types for the houseworld evaluation service.
 *
 * The service speaks newline-delimited JSON over TCP. One connection
 * hosts one session and one session runs one episode; a `report`
 * request on a fresh connection returns the aggregate metrics of all
 * finished episodes.
 */

export const PROTOCOL_VERSION = '1';

export interface SessionInit {
  kind: 'session_init';
  task_id: string;
  seed?: number;
  version: string;
}

export interface Decision {
  kind: 'decision';
  text: string;
}

export interface ReportRequest {
  kind: 'report';
}

export type ClientMessage = SessionInit | Decision | ReportRequest;

export interface Ack {
  kind: 'ack';
  version: string;
  session_id: number;
  task_id: string;
}

export interface Turn {
  kind: 'turn';
  role: 'system' | 'user' | 'assistant';
  text: string;
}

export interface Feedback {
  kind: 'feedback';
  text: string;
}

export interface EpisodeResult {
  task_id: string;
  success: boolean;
  ended: boolean;
  n_predicted: number;
  key_length: number;
  search_efficiency: number | null;
  task_completeness: number | null;
  rer: number;
  reasons: string[];
}

export interface EpisodeEnd {
  kind: 'episode_end';
  result: EpisodeResult;
}

export interface MetricsReport {
  success_rate: number;
  search_efficiency: number;
  task_completeness: number;
  rer: number;
  per_category: Record<string, Record<string, number>>;
  n_episodes: number;
  search_efficiency_all: number;
  task_completeness_all: number;
  note: string;
}

export interface ReportReply {
  kind: 'report';
  result: MetricsReport;
}

export interface ErrorMessage {
  kind: 'error';
  text: string;
}

export type ServerMessage =
  | Ack
  | Turn
  | Feedback
  | EpisodeEnd
  | ReportReply
  | ErrorMessage;

/** Decisions are extracted from the last well-formed tag in a reply. */
export const DECISION_OPEN = '<DecisionMaking>';
export const DECISION_CLOSE = '</DecisionMaking>';

export function wrapDecision(actionText: string): string {
  return `${DECISION_OPEN}${actionText}${DECISION_CLOSE}`;
}

/** Serialized action as it appears in plan and trajectory files. */
export interface ActionDict {
  verb: string;
  target?: string;
}

/**
 * Surface form of an action, e.g. "navigate to Fridge". `classOf` maps
 * scene object ids to class names; unknown targets pass through as-is,
 * matching the server's own rendering rules.
 */
export function renderAction(
  action: ActionDict,
  classOf?: (id: string) => string | undefined,
): string {
  if (action.target === undefined) {
    return action.verb;
  }
  const name = classOf?.(action.target) ?? action.target;
  return `${action.verb} ${name}`;
}
