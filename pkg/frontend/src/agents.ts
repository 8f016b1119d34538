/**
 * Agent interface plus the scripted replay agent used for oracle runs.
 */

import { type ActionDict, renderAction, wrapDecision } from './protocol';

export interface AgentPrompt {
  text: string;
  isFeedback: boolean;
}

export type Agent = (prompt: AgentPrompt) => string | Promise<string>;

/** Replays a fixed list of decision texts, one per user turn. */
export function scriptedAgent(decisions: readonly string[]): Agent {
  let cursor = 0;
  return () => {
    if (cursor >= decisions.length) {
      throw new Error(`script exhausted after ${decisions.length} decisions`);
    }
    return decisions[cursor++];
  };
}

/**
 * Oracle agent over a pre-derived action plan: every action is rendered
 * against the scene's id-to-class map and wrapped in a decision tag.
 */
export function oracleAgent(
  actions: readonly ActionDict[],
  classOf?: (id: string) => string | undefined,
): Agent {
  return scriptedAgent(
    actions.map((a) => wrapDecision(renderAction(a, classOf))),
  );
}
