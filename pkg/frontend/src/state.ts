/** Pure rating-form state: the submit/disable invariants live here so they
 * hold in every reachable UI state and are directly testable. */

import type { Choice, PairPayload } from './api.js'

export const PRINCIPLES = ['contrast', 'repetition', 'alignment', 'proximity'] as const
export type Principle = (typeof PRINCIPLES)[number]

export type SubmissionStatus = 'idle' | 'submitting' | 'error' | 'done'

export interface RatingFormState {
  pair: PairPayload | null
  caption: string
  irrelevant: boolean
  choice: Choice | null
  principles: ReadonlySet<Principle>
  note: string
  status: SubmissionStatus
  error: string | null
  completed: number
}

export function freshForm(pair: PairPayload | null, completed = 0): RatingFormState {
  return {
    pair,
    caption: pair?.draft_caption ?? '',
    irrelevant: false,
    choice: null,
    principles: new Set(),
    note: '',
    status: 'idle',
    error: null,
    completed,
  }
}

/** Choosing "about the same" clears (and disables) the principle selection. */
export function setChoice(state: RatingFormState, choice: Choice | null): RatingFormState {
  const principles = choice === 'same' ? new Set<Principle>() : new Set(state.principles)
  return { ...state, choice, principles }
}

export function togglePrinciple(state: RatingFormState, principle: Principle): RatingFormState {
  if (principlesDisabled(state)) return state
  const principles = new Set(state.principles)
  if (principles.has(principle)) principles.delete(principle)
  else principles.add(principle)
  return { ...state, principles }
}

export function setCaption(state: RatingFormState, caption: string): RatingFormState {
  return { ...state, caption }
}

export function setIrrelevant(state: RatingFormState, irrelevant: boolean): RatingFormState {
  const next = { ...state, irrelevant }
  return irrelevant ? { ...next, choice: null, principles: new Set<Principle>() } : next
}

export function principlesDisabled(state: RatingFormState): boolean {
  return state.choice === 'same' || state.irrelevant
}

/** Submit is enabled only when: caption non-empty (for an irrelevant pair the
 * caption describes screenshot A alone), a choice is set unless the pair is
 * flagged irrelevant, and principles are empty when the choice is a tie. */
export function canSubmit(state: RatingFormState): boolean {
  if (state.pair === null || state.status === 'submitting') return false
  if (state.caption.trim().length === 0) return false
  if (state.irrelevant) return true
  if (state.choice === null) return false
  if (state.choice === 'same' && state.principles.size > 0) return false
  return true
}
