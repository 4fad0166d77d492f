/** Rating loop: fetch a pair, collect caption + ranking + principles, submit,
 * advance. Server rejections (409/422) surface inline without losing state. */

import { ApiError, StudioApi } from './api.js'
import {
  PRINCIPLES,
  Principle,
  RatingFormState,
  canSubmit,
  freshForm,
  principlesDisabled,
  setCaption,
  setChoice,
  setIrrelevant,
  togglePrinciple,
} from './state.js'

export interface RateView {
  element: HTMLElement
  state(): RatingFormState
  refresh(): Promise<void>
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = '',
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag)
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value)
  if (text) node.textContent = text
  return node
}

export function mountRateView(root: HTMLElement, api: StudioApi, rater: string): RateView {
  let state: RatingFormState = freshForm(null)

  const container = el('div', { class: 'rate-view' })
  const progress = el('p', { class: 'progress' })
  const message = el('p', { class: 'message', role: 'status' })
  const images = el('div', { class: 'pair' })
  const imgA = el('img', { class: 'shot-a', alt: 'screenshot A' })
  const imgB = el('img', { class: 'shot-b', alt: 'screenshot B' })
  images.append(imgA, imgB)

  const caption = el('textarea', { class: 'caption', rows: '2', placeholder: 'one-sentence caption for both screenshots' })
  const irrelevant = el('input', { type: 'checkbox', class: 'irrelevant' })
  const irrelevantLabel = el('label', {}, ' pair cannot share one caption (describe A only)')
  irrelevantLabel.prepend(irrelevant)

  const choices = el('div', { class: 'choices' })
  const choiceButtons = new Map<string, HTMLButtonElement>()
  for (const [value, label] of [['A', 'A is better'], ['same', 'about the same'], ['B', 'B is better']] as const) {
    const button = el('button', { type: 'button', class: `choice choice-${value}` }, label)
    button.addEventListener('click', () => {
      state = setChoice(state, value)
      render()
    })
    choiceButtons.set(value, button)
    choices.append(button)
  }

  const principleBoxes = new Map<Principle, HTMLInputElement>()
  const principlesRow = el('div', { class: 'principles' })
  for (const principle of PRINCIPLES) {
    const box = el('input', { type: 'checkbox', class: `principle-${principle}` })
    box.addEventListener('change', () => {
      state = togglePrinciple(state, principle)
      render()
    })
    const label = el('label', {}, ` ${principle}`)
    label.prepend(box)
    principleBoxes.set(principle, box)
    principlesRow.append(label)
  }

  const note = el('input', { type: 'text', class: 'note', placeholder: 'optional note' })
  const submit = el('button', { type: 'button', class: 'submit' }, 'submit rating')

  caption.addEventListener('input', () => {
    state = setCaption(state, caption.value)
    render()
  })
  irrelevant.addEventListener('change', () => {
    state = setIrrelevant(state, irrelevant.checked)
    render()
  })
  note.addEventListener('input', () => {
    state = { ...state, note: note.value }
  })

  async function advance(): Promise<void> {
    try {
      const pair = await api.nextPair(rater)
      state = freshForm(pair, state.completed)
    } catch (error) {
      if (error instanceof ApiError && error.status === 404) {
        state = { ...freshForm(null, state.completed), status: 'done' }
      } else {
        state = { ...state, status: 'error', error: String((error as Error).message ?? error) }
      }
    }
    render()
  }

  submit.addEventListener('click', () => {
    void submitForm()
  })

  async function submitForm(): Promise<void> {
    const pair = state.pair
    if (!canSubmit(state) || pair === null) return
    state = { ...state, status: 'submitting', error: null }
    render()
    try {
      await api.submitRating({
        pair_id: pair.pair_id,
        rater,
        caption: state.caption.trim(),
        choice: state.irrelevant ? null : state.choice,
        principles: [...state.principles],
        irrelevant: state.irrelevant,
        note: state.note,
      })
      state = { ...state, status: 'idle', completed: state.completed + 1 }
      await advance()
    } catch (error) {
      const text =
        error instanceof ApiError ? `rejected (${error.status}): ${error.message}` : String(error)
      state = { ...state, status: 'error', error: text }
      render()
    }
  }

  function render(): void {
    progress.textContent = `${state.completed} rated`
    message.textContent =
      state.status === 'done' ? 'all pairs rated — thank you' : state.error ?? ''
    if (state.pair) {
      imgA.setAttribute('src', state.pair.image_a)
      imgB.setAttribute('src', state.pair.image_b)
      images.style.display = ''
    } else {
      images.style.display = 'none'
    }
    if (caption.value !== state.caption) caption.value = state.caption
    irrelevant.checked = state.irrelevant
    for (const [value, button] of choiceButtons) {
      button.classList.toggle('selected', state.choice === value)
      button.disabled = state.irrelevant || state.status === 'submitting'
    }
    const disabled = principlesDisabled(state)
    for (const [principle, box] of principleBoxes) {
      box.checked = state.principles.has(principle)
      box.disabled = disabled || state.status === 'submitting'
    }
    submit.disabled = !canSubmit(state)
  }

  container.append(progress, images, caption, irrelevantLabel, choices, principlesRow, note, submit, message)
  root.append(container)
  render()

  return {
    element: container,
    state: () => state,
    refresh: advance,
  }
}
