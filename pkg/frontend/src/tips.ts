/** Design tips: upload a screenshot plus caption, show the server's score
 * and its surfaced defect warnings exactly in server order. */

import { ApiError, ScoreResponse, StudioApi } from './api.js'

export interface TipsView {
  element: HTMLElement
  lastResponse(): ScoreResponse | null
}

export function mountTipsView(root: HTMLElement, api: StudioApi): TipsView {
  let last: ScoreResponse | null = null

  const container = document.createElement('div')
  container.className = 'tips-view'

  const file = document.createElement('input')
  file.type = 'file'
  file.accept = 'image/png'
  file.className = 'upload'

  const caption = document.createElement('input')
  caption.type = 'text'
  caption.className = 'caption'
  caption.placeholder = 'what is this screen for?'

  const submit = document.createElement('button')
  submit.type = 'button'
  submit.className = 'submit'
  submit.textContent = 'score screenshot'

  const scoreLine = document.createElement('p')
  scoreLine.className = 'score'
  const warnings = document.createElement('ol')
  warnings.className = 'warnings'
  const message = document.createElement('p')
  message.className = 'message'

  async function run(): Promise<void> {
    message.textContent = ''
    const blob = file.files?.[0]
    if (!blob) {
      message.textContent = 'choose a PNG first'
      return
    }
    if (!caption.value.trim()) {
      message.textContent = 'caption is required'
      return
    }
    try {
      last = await api.score(blob, caption.value.trim())
      render()
    } catch (error) {
      last = null
      render()
      message.textContent =
        error instanceof ApiError ? `rejected (${error.status}): ${error.message}` : String(error)
    }
  }

  function render(): void {
    warnings.replaceChildren()
    if (!last) {
      scoreLine.textContent = ''
      return
    }
    scoreLine.textContent = `score: ${last.score.toFixed(4)}`
    if (last.suggestions.length === 0) {
      const item = document.createElement('li')
      item.className = 'no-defects'
      item.textContent = 'no defects above threshold'
      warnings.append(item)
      return
    }
    for (const suggestion of last.suggestions) {
      const item = document.createElement('li')
      item.className = 'warning'
      item.textContent = `${suggestion.tag} (${suggestion.score.toFixed(4)})`
      warnings.append(item)
    }
  }

  submit.addEventListener('click', () => void run())
  container.append(file, caption, submit, scoreLine, warnings, message)
  root.append(container)

  return { element: container, lastResponse: () => last }
}
