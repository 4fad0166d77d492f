/** Quality-aware example search: query box with optional negative prompt;
 * results render as a thumbnail grid in exactly the API's order. */

import { ApiError, SearchResult, StudioApi } from './api.js'

export interface SearchView {
  element: HTMLElement
  results(): SearchResult[]
}

export function mountSearchView(root: HTMLElement, api: StudioApi): SearchView {
  let current: SearchResult[] = []

  const container = document.createElement('div')
  container.className = 'search-view'

  const query = document.createElement('input')
  query.type = 'search'
  query.className = 'query'
  query.placeholder = 'describe the screen you want'

  const negative = document.createElement('input')
  negative.type = 'text'
  negative.className = 'negative'
  negative.placeholder = 'negative prompt (optional)'

  const count = document.createElement('input')
  count.type = 'number'
  count.className = 'k'
  count.value = '10'
  count.min = '1'

  const submit = document.createElement('button')
  submit.type = 'button'
  submit.className = 'submit'
  submit.textContent = 'search'

  const banner = document.createElement('p')
  banner.className = 'banner'
  const grid = document.createElement('div')
  grid.className = 'grid'

  async function run(): Promise<void> {
    banner.textContent = ''
    if (!query.value.trim()) {
      banner.textContent = 'enter a query first'
      return
    }
    try {
      current = await api.search(
        query.value.trim(),
        Math.max(1, Number(count.value) || 10),
        negative.value.trim() || undefined,
      )
      render()
    } catch (error) {
      current = []
      render()
      if (error instanceof ApiError && error.status === 503) {
        banner.textContent = 'index not loaded'
      } else {
        banner.textContent =
          error instanceof ApiError ? `search failed (${error.status}): ${error.message}` : String(error)
      }
    }
  }

  function render(): void {
    grid.replaceChildren()
    for (const result of current) {
      const card = document.createElement('figure')
      card.className = 'card'
      const img = document.createElement('img')
      img.src = result.image_url
      img.alt = result.id
      const label = document.createElement('figcaption')
      label.textContent = `${result.id} — ${result.score.toFixed(4)}`
      card.append(img, label)
      grid.append(card)
    }
  }

  submit.addEventListener('click', () => void run())
  container.append(query, negative, count, submit, banner, grid)
  root.append(container)

  return { element: container, results: () => current }
}
