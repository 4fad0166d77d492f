/** Tips and search views: server-ordered rendering, error banners, and the
 * no-local-scores invariant (every displayed number came from a response). */

import { beforeEach, describe, expect, it } from 'vitest'

import { StudioApi } from '../src/api.js'
import { mountSearchView } from '../src/search.js'
import { mountTipsView } from '../src/tips.js'
import { FixtureService } from './fixture-service.js'

function click(el: Element): void {
  el.dispatchEvent(new MouseEvent('click', { bubbles: true }))
}

async function settle(): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, 0))
  await new Promise((resolve) => setTimeout(resolve, 0))
}

function attachPng(input: HTMLInputElement): void {
  const file = new File([new Uint8Array([137, 80, 78, 71])], 'shot.png', { type: 'image/png' })
  Object.defineProperty(input, 'files', { value: [file], configurable: true })
}

describe('tips view', () => {
  let service: FixtureService
  let root: HTMLElement

  beforeEach(() => {
    service = new FixtureService()
    root = document.createElement('div')
    document.body.replaceChildren(root)
    mountTipsView(root, new StudioApi('', service.fetch))
  })

  const q = <T extends Element>(sel: string): T => root.querySelector<T>(sel)!

  it('renders score and warnings in exact server order', async () => {
    attachPng(q('.upload'))
    ;(q('.caption') as HTMLInputElement).value = 'login screen'
    click(q('.submit'))
    await settle()
    expect(q('.score').textContent).toBe('score: 11.5000')
    const warnings = [...root.querySelectorAll('.warning')].map((n) => n.textContent)
    expect(warnings).toEqual([
      'bad contrast (13.2500)',
      'bad alignment (12.7500)',
      'bad proximity (12.0000)',
    ])
  })

  it('shows the empty-suggestions state', async () => {
    service.scoreResponse = { score: 3.25, suggestions: [] }
    attachPng(q('.upload'))
    ;(q('.caption') as HTMLInputElement).value = 'login screen'
    click(q('.submit'))
    await settle()
    expect(q('.no-defects').textContent).toBe('no defects above threshold')
  })

  it('identical re-upload reproduces the identical display', async () => {
    attachPng(q('.upload'))
    ;(q('.caption') as HTMLInputElement).value = 'login screen'
    click(q('.submit'))
    await settle()
    const first = root.innerHTML
    click(q('.submit'))
    await settle()
    expect(root.innerHTML).toBe(first)
  })

  it('renders 422 messages and requires a caption locally', async () => {
    attachPng(q('.upload'))
    ;(q('.caption') as HTMLInputElement).value = '   '
    click(q('.submit'))
    await settle()
    expect(q('.message').textContent).toBe('caption is required')
    expect(service.requests.filter((u) => u.startsWith('/api/score'))).toHaveLength(0)
  })

  it('every displayed number equals a number from the response', async () => {
    attachPng(q('.upload'))
    ;(q('.caption') as HTMLInputElement).value = 'login screen'
    click(q('.submit'))
    await settle()
    const displayed = (root.textContent ?? '').match(/\d+\.\d+/g) ?? []
    const fromServer = new Set(
      [service.scoreResponse.score, ...service.scoreResponse.suggestions.map((s) => s.score)].map((v) =>
        v.toFixed(4),
      ),
    )
    expect(displayed.length).toBeGreaterThan(0)
    for (const value of displayed) expect(fromServer.has(value)).toBe(true)
  })
})

describe('search view', () => {
  let service: FixtureService
  let root: HTMLElement

  beforeEach(() => {
    service = new FixtureService()
    root = document.createElement('div')
    document.body.replaceChildren(root)
    mountSearchView(root, new StudioApi('', service.fetch))
  })

  const q = <T extends Element>(sel: string): T => root.querySelector<T>(sel)!

  it('renders the grid in API order with scores on each card', async () => {
    ;(q('.query') as HTMLInputElement).value = 'login screen'
    click(q('.submit'))
    await settle()
    const cards = [...root.querySelectorAll('figcaption')].map((n) => n.textContent)
    expect(cards).toEqual(['s2 — 9.5000', 's0 — 8.2500', 's1 — 7.0000'])
    const sources = [...root.querySelectorAll('.grid img')].map((n) => n.getAttribute('src'))
    expect(sources).toEqual(['/static/images/s2.png', '/static/images/s0.png', '/static/images/s1.png'])
  })

  it('grid cardinality is min(k, index size)', async () => {
    ;(q('.query') as HTMLInputElement).value = 'anything'
    ;(q('.k') as HTMLInputElement).value = '2'
    click(q('.submit'))
    await settle()
    expect(root.querySelectorAll('.card')).toHaveLength(2)
  })

  it('empty query never hits the network', async () => {
    ;(q('.query') as HTMLInputElement).value = '   '
    click(q('.submit'))
    await settle()
    expect(q('.banner').textContent).toBe('enter a query first')
    expect(service.requests).toHaveLength(0)
  })

  it('503 shows the index-not-loaded banner', async () => {
    service.indexLoaded = false
    ;(q('.query') as HTMLInputElement).value = 'login'
    click(q('.submit'))
    await settle()
    expect(q('.banner').textContent).toBe('index not loaded')
    expect(root.querySelectorAll('.card')).toHaveLength(0)
  })
})
