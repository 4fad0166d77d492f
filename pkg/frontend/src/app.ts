/** Single-page shell: three hash routes (/rate, /tips, /search) over one
 * API client. The rater id is self-declared and echoed in a cookie. */

import { StudioApi } from './api.js'
import { mountRateView } from './rate.js'
import { mountSearchView } from './search.js'
import { mountTipsView } from './tips.js'

function raterFromCookie(): string | null {
  const match = document.cookie.match(/(?:^|;\s*)rater=([^;]+)/)
  return match?.[1] ? decodeURIComponent(match[1]) : null
}

function ensureRater(): string {
  let rater = raterFromCookie()
  if (!rater) {
    rater = window.prompt('enter your rater id') || `anon-${Math.random().toString(36).slice(2, 8)}`
    document.cookie = `rater=${encodeURIComponent(rater)}; path=/`
  }
  return rater
}

export function mountApp(root: HTMLElement, api = new StudioApi()): void {
  const nav = document.createElement('nav')
  for (const [hash, label] of [['#/rate', 'rate'], ['#/tips', 'tips'], ['#/search', 'search']]) {
    const link = document.createElement('a')
    link.href = hash!
    link.textContent = label!
    nav.append(link, document.createTextNode(' '))
  }
  const outlet = document.createElement('main')
  root.append(nav, outlet)

  function route(): void {
    outlet.replaceChildren()
    const hash = window.location.hash || '#/rate'
    if (hash.startsWith('#/tips')) {
      mountTipsView(outlet, api)
    } else if (hash.startsWith('#/search')) {
      mountSearchView(outlet, api)
    } else {
      const view = mountRateView(outlet, api, ensureRater())
      void view.refresh()
    }
  }

  window.addEventListener('hashchange', route)
  route()
}

declare global {
  interface Window {
    __uiqStudioMounted?: boolean
  }
}

if (typeof document !== 'undefined' && document.getElementById('app') && !window.__uiqStudioMounted) {
  window.__uiqStudioMounted = true
  mountApp(document.getElementById('app') as HTMLElement)
}
