/** In-memory double of the studio service HTTP contract, including the
 * description rules: the preferred screenshot becomes "well-designed", the
 * other "poor design" plus one "bad <principle>" tag per selected principle,
 * ties drop the quality tag, and both captions become the submitted one. */

export interface FixtureSample {
  id: string
  caption: string
  quality: 'well-designed' | 'poor design' | 'none'
  defects: string[]
}

export interface FixturePairRecord {
  pair_id: string
  a: string
  b: string
  preferred: string
  principles: string[]
  caption: string
  rater_id: string | null
  irrelevant: boolean
  note: string
}

export function describeSample(sample: FixtureSample): string {
  const parts = ['ui screenshot.']
  if (sample.quality !== 'none') parts.push(`${sample.quality}.`)
  for (const defect of sample.defects) parts.push(`${defect}.`)
  parts.push(sample.caption)
  return parts.join(' ')
}

const PRINCIPLES = ['contrast', 'repetition', 'alignment', 'proximity']

export class FixtureService {
  served = new Map<string, number>()
  rated = new Map<string, Set<string>>()
  pairs: { pair_id: string; a: string; b: string }[]
  samples = new Map<string, FixtureSample>()
  stored: FixturePairRecord[] = []
  scoreResponse = {
    score: 11.5,
    suggestions: [
      { tag: 'bad contrast', score: 13.25 },
      { tag: 'bad alignment', score: 12.75 },
      { tag: 'bad proximity', score: 12.0 },
    ],
  }
  searchResults = [
    { id: 's2', image_url: '/static/images/s2.png', score: 9.5 },
    { id: 's0', image_url: '/static/images/s0.png', score: 8.25 },
    { id: 's1', image_url: '/static/images/s1.png', score: 7.0 },
  ]
  indexLoaded = true
  requests: string[] = []

  constructor(pairCount = 5) {
    this.pairs = []
    for (let i = 0; i < pairCount; i++) {
      const a = `a${i}`
      const b = `b${i}`
      this.samples.set(a, { id: a, caption: `draft caption ${i}`, quality: 'none', defects: [] })
      this.samples.set(b, { id: b, caption: `draft caption ${i}`, quality: 'none', defects: [] })
      this.pairs.push({ pair_id: `p${i}`, a, b })
    }
  }

  private json(status: number, body: unknown): Response {
    return new Response(JSON.stringify(body), {
      status,
      headers: { 'content-type': 'application/json' },
    })
  }

  fetch = async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
    const url = typeof input === 'string' ? input : input.toString()
    this.requests.push(url)
    if (url.startsWith('/api/pairs/next')) {
      const rater = new URLSearchParams(url.split('?')[1]).get('rater') ?? ''
      if (!rater) return this.json(400, { detail: 'rater id is required' })
      const done = this.rated.get(rater) ?? new Set()
      const next = this.pairs.find((p) => !done.has(p.pair_id))
      if (!next) return this.json(404, { detail: 'no unrated pairs remain' })
      return this.json(200, {
        pair_id: next.pair_id,
        image_a: `/static/images/${next.a}.png`,
        image_b: `/static/images/${next.b}.png`,
        draft_caption: this.samples.get(next.a)!.caption,
        cluster_id: 'cluster0',
      })
    }
    if (url.startsWith('/api/ratings')) {
      const body = JSON.parse(String(init?.body))
      const { pair_id, rater, caption, choice, principles, irrelevant, note } = body
      const pair = this.pairs.find((p) => p.pair_id === pair_id)
      if (!pair) return this.json(422, { detail: 'unknown pair' })
      if ((this.rated.get(rater) ?? new Set()).has(pair_id)) {
        return this.json(409, { detail: 'already rated' })
      }
      if (!irrelevant) {
        if (!caption) return this.json(422, { detail: 'caption is required' })
        if (!['A', 'B', 'same'].includes(choice)) return this.json(422, { detail: 'bad choice' })
        if (principles.some((p: string) => !PRINCIPLES.includes(p))) {
          return this.json(422, { detail: 'bad principle' })
        }
        if (choice === 'same' && principles.length > 0) {
          return this.json(422, { detail: 'principles must be empty for a tie' })
        }
      }
      const a = this.samples.get(pair.a)!
      const b = this.samples.get(pair.b)!
      const ordered = PRINCIPLES.filter((p) => principles.includes(p))
      const defectTags = ordered.map((p) => `bad ${p}`)
      if (!irrelevant) {
        if (choice === 'same') {
          Object.assign(a, { caption, quality: 'none', defects: [] })
          Object.assign(b, { caption, quality: 'none', defects: [] })
        } else if (choice === 'A') {
          Object.assign(a, { caption, quality: 'well-designed', defects: [] })
          Object.assign(b, { caption, quality: 'poor design', defects: defectTags })
        } else {
          Object.assign(a, { caption, quality: 'poor design', defects: defectTags })
          Object.assign(b, { caption, quality: 'well-designed', defects: [] })
        }
      } else if (caption) {
        Object.assign(a, { caption, quality: 'none', defects: [] })
      }
      const record: FixturePairRecord = {
        pair_id,
        a: pair.a,
        b: pair.b,
        preferred: irrelevant ? 'same' : choice,
        principles: ordered,
        caption,
        rater_id: rater,
        irrelevant: Boolean(irrelevant),
        note: String(note ?? ''),
      }
      this.stored.push(record)
      if (!this.rated.has(rater)) this.rated.set(rater, new Set())
      this.rated.get(rater)!.add(pair_id)
      return this.json(200, record)
    }
    if (url.startsWith('/api/score')) {
      const form = init?.body as FormData
      const caption = form.get('caption')
      if (!caption || !String(caption).trim()) return this.json(422, { detail: 'caption is required' })
      return this.json(200, this.scoreResponse)
    }
    if (url.startsWith('/api/search')) {
      if (!this.indexLoaded) return this.json(503, { detail: 'no index loaded' })
      const params = new URLSearchParams(url.split('?')[1])
      const k = Number(params.get('k') ?? '10')
      return this.json(200, this.searchResults.slice(0, k))
    }
    return this.json(404, { detail: `unknown path ${url}` })
  }
}
