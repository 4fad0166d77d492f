/** Typed client for the studio service. Every number the UI displays comes
 * from these responses; the client never computes scores locally. */

export interface PairPayload {
  pair_id: string
  image_a: string
  image_b: string
  draft_caption: string
  cluster_id: string | number | null
}

export type Choice = 'A' | 'B' | 'same'

export interface RatingSubmission {
  pair_id: string
  rater: string
  caption: string
  choice: Choice | null
  principles: string[]
  irrelevant: boolean
  note: string
}

export interface StoredPair {
  pair_id: string
  a: string
  b: string
  preferred: string
  principles: string[]
  caption: string
  rater_id: string | null
  irrelevant: boolean
}

export interface Suggestion {
  tag: string
  score: number
}

export interface ScoreResponse {
  score: number
  suggestions: Suggestion[]
}

export interface SearchResult {
  id: string
  image_url: string
  score: number
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message)
  }
}

async function detail(response: Response): Promise<string> {
  try {
    const body = await response.json()
    if (typeof body?.detail === 'string') return body.detail
    return JSON.stringify(body?.detail ?? body)
  } catch {
    return response.statusText || `HTTP ${response.status}`
  }
}

export class StudioApi {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchFn(this.baseUrl + path, init)
    if (!response.ok) throw new ApiError(response.status, await detail(response))
    return response
  }

  async nextPair(rater: string): Promise<PairPayload> {
    const response = await this.request(`/api/pairs/next?rater=${encodeURIComponent(rater)}`)
    return response.json()
  }

  async submitRating(body: RatingSubmission): Promise<StoredPair> {
    const response = await this.request('/api/ratings', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
    })
    return response.json()
  }

  async score(image: Blob, caption: string): Promise<ScoreResponse> {
    const form = new FormData()
    form.append('image', image, 'upload.png')
    form.append('caption', caption)
    const response = await this.request('/api/score', { method: 'POST', body: form })
    return response.json()
  }

  async search(query: string, k: number, negative?: string, lambda?: number): Promise<SearchResult[]> {
    const params = new URLSearchParams({ q: query, k: String(k) })
    if (negative) params.set('negative', negative)
    if (lambda !== undefined) params.set('lambda', String(lambda))
    const response = await this.request(`/api/search?${params}`)
    return response.json()
  }
}
