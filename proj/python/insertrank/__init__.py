"""BM25 first-stage retrieval with score-aware listwise LLM reranking."""

from ._core import (
    Candidate,
    DataError,
    Document,
    Index,
    Query,
    build_prompt,
    cli,
    display_scores,
    evaluate,
    ndcg,
    normalize_scores,
    order_candidates,
    parse_ranking,
    per_query_seed,
    read_run,
    render_prompt,
    rerank,
    tokenize,
)

__all__ = [
    "Candidate",
    "DataError",
    "Document",
    "Index",
    "Query",
    "build_prompt",
    "cli",
    "display_scores",
    "evaluate",
    "ndcg",
    "normalize_scores",
    "order_candidates",
    "parse_ranking",
    "per_query_seed",
    "read_run",
    "render_prompt",
    "rerank",
    "tokenize",
]
