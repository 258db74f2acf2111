"""Personalization store: user-affirmed facts and user denials as two
feature grids over the same cells as the semantic map.

Confirmations accumulate by normalized vector sum into the positive layer;
denials go into the negative layer, which masks retrieval. This is what
lets "alice's computer" resolve to one specific lookalike after feedback.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import cosine
from .perception import ObjectRegistry
from .semantic_map import (
    SemanticMap, MapCandidate, connected_components, contours_to_candidates,
    load_map_snapshot, save_map_snapshot, similarity_field,
)

POS_THRESHOLD = 0.75
NEG_THRESHOLD = 0.75


class MemoryStoreError(ValueError):
    pass


@dataclass
class MemoryMaps:
    pos: np.ndarray  # (rows, cols, dim) float32
    neg: np.ndarray

    @classmethod
    def zeros(cls, rows: int, cols: int, dim: int) -> "MemoryMaps":
        return cls(pos=np.zeros((rows, cols, dim), dtype=np.float32),
                   neg=np.zeros((rows, cols, dim), dtype=np.float32))


def _accumulate(layer: np.ndarray, cells, vec: np.ndarray):
    v32 = vec.astype(np.float32)
    for r, c in cells:
        total = layer[r, c] + v32
        norm = np.linalg.norm(total)
        layer[r, c] = total / norm if norm > 0 else total


def update_memory(obj_id: str, pos_str: str | None, neg_str: str | None,
                  registry: ObjectRegistry, maps: MemoryMaps, provider):
    """Write affirmed/denied text features into the object's region cells."""
    if pos_str is None and neg_str is None:
        raise MemoryStoreError("update_memory needs pos_str or neg_str")
    entry = registry.get(obj_id)
    if pos_str is not None:
        _accumulate(maps.pos, entry.region, provider.embed(pos_str))
    if neg_str is not None:
        _accumulate(maps.neg, entry.region, provider.embed(neg_str))


def retrieve_memory(query: str, pose, maps: MemoryMaps, registry: ObjectRegistry,
                    provider, resolution: float,
                    pos_threshold: float = POS_THRESHOLD,
                    neg_threshold: float = NEG_THRESHOLD,
                    min_area: int = 2, k_max: int = 10) -> list[MapCandidate]:
    """Match the query against affirmed features, masking denied cells."""
    q = provider.embed(query)
    sims = similarity_field(maps.pos, q)
    neg_sims = similarity_field(maps.neg, q)
    sims[neg_sims >= neg_threshold] = 0.0
    comps = connected_components(sims >= pos_threshold, min_area)
    # query=None: a memory query describes user-affirmed text, not visual
    # appearance, so it must not become the stored detection query
    cands = contours_to_candidates(comps, pose, resolution, registry,
                                   "memory", None)
    return cands[:k_max]


def save_memory(maps: MemoryMaps, resolution: float) -> dict:
    """Two layer snapshots in the semantic-map snapshot format."""
    pos_map = SemanticMap(grid=maps.pos, resolution=resolution, built_from="memory")
    neg_map = SemanticMap(grid=maps.neg, resolution=resolution, built_from="memory")
    return {"pos": save_map_snapshot(pos_map, layer="pos"),
            "neg": save_map_snapshot(neg_map, layer="neg")}


def load_memory(doc: dict, rows: int, cols: int, dim: int) -> MemoryMaps:
    maps = MemoryMaps.zeros(rows, cols, dim)
    maps.pos = load_map_snapshot(doc["pos"], (rows, cols, dim))
    maps.neg = load_map_snapshot(doc["neg"], (rows, cols, dim))
    return maps


def memory_equal(a: MemoryMaps, b: MemoryMaps) -> bool:
    return np.array_equal(a.pos, b.pos) and np.array_equal(a.neg, b.neg)


def cell_matches(layer: np.ndarray, cell, text: str, provider) -> float:
    """Cosine of one memory cell against a phrase, for tests and debugging."""
    return cosine(layer[cell].astype(np.float64), provider.embed(text))
