"""Shared feature space for map cells, detections, and memory.

The synthetic provider derives a reproducible unit vector per token
(hash-seeded Gaussian draws) and embeds a phrase as the normalized sum of
its token vectors. Cosine similarity then becomes a controllable function
of shared tokens: two phrases sharing one of two tokens land near 1/sqrt(2),
unrelated tokens land near 0. A remote provider with the same interface can
swap in an external encoder over HTTP.
"""

from __future__ import annotations

import math
import threading

import numpy as np

from .tokens import tokenize

DEFAULT_DIM = 64

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


class EmbeddingError(ValueError):
    pass


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def _splitmix64_stream(seed: int, count: int) -> list[int]:
    out = []
    z = seed & _MASK64
    for _ in range(count):
        z = (z + 0x9E3779B97F4A7C15) & _MASK64
        r = z
        r = ((r ^ (r >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        r = ((r ^ (r >> 27)) * 0x94D049BB133111EB) & _MASK64
        r ^= r >> 31
        out.append(r)
    return out


def _gaussians(seed: int, count: int) -> np.ndarray:
    """Box-Muller over a SplitMix64 stream; platform-independent."""
    pairs = (count + 1) // 2
    words = _splitmix64_stream(seed, 2 * pairs)
    vals = []
    for i in range(pairs):
        # (0, 1] so log is finite
        u1 = ((words[2 * i] >> 11) + 1) * 2.0 ** -53
        u2 = (words[2 * i + 1] >> 11) * 2.0 ** -53
        r = math.sqrt(-2.0 * math.log(u1))
        vals.append(r * math.cos(2.0 * math.pi * u2))
        vals.append(r * math.sin(2.0 * math.pi * u2))
    return np.array(vals[:count], dtype=np.float64)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Dot product of unit vectors; 0 if either is the zero vector."""
    if u.shape != v.shape:
        raise EmbeddingError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


class SyntheticProvider:
    """Deterministic text embeddings with token-overlap geometry."""

    kind = "synthetic"

    def __init__(self, dimension: int = DEFAULT_DIM):
        if dimension < 2:
            raise EmbeddingError("dimension must be >= 2")
        self.dimension = dimension
        self._token_cache: dict[str, np.ndarray] = {}
        self._phrase_cache: dict[tuple[str, ...], np.ndarray] = {}

    def token_vector(self, token: str) -> np.ndarray:
        if not token:
            raise EmbeddingError("empty token")
        vec = self._token_cache.get(token)
        if vec is None:
            seed = _fnv1a64(token.encode("utf-8"))
            raw = _gaussians(seed, self.dimension)
            vec = raw / np.linalg.norm(raw)
            vec.setflags(write=False)
            self._token_cache[token] = vec
        return vec

    def embed(self, text: str) -> np.ndarray:
        toks = tokenize(text)
        if not toks:
            raise EmbeddingError(f"no content tokens in {text!r}")
        if len(toks) == 1:
            return self.token_vector(toks[0])
        key = tuple(sorted(toks))
        vec = self._phrase_cache.get(key)
        if vec is None:
            total = np.zeros(self.dimension)
            for t in toks:
                total += self.token_vector(t)
            vec = total / np.linalg.norm(total)
            vec.setflags(write=False)
            self._phrase_cache[key] = vec
        return vec


class RemoteProvider:
    """Client for an external text encoder over HTTP.

    Wire format: POST {base}/embed with {"texts": [...]} returns
    {"vectors": [[...], ...]}; GET {base}/dim returns {"dim": C} and is
    called once at construction. Responses are cached so a run is
    deterministic given its cache.
    """

    kind = "remote"

    def __init__(self, base_url: str, timeout: float = 10.0):
        import requests

        self._requests = requests
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        resp = requests.get(self.base_url + "/dim", timeout=timeout)
        resp.raise_for_status()
        self.dimension = int(resp.json()["dim"])
        self._cache: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def embed(self, text: str) -> np.ndarray:
        if not tokenize(text):
            raise EmbeddingError(f"no content tokens in {text!r}")
        with self._lock:
            hit = self._cache.get(text)
        if hit is not None:
            return hit
        resp = self._requests.post(
            self.base_url + "/embed", json={"texts": [text]}, timeout=self.timeout
        )
        resp.raise_for_status()
        raw = np.array(resp.json()["vectors"][0], dtype=np.float64)
        if raw.shape != (self.dimension,):
            raise EmbeddingError(
                f"remote returned dim {raw.shape} but handshake said {self.dimension}"
            )
        norm = np.linalg.norm(raw)
        vec = raw / norm if norm > 0 else raw
        vec.setflags(write=False)
        with self._lock:
            self._cache[text] = vec
        return vec
