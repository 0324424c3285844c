"""Text encoders behind one interface.

Two families resolve from the model identifier:

- ``hash://<dim>``: a deterministic signed feature-hashing encoder.
  No downloads, no weights, identical output on every platform; meant for
  format round-trips, pipeline tests, and toy corpora.
- anything else: a sentence-transformers checkpoint (requires the
  ``models`` extra and a resolvable model id).

Encoders return unit-normalized float32 rows and count how many inputs
were truncated at the model's maximum length.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np


class ModelResolutionError(Exception):
    """The model identifier does not resolve to a usable encoder."""


_TOKEN = re.compile(r"\w+", re.UNICODE)


class HashingEncoder:
    """Signed bag-of-tokens hashing into a fixed dimension."""

    def __init__(self, dim: int, max_tokens: int = 256):
        if dim < 1:
            raise ModelResolutionError(f"hashing dimension must be >= 1, got {dim}")
        self.dim = dim
        self.max_tokens = max_tokens
        self.truncated = 0

    def _bucket(self, token: str) -> tuple[int, float]:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        value = int.from_bytes(digest, "little")
        sign = 1.0 if value & 1 else -1.0
        return (value >> 1) % self.dim, sign

    def encode(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for row, text in enumerate(texts):
            tokens = _TOKEN.findall(text.lower())
            if len(tokens) > self.max_tokens:
                tokens = tokens[:self.max_tokens]
                self.truncated += 1
            for token in tokens:
                bucket, sign = self._bucket(token)
                out[row, bucket] += sign
            norm = np.linalg.norm(out[row])
            if norm > 0:
                out[row] /= norm
        return out.astype(np.float32)


class TransformerEncoder:
    """sentence-transformers checkpoint wrapper with truncation counting."""

    def __init__(self, model_id: str, device: str | None = None):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise ModelResolutionError(
                "sentence-transformers is not installed; install the "
                "'models' extra or use a hash:// encoder") from exc
        try:
            self._model = SentenceTransformer(model_id, device=device)
        except Exception as exc:
            raise ModelResolutionError(
                f"cannot load model {model_id!r}: {exc}") from exc
        self._model.eval()
        self.dim = int(self._model.get_sentence_embedding_dimension())
        self.truncated = 0

    def _count_truncated(self, texts: list[str]) -> int:
        limit = getattr(self._model, "max_seq_length", None)
        tokenizer = getattr(self._model, "tokenizer", None)
        if not limit or tokenizer is None:
            return 0
        count = 0
        for text in texts:
            length = len(tokenizer(text, truncation=False)["input_ids"])
            if length > limit:
                count += 1
        return count

    def encode(self, texts: list[str]) -> np.ndarray:
        self.truncated += self._count_truncated(texts)
        vectors = self._model.encode(texts, batch_size=len(texts),
                                     convert_to_numpy=True,
                                     normalize_embeddings=False,
                                     show_progress_bar=False)
        return np.asarray(vectors, dtype=np.float32)


def resolve_encoder(model_id: str, device: str | None = None,
                    max_tokens: int = 256):
    if model_id.startswith("hash://"):
        spec = model_id[len("hash://"):]
        try:
            dim = int(spec)
        except ValueError:
            raise ModelResolutionError(
                f"bad hashing encoder spec {model_id!r}; expected hash://<dim>"
            ) from None
        return HashingEncoder(dim, max_tokens=max_tokens)
    return TransformerEncoder(model_id, device=device)
