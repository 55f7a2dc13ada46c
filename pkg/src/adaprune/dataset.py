"""Toy text-classification datasets: in-memory type, disk format, synthesis.

On disk a dataset is a JSON-lines file. The first line is a header:

    {"vocab_size": 24, "num_labels": 2, "embedding": "embedding.adpr",
     "synonyms": {"3": [4, 5], ...}}

``embedding`` is the path, relative to the dataset file, of a tensor
archive holding a float64 tensor named "embedding" with one row per
vocabulary token. Every following line is one example:

    {"tokens": [1, 7, 3], "label": 0}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .archive import load_tensors, save_tensors
from .errors import DatasetError
from .linalg import as_matrix


@dataclass
class ToyDataset:
    examples: list[tuple[list[int], int]]
    vocab_size: int
    num_labels: int
    embedding: np.ndarray
    synonyms: dict[int, list[int]] = field(default_factory=dict)

    def __post_init__(self):
        if self.vocab_size < 1 or self.num_labels < 1:
            raise DatasetError("vocab_size and num_labels must be positive")
        try:
            self.embedding = as_matrix(self.embedding, "embedding")
        except Exception as exc:
            raise DatasetError(f"bad embedding tensor: {exc}") from exc
        if self.embedding.shape[0] != self.vocab_size:
            raise DatasetError(
                f"embedding has {self.embedding.shape[0]} rows for vocab_size "
                f"{self.vocab_size}"
            )
        normalized = []
        for i, (tokens, label) in enumerate(self.examples):
            tokens = [int(t) for t in tokens]
            label = int(label)
            if not tokens:
                raise DatasetError(f"example {i} has no tokens")
            if any(t < 0 or t >= self.vocab_size for t in tokens):
                raise DatasetError(f"example {i} has token ids outside the vocabulary")
            if not 0 <= label < self.num_labels:
                raise DatasetError(f"example {i} has label {label} outside [0, {self.num_labels})")
            normalized.append((tokens, label))
        self.examples = normalized
        synonyms = {}
        for key, values in self.synonyms.items():
            key = int(key)
            values = [int(v) for v in values]
            if key < 0 or key >= self.vocab_size:
                raise DatasetError(f"synonym key {key} outside the vocabulary")
            if any(v < 0 or v >= self.vocab_size for v in values):
                raise DatasetError(f"synonyms of token {key} leave the vocabulary")
            if key in values:
                raise DatasetError(f"token {key} lists itself as a synonym")
            synonyms[key] = values
        self.synonyms = synonyms


def save_dataset(ds: ToyDataset, path, embedding_filename: str = "embedding.adpr") -> None:
    """Write the JSON-lines dataset and its embedding archive next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_tensors({"embedding": ds.embedding}, path.parent / embedding_filename)
    header = {
        "vocab_size": ds.vocab_size,
        "num_labels": ds.num_labels,
        "embedding": embedding_filename,
        "synonyms": {str(k): v for k, v in ds.synonyms.items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for tokens, label in ds.examples:
            fh.write(json.dumps({"tokens": tokens, "label": label}) + "\n")


def load_dataset(path) -> ToyDataset:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line for line in (raw.strip() for raw in fh) if line]
    if not lines:
        raise DatasetError(f"{path}: empty dataset file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: header is not valid JSON: {exc}") from exc
    for key in ("vocab_size", "num_labels", "embedding", "synonyms"):
        if key not in header:
            raise DatasetError(f"{path}: header is missing {key!r}")

    tensors = load_tensors(path.parent / header["embedding"])
    if "embedding" not in tensors:
        raise DatasetError(
            f"{header['embedding']!r} has no tensor named 'embedding'"
        )

    examples = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            record = json.loads(line)
            examples.append((record["tokens"], record["label"]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DatasetError(f"{path}:{lineno}: malformed example record") from exc

    return ToyDataset(
        examples=examples,
        vocab_size=int(header["vocab_size"]),
        num_labels=int(header["num_labels"]),
        embedding=tensors["embedding"],
        synonyms={int(k): v for k, v in header["synonyms"].items()},
    )


def synthetic_dataset(
    seed: int = 0,
    vocab_size: int = 24,
    d_embed: int = 8,
    num_labels: int = 2,
    n_examples: int = 40,
    tokens_per_example: int = 4,
    n_synonyms: int = 2,
    noise: float = 0.25,
) -> ToyDataset:
    """Label-clustered token embeddings with nearest-neighbor synonyms.

    Tokens are split evenly across labels and embedded near their label's
    center; examples draw tokens from a single label's pool. Synonyms are
    the nearest other tokens in embedding space, which usually but not
    always share the label, so attacks can succeed without being trivial.
    """
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(num_labels, d_embed))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    token_labels = np.arange(vocab_size) % num_labels
    embedding = centers[token_labels] + noise * rng.normal(size=(vocab_size, d_embed))

    dist = np.linalg.norm(embedding[:, None, :] - embedding[None, :, :], axis=2)
    np.fill_diagonal(dist, np.inf)
    synonyms = {
        t: [int(j) for j in np.argsort(dist[t], kind="stable")[:n_synonyms]]
        for t in range(vocab_size)
    }

    pools = [np.flatnonzero(token_labels == lab) for lab in range(num_labels)]
    examples = []
    for _ in range(n_examples):
        label = int(rng.integers(num_labels))
        tokens = rng.choice(pools[label], size=tokens_per_example, replace=True)
        examples.append(([int(t) for t in tokens], label))

    return ToyDataset(
        examples=examples,
        vocab_size=vocab_size,
        num_labels=num_labels,
        embedding=embedding,
        synonyms=synonyms,
    )
