"""Instance files, tokenization, multi-gold expansion, and synthetic corpora.

Corpus files are JSON lines, one record per argument pair::

    {"arg1": "...", "arg2": "...", "senses": [["Comparison", "Contrast", "but"], ...]}

Each entry of ``senses`` is one gold label sequence, top level first.
"""

from __future__ import annotations

import json
import random
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .hierarchy import HierarchyError, SenseHierarchy

PAD, CLS, SEP, UNK = "[PAD]", "[CLS]", "[SEP]", "[UNK]"
SPECIALS = (PAD, CLS, SEP)
MAX_ARG_LEN = 128


class CorpusError(ValueError):
    pass


class Vocabulary:
    """Whitespace word-level vocabulary with hashed out-of-vocabulary buckets.

    Ids 0..2 are [PAD], [CLS], [SEP]; the next ``n_buckets`` ids absorb unseen
    words by CRC32 hash; known words follow in insertion order.
    """

    def __init__(self, words: Iterable[str] = (), n_buckets: int = 16):
        if n_buckets < 1:
            raise ValueError("n_buckets must be >= 1")
        self.n_buckets = n_buckets
        self._words: list[str] = []
        self._index: dict[str, int] = {}
        for w in words:
            self.add(w)

    @classmethod
    def build(cls, texts: Iterable[str], n_buckets: int = 16, min_count: int = 1) -> "Vocabulary":
        counts: dict[str, int] = {}
        for text in texts:
            for w in text.split():
                counts[w] = counts.get(w, 0) + 1
        return cls((w for w, c in counts.items() if c >= min_count), n_buckets=n_buckets)

    def add(self, word: str) -> int:
        if word not in self._index:
            self._index[word] = self._base + len(self._words)
            self._words.append(word)
        return self._index[word]

    @property
    def _base(self) -> int:
        return len(SPECIALS) + self.n_buckets

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def cls_id(self) -> int:
        return 1

    @property
    def sep_id(self) -> int:
        return 2

    def __len__(self) -> int:
        return self._base + len(self._words)

    def token_id(self, word: str) -> int:
        idx = self._index.get(word)
        if idx is None:
            return len(SPECIALS) + zlib.crc32(word.encode("utf-8")) % self.n_buckets
        return idx

    def encode(self, text: str, max_len: int = MAX_ARG_LEN) -> tuple[int, ...]:
        # tail truncation
        return tuple(self.token_id(w) for w in text.split()[:max_len])

    def to_dict(self) -> dict:
        return {"n_buckets": self.n_buckets, "words": list(self._words)}

    @classmethod
    def from_dict(cls, doc: dict) -> "Vocabulary":
        return cls(doc["words"], n_buckets=doc["n_buckets"])

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self.to_dict() == other.to_dict()


@dataclass(frozen=True)
class Instance:
    arg1: tuple[int, ...]
    arg2: tuple[int, ...]
    gold: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if not self.arg1 or not self.arg2:
            raise CorpusError("both arguments must be non-empty")
        if not self.gold:
            raise CorpusError("an instance needs at least one gold label sequence")


def parse_record(record: dict, hierarchy: SenseHierarchy, vocab: Vocabulary,
                 max_len: int = MAX_ARG_LEN) -> Instance:
    try:
        arg1, arg2, senses = record["arg1"], record["arg2"], record["senses"]
    except (KeyError, TypeError) as exc:
        raise CorpusError(f"record is missing field {exc}") from None
    if not isinstance(arg1, str) or not isinstance(arg2, str):
        raise CorpusError("arg1 and arg2 must be strings")
    if not isinstance(senses, list) or not senses:
        raise CorpusError("senses must be a non-empty list of label sequences")
    gold = tuple(hierarchy.sequence(s) for s in senses)
    a1, a2 = vocab.encode(arg1, max_len), vocab.encode(arg2, max_len)
    if not a1 or not a2:
        raise CorpusError("empty argument")
    return Instance(a1, a2, gold)


def read_records(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed record ({exc.msg})") from None
    return records


def write_records(records: Iterable[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def load_corpus(path: str | Path, hierarchy: SenseHierarchy, vocab: Vocabulary,
                max_len: int = MAX_ARG_LEN) -> list[Instance]:
    """Load and validate a JSON-lines corpus file; errors name the offending line."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(parse_record(json.loads(line), hierarchy, vocab, max_len))
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed record ({exc.msg})") from None
            except (CorpusError, HierarchyError) as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from None
    return out


def expand_multilabel(instances: Sequence[Instance]) -> list[Instance]:
    """One training instance per gold sequence; token lists are shared."""
    return [Instance(x.arg1, x.arg2, (g,)) for x in instances for g in x.gold]


def make_batches(instances: Sequence, batch_size: int, seed: int) -> list[list]:
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    order = list(range(len(instances)))
    random.Random(seed).shuffle(order)
    return [[instances[i] for i in order[k:k + batch_size]] for k in range(0, len(order), batch_size)]


def split_records(records: Sequence, seed: int,
                  fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)) -> tuple[list, list, list]:
    """Seed-stable shuffle, then cut into train/dev/test."""
    if abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
        raise ValueError("split fractions must be non-negative and sum to 1")
    order = list(range(len(records)))
    random.Random(seed).shuffle(order)
    n = len(records)
    n_train = round(n * fractions[0])
    n_dev = round(n * fractions[1])
    parts = order[:n_train], order[n_train:n_train + n_dev], order[n_train + n_dev:]
    return tuple([records[i] for i in part] for part in parts)


# -- synthetic corpora -----------------------------------------------------

SIGNATURE_WORDS = 3
FILLER_WORDS = 48


def _signature(hierarchy: SenseHierarchy, sense_id: int, k: int) -> str:
    sense = hierarchy.senses[sense_id]
    return f"{'_'.join(sense.name.lower().split())}.{sense.level}.{k}"


def synth_vocabulary_words(hierarchy: SenseHierarchy) -> list[str]:
    words = [_signature(hierarchy, s.id, k) for s in hierarchy.senses for k in range(SIGNATURE_WORDS)]
    return words + [f"w{i}" for i in range(FILLER_WORDS)]


def leaf_template(hierarchy: SenseHierarchy, path: Sequence[int]) -> tuple[list[str], list[str]]:
    """Token template of a full label sequence.

    Signature words of the coarser half of the levels go to arg1, the finer
    half to arg2, so distinct paths get distinct templates.
    """
    M = len(path)
    arg1: list[str] = []
    arg2: list[str] = []
    for m, sid in enumerate(path):
        words = [_signature(hierarchy, sid, k) for k in range(SIGNATURE_WORDS)]
        if M == 1:
            arg1 += words[:2]
            arg2 += words[2:]
        elif m < M / 2:
            arg1 += words
        else:
            arg2 += words
    return arg1, arg2


def synth_records(hierarchy: SenseHierarchy, n: int, noise: float, seed: int) -> list[dict]:
    """Deterministic synthetic records, leaves assigned round-robin then shuffled.

    A ``noise`` fraction of each instance's tokens (rounded) is replaced by
    words drawn uniformly from the synthetic vocabulary.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= noise < 1.0:
        raise ValueError("noise must lie in [0, 1)")
    rng = random.Random(seed)
    leaves = hierarchy.paths()
    vocab_words = synth_vocabulary_words(hierarchy)
    assigned = [leaves[i % len(leaves)] for i in range(n)]
    rng.shuffle(assigned)
    records = []
    for path in assigned:
        a1, a2 = leaf_template(hierarchy, path)
        tokens = a1 + a2
        k = round(noise * len(tokens))
        for pos in rng.sample(range(len(tokens)), k):
            tokens[pos] = rng.choice(vocab_words)
        records.append({
            "arg1": " ".join(tokens[:len(a1)]),
            "arg2": " ".join(tokens[len(a1):]),
            "senses": [list(hierarchy.names(path))],
        })
    return records


def synth_corpus(hierarchy: SenseHierarchy, n: int, noise: float, seed: int,
                 vocab: Vocabulary | None = None) -> list[Instance]:
    vocab = vocab or Vocabulary(synth_vocabulary_words(hierarchy))
    return [parse_record(r, hierarchy, vocab) for r in synth_records(hierarchy, n, noise, seed)]
