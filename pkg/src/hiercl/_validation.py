"""Input checks for the estimator interface."""

from __future__ import annotations

from typing import Sequence


def check_pairs(X) -> list[tuple[str, str]]:
    """Argument pairs as a list of ``(arg1, arg2)`` string tuples.

    Accepts any iterable of 2-item rows, including a 2-column numpy object array.
    """
    if isinstance(X, (str, bytes)):
        raise TypeError("X must be a sequence of (arg1, arg2) pairs, not a string")
    pairs = []
    for i, row in enumerate(X):
        row = tuple(row)
        if len(row) != 2:
            raise ValueError(f"X[{i}] has {len(row)} items; expected (arg1, arg2)")
        if not all(isinstance(a, str) for a in row):
            raise TypeError(f"X[{i}] must hold two strings")
        if not row[0].split() or not row[1].split():
            raise ValueError(f"X[{i}] has an empty argument")
        pairs.append(row)
    if not pairs:
        raise ValueError("X is empty")
    return pairs


def _is_name_sequence(obj) -> bool:
    return isinstance(obj, Sequence) and not isinstance(obj, str) and bool(obj) \
        and all(isinstance(s, str) for s in obj)


def check_label_sequences(y, n_samples: int) -> list[list[tuple[str, ...]]]:
    """Gold annotations normalised to a list of gold-sequence lists.

    Each entry of ``y`` is either one label sequence (names, top level first)
    or a list of such sequences for multi-gold instances.  All sequences must
    share the same depth.
    """
    if isinstance(y, str):
        raise TypeError("y must be a sequence of label sequences")
    out = []
    for i, entry in enumerate(y):
        if _is_name_sequence(entry):
            out.append([tuple(entry)])
        elif isinstance(entry, Sequence) and entry and all(_is_name_sequence(s) for s in entry):
            out.append([tuple(s) for s in entry])
        else:
            raise ValueError(f"y[{i}] is neither a label sequence nor a list of label sequences")
    if len(out) != n_samples:
        raise ValueError(f"X has {n_samples} rows but y has {len(out)}")
    depths = {len(s) for gold in out for s in gold}
    if len(depths) > 1:
        raise ValueError(f"label sequences have mixed depths {sorted(depths)}")
    return out
