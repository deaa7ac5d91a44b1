"""Helpers for strings over {-1, +1}."""

from __future__ import annotations

import itertools

import numpy as np

from .errors import DomainError

_SYMBOLS = {"+": 1, "-": -1}


def as_bits(x, allow_empty: bool = False) -> np.ndarray:
    """Coerce ``x`` to an int8 array over {-1, +1}.

    Accepts a sequence of +-1 integers or a string of ``+``/``-`` characters.
    """
    if isinstance(x, str):
        try:
            arr = np.array([_SYMBOLS[c] for c in x], dtype=np.int8)
        except KeyError as exc:
            raise DomainError(f"invalid symbol {exc.args[0]!r} in {x!r}") from None
    else:
        arr = np.asarray(x)
        if arr.ndim != 1:
            raise DomainError("input string must be one-dimensional")
        if arr.size and not np.all((arr == 1) | (arr == -1)):
            raise DomainError("input string entries must be -1 or +1")
        arr = arr.astype(np.int8)
    if arr.size == 0 and not allow_empty:
        raise DomainError("input string must be non-empty")
    return arr


def bits_to_str(x) -> str:
    return "".join("+" if v > 0 else "-" for v in np.asarray(x))


def all_strings(n: int) -> np.ndarray:
    """All of {-1,+1}^n as rows, in lexicographic order with -1 < +1."""
    if n < 1:
        raise DomainError("n must be >= 1")
    return np.array(list(itertools.product((-1, 1), repeat=n)), dtype=np.int8)


def lex_key(x) -> tuple:
    return tuple(int(v) for v in x)


def input_poly_eval(x, w) -> complex:
    """P_x(w) = sum_i x_i w^(i-1), by Horner's rule."""
    acc = 0j
    for v in as_bits(x)[::-1]:
        acc = acc * w + int(v)
    return complex(acc)
