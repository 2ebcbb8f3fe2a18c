"""Small shared helpers: stable seed derivation and fitted-state checks."""

from __future__ import annotations

import hashlib

from sklearn.exceptions import NotFittedError

__all__ = ["derive_seed", "require_fitted", "SkipWord"]


class SkipWord(LookupError):
    """No replacement candidate is available for a token.

    Attack loops catch this and move on to the next candidate position
    without consuming budget.
    """


def derive_seed(master: int, *keys: object) -> int:
    """Derive a child seed from a master seed and arbitrary string-able keys.

    Uses SHA-256 so the derivation is stable across runs, platforms, and
    Python processes (unlike ``hash``), which keeps per-document randomness
    independent of batch order and scheduling.
    """
    h = hashlib.sha256()
    h.update(str(int(master)).encode())
    for key in keys:
        h.update(b"\x1f")
        h.update(str(key).encode())
    return int.from_bytes(h.digest()[:8], "big")


def require_fitted(est: object, attr: str) -> None:
    if not hasattr(est, attr):
        raise NotFittedError(
            f"{type(est).__name__} is not fitted yet; call fit() before using it"
        )
