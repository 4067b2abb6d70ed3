"""Multi-chain script event prediction.

Corpora are lists of JSON Lines strings. Options use the same keys as the
configuration files and command-line flags, for example
``{"d-e": 16, "no-text": True}``.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Optional

from . import _core
from ._core import ConfigError, DataError, NumericError, Predictor

__all__ = [
    "ConfigError",
    "DataError",
    "NumericError",
    "Predictor",
    "gradcheck",
    "load",
    "option_names",
    "synthesize",
    "train",
]


def _options(options: Optional[Mapping[str, object]], extra: Mapping[str, object]) -> dict:
    merged = dict(options or {})
    merged.update({k.replace("_", "-"): v for k, v in extra.items()})
    return merged


def option_names() -> list[str]:
    return _core.option_names()


def synthesize(task: str = "combined", n_samples: int = 100, seed: int = 1, **options) -> list[str]:
    return _core.synthesize(_options(options, {"task": task, "n_samples": n_samples, "seed": seed}))


def train(
    train_lines: Iterable[str],
    dev_lines: Optional[Iterable[str]] = None,
    options: Optional[Mapping[str, object]] = None,
    **kwargs,
) -> Predictor:
    dev = list(dev_lines) if dev_lines is not None else None
    return _core.train(list(train_lines), dev, _options(options, kwargs))


def load(path: str) -> Predictor:
    return _core.load(str(path))


def gradcheck(lines: Iterable[str], options: Optional[Mapping[str, object]] = None, **kwargs) -> float:
    return _core.gradcheck(list(lines), _options(options, kwargs))
