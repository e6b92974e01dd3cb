"""Named-layer gradient containers and the exact arithmetic used on them."""

from __future__ import annotations

import math
from typing import Iterable, Iterator, Mapping

import numpy as np


class GradientSet:
    """Ordered collection of named, flat float64 gradient blocks.

    Layer order is insertion order and stays identical across every set
    produced within one training run. Arithmetic between two sets requires
    matching layer names and lengths; nothing broadcasts silently. Arrays
    are copied on construction and marked read-only, so instances are safe
    to share between threads.
    """

    __slots__ = ("_layers",)

    def __init__(self, layers: Mapping[str, np.ndarray]):
        store: dict[str, np.ndarray] = {}
        for name, values in layers.items():
            arr = np.array(values, dtype=np.float64, copy=True)
            if arr.ndim != 1:
                raise ValueError(
                    f"shape-mismatch: layer {name!r} must be a flat array, got ndim={arr.ndim}"
                )
            arr.setflags(write=False)
            store[name] = arr
        self._layers = store

    @classmethod
    def _wrap(cls, layers: dict[str, np.ndarray]) -> "GradientSet":
        """Adopt freshly created float64 arrays without copying them.

        Internal fast path: the caller guarantees the arrays are 1-D
        float64 and not aliased anywhere writable.
        """
        out = cls.__new__(cls)
        for arr in layers.values():
            arr.setflags(write=False)
        out._layers = layers
        return out

    @classmethod
    def zeros_like(cls, template: "GradientSet") -> "GradientSet":
        return cls._wrap({name: np.zeros(arr.shape[0]) for name, arr in template.items()})

    def layer_ids(self) -> tuple[str, ...]:
        return tuple(self._layers.keys())

    def lengths(self) -> dict[str, int]:
        return {name: arr.shape[0] for name, arr in self._layers.items()}

    def items(self) -> Iterable[tuple[str, np.ndarray]]:
        return self._layers.items()

    def __getitem__(self, name: str) -> np.ndarray:
        return self._layers[name]

    def __contains__(self, name: str) -> bool:
        return name in self._layers

    def __iter__(self) -> Iterator[str]:
        return iter(self._layers)

    def __len__(self) -> int:
        return len(self._layers)

    def __repr__(self) -> str:
        sizes = ", ".join(f"{k}[{v.shape[0]}]" for k, v in self._layers.items())
        return f"GradientSet({sizes})"

    def scale(self, coefficient: float) -> "GradientSet":
        """Elementwise multiple of every layer by a scalar."""
        return GradientSet._wrap({k: coefficient * v for k, v in self._layers.items()})

    def allclose(self, other: "GradientSet", rtol: float = 1e-12, atol: float = 0.0) -> bool:
        if self.layer_ids() != other.layer_ids():
            return False
        return all(
            np.allclose(self[k], other[k], rtol=rtol, atol=atol) for k in self.layer_ids()
        )


def _check_compatible(a: GradientSet, b: GradientSet) -> None:
    if a.layer_ids() != b.layer_ids():
        raise ValueError(
            f"shape-mismatch: layer ids differ: {a.layer_ids()} vs {b.layer_ids()}"
        )
    for name in a.layer_ids():
        if a[name].shape != b[name].shape:
            raise ValueError(
                f"shape-mismatch: layer {name!r} has length "
                f"{a[name].shape[0]} vs {b[name].shape[0]}"
            )


def l2_norm(g: GradientSet) -> float:
    """Global L2 norm over every element of every layer, concatenated."""
    if len(g) == 0:
        raise ValueError("empty-gradient: cannot take the norm of a gradient with no layers")
    return math.sqrt(sum(float(np.dot(v, v)) for _, v in g.items()))


def linear_combine(terms: list[tuple[float, GradientSet]]) -> GradientSet:
    """Elementwise sum of coefficient * gradient over the given terms.

    Summation runs in ascending term index, so repeated calls with the same
    inputs are bit-identical.
    """
    if not terms:
        raise ValueError("empty-combination: need at least one (coefficient, gradient) term")
    first_coeff, first = terms[0]
    for _, g in terms[1:]:
        _check_compatible(first, g)
    out = {name: first_coeff * arr for name, arr in first.items()}
    for coeff, g in terms[1:]:
        for name in out:
            out[name] += coeff * g[name]
    return GradientSet._wrap(out)
