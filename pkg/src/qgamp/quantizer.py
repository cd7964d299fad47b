"""Scalar quantizers: regular, binned (non-regular) and uniform modulo.

A quantizer is described by a fine regular encoder (sorted thresholds) whose
cell indices are mapped to coarse labels by a binning map.  Cells are
half-open, ``[b_{i-1}, b_i)``, so a sample sitting exactly on a threshold
belongs to the upper cell.  Coarse labels are 1-indexed.

The modulo quantizer ``floor(s / step) mod n`` has infinitely many fine
cells.  Whenever its cells have to be listed, they are truncated to a window
``mean +/- WINDOW_RADIUS * std`` of a Gaussian context supplied by the
caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, NamedTuple

import numpy as np

from .truncnorm import interval_moments

WINDOW_RADIUS = 8.0

REGULAR = "regular"
BINNED = "binned"
MODULO = "modulo"
_KINDS = (REGULAR, BINNED, MODULO)


class QuantizerError(ValueError):
    """Invalid quantizer construction or use."""


class InvalidLabelError(QuantizerError):
    pass


class ConfigurationError(QuantizerError):
    pass


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise QuantizerError(f"empty interval [{self.lo}, {self.hi})")

    def __contains__(self, s: float) -> bool:
        return self.lo <= s < self.hi


@dataclass(frozen=True)
class CellSet:
    """Union of disjoint half-open intervals, sorted by lower end."""

    intervals: tuple[Interval, ...]

    def __post_init__(self):
        if not self.intervals:
            raise QuantizerError("a cell set needs at least one interval")
        for left, right in zip(self.intervals, self.intervals[1:]):
            if right.lo < left.hi:
                raise QuantizerError("cell intervals must be sorted and disjoint")

    @classmethod
    def from_bounds(cls, bounds) -> CellSet:
        return cls(tuple(Interval(float(lo), float(hi)) for lo, hi in bounds))

    def __contains__(self, s: float) -> bool:
        return any(s in iv for iv in self.intervals)

    def __len__(self) -> int:
        return len(self.intervals)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([iv.lo for iv in self.intervals])
        hi = np.array([iv.hi for iv in self.intervals])
        return lo, hi


@dataclass(frozen=True)
class GaussianSource:
    mean: float = 0.0
    variance: float = 1.0

    def __post_init__(self):
        if not (self.variance > 0 and math.isfinite(self.variance)):
            raise QuantizerError("source variance must be positive and finite")

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def window(self, radius: float = WINDOW_RADIUS) -> tuple[float, float]:
        return self.mean - radius * self.std, self.mean + radius * self.std


class CellTable(NamedTuple):
    """Padded interval bounds for every label: arrays of shape ``(K, k_max)``.

    Padding entries have ``nan`` bounds and carry no mass.
    """

    lo: np.ndarray
    hi: np.ndarray


@dataclass(frozen=True)
class ScalarQuantizer:
    """K-label scalar quantizer.

    Use the constructors :meth:`regular`, :meth:`uniform`, :meth:`binned` and
    :meth:`modulo` rather than building instances directly.

    Attributes
    ----------
    kind : str
        ``"regular"``, ``"binned"`` or ``"modulo"``.
    thresholds : tuple of float
        Interior fine thresholds ``b_1 < ... < b_{K'-1}`` (empty for modulo).
    levels : tuple of float or None
        Decoder output per fine cell.  Only distortion and Lloyd use them.
    binning : tuple of int
        Coarse label (1-based) of each fine cell.
    step, n_modulo :
        Cell width and label count of a modulo quantizer.
    """

    kind: str
    thresholds: tuple[float, ...] = ()
    levels: tuple[float, ...] | None = None
    binning: tuple[int, ...] = (1,)
    step: float | None = None
    n_modulo: int | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise QuantizerError(f"unknown quantizer kind {self.kind!r}")
        if self.kind == MODULO:
            if self.step is None or not (self.step > 0 and math.isfinite(self.step)):
                raise QuantizerError("modulo step must be positive")
            if self.n_modulo is None or self.n_modulo < 1:
                raise QuantizerError("modulo label count must be >= 1")
            return
        t = np.asarray(self.thresholds, dtype=float)
        if not np.all(np.isfinite(t)):
            raise QuantizerError("thresholds must be finite")
        if np.any(np.diff(t) <= 0):
            raise QuantizerError("thresholds must be strictly increasing")
        n_fine = len(t) + 1
        if len(self.binning) != n_fine:
            raise QuantizerError(f"binning has {len(self.binning)} entries, expected {n_fine}")
        labels = set(self.binning)
        if labels != set(range(1, max(labels) + 1)):
            raise QuantizerError("binning must be surjective onto 1..K")
        if self.kind == REGULAR and tuple(self.binning) != tuple(range(1, n_fine + 1)):
            raise QuantizerError("a regular quantizer has identity binning")
        if self.levels is not None and len(self.levels) != n_fine:
            raise QuantizerError(f"expected {n_fine} decoder levels, got {len(self.levels)}")

    # -- constructors -----------------------------------------------------

    @classmethod
    def regular(cls, thresholds, levels=None) -> ScalarQuantizer:
        t = tuple(float(v) for v in thresholds)
        lv = None if levels is None else tuple(float(v) for v in levels)
        return cls(REGULAR, t, lv, tuple(range(1, len(t) + 2)))

    @classmethod
    def binned(cls, thresholds, binning, levels=None) -> ScalarQuantizer:
        t = tuple(float(v) for v in thresholds)
        lv = None if levels is None else tuple(float(v) for v in levels)
        return cls(BINNED, t, lv, tuple(int(b) for b in binning))

    @classmethod
    def modulo(cls, step: float, n_labels: int) -> ScalarQuantizer:
        return cls(MODULO, step=float(step), n_modulo=int(n_labels), binning=())

    @classmethod
    def uniform(cls, n_levels: int, half_width: float, center: float = 0.0) -> ScalarQuantizer:
        """Uniform regular quantizer with granular region ``center +/- half_width``.

        The two outer cells are unbounded.  Decoder levels are the midpoints
        of the ``n_levels`` equal-width granular cells.
        """
        if n_levels < 2:
            raise QuantizerError("a uniform quantizer needs at least 2 levels")
        if not half_width > 0:
            raise QuantizerError("loading half-width must be positive")
        delta = 2.0 * half_width / n_levels
        edges = center - half_width + delta * np.arange(1, n_levels)
        levels = center - half_width + delta * (np.arange(n_levels) + 0.5)
        return cls.regular(edges, levels)

    def with_levels(self, levels) -> ScalarQuantizer:
        lv = None if levels is None else tuple(float(v) for v in levels)
        return ScalarQuantizer(self.kind, self.thresholds, lv, self.binning, self.step, self.n_modulo)

    # -- structure --------------------------------------------------------

    @property
    def n_labels(self) -> int:
        if self.kind == MODULO:
            return self.n_modulo
        return max(self.binning)

    @property
    def n_fine(self) -> int | None:
        return None if self.kind == MODULO else len(self.thresholds) + 1

    @cached_property
    def _thresholds(self) -> np.ndarray:
        return np.asarray(self.thresholds, dtype=float)

    @cached_property
    def _binning(self) -> np.ndarray:
        return np.asarray(self.binning, dtype=np.int64)

    def boundaries(self, context: GaussianSource | None = None) -> np.ndarray:
        """Finite cell boundaries (for modulo: those inside the context window)."""
        if self.kind != MODULO:
            return self._thresholds.copy()
        lo, hi = self._window(context)
        k = np.arange(math.ceil(lo / self.step), math.floor(hi / self.step) + 1)
        return k * self.step

    def _window(self, context):
        if context is None:
            raise ConfigurationError("a modulo quantizer needs a Gaussian context to list cells")
        return context.window()

    # -- encoder ----------------------------------------------------------

    def fine_index(self, s):
        """0-based fine cell index (not defined for modulo)."""
        if self.kind == MODULO:
            raise ConfigurationError("modulo quantizers have no finite fine index")
        s = _check_finite(s)
        return np.searchsorted(self._thresholds, s, side="right")

    def encode(self, s):
        """Coarse label(s) in ``1..K`` for finite input(s)."""
        s = _check_finite(s)
        if self.kind == MODULO:
            out = np.mod(np.floor(s / self.step).astype(np.int64), self.n_modulo) + 1
        else:
            out = self._binning[np.searchsorted(self._thresholds, s, side="right")]
        return int(out) if np.ndim(out) == 0 else out

    def decode(self, labels):
        """Decoder output for coarse labels of a regular quantizer."""
        if self.kind != REGULAR:
            raise ConfigurationError("decoding coarse labels requires a regular quantizer")
        if self.levels is None:
            raise ConfigurationError("quantizer has no decoder levels")
        labels = np.asarray(labels)
        self._check_labels(labels)
        return np.asarray(self.levels)[labels - 1]

    def _check_labels(self, labels):
        labels = np.asarray(labels)
        if labels.size and (labels.min() < 1 or labels.max() > self.n_labels):
            raise InvalidLabelError(f"labels must lie in 1..{self.n_labels}")

    # -- cells ------------------------------------------------------------

    def fine_cells(self, context: GaussianSource | None = None):
        """Fine cells as ``(lo, hi, label)`` arrays, in increasing order."""
        if self.kind == MODULO:
            lo_w, hi_w = self._window(context)
            k = np.arange(math.floor(lo_w / self.step), math.ceil(hi_w / self.step))
            lo = k * self.step
            hi = (k + 1) * self.step
            keep = (lo < hi_w) & (hi > lo_w)
            k, lo, hi = k[keep], lo[keep], hi[keep]
            return lo, hi, np.mod(k, self.n_modulo) + 1
        t = self._thresholds
        lo = np.concatenate(([-np.inf], t))
        hi = np.concatenate((t, [np.inf]))
        return lo, hi, self._binning.copy()

    def cell_set(self, label: int, context: GaussianSource | None = None) -> CellSet:
        """Inverse image of ``label`` as a union of intervals.

        Adjacent fine cells sharing a label are merged.
        """
        if not 1 <= int(label) <= self.n_labels:
            raise InvalidLabelError(f"label {label} outside 1..{self.n_labels}")
        lo, hi, lab = self.fine_cells(context)
        sel = lab == int(label)
        if not sel.any():
            raise InvalidLabelError(f"label {label} has no cell inside the context window")
        return CellSet.from_bounds(_merge(lo[sel], hi[sel]))

    def cell_table(self, context: GaussianSource | None = None) -> CellTable:
        """Padded bounds of every label's cell set, row ``l - 1`` for label ``l``."""
        # A modulo label may have no cell inside a narrow window; its row stays empty.
        lo_f, hi_f, lab = self.fine_cells(context)
        cells = [_merge(lo_f[lab == label], hi_f[lab == label]) for label in range(1, self.n_labels + 1)]
        width = max(1, max(len(c) for c in cells))
        lo = np.full((len(cells), width), np.nan)
        hi = np.full((len(cells), width), np.nan)
        for i, c in enumerate(cells):
            if c:
                lo[i, : len(c)], hi[i, : len(c)] = np.asarray(c).T
        return CellTable(lo, hi)

    # -- serialisation ----------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        if self.kind == MODULO:
            return {"kind": MODULO, "step": self.step, "labels": self.n_modulo}
        out: dict[str, Any] = {"kind": self.kind, "thresholds": list(self.thresholds)}
        if self.levels is not None:
            out["levels"] = list(self.levels)
        if self.kind == BINNED:
            out["binning"] = list(self.binning)
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ScalarQuantizer:
        data = dict(data)
        kind = data.pop("kind", None)
        allowed = {
            REGULAR: {"thresholds", "levels"},
            BINNED: {"thresholds", "levels", "binning"},
            MODULO: {"step", "labels"},
        }
        if kind not in allowed:
            raise QuantizerError(f"unknown quantizer kind {kind!r}")
        unknown = set(data) - allowed[kind]
        if unknown:
            raise QuantizerError(f"unknown quantizer keys: {sorted(unknown)}")
        if kind == MODULO:
            return cls.modulo(data["step"], data["labels"])
        if kind == BINNED:
            return cls.binned(data["thresholds"], data["binning"], data.get("levels"))
        return cls.regular(data["thresholds"], data.get("levels"))


def _check_finite(s):
    s = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s)):
        raise QuantizerError("quantizer input must be finite")
    return s


def _merge(lo, hi):
    out = []
    for a, b in zip(lo, hi):
        if out and out[-1][1] == a:
            out[-1][1] = b
        else:
            out.append([a, b])
    return out


def measurement_distortion(q: ScalarQuantizer, src: GaussianSource) -> float:
    """Mean squared error ``E[(s - decode(encode(s)))^2]`` for ``s ~ src``."""
    if q.levels is None:
        raise ConfigurationError("distortion needs decoder levels")
    lo, hi, _ = q.fine_cells(src)
    log_mass, m, v = interval_moments(lo, hi, src.mean, src.variance)
    mass = np.exp(log_mass)
    levels = np.asarray(q.levels)
    return float(np.sum(mass * (v + (m - levels) ** 2)))
