"""Exact algebra of trigonometric polynomials and matrices of them.

A :class:`TrigPoly` is ``c0 + sum_k (a_k cos k*t + b_k sin k*t)`` with
rational coefficients. A :class:`TrigMat` is a dense grid of those. Products
are expanded with product-to-sum identities, so every result is again in
canonical form and equality is structural: two values are equal exactly when
they denote the same function.

Coefficients are :class:`fractions.Fraction`, which gives arbitrary precision
integers for free.
"""
from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "TrigPoly",
    "TrigMat",
    "NonzeroMeanError",
    "DimensionError",
    "saddle",
    "quarter_turn",
    "identity",
    "zeros",
    "block",
]


class DimensionError(ValueError):
    """Matrix shapes are incompatible for the requested operation."""


class NonzeroMeanError(ValueError):
    """A periodic primitive was requested for a function with nonzero mean."""


def _q(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    raise TypeError(f"exact rational expected, got {type(value).__name__}")


class TrigPoly:
    """Trigonometric polynomial in one angle variable with rational coefficients.

    Instances are immutable and hashable. ``harmonics`` maps a positive
    integer ``k`` to ``(cos_coeff, sin_coeff)``; harmonics whose two
    coefficients vanish are never stored.
    """

    __slots__ = ("_const", "_terms")

    def __init__(self, constant=0, harmonics: Mapping[int, tuple] | None = None):
        const = _q(constant)
        terms = []
        for k, (a, b) in sorted((harmonics or {}).items()):
            if not isinstance(k, int) or k <= 0:
                raise ValueError(f"harmonic index must be a positive integer, got {k!r}")
            a, b = _q(a), _q(b)
            if a or b:
                terms.append((k, a, b))
        self._const = const
        self._terms = tuple(terms)

    @classmethod
    def cos(cls, k: int, coeff=1) -> "TrigPoly":
        return cls(0, {k: (coeff, 0)}) if k else cls(coeff)

    @classmethod
    def sin(cls, k: int, coeff=1) -> "TrigPoly":
        return cls(0, {k: (0, coeff)}) if k else cls(0)

    @classmethod
    def _from_accumulator(cls, const: Fraction, acc: dict) -> "TrigPoly":
        return cls(const, {k: tuple(v) for k, v in acc.items()})

    @property
    def constant(self) -> Fraction:
        return self._const

    @property
    def harmonics(self) -> dict[int, tuple[Fraction, Fraction]]:
        return {k: (a, b) for k, a, b in self._terms}

    @property
    def max_harmonic(self) -> int:
        return self._terms[-1][0] if self._terms else 0

    def is_zero(self) -> bool:
        return not self._const and not self._terms

    def is_constant(self) -> bool:
        return not self._terms

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, TrigPoly):
            other = TrigPoly(_q(other))
        acc = {k: [a, b] for k, a, b in self._terms}
        for k, a, b in other._terms:
            slot = acc.setdefault(k, [Fraction(0), Fraction(0)])
            slot[0] += a
            slot[1] += b
        return TrigPoly._from_accumulator(self._const + other._const, acc)

    __radd__ = __add__

    def __neg__(self):
        return TrigPoly(-self._const, {k: (-a, -b) for k, a, b in self._terms})

    def __sub__(self, other):
        if not isinstance(other, TrigPoly):
            other = TrigPoly(_q(other))
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> "TrigPoly":
        c = _q(c)
        return TrigPoly(c * self._const, {k: (c * a, c * b) for k, a, b in self._terms})

    def __mul__(self, other):
        if not isinstance(other, TrigPoly):
            return self.scale(other)
        c0 = self._const * other._const
        acc: dict[int, list] = {}

        def put(n: int, cc, sc):
            # cc*cos(n t) + sc*sin(n t), n may be <= 0
            nonlocal c0
            if n < 0:
                n, sc = -n, -sc
            if n == 0:
                c0 += cc
                return
            slot = acc.setdefault(n, [Fraction(0), Fraction(0)])
            slot[0] += cc
            slot[1] += sc

        for k, a, b in self._terms:
            put(k, a * other._const, b * other._const)
        for k, a, b in other._terms:
            put(k, a * self._const, b * self._const)
        half = Fraction(1, 2)
        for j, a1, b1 in self._terms:
            for k, a2, b2 in other._terms:
                # cos j cos k, sin j sin k, sin j cos k, cos j sin k
                put(j - k, half * (a1 * a2 + b1 * b2), half * (b1 * a2 - a1 * b2))
                put(j + k, half * (a1 * a2 - b1 * b2), half * (b1 * a2 + a1 * b2))
        return TrigPoly._from_accumulator(c0, acc)

    def __rmul__(self, other):
        return self.scale(other)

    # -- calculus ---------------------------------------------------------
    def derivative(self) -> "TrigPoly":
        return TrigPoly(0, {k: (k * b, -k * a) for k, a, b in self._terms})

    def average(self) -> "TrigPoly":
        return TrigPoly(self._const)

    def fluctuation(self) -> "TrigPoly":
        return TrigPoly(0, self.harmonics)

    def antiderivative_zero_mean(self) -> "TrigPoly":
        if self._const:
            raise NonzeroMeanError(f"mean {self._const} != 0; no periodic primitive")
        return TrigPoly(0, {k: (Fraction(-b, k), Fraction(a, k)) for k, a, b in self._terms})

    # -- evaluation / display ---------------------------------------------
    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        out = np.full(tau.shape, float(self._const))
        for k, a, b in self._terms:
            if a:
                out = out + float(a) * np.cos(k * tau)
            if b:
                out = out + float(b) * np.sin(k * tau)
        return out if out.ndim else float(out)

    def __eq__(self, other):
        if not isinstance(other, TrigPoly):
            try:
                other = TrigPoly(_q(other))
            except TypeError:
                return NotImplemented
        return self._const == other._const and self._terms == other._terms

    def __hash__(self):
        return hash((self._const, self._terms))

    def __str__(self):
        parts = []
        if self._const:
            parts.append(str(self._const))
        for k, a, b in self._terms:
            arg = "t" if k == 1 else f"{k}t"
            for coeff, fn in ((a, "cos"), (b, "sin")):
                if not coeff:
                    continue
                if coeff == 1:
                    parts.append(f"{fn}({arg})")
                elif coeff == -1:
                    parts.append(f"-{fn}({arg})")
                else:
                    parts.append(f"{coeff}*{fn}({arg})")
        if not parts:
            return "0"
        text = parts[0]
        for p in parts[1:]:
            text += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
        return text

    def __repr__(self):
        return f"TrigPoly({self})"


_ZERO = TrigPoly()
_ONE = TrigPoly(1)


class TrigMat:
    """Dense immutable matrix of :class:`TrigPoly` entries."""

    __slots__ = ("_rows",)

    def __init__(self, entries: Sequence[Sequence]):
        rows = tuple(
            tuple(e if isinstance(e, TrigPoly) else TrigPoly(_q(e)) for e in row)
            for row in entries
        )
        if not rows or not rows[0]:
            raise DimensionError("matrix needs at least one row and one column")
        if any(len(r) != len(rows[0]) for r in rows):
            raise DimensionError("ragged rows")
        self._rows = rows

    @property
    def shape(self) -> tuple[int, int]:
        return len(self._rows), len(self._rows[0])

    @property
    def rows(self) -> int:
        return len(self._rows)

    @property
    def cols(self) -> int:
        return len(self._rows[0])

    def __getitem__(self, idx) -> TrigPoly:
        i, j = idx
        return self._rows[i][j]

    def entries(self) -> tuple[tuple[TrigPoly, ...], ...]:
        return self._rows

    def map(self, fn) -> "TrigMat":
        return TrigMat([[fn(e) for e in row] for row in self._rows])

    def _check_same(self, other: "TrigMat", op: str):
        if self.shape != other.shape:
            raise DimensionError(f"{op}: shapes {self.shape} and {other.shape} differ")

    def __add__(self, other: "TrigMat") -> "TrigMat":
        self._check_same(other, "add")
        return TrigMat([[a + b for a, b in zip(r, s)] for r, s in zip(self._rows, other._rows)])

    def __sub__(self, other: "TrigMat") -> "TrigMat":
        self._check_same(other, "sub")
        return TrigMat([[a - b for a, b in zip(r, s)] for r, s in zip(self._rows, other._rows)])

    def __neg__(self) -> "TrigMat":
        return self.map(lambda e: -e)

    def scale(self, c) -> "TrigMat":
        c = _q(c)
        return self.map(lambda e: e.scale(c))

    def __mul__(self, c) -> "TrigMat":
        if isinstance(c, TrigMat):
            return self @ c
        return self.scale(c)

    __rmul__ = scale

    def __matmul__(self, other: "TrigMat") -> "TrigMat":
        if self.cols != other.rows:
            raise DimensionError(f"mul: inner dimensions {self.shape} x {other.shape}")
        out = []
        for row in self._rows:
            new_row = []
            for j in range(other.cols):
                acc = _ZERO
                for k, e in enumerate(row):
                    f = other._rows[k][j]
                    if not e.is_zero() and not f.is_zero():
                        acc = acc + e * f
                new_row.append(acc)
            out.append(new_row)
        return TrigMat(out)

    def commutator(self, other: "TrigMat") -> "TrigMat":
        if self.rows != self.cols or self.shape != other.shape:
            raise DimensionError("commutator needs square matrices of equal size")
        return self @ other - other @ self

    def derivative(self) -> "TrigMat":
        return self.map(TrigPoly.derivative)

    def average(self) -> "TrigMat":
        return self.map(TrigPoly.average)

    def fluctuation(self) -> "TrigMat":
        return self.map(TrigPoly.fluctuation)

    def antiderivative_zero_mean(self) -> "TrigMat":
        if not self.average().is_zero():
            raise NonzeroMeanError("matrix has nonzero mean; no periodic primitive")
        return self.map(TrigPoly.antiderivative_zero_mean)

    def is_zero(self) -> bool:
        return all(e.is_zero() for row in self._rows for e in row)

    def is_constant(self) -> bool:
        return all(e.is_constant() for row in self._rows for e in row)

    @property
    def max_harmonic(self) -> int:
        return max(e.max_harmonic for row in self._rows for e in row)

    def block(self, i: int, j: int, size: int = 2) -> "TrigMat":
        """Return the (i, j) block of a matrix tiled into ``size`` x ``size`` blocks."""
        return TrigMat([r[j * size:(j + 1) * size] for r in self._rows[i * size:(i + 1) * size]])

    def eval(self, tau: float) -> np.ndarray:
        return np.array([[e(tau) for e in row] for row in self._rows], dtype=float)

    def __eq__(self, other):
        if not isinstance(other, TrigMat):
            return NotImplemented
        return self._rows == other._rows

    def __hash__(self):
        return hash(self._rows)

    def __str__(self):
        cells = [[str(e) for e in row] for row in self._rows]
        width = max(len(c) for row in cells for c in row)
        return "\n".join("[ " + "  ".join(c.rjust(width) for c in row) + " ]" for row in cells)

    def __repr__(self):
        return f"TrigMat({[[str(e) for e in row] for row in self._rows]!r})"


def zeros(rows: int, cols: int | None = None) -> TrigMat:
    return TrigMat([[_ZERO] * (cols or rows) for _ in range(rows)])


def identity(n: int) -> TrigMat:
    return TrigMat([[_ONE if i == j else _ZERO for j in range(n)] for i in range(n)])


def saddle() -> TrigMat:
    """The reflection S(t) = [[cos 2t, sin 2t], [sin 2t, -cos 2t]]."""
    c, s = TrigPoly.cos(2), TrigPoly.sin(2)
    return TrigMat([[c, s], [s, -c]])


def quarter_turn() -> TrigMat:
    """J = [[0, -1], [1, 0]], the counterclockwise quarter turn."""
    return TrigMat([[0, -1], [1, 0]])


def block(grid: Sequence[Sequence[TrigMat | int]], size: int = 2) -> TrigMat:
    """Assemble a matrix from ``size`` x ``size`` blocks; ``0`` stands for a zero block."""
    rows = []
    for brow in grid:
        mats = [zeros(size) if isinstance(b, int) and b == 0 else b for b in brow]
        for r in range(size):
            rows.append([e for m in mats for e in m.entries()[r]])
    return TrigMat(rows)


def from_numbers(values: Iterable[Iterable]) -> TrigMat:
    return TrigMat([[TrigPoly(_q(v)) for v in row] for row in values])
