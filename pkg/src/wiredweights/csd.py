"""Canonical signed digit encoding, shift-add plans and zero-weight pruning."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import QuantizedWeightMatrix, signed_range


@dataclass(frozen=True)
class CsdForm:
    digits: tuple[int, ...]  # most-significant first, each in {-1, 0, +1}
    width: int

    def value(self) -> int:
        v = 0
        for d in self.digits:
            v = 2 * v + d
        return v

    @property
    def nonzero(self) -> int:
        return sum(1 for d in self.digits if d)

    def __str__(self):
        return "".join({1: "1", 0: "0", -1: "T"}[d] for d in self.digits)


def _csd_lsb_first(value: int) -> list[int]:
    # Reitwiesner recoding: a 1 followed by a 1 (looking at v mod 4 == 3) emits -1 and carries
    out = []
    v = value
    while v:
        if v & 1:
            d = 2 - (v & 3)
            out.append(d)
            v -= d
        else:
            out.append(0)
        v >>= 1
    return out


def csd_encode(value: int, width: int) -> CsdForm:
    """CSD digits of a signed ``width``-bit integer, ``width + 1`` digits MSB first.

    The extra digit is needed because e.g. 7 in 4 bits recodes to 100T.
    """
    lo, hi = signed_range(width)
    if not lo <= value <= hi:
        raise ValueError(f"{value} outside signed {width}-bit range [{lo}, {hi}]")
    lsb = _csd_lsb_first(value)
    lsb += [0] * (width + 1 - len(lsb))
    return CsdForm(tuple(reversed(lsb)), width)


def binary_popcount(value: int, width: int) -> int:
    """Set bits of the ``width``-bit two's-complement word."""
    return bin(value & ((1 << width) - 1)).count("1")


@dataclass(frozen=True)
class ShiftAddPlan:
    """``value = sum(sign * 2**shift for sign, shift in terms)``.

    ``scale_exp`` is the grid the weight was quantized on, so every shift is
    ``>= scale_exp`` and ``shift - scale_exp`` is the left-shift applied to an
    integer input in hardware.
    """

    terms: tuple[tuple[int, int], ...]
    scale_exp: int

    def __post_init__(self):
        shifts = [s for _, s in self.terms]
        if any(a <= b for a, b in zip(shifts, shifts[1:])):
            raise ValueError("plan shifts must be strictly decreasing")
        if any(sign not in (-1, 1) for sign, _ in self.terms):
            raise ValueError("term signs must be +-1")
        if any(s < self.scale_exp for s in shifts):
            raise ValueError("term shift below the weight grid")

    def value(self) -> float:
        return float(sum(sign * 2.0 ** s for sign, s in self.terms))

    def integer(self) -> int:
        """The quantized integer ``q``: value on the ``2**scale_exp`` grid."""
        return sum(sign << (s - self.scale_exp) for sign, s in self.terms)

    def int_terms(self) -> list[tuple[int, int]]:
        return [(sign, s - self.scale_exp) for sign, s in self.terms]

    def __len__(self):
        return len(self.terms)


def plan_weight(q: int, scale_exp: int, mode: str = "csd", width: int = 4) -> ShiftAddPlan:
    """Decompose ``q * 2**scale_exp`` into signed power-of-two terms.

    ``binary`` mode reads the two's-complement bits directly (MSB carries
    weight ``-2**(width-1)``) and serves as the no-recoding baseline.
    """
    lo, hi = signed_range(width)
    if not lo <= q <= hi:
        raise ValueError(f"weight {q} outside signed {width}-bit range")
    if mode == "csd":
        digits = csd_encode(q, width).digits
        n = len(digits)
        terms = [(d, n - 1 - i + scale_exp) for i, d in enumerate(digits) if d]
    elif mode == "binary":
        word = q & ((1 << width) - 1)
        terms = []
        for bit in range(width - 1, -1, -1):
            if word >> bit & 1:
                sign = -1 if bit == width - 1 else 1
                terms.append((sign, bit + scale_exp))
    else:
        raise ValueError(f"unknown plan mode {mode!r}")
    return ShiftAddPlan(tuple(terms), scale_exp)


@dataclass(frozen=True)
class PruneReport:
    threshold: float
    pruned_count: int
    total_count: int
    already_zero: int

    @property
    def pruned_fraction(self) -> float:
        return self.pruned_count / self.total_count if self.total_count else 0.0


def prune_weights(m: QuantizedWeightMatrix, threshold: float):
    """Zero every weight whose dequantized magnitude is below ``threshold``.

    Weights that were already zero count under ``already_zero``, not as pruned.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    v = m.values
    below = np.abs(v) * 2.0 ** m.scale_exp < threshold
    already = int(np.count_nonzero(v == 0))
    pruned = int(np.count_nonzero(below & (v != 0)))
    out = QuantizedWeightMatrix(np.where(below, 0, v), m.scale_exp, m.width)
    return out, PruneReport(threshold, pruned, int(v.size), already)


def csd_stats(width: int) -> dict:
    """Mean nonzero digits, CSD vs two's-complement binary, over every signed ``width``-bit value."""
    if not 2 <= width <= 16:
        raise ValueError("width must be in [2, 16]")
    lo, hi = signed_range(width)
    n = hi - lo + 1
    csd_total = sum(csd_encode(v, width).nonzero for v in range(lo, hi + 1))
    bin_total = sum(binary_popcount(v, width) for v in range(lo, hi + 1))
    mean_csd, mean_bin = csd_total / n, bin_total / n
    return {
        "width": width,
        "mean_nonzero_csd": mean_csd,
        "mean_nonzero_binary": mean_bin,
        "reduction_ratio": 1 - mean_csd / mean_bin,
    }
