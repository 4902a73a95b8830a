"""Working-precision policy for cancellation-prone exponential sums.

Residue/Jordan coefficients are exact rationals, but evaluating their sums
destroys up to log2(max|coefficient|) bits through cancellation.  The
policy decides how many mantissa bits the evaluation runs at; in auto mode
the requirement is probed with the t=0 reconstruction defect (the rounded
coefficients must sum back to the known Kronecker delta), which is a cheap
and sharp detector because the exact answer is known.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction

import mpmath

DOUBLE_BITS = 53
_ENV_CAP = "DICKE_MAX_BITS"


def default_max_bits() -> int:
    return int(os.environ.get(_ENV_CAP, "16384"))


class PrecisionError(ArithmeticError):
    """Raised when the precision cap cannot reach the target defect."""

    def __init__(self, message: str, defect: float, bits: int):
        super().__init__(message)
        self.defect = defect
        self.bits = bits


@dataclass(frozen=True)
class PrecisionPolicy:
    mode: str = "auto"               # "double" | "bits" | "auto"
    mantissa_bits: int = DOUBLE_BITS
    escalation_factor: float = 2.0
    target_defect: float = 1e-12
    max_bits: int = 0                # 0 -> environment default

    def __post_init__(self):
        if self.mode not in ("double", "bits", "auto"):
            raise ValueError(f"unknown precision mode {self.mode!r}")
        if self.mantissa_bits < 2:
            raise ValueError("mantissa_bits must be at least 2")
        if self.escalation_factor <= 1.0:
            raise ValueError("escalation_factor must exceed 1")
        if self.max_bits == 0:
            object.__setattr__(self, "max_bits", default_max_bits())

    @classmethod
    def double(cls) -> "PrecisionPolicy":
        return cls(mode="double", mantissa_bits=DOUBLE_BITS)

    @classmethod
    def bits(cls, mantissa_bits: int) -> "PrecisionPolicy":
        return cls(mode="bits", mantissa_bits=mantissa_bits)

    @classmethod
    def auto(cls, target_defect: float = 1e-12, start_bits: int = DOUBLE_BITS,
             escalation_factor: float = 2.0, max_bits: int = 0) -> "PrecisionPolicy":
        return cls(mode="auto", mantissa_bits=start_bits, target_defect=target_defect,
                   escalation_factor=escalation_factor, max_bits=max_bits)


def fraction_to_float(value: Fraction) -> float:
    """Round an exact rational to float64; overflow maps to signed inf."""
    try:
        return float(value)
    except OverflowError:
        return math.inf if value > 0 else -math.inf


def fraction_to_mpf(value: Fraction):
    """Round an exact rational to an mpf at the ambient working precision."""
    return mpmath.mpf(value.numerator) / mpmath.mpf(value.denominator)


def _mpf_to_fraction(x) -> Fraction:
    sign, man, exp, _ = x._mpf_
    if man == 0:
        if x == 0:
            return Fraction(0)
        raise OverflowError("non-finite value")
    fr = Fraction(man << exp) if exp >= 0 else Fraction(man, 1 << -exp)
    return -fr if sign else fr


def rounding_defect(consts: list[Fraction], delta: int, bits: int) -> float:
    """|sum of b-bit roundings - delta|, the rational sum taken exactly.

    Summing the rounded values in working precision can absorb the
    residual entirely (the largest near-cancelling pair may round to the
    same representable number), so the defect is accumulated exactly to
    stay a faithful gauge of the per-coefficient rounding loss.
    """
    try:
        if bits <= DOUBLE_BITS:
            total = sum((Fraction(fraction_to_float(c)) for c in consts), Fraction(0))
        else:
            with mpmath.workprec(bits):
                total = sum((_mpf_to_fraction(fraction_to_mpf(c)) for c in consts),
                            Fraction(0))
    except (OverflowError, ValueError):
        return math.inf
    defect = total - delta
    return abs(fraction_to_float(defect))


def resolve_bits(consts: list[Fraction], delta: int, policy: PrecisionPolicy) -> tuple[int, float]:
    """Pick the evaluation precision for a term list whose constant parts
    must reconstruct `delta` at t=0.  Returns (bits, achieved defect)."""
    if policy.mode == "double":
        return DOUBLE_BITS, rounding_defect(consts, delta, DOUBLE_BITS)
    if policy.mode == "bits":
        return policy.mantissa_bits, rounding_defect(consts, delta, policy.mantissa_bits)
    bits = policy.mantissa_bits
    while True:
        defect = rounding_defect(consts, delta, bits)
        if defect <= policy.target_defect:
            return bits, defect
        if bits >= policy.max_bits:
            raise PrecisionError(
                f"t=0 reconstruction defect {defect:.3e} above target "
                f"{policy.target_defect:.3e} at the {policy.max_bits}-bit cap",
                defect=defect, bits=bits)
        bits = min(policy.max_bits, math.ceil(bits * policy.escalation_factor))
