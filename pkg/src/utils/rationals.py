"""Exact rational helpers and the "num/den" wire format."""

from fractions import Fraction
from typing import Union

from src.errors import ConfigError

Q = Fraction
RationalLike = Union[Fraction, int, str]


def to_q(value: RationalLike) -> Fraction:
    """
    Parse a rational from a Fraction, an int or a "num/den" string.

    Floats are refused: configs must carry exact values.

    Raises:
        ConfigError: If the value cannot be read exactly
    """
    if isinstance(value, bool):
        raise ConfigError(f"Expected a rational, got boolean {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise ConfigError(f"Invalid rational {value!r}: {e}") from e
    raise ConfigError(
        f"Expected a rational as int or 'num/den' string, got {type(value).__name__}"
    )


def qstr(value: Fraction) -> str:
    """Format a rational as "num/den" (integers as "n/1")."""
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


def ceil_q(value: Fraction) -> int:
    """Exact ceiling of a rational."""
    return -((-value.numerator) // value.denominator)


def bit_length_q(value: Fraction) -> int:
    """Bits needed to hold numerator and denominator."""
    return max(abs(value.numerator).bit_length(), value.denominator.bit_length())


def dyadic_threshold(bound: Fraction, bits: int = 53) -> int:
    """
    Integer t with ``n < t`` iff ``n / 2**bits < bound`` for every integer n.

    Used to compare 53-bit uniforms against exact cell boundaries without
    rounding.
    """
    return ceil_q(Fraction(bound) * (1 << bits))
