"""Arithmetic in GF(q) for prime powers q <= 64.

Elements are canonical integers in ``[0, q)``: the base-``p`` digits of the
integer are the coefficients (low degree first) of the polynomial that
represents the element modulo the reduction polynomial.  All four operations
are tabulated once per field, so hot loops elsewhere in the package work on
plain ints and index into ``FieldSpec.add`` / ``FieldSpec.mul``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

MAX_Q = 64


class FieldError(ValueError):
    pass


class NotPrimePower(FieldError):
    pass


class Unsupported(FieldError):
    pass


class SpecMismatch(FieldError):
    pass


class DivisionByZero(FieldError, ZeroDivisionError):
    pass


def _factor_prime_power(q: int) -> tuple[int, int]:
    if q < 2:
        raise NotPrimePower(f"{q} is not a prime power")
    p = next(d for d in range(2, q + 1) if q % d == 0)
    m, rest = 0, q
    while rest % p == 0:
        rest //= p
        m += 1
    if rest != 1:
        raise NotPrimePower(f"{q} has at least two distinct prime factors")
    return p, m


# polynomials over GF(p) as coefficient lists, lowest degree first


def _poly_mod(a: list[int], b: list[int], p: int) -> list[int]:
    a = list(a)
    inv_lead = pow(b[-1], p - 2, p)
    while len(a) >= len(b):
        coef = a[-1] * inv_lead % p
        shift = len(a) - len(b)
        for i, c in enumerate(b):
            a[shift + i] = (a[shift + i] - coef * c) % p
        while a and a[-1] == 0:
            a.pop()
    return a


def _monic_polys(p: int, degree: int):
    for low in itertools.product(range(p), repeat=degree):
        yield list(low) + [1]


def is_irreducible(poly: list[int], p: int) -> bool:
    """Trial division by every monic polynomial of degree <= deg/2."""
    m = len(poly) - 1
    if m < 1 or poly[-1] != 1:
        return False
    for d in range(1, m // 2 + 1):
        for g in _monic_polys(p, d):
            if not _poly_mod(poly, g, p):
                return False
    return True


def _least_irreducible(p: int, m: int) -> tuple[int, ...]:
    # product() over the low coefficients, read as base-p digits, enumerates
    # the candidates in increasing integer order.
    for low in itertools.product(range(p), repeat=m):
        cand = list(reversed(low)) + [1]
        if is_irreducible(cand, p):
            return tuple(cand)
    raise AssertionError("no irreducible polynomial found")


@dataclass(frozen=True, eq=False)
class FieldSpec:
    """GF(p^m) with a fixed monic reduction polynomial.

    ``reduction_poly`` lists the coefficients lowest degree first including
    the leading 1, and is empty for prime fields.
    """

    p: int
    m: int
    reduction_poly: tuple[int, ...] = ()
    add: tuple[tuple[int, ...], ...] = field(default=(), repr=False)
    mul: tuple[tuple[int, ...], ...] = field(default=(), repr=False)
    neg: tuple[int, ...] = field(default=(), repr=False)
    inv: tuple[int, ...] = field(default=(), repr=False)

    @property
    def q(self) -> int:
        return self.p**self.m

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FieldSpec):
            return NotImplemented
        return (self.p, self.m, self.reduction_poly) == (other.p, other.m, other.reduction_poly)

    def __hash__(self) -> int:
        return hash((self.p, self.m, self.reduction_poly))

    def sub(self, a: int, b: int) -> int:
        return self.add[a][self.neg[b]]

    def div(self, a: int, b: int) -> int:
        if b == 0:
            raise DivisionByZero("division by zero in GF(%d)" % self.q)
        return self.mul[a][self.inv[b]]

    def element(self, value: int) -> "FieldElement":
        return FieldElement(self, value)

    def elements(self) -> list["FieldElement"]:
        return [FieldElement(self, v) for v in range(self.q)]

    def to_dict(self) -> dict:
        return {"p": self.p, "m": self.m, "poly": list(self.reduction_poly)}

    @classmethod
    def from_dict(cls, data: dict) -> "FieldSpec":
        spec = field_make(data["p"] ** data["m"])
        if list(spec.reduction_poly) != list(data.get("poly", [])):
            raise Unsupported("only the built-in reduction polynomial is supported")
        return spec


def _digits(x: int, p: int, m: int) -> list[int]:
    out = []
    for _ in range(m):
        out.append(x % p)
        x //= p
    return out


def _undigits(d: list[int], p: int) -> int:
    return sum(c * p**i for i, c in enumerate(d))


def _build(p: int, m: int, poly: tuple[int, ...]) -> FieldSpec:
    q = p**m
    digits = [_digits(x, p, m) for x in range(q)]
    add = tuple(
        tuple(_undigits([(a + b) % p for a, b in zip(digits[x], digits[y])], p) for y in range(q))
        for x in range(q)
    )
    if m == 1:
        mul = tuple(tuple(x * y % p for y in range(q)) for x in range(q))
    else:
        rows = []
        for x in range(q):
            row = []
            for y in range(q):
                prod = [0] * (2 * m - 1)
                for i, a in enumerate(digits[x]):
                    if a:
                        for j, b in enumerate(digits[y]):
                            prod[i + j] = (prod[i + j] + a * b) % p
                red = _poly_mod(prod, list(poly), p)
                row.append(_undigits(red + [0] * (m - len(red)), p))
            rows.append(tuple(row))
        mul = tuple(rows)
    neg = tuple(next(y for y in range(q) if add[x][y] == 0) for x in range(q))
    inv = (0,) + tuple(next(y for y in range(q) if mul[x][y] == 1) for x in range(1, q))
    return FieldSpec(p, m, poly, add, mul, neg, inv)


@lru_cache(maxsize=None)
def field_make(q: int) -> FieldSpec:
    """Return GF(q); for q = p^m with m > 1 the reduction polynomial is the
    least monic irreducible of degree m in base-p order."""
    if not isinstance(q, int):
        raise TypeError("q must be an int")
    p, m = _factor_prime_power(q)
    if q > MAX_Q:
        raise Unsupported(f"q={q} exceeds the supported maximum {MAX_Q}")
    poly = _least_irreducible(p, m) if m > 1 else ()
    return _build(p, m, poly)


@dataclass(frozen=True)
class FieldElement:
    spec: FieldSpec
    repr: int

    def __post_init__(self):
        if not 0 <= self.repr < self.spec.q:
            raise ValueError(f"{self.repr} is not an element of GF({self.spec.q})")

    def _check(self, other: "FieldElement") -> None:
        if not isinstance(other, FieldElement) or other.spec != self.spec:
            raise SpecMismatch("operands belong to different fields")

    def __add__(self, other):
        self._check(other)
        return FieldElement(self.spec, self.spec.add[self.repr][other.repr])

    def __sub__(self, other):
        self._check(other)
        return FieldElement(self.spec, self.spec.sub(self.repr, other.repr))

    def __mul__(self, other):
        self._check(other)
        return FieldElement(self.spec, self.spec.mul[self.repr][other.repr])

    def __truediv__(self, other):
        self._check(other)
        return FieldElement(self.spec, self.spec.div(self.repr, other.repr))

    def __neg__(self):
        return FieldElement(self.spec, self.spec.neg[self.repr])

    def __bool__(self) -> bool:
        return self.repr != 0

    def __int__(self) -> int:
        return self.repr

    def order(self) -> int:
        """Multiplicative order; raises for zero."""
        if self.repr == 0:
            raise DivisionByZero("zero has no multiplicative order")
        x, k = self.repr, 1
        while x != 1:
            x = self.spec.mul[x][self.repr]
            k += 1
        return k


_OPS = {
    "add": FieldElement.__add__,
    "sub": FieldElement.__sub__,
    "mul": FieldElement.__mul__,
    "div": FieldElement.__truediv__,
}


def field_arith(a: FieldElement, b: FieldElement, op: str) -> FieldElement:
    try:
        fn = _OPS[op]
    except KeyError:
        raise ValueError(f"unknown operation {op!r}") from None
    return fn(a, b)
