"""Sparse multivariate polynomials and polynomial optimization instances.

Exponents are plain tuples of nonnegative ints; all iteration over terms follows
graded-lexicographic order so that every derived structure is reproducible.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Iterable, Mapping, Sequence

Exponent = tuple[int, ...]

GEQ = "geq0"
EQ = "eq0"


class PolynomialFormatError(ValueError):
    """Raised for documents that do not describe a valid problem."""


def grlex_key(alpha: Exponent) -> tuple:
    """Sort key: total degree first, then x1 > x2 > ... lexicographically."""
    return (sum(alpha), tuple(-a for a in alpha))


def exp_add(a: Exponent, b: Exponent) -> Exponent:
    return tuple(x + y for x, y in zip(a, b))


def exp_mod2(a: Exponent) -> Exponent:
    return tuple(x & 1 for x in a)


def exp_support(a: Exponent) -> frozenset[int]:
    """Indices i with a_i != 0."""
    return frozenset(i for i, x in enumerate(a) if x)


def unit(n: int, i: int, power: int = 1) -> Exponent:
    e = [0] * n
    e[i] = power
    return tuple(e)


def monomial_basis(n: int, degree: int, variables: Sequence[int] | None = None,
                   square_free: bool = False) -> list[Exponent]:
    """All exponents of total degree <= ``degree`` supported on ``variables``.

    Returned in graded-lex order, zero exponent first. With ``square_free`` only
    0/1 exponents are produced.
    """
    if variables is None:
        variables = range(n)
    variables = sorted(variables)
    out: list[Exponent] = []
    for deg in range(degree + 1):
        for combo in combinations_with_replacement(variables, deg):
            e = [0] * n
            for i in combo:
                e[i] += 1
            if square_free and any(x > 1 for x in e):
                continue
            out.append(tuple(e))
    out = list(dict.fromkeys(out))
    out.sort(key=grlex_key)
    return out


class Polynomial:
    """Immutable sparse polynomial: map exponent -> nonzero float coefficient."""

    __slots__ = ("n", "_terms")

    def __init__(self, n: int, terms: Mapping[Exponent, float] | Iterable[tuple[Exponent, float]] = ()):
        self.n = n
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[Exponent, float] = {}
        for alpha, c in items:
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != n:
                raise PolynomialFormatError(f"exponent {alpha} has arity {len(alpha)}, expected {n}")
            if any(a < 0 for a in alpha):
                raise PolynomialFormatError(f"negative exponent in {alpha}")
            c = float(c)
            if not math.isfinite(c):
                raise PolynomialFormatError(f"non-finite coefficient {c}")
            acc[alpha] = acc.get(alpha, 0.0) + c
        self._terms = {a: acc[a] for a in sorted(acc, key=grlex_key) if acc[a] != 0.0}

    # construction helpers
    @classmethod
    def constant(cls, n: int, c: float) -> Polynomial:
        return cls(n, {(0,) * n: c})

    @classmethod
    def variable(cls, n: int, i: int) -> Polynomial:
        return cls(n, {unit(n, i): 1.0})

    @property
    def terms(self) -> dict[Exponent, float]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def support(self) -> set[Exponent]:
        return set(self._terms)

    def coefficient(self, alpha: Exponent) -> float:
        return self._terms.get(tuple(alpha), 0.0)

    def degree(self) -> int:
        # zero polynomial has degree 0 by convention
        return max((sum(a) for a in self._terms), default=0)

    def variables(self) -> frozenset[int]:
        out: set[int] = set()
        for a in self._terms:
            out.update(exp_support(a))
        return frozenset(out)

    def is_zero(self) -> bool:
        return not self._terms

    def __len__(self) -> int:
        return len(self._terms)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.n == other.n and self._terms == other._terms

    def __hash__(self) -> int:
        return hash((self.n, tuple(self._terms.items())))

    def __repr__(self) -> str:
        return f"Polynomial(n={self.n}, terms={self._terms})"

    def _coerce(self, other) -> Polynomial:
        if isinstance(other, Polynomial):
            if other.n != self.n:
                raise ValueError("arity mismatch")
            return other
        return Polynomial.constant(self.n, float(other))

    def __add__(self, other) -> Polynomial:
        other = self._coerce(other)
        return Polynomial(self.n, list(self._terms.items()) + list(other._terms.items()))

    __radd__ = __add__

    def __neg__(self) -> Polynomial:
        return Polynomial(self.n, {a: -c for a, c in self._terms.items()})

    def __sub__(self, other) -> Polynomial:
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> Polynomial:
        return self._coerce(other) - self

    def __mul__(self, other) -> Polynomial:
        other = self._coerce(other)
        acc: dict[Exponent, float] = {}
        for a, ca in self._terms.items():
            for b, cb in other._terms.items():
                s = exp_add(a, b)
                acc[s] = acc.get(s, 0.0) + ca * cb
        return Polynomial(self.n, acc)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> Polynomial:
        out = Polynomial.constant(self.n, 1.0)
        for _ in range(k):
            out = out * self
        return out

    def reduce_binary(self) -> Polynomial:
        """Apply x_i^2 = 1, i.e. reduce every exponent entry-wise mod 2."""
        return Polynomial(self.n, [(exp_mod2(a), c) for a, c in self._terms.items()])

    def evaluate(self, x: Sequence[float]) -> float:
        if len(x) != self.n:
            raise ValueError(f"point has {len(x)} coordinates, expected {self.n}")
        total = 0.0
        for alpha, c in self._terms.items():
            v = c
            for xi, ai in zip(x, alpha):
                if ai:
                    v *= xi ** ai
            total += v
        return total

    def to_terms(self) -> list[list]:
        return [[c, list(a)] for a, c in self._terms.items()]


def support(p: Polynomial) -> set[Exponent]:
    return p.support()


def evaluate(p: Polynomial, x: Sequence[float]) -> float:
    return p.evaluate(x)


@dataclass(frozen=True)
class Constraint:
    poly: Polynomial
    kind: str = GEQ

    @property
    def half_degree(self) -> int:
        return math.ceil(self.poly.degree() / 2)


@dataclass(frozen=True)
class POPInstance:
    """min (or max) objective(x) subject to g_j(x) >= 0 / g_j(x) == 0."""

    n: int
    objective: Polynomial
    constraints: tuple[Constraint, ...] = ()
    name: str = ""
    sense: str = "min"
    known_optimum: float | None = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.objective.n != self.n:
            raise PolynomialFormatError("objective arity mismatch")
        for c in self.constraints:
            if c.poly.n != self.n:
                raise PolynomialFormatError("constraint arity mismatch")
            if c.kind not in (GEQ, EQ):
                raise PolynomialFormatError(f"unknown constraint kind {c.kind!r}")
        if self.sense not in ("min", "max"):
            raise PolynomialFormatError(f"unknown sense {self.sense!r}")

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def constraint_half_degrees(self) -> list[int]:
        return [c.half_degree for c in self.constraints]

    @property
    def d_min(self) -> int:
        return max([math.ceil(self.objective.degree() / 2)] + self.constraint_half_degrees)

    def support_set(self) -> set[Exponent]:
        """supp(f) together with the supports of every constraint."""
        out = self.objective.support()
        for c in self.constraints:
            out |= c.poly.support()
        return out

    def minimization_objective(self) -> Polynomial:
        return self.objective if self.sense == "min" else -self.objective

    def with_constraints(self, extra: Iterable[Constraint]) -> POPInstance:
        return POPInstance(self.n, self.objective, self.constraints + tuple(extra), self.name,
                           self.sense, self.known_optimum, dict(self.metadata))


def _parse_terms(raw, n: int, where: str) -> Polynomial:
    if not isinstance(raw, list):
        raise PolynomialFormatError(f"{where}: terms must be a list")
    terms = []
    for t in raw:
        if not (isinstance(t, (list, tuple)) and len(t) == 2 and isinstance(t[1], (list, tuple))):
            raise PolynomialFormatError(f"{where}: malformed term {t!r}")
        coeff, alpha = t
        if isinstance(coeff, bool) or not isinstance(coeff, (int, float, str)):
            raise PolynomialFormatError(f"{where}: bad coefficient {coeff!r}")
        try:
            c = float(coeff)
        except ValueError as exc:
            raise PolynomialFormatError(f"{where}: bad coefficient {coeff!r}") from exc
        if len(alpha) != n:
            raise PolynomialFormatError(f"{where}: exponent {alpha} has arity {len(alpha)}, expected {n}")
        if not all(isinstance(a, int) and not isinstance(a, bool) for a in alpha):
            raise PolynomialFormatError(f"{where}: exponent entries must be integers")
        terms.append((tuple(alpha), c))
    return Polynomial(n, terms)


def pop_from_dict(doc: Mapping) -> POPInstance:
    if not isinstance(doc, Mapping):
        raise PolynomialFormatError("document must be a JSON object")
    n = doc.get("n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise PolynomialFormatError("'n' must be a positive integer")
    if "objective" not in doc:
        raise PolynomialFormatError("missing 'objective'")
    objective = _parse_terms(doc["objective"], n, "objective")
    constraints = []
    for idx, raw in enumerate(doc.get("constraints", [])):
        if not isinstance(raw, Mapping) or "terms" not in raw:
            raise PolynomialFormatError(f"constraint {idx}: expected object with 'terms'")
        kind = raw.get("kind", GEQ)
        if kind not in (GEQ, EQ):
            raise PolynomialFormatError(f"constraint {idx}: unknown kind {kind!r}")
        constraints.append(Constraint(_parse_terms(raw["terms"], n, f"constraint {idx}"), kind))
    known = doc.get("known_optimum")
    return POPInstance(n, objective, tuple(constraints), name=str(doc.get("name", "")),
                       sense=doc.get("sense", "min"),
                       known_optimum=None if known is None else float(known))


def parse_pop(document: str | bytes) -> POPInstance:
    """Parse the JSON problem format into a validated instance."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise PolynomialFormatError(f"invalid JSON: {exc}") from exc
    return pop_from_dict(doc)


def pop_to_dict(pop: POPInstance) -> dict:
    doc = {
        "n": pop.n,
        "name": pop.name,
        "objective": pop.objective.to_terms(),
        "constraints": [{"kind": c.kind, "terms": c.poly.to_terms()} for c in pop.constraints],
    }
    if pop.sense != "min":
        doc["sense"] = pop.sense
    if pop.known_optimum is not None:
        doc["known_optimum"] = pop.known_optimum
    return doc


def serialize_pop(pop: POPInstance) -> str:
    # json writes floats with repr, so coefficients round-trip exactly
    return json.dumps(pop_to_dict(pop), separators=(",", ":"))


def load_pop(path) -> POPInstance:
    with open(path, encoding="utf-8") as fh:
        return parse_pop(fh.read())


def save_pop(pop: POPInstance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_pop(pop))
        fh.write("\n")
