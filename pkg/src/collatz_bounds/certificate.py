"""Feasibility certificates: storage, independent checking, and transfer.

A certificate is a value of lambda plus exact rational values for the LP
variables, normalised so the smallest principal value is 1.  All values the
solver produces are dyadic, so they are written as exact decimal strings.

The checker here deliberately shares no arithmetic with the solver: it
evaluates every constraint in mpmath interval arithmetic, rounding the left
side up and the right side down.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from mpmath import iv

from .core import classes, lifts
from .errors import CertificateError, MissingVariable
from .lp import (
    AUX_NT,
    LinearProgram,
    LPVariable,
    aux_nt,
    aux_tree,
    build_lp_nt,
    build_lp_system,
    number_m_nodes,
    principal,
)
from .shifts import ZERO, ExponentShift
from .trees import System

FORMAT = "collatz-bounds-certificate/1"
VERIFIED = "verified"
UNVERIFIED = "unverified"


def exact_decimal(x: Fraction) -> str:
    """Finite decimal expansion of ``x``; the denominator must be 2^a * 5^b."""
    num, den = x.numerator, x.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        raise ValueError(f"{x} has no finite decimal expansion")
    digits = max(twos, fives)
    scaled = num * 2 ** (digits - twos) * 5 ** (digits - fives)
    sign = "-" if scaled < 0 else ""
    whole, frac = divmod(abs(scaled), 10**digits)
    if digits == 0:
        return f"{sign}{whole}"
    frac_s = str(frac).rjust(digits, "0").rstrip("0")
    return f"{sign}{whole}.{frac_s}" if frac_s else f"{sign}{whole}"


_VAR_RE = re.compile(r"^(c|cb)\[(\d+)\]$|^a\[(\d+)\.(\d+)\]$")


def parse_variable(name: str) -> LPVariable:
    m = _VAR_RE.match(name)
    if not m:
        raise ValueError(f"unrecognised variable name {name!r}")
    if m.group(1) == "c":
        return principal(int(m.group(2)))
    if m.group(1) == "cb":
        return aux_nt(int(m.group(2)))
    return aux_tree(int(m.group(3)), int(m.group(4)))


@dataclass
class Certificate:
    family: str
    k: int
    lam: Fraction
    precision_bits: int
    principal: dict[int, Fraction]
    aux: dict[LPVariable, Fraction] = field(default_factory=dict)
    status: str = UNVERIFIED

    @property
    def c_max(self) -> Fraction:
        return max(self.principal.values())

    def values(self) -> dict[LPVariable, Fraction]:
        out = {principal(m): v for m, v in self.principal.items()}
        out.update(self.aux)
        return out

    def to_json(self) -> str:
        doc = {
            "format": FORMAT,
            "family": self.family,
            "k": self.k,
            "lambda": exact_decimal(self.lam),
            "precision_bits": self.precision_bits,
            "normalization": "min principal = 1",
            "status": self.status,
            "c_max": exact_decimal(self.c_max),
            "principal": {str(m): exact_decimal(self.principal[m]) for m in sorted(self.principal)},
            "auxiliary": {v.name: exact_decimal(self.aux[v]) for v in sorted(self.aux)},
        }
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> Certificate:
        doc = json.loads(text)
        if doc.get("format") != FORMAT:
            raise ValueError(f"not a certificate file (format={doc.get('format')!r})")
        return cls(
            family=doc["family"],
            k=int(doc["k"]),
            lam=Fraction(doc["lambda"]),
            precision_bits=int(doc["precision_bits"]),
            principal={int(m): Fraction(v) for m, v in doc["principal"].items()},
            aux={parse_variable(n): Fraction(v) for n, v in doc.get("auxiliary", {}).items()},
            status=doc.get("status", UNVERIFIED),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> Certificate:
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True)
class Verified:
    constraints: int
    min_slack: float

    def __bool__(self) -> bool:
        return True


@dataclass(frozen=True)
class FailedConstraint:
    id: str
    index: int
    slack: float

    def __bool__(self) -> bool:
        return False


def _to_iv(x: Fraction):
    return iv.mpf(x.numerator) / x.denominator


def check_certificate(lp: LinearProgram, cert: Certificate) -> Verified | FailedConstraint:
    """Check every constraint of ``lp`` with adverse interval rounding.

    Missing direct-program auxiliaries are filled with their largest
    admissible value, the minimum over the three lifts.  Tree auxiliaries
    must be present.
    """
    values = cert.values()
    for v in lp.principals:
        if v not in values:
            raise MissingVariable(v.name)
    for v in lp.auxiliaries:
        if v in values:
            continue
        if v.role == AUX_NT:
            values[v] = min(values[principal(l)] for l in lifts(v.key[0], lp.k))
        else:
            raise MissingVariable(v.name)

    c_max = max(values[v] for v in lp.principals)
    min_slack = float("inf")
    for i, v in enumerate(lp.principals):
        x = values[v]
        if x < 1:
            return FailedConstraint(f"L0:{v.name}>=1", i, float(x - 1))
        min_slack = min(min_slack, float(c_max - x))

    saved = iv.prec
    iv.prec = cert.precision_bits + 32
    try:
        lam = _to_iv(cert.lam)
        log_lam = iv.log(lam)
        alpha = iv.log(3) / iv.log(2)
        coef: dict[ExponentShift, object] = {}
        boxed: dict[LPVariable, object] = {}

        one = iv.mpf(1)

        def term(var: LPVariable, s: ExponentShift):
            c = coef.get(s)
            if c is None:
                c = coef[s] = one if s == ZERO else iv.exp((s.p + s.q * alpha) * log_lam)
            b = boxed.get(var)
            if b is None:
                if var not in values:
                    raise MissingVariable(var.name)
                b = boxed[var] = _to_iv(values[var])
            return b * c

        for i, con in enumerate(lp.constraints):
            # divide through by the left coefficient so equal shifts cancel exactly
            base = con.lhs[1]
            lhs = term(con.lhs[0], ZERO)
            rhs = term(con.rhs[0][0], con.rhs[0][1] - base)
            for var, s in con.rhs[1:]:
                rhs = rhs + term(var, s - base)
            slack = float(rhs.a) - float(lhs.b)
            if not lhs.b <= rhs.a:
                return FailedConstraint(con.label or con.format(), i, slack)
            min_slack = min(min_slack, slack)
    finally:
        iv.prec = saved
    return Verified(len(lp.constraints) + len(lp.principals), min_slack)


def nt_auxiliaries(cert: Certificate) -> dict[LPVariable, Fraction]:
    """The largest admissible direct-program auxiliaries (minimum over lifts)."""
    return {
        aux_nt(m): min(cert.principal[l] for l in lifts(m, cert.k)) for m in classes(cert.k - 1)
    }


def extend_certificate_nt_to_el(cert_nt: Certificate, system_el: System) -> Certificate:
    """Carry a direct-program certificate over to the eliminated program.

    Principal values are kept; each m-node auxiliary takes the minimum of the
    principal values of its surviving children.  Raises
    :class:`CertificateError` if the result does not verify.
    """
    if cert_nt.family != "nt":
        raise ValueError(f"expected an nt certificate, got {cert_nt.family!r}")
    if system_el.k != cert_nt.k:
        raise ValueError(f"level mismatch: certificate k={cert_nt.k}, system k={system_el.k}")
    aux: dict[LPVariable, Fraction] = {}
    for tree in system_el:
        numbers = number_m_nodes(tree)
        for node in tree.m_nodes():
            aux[aux_tree(tree.cls, numbers[id(node)])] = min(
                cert_nt.principal[c.cls] for c in node.children
            )
    out = Certificate("el", cert_nt.k, cert_nt.lam, cert_nt.precision_bits, dict(cert_nt.principal), aux)
    result = check_certificate(build_lp_system(system_el, "el"), out)
    if not result:
        raise CertificateError(f"extended certificate fails at {result.id} (slack {result.slack:g})")
    out.status = VERIFIED
    return out


def lift_certificate(cert: Certificate) -> Certificate:
    """Level k+1 certificate with ``c[m + j*3^k] = c[m]``, verified."""
    if cert.family != "nt":
        raise ValueError("only direct-program certificates can be lifted")
    step = 3**cert.k
    lifted = {m + j * step: v for m, v in cert.principal.items() for j in range(3)}
    out = Certificate("nt", cert.k + 1, cert.lam, cert.precision_bits, lifted)
    result = check_certificate(build_lp_nt(cert.k + 1), out)
    if not result:
        raise CertificateError(f"lifted certificate fails at {result.id} (slack {result.slack:g})")
    out.status = VERIFIED
    return out


def trivial_certificate(k: int, family: str = "nt", system: System | None = None) -> Certificate:
    """lambda = 1 with every variable equal to 1."""
    cert = Certificate("nt", k, Fraction(1), 64, {m: Fraction(1) for m in classes(k)})
    if family == "el":
        if system is None:
            raise ValueError("an eliminated system is needed for the el family")
        cert.family = "el"
        for tree in system:
            for i in range(1, len(number_m_nodes(tree)) + 1):
                cert.aux[aux_tree(tree.cls, i)] = Fraction(1)
    return cert

