"""Feasibility of the direct program via its monotone homogeneous operator.

With the auxiliaries at their largest admissible values, the direct program
at ``lam`` asks for ``c >= 1`` with ``c <= F(c)``, where

    F(c)[m] = lam^-2 c[4m] + lam^(alpha-2) min(c over lifts of (4m-2)/3)   m = 2 mod 9
    F(c)[m] = lam^-2 c[4m]                                                 m = 5 mod 9
    F(c)[m] = lam^-2 c[4m] + lam^(alpha-1) min(c over lifts of (2m-1)/3)   m = 8 mod 9

F is monotone and positively homogeneous, so both answers have short proofs:
a vector with ``F(c) >= c`` is a feasible point after rescaling, and a
positive ``u`` with ``F(u) <= theta*u``, ``theta < 1``, rules out every
feasible point (a feasible ``c <= s*u`` would give ``c <= theta*s*u``).  Power
iteration finds the candidate vector in floating point; the decision is then
made in exact fixed-point integer arithmetic with directed rounding.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .certificate import VERIFIED, Certificate, check_certificate
from .core import classes, lifts
from .errors import CertificateError, PrecisionExhausted
from .lp import build_lp_nt, coefficient_bounds
from .shifts import STEP_D1_MIN, STEP_D3_MIN, STEP_DIRECT

log = logging.getLogger(__name__)

MIN_PRECISION_BITS = 64
MAX_PRECISION_BITS = 512


class NTOperator:
    """Index tables for F at level k; entry i is class ``2 + 3i``."""

    _cache: dict[int, NTOperator] = {}

    def __init__(self, k: int):
        if k < 2:
            raise ValueError(f"k must be >= 2, got {k}")
        self.k = k
        mod = 3**k
        cls = np.arange(2, mod, 3)
        self.classes = cls
        self.n = len(cls)
        self.succ = ((4 * cls) % mod - 2) // 3
        residue = cls % 9
        self.d1 = np.flatnonzero(residue == 2)
        self.d3 = np.flatnonzero(residue == 8)
        step = 3 ** (k - 1)
        lifted_d1 = ((4 * cls[self.d1] - 2) // 3) % step
        lifted_d3 = ((2 * cls[self.d3] - 1) // 3) % step
        offsets = np.array([0, step, 2 * step])
        self.lifts_d1 = (lifted_d1[:, None] + offsets - 2) // 3
        self.lifts_d3 = (lifted_d3[:, None] + offsets - 2) // 3

    @classmethod
    def for_level(cls, k: int) -> NTOperator:
        op = cls._cache.get(k)
        if op is None:
            op = cls._cache[k] = cls(k)
        return op

    def apply(self, c: np.ndarray, coeffs: tuple) -> np.ndarray:
        """F(c) for float or object (integer fixed-point) vectors.

        For object vectors ``coeffs`` are integers scaled by ``2**bits`` and a
        ``rounding`` of "down" or "up" is given as a fourth element.
        """
        direct, k1, k3 = coeffs[:3]
        if c.dtype == object:
            bits, rounding = coeffs[3], coeffs[4]

            def mul(coef, v):
                prod = coef * v
                return prod >> bits if rounding == "down" else -((-prod) >> bits)

            out = mul(direct, c[self.succ])
            out[self.d1] += mul(k1, np.minimum.reduce(c[self.lifts_d1], axis=1))
            out[self.d3] += mul(k3, np.minimum.reduce(c[self.lifts_d3], axis=1))
            return out
        out = direct * c[self.succ]
        out[self.d1] += k1 * c[self.lifts_d1].min(axis=1)
        out[self.d3] += k3 * c[self.lifts_d3].min(axis=1)
        return out

    def min_of_lifts(self, c) -> list:
        """The values ``min(c over lifts of m)`` for m in [3^(k-1)], in class order."""
        step = 3 ** (self.k - 1)
        return [min(c[(l - 2) // 3] for l in lifts(m, self.k)) for m in range(2, step, 3)]


def float_coefficients(lam) -> tuple[float, float, float]:
    lam = float(lam)
    alpha = math.log2(3)
    return lam**-2, lam ** (alpha - 2), lam ** (alpha - 1)


@dataclass
class OperatorState:
    k: int
    c: np.ndarray

    def __post_init__(self):
        if len(self.c) != 3 ** (self.k - 1):
            raise ValueError(f"state for k={self.k} needs {3 ** (self.k - 1)} entries")
        if not np.all(self.c > 0):
            raise ValueError("operator states must be strictly positive")


def eval_operator(state: OperatorState, lam) -> OperatorState:
    op = NTOperator.for_level(state.k)
    return OperatorState(state.k, op.apply(np.asarray(state.c, dtype=float), float_coefficients(lam)))


@dataclass
class Feasible:
    certificate: Certificate
    vector: np.ndarray
    iterations: int


@dataclass
class Infeasible:
    theta: Fraction
    vector: np.ndarray
    iterations: int


@dataclass
class Undetermined:
    lower_ratio: float
    upper_ratio: float
    vector: np.ndarray
    iterations: int


Outcome = Feasible | Infeasible | Undetermined


def _fixed_coefficients(lam, bits: int, rounding: str) -> tuple:
    out = []
    for shift in (STEP_DIRECT, STEP_D1_MIN, STEP_D3_MIN):
        lo, hi = coefficient_bounds(shift, lam, bits)
        if rounding == "down":
            out.append(math.floor(lo * 2**bits))
        else:
            out.append(math.ceil(hi * 2**bits))
    return (*out, bits, rounding)


def _to_fixed(u: np.ndarray, bits: int) -> np.ndarray:
    """Fixed-point integers for a float vector already scaled to min 1."""
    scaled = np.ldexp(u, 53).astype(np.int64) if bits >= 53 else None
    if scaled is None:
        raise ValueError("precision below 53 bits is not supported")
    shift = bits - 53
    return np.array([int(v) << shift for v in scaled], dtype=object)


def _certify(op: NTOperator, lam: Fraction, fixed: np.ndarray, bits: int):
    """Decide from a fixed-point vector; returns Feasible data, Infeasible data or None."""
    low = op.apply(fixed, _fixed_coefficients(lam, bits, "down"))
    if all(low >= fixed):
        return "feasible", None
    high = op.apply(fixed, _fixed_coefficients(lam, bits, "up"))
    if all(high < fixed):
        theta = max(Fraction(int(h), int(f)) for h, f in zip(high, fixed))
        return "infeasible", theta
    return None, None


def _certificate_from_fixed(k: int, lam: Fraction, fixed: np.ndarray, bits: int) -> Certificate:
    scale = min(fixed)
    values = {m: Fraction(int(v), int(scale)) for m, v in zip(classes(k), fixed)}
    # scale == 2**bits by construction, so every value stays dyadic
    return Certificate("nt", k, lam, bits, values, status=VERIFIED)


def power_iterate(
    k: int,
    lam,
    tol: float = 1e-13,
    max_iter: int = 20_000,
    precision_bits: int = MIN_PRECISION_BITS,
    start: np.ndarray | None = None,
    check_every: int = 8,
) -> Outcome:
    """Decide feasibility of the direct program at ``lam``.

    Iterates the averaged map ``c -> (c + F(c)) / 2`` (same eigenvector as F,
    immune to periodic oscillation) from all-ones or ``start``.  Every
    ``check_every`` sweeps the ratios ``F(u)/u`` are inspected; when they sit
    on one side of 1 the fixed-point check at ``precision_bits`` is run.
    When the ratio spread falls below ``tol`` without a decision, or
    ``max_iter`` is reached, the result is :class:`Undetermined`.
    """
    lam = lam if isinstance(lam, Fraction) else Fraction(str(lam))
    if not 1 <= lam <= 2:
        raise ValueError(f"lambda must lie in [1, 2], got {lam}")
    op = NTOperator.for_level(k)
    coeffs = float_coefficients(lam)
    u = np.ones(op.n) if start is None else np.array(start, dtype=float)
    u = u / u.min()
    lo = hi = float("nan")
    it = 0
    while True:
        f = op.apply(u, coeffs)
        if it % check_every == 0 or it >= max_iter:
            ratio = f / u
            lo, hi = float(ratio.min()), float(ratio.max())
            if lo >= 1.0 or hi < 1.0:
                fixed = _to_fixed(u, precision_bits)
                verdict, theta = _certify(op, lam, fixed, precision_bits)
                if verdict == "feasible":
                    cert = _certificate_from_fixed(k, lam, fixed, precision_bits)
                    return Feasible(cert, u, it)
                if verdict == "infeasible":
                    return Infeasible(theta, u, it)
            elif hi - lo < tol:
                break
            if it >= max_iter:
                break
        u = u + f
        u /= u.min()
        it += 1
    if precision_bits > MIN_PRECISION_BITS:
        return _refine(op, lam, u, precision_bits, max(64, max_iter // 50), it)
    return Undetermined(lo, hi, u, it)


def _refine(op: NTOperator, lam: Fraction, u: np.ndarray, bits: int, sweeps: int, it: int) -> Outcome:
    """Continue the iteration in fixed point when floats cannot separate from 1."""
    fixed = _to_fixed(u, bits)
    one = 1 << bits
    coeffs = _fixed_coefficients(lam, bits, "down")
    for s in range(sweeps):
        verdict, theta = _certify(op, lam, fixed, bits)
        if verdict == "feasible":
            return Feasible(_certificate_from_fixed(op.k, lam, fixed, bits), u, it + s)
        if verdict == "infeasible":
            return Infeasible(theta, u, it + s)
        fixed = fixed + op.apply(fixed, coeffs)
        low = min(fixed)
        fixed = np.array([(int(v) * one) // low for v in fixed], dtype=object)
    ratio = op.apply(u, float_coefficients(lam)) / u
    return Undetermined(float(ratio.min()), float(ratio.max()), u, it + sweeps)


def decide(
    k: int,
    lam,
    max_iter: int = 20_000,
    precision_bits: int = MIN_PRECISION_BITS,
    max_precision_bits: int = MAX_PRECISION_BITS,
    start: np.ndarray | None = None,
    tol: float = 1e-13,
) -> Feasible | Infeasible:
    """:func:`power_iterate` with escalation: Undetermined doubles the
    iteration budget and precision until ``max_precision_bits``."""
    bits, budget = precision_bits, max_iter
    while True:
        out = power_iterate(k, lam, tol=tol, max_iter=budget, precision_bits=bits, start=start)
        if not isinstance(out, Undetermined):
            return out
        log.info("k=%d lam=%s undetermined at %d bits; escalating", k, lam, bits)
        if bits * 2 > max_precision_bits:
            raise PrecisionExhausted(
                f"k={k}, lambda={float(lam):.12g}: ratios [{out.lower_ratio!r}, {out.upper_ratio!r}]"
                f" still straddle 1 at {bits} bits"
            )
        bits, budget, start = bits * 2, budget * 2, out.vector


@dataclass
class Averages:
    cbar_kk: Fraction
    cbar_k1k: Fraction

    @property
    def difference(self) -> Fraction:
        return self.cbar_kk - self.cbar_k1k


def averages(cert: Certificate) -> Averages:
    """Mean principal value, and mean over [3^(k-1)] of the minimum over lifts."""
    k = cert.k
    vals = [cert.principal[m] for m in classes(k)]
    mins = NTOperator.for_level(k).min_of_lifts(vals)
    return Averages(sum(vals, Fraction(0)) / 3 ** (k - 1), sum(mins, Fraction(0)) / 3 ** (k - 2))


@dataclass
class LambdaSearchResult:
    k: int
    lam_lo: Fraction
    lam_hi: Fraction
    certificate: Certificate
    theta_hi: Fraction
    history: list[tuple[Fraction, str]] = field(default_factory=list)
    lo_certificates: list[Certificate] = field(default_factory=list)

    @property
    def gamma(self) -> float:
        return math.log2(self.lam_lo)

    @property
    def c_max(self) -> Fraction:
        return self.certificate.c_max

    @property
    def averages(self) -> Averages:
        return averages(self.certificate)


def _load_checkpoint(path: Path, k: int) -> tuple[Fraction, Fraction] | None:
    if not path.exists():
        return None
    doc = json.loads(path.read_text())
    if doc.get("k") != k:
        return None
    return Fraction(doc["lam_lo"]), Fraction(doc["lam_hi"])


def _save_checkpoint(path: Path, k: int, lo: Fraction, hi: Fraction) -> None:
    doc = {"k": k, "lam_lo": str(lo), "lam_hi": str(hi)}
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(doc) + "\n")
    tmp.replace(path)


def search_lambda(
    k: int,
    bracket_tol: float = 1e-6,
    max_iter: int = 20_000,
    precision_bits: int = MIN_PRECISION_BITS,
    max_precision_bits: int = MAX_PRECISION_BITS,
    checkpoint: str | Path | None = None,
    keep_certificates: bool = False,
    verify: bool = True,
) -> LambdaSearchResult:
    """Bisect on [1, 2] for the largest lambda at which the direct program is
    feasible, keeping a certified-feasible lower end and a
    certified-infeasible upper end.

    Midpoints are dyadic, so every lambda tried is exact.  With ``verify``
    the final certificate is re-checked by the interval checker.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    lo, hi = Fraction(1), Fraction(2)
    ckpt = Path(checkpoint) if checkpoint else None
    if ckpt is not None:
        saved = _load_checkpoint(ckpt, k)
        if saved is not None:
            lo, hi = saved
            log.info("resuming k=%d from bracket [%s, %s]", k, float(lo), float(hi))

    opts = dict(max_iter=max_iter, precision_bits=precision_bits, max_precision_bits=max_precision_bits)
    history: list[tuple[Fraction, str]] = []
    at_lo = decide(k, lo, **opts)
    if not isinstance(at_lo, Feasible):
        raise CertificateError(f"lower end {lo} is not certified feasible")
    at_hi = decide(k, hi, start=at_lo.vector, **opts)
    if not isinstance(at_hi, Infeasible):
        raise CertificateError(f"upper end {hi} is not certified infeasible")
    history += [(lo, "feasible"), (hi, "infeasible")]
    kept = [at_lo.certificate] if keep_certificates else []
    start = at_lo.vector

    while hi - lo > bracket_tol:
        mid = (lo + hi) / 2
        out = decide(k, mid, start=start, **opts)
        if isinstance(out, Feasible):
            lo, at_lo = mid, out
            history.append((mid, "feasible"))
            if keep_certificates:
                kept.append(out.certificate)
        else:
            hi, at_hi = mid, out
            history.append((mid, "infeasible"))
        start = out.vector
        log.debug("k=%d bracket [%.10f, %.10f]", k, lo, hi)
        if ckpt is not None:
            _save_checkpoint(ckpt, k, lo, hi)

    cert = at_lo.certificate
    if verify:
        result = check_certificate(build_lp_nt(k), cert)
        if not result:
            raise CertificateError(f"final certificate fails independent check at {result.id}")
    return LambdaSearchResult(k, lo, hi, cert, at_hi.theta, history, kept)


def principal_slacks(cert: Certificate) -> np.ndarray:
    """Relative slack ``(F(c) - c) / c`` of each (L1)-(L3) constraint, in floats."""
    op = NTOperator.for_level(cert.k)
    c = np.array([float(cert.principal[m]) for m in classes(cert.k)])
    return (op.apply(c, float_coefficients(cert.lam)) - c) / c


@dataclass
class Table2Row:
    k: int
    gamma: float
    lam: float
    c_max: float
    cbar_kk: float
    cbar_k1k: float
    difference: float
    summed_ok: bool

    HEADER = "k,gamma_k,lambda_k,C_k_max,cbar_k_k,cbar_k-1_k,difference"

    def csv(self) -> str:
        return (
            f"{self.k},{self.gamma:.7f},{self.lam:.7f},{self.c_max:.7f},"
            f"{self.cbar_kk:.7f},{self.cbar_k1k:.7f},{self.difference:.7f}"
        )


def summed_inequality_holds(cert: Certificate) -> bool:
    """Sum of all (L1)-(L3) constraints, checked exactly with rounded-down
    coefficients: ``cbar_kk <= lam^-2 cbar_kk + (lam^(a-1) + lam^(a-2))/3 * cbar_k1k``."""
    av = averages(cert)
    down = {s: coefficient_bounds(s, cert.lam, cert.precision_bits)[0] for s in (STEP_DIRECT, STEP_D1_MIN, STEP_D3_MIN)}
    rhs = down[STEP_DIRECT] * av.cbar_kk + (down[STEP_D3_MIN] + down[STEP_D1_MIN]) / 3 * av.cbar_k1k
    return av.cbar_kk <= rhs


def table2_row(result: LambdaSearchResult) -> Table2Row:
    av = result.averages
    return Table2Row(
        k=result.k,
        gamma=result.gamma,
        lam=float(result.lam_lo),
        c_max=float(result.c_max),
        cbar_kk=float(av.cbar_kk),
        cbar_k1k=float(av.cbar_k1k),
        difference=float(av.difference),
        summed_ok=summed_inequality_holds(result.certificate),
    )
