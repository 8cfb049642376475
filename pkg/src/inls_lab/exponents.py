"""Exponent arithmetic for the radial INLS: critical index, admissible pairs,
the interpolation exponents used for the nonlinear estimates and the
scattering constants.

Everything here is plain float arithmetic; ``math.inf`` stands for an
infinite exponent and is handled through its reciprocal (1/inf = 0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field


class ExponentError(ValueError):
    """Raised when a parameter triple or exponent pair is out of range."""


def critical_index(N: float, b: float, p: float) -> float:
    """Return s_c = N/2 - (2 - b)/(p - 1)."""
    if p <= 1:
        raise ExponentError(f"p must exceed 1, got {p}")
    if N <= 2:
        raise ExponentError(f"N must exceed 2, got {N}")
    return N / 2 - (2 - b) / (p - 1)


def b_star(N: float) -> float:
    """Upper bound on b for the energy-space theory: N/3 for N <= 3, else 2."""
    if N <= 0:
        raise ExponentError("N must be positive")
    return N / 3 if N <= 3 else 2.0


def intercritical_bounds(N: float, b: float) -> tuple[float, float]:
    """Open interval (p_lo, p_hi) of intercritical powers."""
    return 1 + (4 - 2 * b) / N, 1 + (4 - 2 * b) / (N - 2)


def _recip(x: float) -> float:
    return 0.0 if math.isinf(x) else 1.0 / x


def default_delta(N: float, b: float, p: float, theta: float = 0.0, cap: float = 0.05) -> float:
    """Pick an aperture delta that keeps every derived pair strictly inside range.

    The aperture is ``cap`` unless the exponent pairs used in the scattering
    argument sit closer than that to an endpoint; then it is halved margin.
    """
    s_c = critical_index(N, b, p)
    p_star = 2 * N / (N - 2)
    margins = [cap]
    if 0 < s_c < 1:
        ex = _raw_family(N, b, p, theta, corrected=True)
        for r in (ex["r_hat"], ex["r_bar"]):
            margins += [r - 2, p_star - r, r - 2 * N / (N - 2 * s_c)]
        for q in (ex["a_hat"], ex["a_bar"]):
            # 1/q - delta s_c must stay positive for the distant-past pair
            margins.append(_recip(q) / s_c)
            margins.append(_recip(q) if q < math.inf else cap)
    m = min(margins)
    return cap if m >= cap else 0.5 * m


@dataclass(frozen=True)
class ModelParams:
    """Parameter triple (N, b, p) with derived exponents.

    Use :meth:`create` to get the default theta and delta.
    """

    N: float
    b: float
    p: float
    theta: float = 0.0
    delta: float = 0.05
    s_c: float = field(init=False)
    p_star: float = field(init=False)

    def __post_init__(self):
        if self.N <= 2:
            raise ExponentError(f"N must exceed 2, got {self.N}")
        if not (0 <= self.b < min(self.N / 2, 2)):
            raise ExponentError(f"b must satisfy 0 <= b < min(N/2, 2), got {self.b}")
        if self.p <= 1:
            raise ExponentError(f"p must exceed 1, got {self.p}")
        if not (0 <= self.theta < self.p - 1):
            raise ExponentError("theta must lie in [0, p - 1)")
        if self.b == 0 and self.theta != 0:
            raise ExponentError("theta must be 0 when b = 0")
        if not (0 < self.delta < 1):
            raise ExponentError("delta must lie in (0, 1)")
        object.__setattr__(self, "s_c", critical_index(self.N, self.b, self.p))
        object.__setattr__(self, "p_star", 2 * self.N / (self.N - 2))

    @classmethod
    def create(cls, N: float, b: float, p: float, theta: float | None = None,
               delta: float | None = None) -> "ModelParams":
        if theta is None:
            theta = 0.0 if b == 0 else 1e-3
        if delta is None:
            delta = default_delta(N, b, p, theta) if N > 2 and p > 1 else 0.05
        return cls(float(N), float(b), float(p), float(theta), float(delta))

    @property
    def intercritical(self) -> bool:
        return intercritical_check(self)


def intercritical_check(params: ModelParams) -> bool:
    """True iff 1 + (4-2b)/N < p < 1 + (4-2b)/(N-2)."""
    lo, hi = intercritical_bounds(params.N, params.b)
    return lo < params.p < hi


@dataclass(frozen=True)
class ExponentPair:
    """Pair (q, r) with regularity index s and its admissibility defect."""

    q: float
    r: float
    s: float
    N: float
    name: str = ""
    defect: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "defect", admissibility_defect(self.q, self.r, self.s, self.N))

    def in_class(self, margin: float = 0.0) -> bool:
        return in_admissible_class(self.q, self.r, self.s, self.N, margin)


def admissibility_defect(q: float, r: float, s: float, N: float) -> float:
    """Return 2/q - N/2 + N/r + s (zero for admissible pairs).

    Time exponents below 2 occur for negative-regularity pairs, so q >= 2 is
    only enforced when s >= 0.
    """
    if r < 2 or q <= 0 or (s >= 0 and q < 2):
        raise ExponentError(f"exponent pair ({q}, {r}) out of range for s = {s}")
    if q == 2 and math.isinf(r) and N == 2:
        raise ExponentError("(2, inf) is the forbidden endpoint in N = 2")
    return 2 * _recip(q) - N / 2 + N * _recip(r) + s


def in_admissible_class(q: float, r: float, s: float, N: float, margin: float = 0.0,
                        tol: float = 1e-12) -> bool:
    """Membership in A_s: admissible and r inside the allowed window.

    For s = 0 the window is [2, 2N/(N-2)]. For s != 0 it is the open window
    (2N/(N-2|s|), 2N/(N-2)), tightened by ``margin`` on each side.
    """
    if abs(admissibility_defect(q, r, s, N)) > tol:
        return False
    hi = 2 * N / (N - 2)
    if s == 0:
        return 2 + margin <= r <= hi - margin
    lo = 2 * N / (N - 2 * abs(s))
    if margin == 0:
        return lo < r < hi
    return lo + margin <= r <= hi - margin


def _raw_family(N, b, p, theta, corrected):
    t = theta
    pm = p - 1
    d_ahat = 4 - 2 * b - (N - 2) * pm
    dens = {
        "a_tilde": pm * (N * (p - t) - 2 + 2 * b) - (4 - 2 * b) * (1 - t),
        "a_hat": d_ahat,
        "q_bar": pm * (N * pm + 2 * b - 2) - t * (N * pm - 4 + 2 * b),
        "r_bar": pm * (N + 2 - 2 * b) - t * (4 - 2 * b),
        "a_bar": d_ahat,
    }
    if corrected:
        s_c = N / 2 - (2 - b) / pm
        two_over_q = s_c + 2 * (1 - s_c) / (p + 1 - t)
        dens["q_hat"] = two_over_q
        dens["r_hat"] = N / 2 - two_over_q
    else:
        dens["q_hat"] = pm * (N * pm + 2 * b) - t * (N * pm - 4 + 2 * b)
        dens["r_hat"] = pm * (N - b) - t * (2 - b)
    for k, v in dens.items():
        if v == 0:
            raise ExponentError(f"vanishing denominator for {k}")
    out = {
        "a_tilde": 2 * pm * (p + 1 - t) / dens["a_tilde"],
        "a_hat": 2 * pm * (p + 1 - t) / dens["a_hat"],
        "q_bar": 4 * pm * (p - t) / dens["q_bar"],
        "r_bar": 2 * N * pm * (p - t) / dens["r_bar"],
        "a_bar": 4 * pm * (p - t) / dens["a_bar"],
    }
    if corrected:
        out["q_hat"] = 2 / dens["q_hat"]
        out["r_hat"] = N / dens["r_hat"]
    else:
        out["q_hat"] = 4 * pm * (p + 1) / dens["q_hat"]
        out["r_hat"] = N * pm * (p + 1) / dens["r_hat"]
    return out


def displayed_hat_pair(params: ModelParams) -> tuple[float, float]:
    """(q_hat, r_hat) from the closed-form quotients written for general theta.

    These coincide with the values returned by :func:`exponent_family` at
    theta = 0 but are only L^2-admissible there; kept for comparison.
    """
    ex = _raw_family(params.N, params.b, params.p, params.theta, corrected=False)
    return ex["q_hat"], ex["r_hat"]


def exponent_family(params: ModelParams, tol: float = 1e-12) -> dict[str, ExponentPair]:
    """Exponent pairs used to bound the weighted nonlinearity.

    Returns pairs keyed by name: ``hat`` = (q_hat, r_hat) in A_0,
    ``hat_sc`` = (a_hat, r_hat) in A_{s_c}, ``tilde`` = (a_tilde, r_hat) in
    A_{-s_c}, ``bar`` = (q_bar, r_bar) in A_0 and ``bar_sc`` = (a_bar, r_bar)
    in A_{s_c}.

    Raises:
        ExponentError: if params are not intercritical, a denominator
            vanishes, or a pair fails admissibility.
    """
    if not intercritical_check(params):
        raise ExponentError("parameters are not intercritical")
    N, s_c = params.N, params.s_c
    ex = _raw_family(N, params.b, params.p, params.theta, corrected=True)
    pairs = {
        "hat": ExponentPair(ex["q_hat"], ex["r_hat"], 0.0, N, "hat"),
        "hat_sc": ExponentPair(ex["a_hat"], ex["r_hat"], s_c, N, "hat_sc"),
        "tilde": ExponentPair(ex["a_tilde"], ex["r_hat"], -s_c, N, "tilde"),
        "bar": ExponentPair(ex["q_bar"], ex["r_bar"], 0.0, N, "bar"),
        "bar_sc": ExponentPair(ex["a_bar"], ex["r_bar"], s_c, N, "bar_sc"),
    }
    for pr in pairs.values():
        if abs(pr.defect) > tol:
            raise ExponentError(f"pair {pr.name} not admissible (defect {pr.defect:.3e})")
    return pairs


def scattering_constants(params: ModelParams) -> tuple[float, float]:
    """Return (alpha, gamma) built from delta, theta and p*."""
    d, ps = params.delta, params.p_star
    alpha = d * (2 + d) / ((ps - d) * (ps - 2))
    g1 = d * (params.p - params.theta) / ((ps - d) * (ps - 2))
    gamma = min(g1, alpha * (params.N - 2) / 4)
    return alpha, gamma


def distant_past_pair(q: float, r: float, params: ModelParams) -> ExponentPair:
    """L^2-admissible pair (c, d) interpolating (q, r) in A_{s_c} with the
    dispersive endpoint.

    Raises:
        ExponentError: if q <= 2/(1 - s_c), or if delta is too large for
            this q so that c leaves (2, inf).
    """
    s_c, N, d = params.s_c, params.N, params.delta
    if not (0 < s_c < 1):
        raise ExponentError("s_c must lie in (0, 1)")
    if not q > 2 / (1 - s_c):
        raise ExponentError(f"q = {q} must exceed 2/(1 - s_c) = {2 / (1 - s_c)}")
    inv_c = (_recip(q) - d * s_c) / (1 - s_c)
    inv_d = (_recip(r) - s_c * (N - 2 - 4 * d) / (2 * N)) / (1 - s_c)
    if not (0 < inv_c < 0.5):
        raise ExponentError(f"delta = {d} too large: 1/c = {inv_c}")
    if not (0 < inv_d <= 0.5):
        raise ExponentError(f"delta = {d} too large: 1/d = {inv_d}")
    return ExponentPair(1 / inv_c, 1 / inv_d, 0.0, N, "distant")


def exponent_table(params: ModelParams) -> list[tuple[str, float, float, float, float]]:
    """Rows (name, q, r, s, defect) for all pairs, including distant-past ones."""
    pairs = exponent_family(params)
    rows = [(k, v.q, v.r, v.s, v.defect) for k, v in pairs.items()]
    for k in ("hat_sc", "bar_sc"):
        dp = distant_past_pair(pairs[k].q, pairs[k].r, params)
        rows.append((f"distant_{k}", dp.q, dp.r, dp.s, dp.defect))
    return rows
