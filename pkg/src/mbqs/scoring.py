"""From shot records to P2(L), the score S and the volumetric grid.

Conventions
-----------
sz = 2 b - 1 for a measured bit b. All correlators are averaged over the L
translations of the ring. The connected two-point estimator is the plug-in
form (mean of products minus the square of the mean); its standard error is a
jackknife over shots.
"""

from dataclasses import dataclass, field, asdict
import math

import numpy as np

from .errors import ChannelNotInvertibleError, DivisionGuardError, RegressionError

THEORY_FLOOR = 1e-12
POLICIES = ("strict", "lenient")


@dataclass(frozen=True)
class CorrelationEstimate:
    value: float
    stderr: float
    n_shots: int = 0

    def __post_init__(self):
        if not self.stderr >= 0:
            raise ValueError("stderr must be non-negative")


@dataclass(frozen=True)
class P2Estimate(CorrelationEstimate):
    """P2 with its delta-method error, the distances used and any caveats."""

    ells: tuple = ()
    flags: tuple = ()
    jackknife_stderr: float = math.nan


def _as_estimate(x):
    if isinstance(x, CorrelationEstimate):
        return x
    if isinstance(x, (tuple, list)):
        return CorrelationEstimate(float(x[0]), float(x[1]))
    return CorrelationEstimate(float(x), 0.0)


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------


def _shot_moments(spins, ells):
    """Per-shot translation averages: m_s = <sz>, q_s(ell) = <sz_i sz_{i+ell}>."""
    m = spins.mean(axis=1)
    q = np.column_stack([(spins * np.roll(spins, -ell, axis=1)).mean(axis=1) for ell in ells])
    return m, q


def _jackknife(stat_loo):
    n = stat_loo.shape[0]
    return np.sqrt((n - 1) / n * np.sum((stat_loo - stat_loo.mean(axis=0)) ** 2, axis=0))


def estimate_correlators(records, ells=None):
    """Translation-averaged one-point and connected two-point estimates.

    Parameters
    ----------
    records : ShotRecordSet
    ells : iterable of int, optional
        Distances; defaults to 1 .. L // 2.

    Returns
    -------
    dict
        ``one_point`` : CorrelationEstimate with the sample standard error of
        the per-shot site average; ``g2`` : {ell: CorrelationEstimate} with
        jackknife standard errors.
    """
    L = records.L
    ells = list(range(1, L // 2 + 1)) if ells is None else [int(e) for e in ells]
    spins = records.spins()
    n = spins.shape[0]
    m, q = _shot_moments(spins, ells)
    M, Q = m.sum(), q.sum(axis=0)
    mean_m = M / n
    one_se = float(m.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    g2 = Q / n - mean_m**2
    if n > 1:
        loo = (Q[None, :] - q) / (n - 1) - (((M - m) / (n - 1)) ** 2)[:, None]
        g2_se = _jackknife(loo)
    else:
        g2_se = np.zeros(len(ells))
    return {
        "one_point": CorrelationEstimate(float(mean_m), one_se, n),
        "g2": {ell: CorrelationEstimate(float(v), float(s), n) for ell, v, s in zip(ells, g2, g2_se)},
    }


def _channel(p_fp, p_fn):
    if not (0 <= p_fp <= 1 and 0 <= p_fn <= 1):
        raise ValueError("readout probabilities must lie in [0, 1]")
    s = p_fp + p_fn
    if s >= 1:
        raise ChannelNotInvertibleError(f"p_fp + p_fn = {s} >= 1 cannot be inverted")
    return s, p_fp - p_fn


def readout_mitigate(est, p_fp, p_fn):
    """Invert the symmetric-in-expectation binary readout channel.

    <sz> -> (<sz> - d) / (1 - s) and g2 -> g2 / (1 - s)^2 with
    s = p_fp + p_fn and d = p_fp - p_fn. Standard errors scale by the same
    factors.
    """
    s, d = _channel(p_fp, p_fn)
    one = est["one_point"]
    out = {
        "one_point": CorrelationEstimate((one.value - d) / (1 - s), one.stderr / (1 - s), one.n_shots),
        "g2": {ell: CorrelationEstimate(e.value / (1 - s) ** 2, e.stderr / (1 - s) ** 2, e.n_shots)
               for ell, e in est["g2"].items()},
    }
    return out


# ---------------------------------------------------------------------------
# P2
# ---------------------------------------------------------------------------


def p2_distances(L):
    """Distances entering P2(L) and any caveat flags."""
    if L < 3:
        raise ValueError("P2 needs L >= 3")
    if L == 3:
        return (1,), ("L3_nearest_neighbour_only",)
    return tuple(range(2, L // 2 + 1)), ()


def _theory_values(theory, ells):
    th = {}
    for ell in ells:
        if ell not in theory:
            raise KeyError(f"no reference value for ell = {ell}")
        v = float(theory[ell])
        if abs(v) < THEORY_FLOOR:
            raise DivisionGuardError(f"reference g2 at ell = {ell} is below {THEORY_FLOOR}", ell=ell)
        th[ell] = v
    return th


def p2_score(exp, theory, L, records=None, p_fp=0.0, p_fn=0.0):
    """Average relative error of the connected correlators.

    P2 = mean over ell in 2 .. L // 2 of |(g2_exp - g2_th) / g2_th|. For L = 3
    the nearest-neighbour term is used instead and the result is flagged.

    Parameters
    ----------
    exp : mapping ell -> CorrelationEstimate, (value, stderr) or float
    theory : mapping ell -> float
    L : int
    records : ShotRecordSet, optional
        When given, a shot-level jackknife error is computed as a cross-check
        of the delta-method error (with the same readout inversion).
    p_fp, p_fn : float
        Readout probabilities used for the jackknife replicas.

    Returns
    -------
    P2Estimate
    """
    ells, flags = p2_distances(L)
    th = _theory_values(theory, ells)
    ests = {ell: _as_estimate(exp[ell]) for ell in ells}
    terms = np.array([abs((ests[e].value - th[e]) / th[e]) for e in ells])
    # d|x - t| / dx = sign(x - t); zero-residual terms propagate with unit slope
    grads = np.array([ests[e].stderr / abs(th[e]) for e in ells])
    value = float(terms.mean())
    stderr = float(math.sqrt(np.sum(grads**2)) / len(ells))
    n = min((ests[e].n_shots for e in ells), default=0)
    jk = math.nan
    if records is not None:
        jk = _p2_jackknife(records, th, ells, p_fp, p_fn)
    return P2Estimate(value, stderr, n, tuple(ells), flags, jk)


def _p2_jackknife(records, th, ells, p_fp, p_fn):
    spins = records.spins()
    n = spins.shape[0]
    if n < 2:
        return math.nan
    s, _ = _channel(p_fp, p_fn)
    m, q = _shot_moments(spins, ells)
    M, Q = m.sum(), q.sum(axis=0)
    g2 = ((Q[None, :] - q) / (n - 1) - (((M - m) / (n - 1)) ** 2)[:, None]) / (1 - s) ** 2
    t = np.array([th[e] for e in ells])
    p2 = np.mean(np.abs((g2 - t) / t), axis=1)
    return float(_jackknife(p2[:, None])[0])


# ---------------------------------------------------------------------------
# score
# ---------------------------------------------------------------------------


def classify(mean, stderr, epsilon):
    """pass, inconclusive or fail for one (L, epsilon) cell."""
    if mean + stderr <= epsilon:
        return "pass"
    if mean <= epsilon:
        return "inconclusive"
    return "fail"


@dataclass
class ScoreReport:
    p2: dict
    S: int
    epsilon: float
    policy: str
    cells: dict
    scores: dict
    excluded: tuple = ()
    missing: tuple = ()
    lower_bounded: bool = False
    mitigation: dict = field(default_factory=lambda: {"enabled": False})
    flags: dict = field(default_factory=dict)

    def volumetric_rows(self):
        return [(L, eps, status) for (L, eps), status in sorted(self.cells.items())]

    def to_dict(self):
        return {
            "S": self.S,
            "epsilon": self.epsilon,
            "policy": self.policy,
            "lower_bounded": self.lower_bounded,
            "missing_L": list(self.missing),
            "excluded_L": list(self.excluded),
            "mitigation": self.mitigation,
            "scores_by_epsilon": {repr(float(e)): s for e, s in sorted(self.scores.items())},
            "p2": {str(L): {k: v for k, v in asdict(est).items()
                            if not (isinstance(v, float) and math.isnan(v))}
                   for L, est in sorted(self.p2.items())},
            "volumetric": [{"L": L, "epsilon": e, "status": s} for L, e, s in self.volumetric_rows()],
            "flags": {str(L): list(f) for L, f in sorted(self.flags.items())},
        }


def _score_at(p2, Ls, epsilon, policy):
    ok = ("pass",) if policy == "strict" else ("pass", "inconclusive")
    S = 0
    for L in Ls:
        if classify(p2[L].value, p2[L].stderr, epsilon) not in ok:
            break
        S = L
    return S


def mbqs_score(p2, epsilon, policy="strict", exclude=(), epsilons=None, mitigation=None):
    """Largest L such that every included L' <= L passes at ``epsilon``.

    Parameters
    ----------
    p2 : mapping L -> CorrelationEstimate or (mean, stderr)
    epsilon : float
    policy : {"strict", "lenient"}
        strict counts only ``pass`` cells, lenient also ``inconclusive``.
    exclude : iterable of int
        Sizes left out of the rule; recorded in the report.
    epsilons : iterable of float, optional
        Thresholds for the volumetric grid; ``epsilon`` is always included.
    mitigation : dict, optional
        Readout parameters to record.

    Returns
    -------
    ScoreReport
        S is 0 when the smallest size already fails. When sizes are missing
        between the smallest and largest, S stops below the first gap and is
        marked as a lower bound.
    """
    if policy not in POLICIES:
        raise ValueError(f"policy must be one of {POLICIES}")
    ests = {int(L): _as_estimate(v) for L, v in p2.items()}
    exclude = tuple(sorted(int(x) for x in exclude))
    Ls = sorted(L for L in ests if L not in exclude)
    if not Ls:
        raise ValueError("no sizes left to score")
    missing = tuple(L for L in range(Ls[0], Ls[-1] + 1) if L not in ests and L not in exclude)
    contiguous = [L for L in Ls if not missing or L < missing[0]]
    grid = sorted({float(epsilon), *(float(e) for e in (epsilons or ()))})
    cells = {(L, e): classify(ests[L].value, ests[L].stderr, e) for L in sorted(ests) for e in grid}
    scores = {e: _score_at(ests, contiguous, e, policy) for e in grid}
    flags = {L: tuple(getattr(est, "flags", ())) for L, est in ests.items() if getattr(est, "flags", ())}
    return ScoreReport(
        p2=ests,
        S=scores[float(epsilon)],
        epsilon=float(epsilon),
        policy=policy,
        cells=cells,
        scores=scores,
        excluded=exclude,
        missing=missing,
        lower_bounded=bool(missing),
        mitigation=mitigation or {"enabled": False},
        flags=flags,
    )


# ---------------------------------------------------------------------------
# dephasing law
# ---------------------------------------------------------------------------


def dephasing_fit(samples):
    """beta from least squares of log eta = -beta * gamma * g * L^2 (no intercept).

    Parameters
    ----------
    samples : iterable of (gamma, g, L, eta)
    """
    x, y = [], []
    for gamma, g, L, eta in samples:
        if not eta > 0:
            raise ValueError(f"eta must be positive, got {eta}")
        x.append(gamma * g * L * L)
        y.append(math.log(eta))
    x, y = np.array(x, float), np.array(y, float)
    if not np.any(x > 0):
        raise RegressionError("need at least one sample with gamma * g * L^2 > 0")
    beta = float(-np.dot(x, y) / np.dot(x, x))
    if beta <= 0:
        raise RegressionError(f"fitted beta = {beta} is not positive")
    return beta


def predicted_score(gamma, epsilon, beta):
    """S = sqrt(-ln(1 - epsilon) / (beta gamma)) for the antipodal correlator at g = 1."""
    if gamma <= 0 or beta <= 0:
        raise ValueError("gamma and beta must be positive")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    return math.sqrt(-math.log(1 - epsilon) / (beta * gamma))
