"""Incentive and identity audits for the shipped mechanisms.

Each auditable mechanism exposes its exact interim rule: the win probability
and expected payment of one agent as a function of their bid, with all
opponent bids fixed and all mechanism randomness integrated out in closed
form. On top of that rule sit:

- a deviation scan (no bid may beat truthful bidding),
- a payment-identity check p(b) = b*x(b) - integral of x from 0 to b,
  evaluated exactly for step rules by midpoint sampling between grid points,
- Monte Carlo verification that expected utility equals the expected utility
  virtual value of winners, and that ironing only raises the virtual-value
  objective for monotone rules,
- the split-balance probe: how often a uniform random half that misses the
  top agent also stays under 3/4 of every prefix.

A deliberately non-truthful first-price variant is included as a control; the
deviation scan must flag it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .common import MechanismEval, mc_eval, substream
from .distributions import (ValueDistribution, ValuationProfile, as_profile,
                            sample_profile, virtual_value_utility)
from .ironing import DEFAULT_GRID, IronedVirtual, iron
from .mechanisms import (_bayes_rule, _ladder_sizes, _optimal_strict_price,
                         _vickrey_rule)

DSIC_TOL = 1e-9
PROBE_EXACT_CAP = 20
MIN_IDENTITY_GRID = 256


# ---------------------------------------------------------------------------
# interim adapters


def _vickrey_interim(opponents: np.ndarray, k: int, bids: np.ndarray):
    """Exact interim rule of k-unit Vickrey against fixed opponent bids."""
    o = np.asarray(opponents, dtype=float)
    b = np.asarray(bids, dtype=float)
    if o.size < k:
        return np.ones_like(b), np.zeros_like(b)
    o_asc = np.sort(o)
    thresh = o_asc[o.size - k]
    above = o.size - np.searchsorted(o_asc, b, side="right")
    tied = np.searchsorted(o_asc, b, side="right") - np.searchsorted(o_asc, b, side="left")
    x = np.where(b > thresh, 1.0,
                 np.where(b == thresh, (k - above) / (tied + 1), 0.0))
    return x, x * thresh


def _top_share_interim(opponents: np.ndarray, top: int, units: int,
                       bids: np.ndarray):
    """Interim rule of "share units among the top `top` bidders" at the
    top+1-st price, uniform tie-breaks."""
    o = np.asarray(opponents, dtype=float)
    b = np.asarray(bids, dtype=float)
    o_asc = np.sort(o)
    price = o_asc[o.size - top] if o.size >= top else 0.0
    above = o.size - np.searchsorted(o_asc, b, side="right")
    tied = np.searchsorted(o_asc, b, side="right") - np.searchsorted(o_asc, b, side="left")
    in_top = np.where(above >= top, 0.0,
                      np.minimum(1.0, (top - above) / (tied + 1)))
    x = min(units, top) / top * in_top
    return x, x * price


class AuditableMechanism:
    """Exact interim view of a mechanism for one deviating agent."""

    name: str

    def interim(self, values: np.ndarray, i: int, bids: np.ndarray):
        raise NotImplementedError

    def breakpoints(self, values: np.ndarray, i: int) -> np.ndarray:
        """Bids where the interim allocation may jump."""
        return np.unique(np.delete(np.asarray(values, dtype=float), i))


class _PLottery(AuditableMechanism):
    def __init__(self, k: int, p: float):
        self.name = "plottery"
        self.k = k
        self.p = p

    def interim(self, values, i, bids):
        b = np.asarray(bids, dtype=float)
        o = np.delete(np.asarray(values, dtype=float), i)
        m_opp = int((o >= self.p).sum())
        elig = b >= self.p
        m = m_opp + elig
        x = np.where(elig, np.minimum(self.k, m) / np.maximum(m, 1), 0.0)
        return x, x * self.p

    def breakpoints(self, values, i):
        return np.array([self.p])


class _PQLottery(AuditableMechanism):
    def __init__(self, k: int, p: float, q: float):
        if q > p:
            raise ValueError("need q <= p")
        self.name = "pqlottery"
        self.k = k
        self.p = p
        self.q = q

    def interim(self, values, i, bids):
        k, p, q = self.k, self.p, self.q
        b = np.asarray(bids, dtype=float)
        o = np.delete(np.asarray(values, dtype=float), i)
        s = int((o > p).sum()) + (b > p)
        t = int(((o > q) & (o <= p)).sum()) + ((b > q) & (b <= p))
        top = b > p
        band = (b > q) & (b <= p)
        case1 = s > k
        case2 = ~case1 & (s + t <= k)
        mid = ~case1 & ~case2
        share = k / np.maximum(s, 1)
        frac = (k - s) / np.maximum(t, 1)
        blend = ((k - s + 1) * q + (s + t - k) * p) / (t + 1)
        x = np.select([case1 & top, case2 & (b > q), mid & top, mid & band],
                      [share, 1.0, 1.0, frac], 0.0)
        pay = np.select([case1 & top, case2 & (b > q), mid & top, mid & band],
                        [share * p, q, blend, frac * q], 0.0)
        return x, pay

    def breakpoints(self, values, i):
        return np.array([self.q, self.p])


class _Vickrey(AuditableMechanism):
    def __init__(self, k: int):
        self.name = "vickrey"
        self.k = k

    def interim(self, values, i, bids):
        values = np.asarray(values, dtype=float)
        if values.size <= self.k:
            b = np.asarray(bids, dtype=float)
            return np.ones_like(b), np.zeros_like(b)
        return _vickrey_interim(np.delete(values, i), self.k, bids)


class _FirstPrice(AuditableMechanism):
    """Top-k allocation but winners burn their own bid. Not truthful."""

    def __init__(self, k: int):
        self.name = "firstprice"
        self.k = k

    def interim(self, values, i, bids):
        x, _ = _Vickrey(self.k).interim(values, i, bids)
        return x, x * np.asarray(bids, dtype=float)


class _Bayes(AuditableMechanism):
    def __init__(self, iv: IronedVirtual, k: int):
        self.name = "bayes"
        self.iv = iv
        self.k = k

    def interim(self, values, i, bids):
        b = np.asarray(bids, dtype=float)
        V = np.tile(np.asarray(values, dtype=float), (b.size, 1))
        V[:, i] = b
        X, P = _bayes_rule(self.iv, V, self.k)
        return np.ascontiguousarray(X[:, i]), np.ascontiguousarray(P[:, i])

    def breakpoints(self, values, i):
        edges = [e for iv_int in self.iv.intervals
                 for e in (iv_int.v_lo, iv_int.v_hi)]
        return np.unique(np.concatenate(
            (np.delete(np.asarray(values, dtype=float), i), edges)))


class _RSOL(AuditableMechanism):
    def __init__(self, k: int):
        self.name = "rsol"
        self.k = k

    def interim(self, values, i, bids):
        b = np.asarray(bids, dtype=float)
        o = np.delete(np.asarray(values, dtype=float), i)
        nop = o.size
        x = np.zeros_like(b)
        pay = np.zeros_like(b)
        for mask in range(1 << nop):
            in_half = (mask >> np.arange(nop)) & 1 > 0
            _, p2 = _optimal_strict_price(o[~in_half], self.k)
            m = int((o[in_half] > p2).sum()) + (b > p2)
            xl = np.where(b > p2,
                          np.minimum(self.k, m) / np.maximum(m, 1), 0.0)
            xv, pv = _vickrey_interim(o[in_half], self.k, b)
            x += 0.5 * (xl + xv)
            pay += 0.5 * (xl * p2 + pv)
        # agent joins the serving half with probability 1/2
        scale = 0.5 / (1 << nop)
        return x * scale, pay * scale


class _Mix(AuditableMechanism):
    def __init__(self):
        self.name = "mix"

    def interim(self, values, i, bids):
        values = np.asarray(values, dtype=float)
        if values.size != 2:
            raise ValueError("the mixture mechanism is defined for exactly 2 agents")
        xv, pv = _vickrey_interim(np.delete(values, i), 1, bids)
        return xv / 3.0 + 1.0 / 3.0, pv / 3.0


class _LogPrice(AuditableMechanism):
    def __init__(self, k: int):
        self.name = "logprice"
        self.k = k

    def interim(self, values, i, bids):
        values = np.asarray(values, dtype=float)
        o = np.delete(values, i)
        sizes = _ladder_sizes(values.size, self.k)
        b = np.asarray(bids, dtype=float)
        x = np.zeros_like(b)
        pay = np.zeros_like(b)
        for top in sizes:
            xt, pt = _top_share_interim(o, top, self.k, b)
            x += xt
            pay += pt
        return x / len(sizes), pay / len(sizes)


def audit_mechanism(name: str, k: int = 1, *, p: float = 0.0, q: float = 0.0,
                    iv: IronedVirtual | None = None) -> AuditableMechanism:
    """Build the interim adapter for a mechanism name.

    Names match the CLI: plottery, pqlottery, vickrey, bayes, rsol, mix,
    logprice, plus the non-truthful firstprice control.
    """
    if name == "plottery":
        return _PLottery(k, p)
    if name == "pqlottery":
        return _PQLottery(k, p, q)
    if name == "vickrey":
        return _Vickrey(k)
    if name == "bayes":
        if iv is None:
            raise ValueError("bayes audit needs an ironed virtual value")
        return _Bayes(iv, k)
    if name == "rsol":
        return _RSOL(k)
    if name == "mix":
        return _Mix()
    if name == "logprice":
        return _LogPrice(k)
    if name == "firstprice":
        return _FirstPrice(k)
    raise ValueError(f"unknown mechanism {name!r}")


# ---------------------------------------------------------------------------
# deviation scan and payment identity


@dataclass(frozen=True)
class DeviationReport:
    mechanism: str
    passed: bool
    max_gain: float
    agent: int
    bid: float
    tol: float


@dataclass(frozen=True)
class InterimRule:
    """One agent's interim rule tabulated on a bid grid starting at 0.

    x_mid holds win probabilities at cell midpoints; for step rules whose
    jumps all lie on grid points this makes the running integral of x exact.
    """

    agent: int
    bids: np.ndarray
    x: np.ndarray
    p: np.ndarray
    x_mid: np.ndarray


@dataclass(frozen=True)
class PaymentIdentityReport:
    passed: bool
    monotone: bool
    max_error: float
    agent: int


def check_dsic(mech: AuditableMechanism, profile, bid_grid,
               tol: float = DSIC_TOL) -> DeviationReport:
    """Scan every agent and grid bid for a profitable deviation."""
    values = as_profile(profile).values
    grid = np.asarray(bid_grid, dtype=float)
    worst = -np.inf
    arg = (0, 0.0)
    for i in range(values.size):
        bids = np.unique(np.concatenate((grid, [values[i]])))
        x, pay = mech.interim(values, i, bids)
        utility = values[i] * x - pay
        truth = int(np.searchsorted(bids, values[i]))
        gain = utility - utility[truth]
        j = int(np.argmax(gain))
        if gain[j] > worst:
            worst = float(gain[j])
            arg = (i, float(bids[j]))
    return DeviationReport(mech.name, worst <= tol, worst, arg[0], arg[1], tol)


def extract_interim_rule(mech: AuditableMechanism, profile, i: int,
                         bid_grid) -> InterimRule:
    """Tabulate agent i's interim rule on the grid plus known breakpoints."""
    values = as_profile(profile).values
    bids = np.unique(np.concatenate(
        ([0.0], np.asarray(bid_grid, dtype=float), mech.breakpoints(values, i))))
    x, p = mech.interim(values, i, bids)
    mids = 0.5 * (bids[1:] + bids[:-1])
    x_mid, _ = mech.interim(values, i, mids)
    return InterimRule(i, bids, x, p, x_mid)


def check_payment_identity(rule: InterimRule,
                           tol: float = DSIC_TOL) -> PaymentIdentityReport:
    """Verify p(b) = b*x(b) - integral of x on the tabulated rule.

    A non-monotone win probability fails before the identity is evaluated.
    """
    if rule.bids.size < MIN_IDENTITY_GRID:
        raise ValueError(f"need at least {MIN_IDENTITY_GRID} grid bids")
    if rule.bids[0] != 0.0:
        raise ValueError("bid grid must start at 0 for the identity integral")
    eps = 1e-12
    monotone = (np.all(np.diff(rule.x) >= -eps)
                and np.all(rule.x_mid >= rule.x[:-1] - eps)
                and np.all(rule.x_mid <= rule.x[1:] + eps))
    if not monotone:
        return PaymentIdentityReport(False, False, np.inf, rule.agent)
    integral = np.concatenate(
        ([0.0], np.cumsum(rule.x_mid * np.diff(rule.bids))))
    predicted = rule.bids * rule.x - integral
    err = float(np.max(np.abs(rule.p - predicted)))
    return PaymentIdentityReport(err <= tol, True, err, rule.agent)


def audit_profiles(seed: int, count: int = 100,
                   n_range: tuple[int, int] = (2, 8),
                   dist: ValueDistribution | None = None) -> list[ValuationProfile]:
    """Random audit corpus; injects exact ties to stress tie-breaking.

    With a distribution the profiles are prior draws (as the prior-dependent
    mechanism requires); otherwise values are uniform on a random scale.
    """
    profiles = []
    for idx in range(count):
        rng = substream(seed, "audit-corpus", idx)
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        if dist is not None:
            prof = sample_profile(dist, n, rng)
            values = prof.values.copy()
        else:
            values = 10.0 ** rng.uniform(-1, 1) * rng.random(n)
        if n >= 2 and rng.random() < 0.3:
            a, b = rng.choice(n, size=2, replace=False)
            values[a] = values[b]
        profiles.append(ValuationProfile(values))
    return profiles


# ---------------------------------------------------------------------------
# virtual-value identities


def _batch_rule(name: str, d: ValueDistribution, V: np.ndarray, k: int,
                iv: IronedVirtual | None):
    if name in ("lottery", "constant"):
        n = V.shape[1]
        X = np.full_like(V, min(k, n) / n, dtype=float)
        return X, np.zeros_like(V)
    if name == "vickrey":
        return _vickrey_rule(V, k)
    if name == "bayes":
        return _bayes_rule(iv if iv is not None else iron(d), V, k)
    raise ValueError(f"unknown batch rule {name!r}")


@dataclass(frozen=True)
class IdentityReport:
    """Paired MC estimates of expected utility and expected virtual value."""

    utility: MechanismEval
    virtual: MechanismEval
    passed: bool


def _overlap(a: MechanismEval, b: MechanismEval) -> bool:
    return max(a.ci[0], b.ci[0]) <= min(a.ci[1], b.ci[1])


def verify_utility_identity(d: ValueDistribution, mechanism: str, k: int,
                            n: int, reps: int, seed: int,
                            iv: IronedVirtual | None = None) -> IdentityReport:
    """Check E[sum of utilities] = E[sum of theta(v)*x] by CI overlap.

    The bare identity assumes the support starts at 0. When it starts at
    a > 0 the interim win probability below the support still accumulates
    utility, contributing a * x_i(a) per agent; that term is added to the
    virtual side (the rules here are constant in the bid below a, so
    evaluating at the support bottom is exact).
    """
    rng = substream(seed, "utility-identity", mechanism, n, k)
    V = np.asarray(d.quantile(rng.random((reps, n))), dtype=float)
    X, P = _batch_rule(mechanism, d, V, k, iv)
    theta = np.asarray(virtual_value_utility(d, V), dtype=float)
    virtual_samples = (theta * X).sum(axis=1)
    bottom = d.support[0]
    if bottom > 0.0:
        for i in range(n):
            W = V.copy()
            W[:, i] = bottom
            Xa, _ = _batch_rule(mechanism, d, W, k, iv)
            virtual_samples = virtual_samples + bottom * Xa[:, i]
    utility = mc_eval((V * X - P).sum(axis=1), seed)
    virtual = mc_eval(virtual_samples, seed)
    return IdentityReport(utility, virtual, _overlap(utility, virtual))


@dataclass(frozen=True)
class DominanceReport:
    """Paired MC difference E[sum (phibar - theta) x] for a monotone rule.

    slack absorbs the grid discretization of phibar; inequality_passed is the
    one-sided test, equality the two-sided one, strict the significantly
    positive case.
    """

    diff_mean: float
    diff_se: float
    slack: float
    inequality_passed: bool
    equality: bool
    strict: bool


def _cell_virtual(iv: IronedVirtual, V: np.ndarray) -> np.ndarray:
    """Utility virtual value averaged over the grid cell containing each v.

    Uses the same integral H that the hull slopes come from, so the
    dominance comparison is free of quadrature bias: with no ironing the
    hull keeps every node and the two sides agree exactly.
    """
    qv = np.clip(np.asarray(iv.dist.cdf(V), dtype=float), iv.q[0], iv.q[-1])
    cell = np.clip(np.searchsorted(iv.q, qv, side="right") - 1,
                   0, iv.q.size - 2)
    slopes = np.diff(iv.H) / np.diff(iv.q)
    return slopes[cell]


def verify_ironing_dominance(d: ValueDistribution, monotone_rule: str,
                             reps: int, seed: int, k: int = 1, n: int = 8,
                             iv: IronedVirtual | None = None,
                             slack: float | None = None) -> DominanceReport:
    """Check that ironing never lowers the virtual-value objective.

    Both sides are evaluated on the ironing grid's cell averages; see
    _cell_virtual for why.
    """
    if iv is None:
        iv = iron(d)
    if slack is None:
        slack = 1e-3 * min(k, n) * (1.0 + d.mean)
    rng = substream(seed, "dominance", monotone_rule, n, k)
    V = np.asarray(d.quantile(rng.random((reps, n))), dtype=float)
    X, _ = _batch_rule(monotone_rule, d, V, k, iv)
    theta = _cell_virtual(iv, V)
    phibar = np.asarray(iv.value(V), dtype=float)
    diff = ((phibar - theta) * X).sum(axis=1)
    mean = float(diff.mean())
    se = float(diff.std(ddof=1)) / np.sqrt(diff.size)
    band = 3.0 * se + slack
    return DominanceReport(mean, se, slack, mean >= -band,
                           abs(mean) <= band, mean > band)


# ---------------------------------------------------------------------------
# split-balance probe


def balanced_sampling_probe(n: int, trials: int = 100_000,
                            seed: int = 0) -> float:
    """P(every prefix count n_i <= (3/4)i | top agent not sampled).

    Exact enumeration of the 2^(n-1) conditioned subsets up to n = 20, a
    seeded Monte Carlo estimate beyond.
    """
    if n < 1:
        raise ValueError("need at least one agent")
    if n == 1:
        return 1.0
    m = n - 1
    limits = 0.75 * np.arange(2, n + 1)
    if n <= PROBE_EXACT_CAP:
        masks = np.arange(1 << m, dtype=np.uint32)
        memb = (masks[:, None] >> np.arange(m, dtype=np.uint32)) & 1
        counts = np.cumsum(memb.astype(np.int16), axis=1)
        ok = (counts <= limits).all(axis=1)
        return float(ok.mean())
    rng = substream(seed, "balanced-probe", n)
    good = 0
    rows = max(1, 2_000_000 // m)
    done = 0
    while done < trials:
        take = min(rows, trials - done)
        memb = rng.integers(0, 2, size=(take, m), dtype=np.int8)
        counts = np.cumsum(memb, axis=1, dtype=np.int32)
        good += int((counts <= limits).all(axis=1).sum())
        done += take
    return good / trials
