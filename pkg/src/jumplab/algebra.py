"""Chain-rule substitutes for nonlocal energy estimates, as checkable predicates.

The pair g(t) = t^{-p}, G with G' = (-g')^{1/2} replaces the classical chain
rule when estimating energies of powers and logarithms of positive functions.
Every inequality used downstream is exposed here as a margin computation
(nonnegative margin = inequality holds), vectorized over numpy arrays and
reported relative to the larger side so tolerances are scale-free.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChainRulePair:
    """g(t) = t^{-p} together with its companion G and derivative G'.

    p = 1 is a dedicated logarithm branch (G = log t), not a limit of the
    power formula.
    """

    p: float

    def __post_init__(self):
        if self.p <= 0:
            raise ValueError("exponent p must be positive")

    @property
    def is_log(self) -> bool:
        return self.p == 1.0

    def g(self, t):
        t = _positive(t)
        return np.power(t, -self.p)

    def G(self, t):
        t = _positive(t)
        if self.is_log:
            return np.log(t)
        return (2.0 * np.sqrt(self.p) / (1.0 - self.p)) * np.power(t, (1.0 - self.p) / 2.0)

    def G_prime(self, t):
        t = _positive(t)
        # (-g'(t))^{1/2} = sqrt(p) t^{-(p+1)/2}; the log branch agrees (p = 1)
        return np.sqrt(self.p) * np.power(t, -(self.p + 1.0) / 2.0)


def _positive(t):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("argument must be strictly positive")
    return t


def eval_pair(pair: ChainRulePair, t):
    """Return (g, G, G', t*g, G^2, t*G', g/G') at t; all closed forms."""
    t = _positive(t)
    g = pair.g(t)
    G = pair.G(t)
    Gp = pair.G_prime(t)
    return g, G, Gp, t * g, G * G, t * Gp, g / Gp


def _rel(margin, scale):
    scale = np.maximum(np.abs(scale), 1e-300)
    return margin / scale


def check_chain_rule_bounds(pair: ChainRulePair, s, t) -> dict:
    """Margins of the convexity inequalities linking g, G and their increments.

    Returns relative margins (>= 0 up to roundoff when the inequality holds):
      square:            (s-t)(g(t)-g(s)) - (G(t)-G(s))^2
      quotient:          max(1/G'(t), 1/G'(s)) - |t-s|/|G(t)-G(s)|
      quotient_weighted: max(g/G'(t), g/G'(s)) - (g(t)^g(s) min)|t-s|/|dG|
      slope:             max(G'(t), G'(s)) - |g(t)-g(s)|/|G(t)-G(s)|
      slope_weighted:    max(tG'(t), sG'(s)) - (t^s min)|g(t)-g(s)|/|dG|
    Coincident s = t is the degenerate case: difference quotients are replaced
    by their G'-limits, every margin is then >= 0 trivially.
    """
    s = _positive(s)
    t = _positive(t)
    s, t = np.broadcast_arrays(s, t)
    g_t, g_s = pair.g(t), pair.g(s)
    G_t, G_s = pair.G(t), pair.G(s)
    Gp_t, Gp_s = pair.G_prime(t), pair.G_prime(s)
    dG = np.abs(G_t - G_s)
    dts = np.abs(t - s)
    dg = np.abs(g_t - g_s)
    same = dG == 0

    lhs_sq = (s - t) * (g_t - g_s)
    rhs_sq = dG * dG
    out = {"square": _rel(lhs_sq - rhs_sq, np.maximum(np.abs(lhs_sq), rhs_sq))}

    with np.errstate(divide="ignore", invalid="ignore"):
        q1 = np.where(same, 1.0 / np.maximum(Gp_t, Gp_s), dts / np.where(same, 1.0, dG))
        b1 = np.maximum(1.0 / Gp_t, 1.0 / Gp_s)
        out["quotient"] = _rel(b1 - q1, b1)

        gmin = np.minimum(g_t, g_s)
        q2 = np.where(same, gmin / np.maximum(Gp_t, Gp_s),
                      gmin * dts / np.where(same, 1.0, dG))
        b2 = np.maximum(g_t / Gp_t, g_s / Gp_s)
        out["quotient_weighted"] = _rel(b2 - q2, b2)

        q3 = np.where(same, np.minimum(Gp_t, Gp_s), dg / np.where(same, 1.0, dG))
        b3 = np.maximum(Gp_t, Gp_s)
        out["slope"] = _rel(b3 - q3, b3)

        tmin = np.minimum(t, s)
        q4 = np.where(same, tmin * np.minimum(Gp_t, Gp_s),
                      tmin * dg / np.where(same, 1.0, dG))
        b4 = np.maximum(t * Gp_t, s * Gp_s)
        out["slope_weighted"] = _rel(b4 - q4, b4)
    return out


def check_weighted(tau1, tau2, Gt, Gs, delta) -> dict:
    """Margins of the weighted-increment inequalities and the max/min weight swap.

    lower:  (min tau^2)|Gt-Gs|^2 >= |tau1 Gt - tau2 Gs|^2 / 2 - (dtau)^2 max(G^2)
    upper:  (max tau^2)|Gt-Gs|^2 <= 2|tau1 Gt - tau2 Gs|^2 + 2 (dtau)^2 max(G^2)
    swap:   max tau^2 <= (1+delta) min tau^2 + (1+delta)/delta (dtau)^2
    """
    tau1 = np.asarray(tau1, dtype=float)
    tau2 = np.asarray(tau2, dtype=float)
    Gt = np.asarray(Gt, dtype=float)
    Gs = np.asarray(Gs, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if np.any(tau1 < 0) or np.any(tau2 < 0):
        raise ValueError("weights must be nonnegative")
    if np.any((delta <= 0) | (delta >= 1)):
        raise ValueError("delta must lie in (0, 1)")
    tmin2 = np.minimum(tau1, tau2) ** 2
    tmax2 = np.maximum(tau1, tau2) ** 2
    dtau2 = (tau1 - tau2) ** 2
    gmax2 = np.maximum(Gt * Gt, Gs * Gs)
    cross = (tau1 * Gt - tau2 * Gs) ** 2
    diff2 = (Gt - Gs) ** 2

    lhs = tmin2 * diff2
    rhs = 0.5 * cross - dtau2 * gmax2
    lower = _rel(lhs - rhs, np.maximum(lhs, np.abs(rhs)))

    lhs_u = 2.0 * cross + 2.0 * dtau2 * gmax2
    rhs_u = tmax2 * diff2
    upper = _rel(lhs_u - rhs_u, np.maximum(lhs_u, rhs_u))

    lhs_s = (1.0 + delta) * tmin2 + (1.0 + delta) / delta * dtau2
    swap = _rel(lhs_s - tmax2, np.maximum(lhs_s, tmax2))
    return {"lower": lower, "upper": upper, "swap": swap}


def check_log_weight(tau1, tau2, t, s) -> dict:
    """Margin of the log-branch weighted inequality.

    (min tau^2)|log t - log s|^2
        >= (min tau^2)(log(t/tau1) - log(s/tau2))^2 / 2 - (tau1 - tau2)^2,
    with vanishing-weight pairs handled by the min factor being zero.
    """
    tau1 = np.asarray(tau1, dtype=float)
    tau2 = np.asarray(tau2, dtype=float)
    t = _positive(t)
    s = _positive(s)
    if np.any(tau1 < 0) or np.any(tau2 < 0):
        raise ValueError("weights must be nonnegative")
    tau1, tau2, t, s = np.broadcast_arrays(tau1, tau2, t, s)
    tmin2 = np.minimum(tau1, tau2) ** 2
    dtau2 = (tau1 - tau2) ** 2
    dlog = np.log(t) - np.log(s)
    with np.errstate(divide="ignore", invalid="ignore"):
        shifted = np.where(tmin2 > 0,
                           (np.log(t / np.where(tau1 > 0, tau1, 1.0))
                            - np.log(s / np.where(tau2 > 0, tau2, 1.0))) ** 2,
                           0.0)
    lhs = tmin2 * dlog * dlog
    rhs = 0.5 * tmin2 * shifted - dtau2
    return {"log_lower": _rel(lhs - rhs, np.maximum(lhs, np.abs(rhs)) + dtau2)}
