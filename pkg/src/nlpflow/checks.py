"""Structural identity suite for the field construction.

Each check mirrors a guaranteed identity of the construction; the suite
is run at randomly sampled feasible points by the ``check`` CLI command
and by the test suite.
"""

from __future__ import annotations

import numpy as np

from .field import dissipation, field_eval
from .kkt import kkt_residual, multipliers


def identity_violations(p, params, x, rng, fact2_draws=5):
    """Run every identity check at one feasible point.

    Returns a list of human-readable violation messages (empty = clean).
    """
    fe = field_eval(p, params, x)
    bad = []
    normF = float(np.linalg.norm(fe.F))

    # Projector is idempotent and annihilates the equality gradients.
    if np.max(np.abs(fe.H @ fe.H - fe.H)) > 1e-10:
        bad.append("projector not idempotent")
    if fe.A.size and np.max(np.abs(fe.A @ fe.H)) > 1e-10:
        bad.append("A H != 0")
    if fe.A.size and np.max(np.abs(fe.H @ fe.A.T)) > 1e-10:
        bad.append("H A' != 0")

    # Quadratic form of the projector equals the squared projected norm.
    for _ in range(fact2_draws):
        xi = rng.standard_normal(p.n)
        lhs = float(xi @ fe.H @ xi)
        rhs = float(np.linalg.norm(fe.H @ xi) ** 2)
        if abs(lhs - rhs) > 1e-10 * (1.0 + abs(rhs)):
            bad.append("xi' H xi != |H xi|^2")
            break

    # The field is tangent to the equality manifold.
    if fe.A.size and np.max(np.abs(fe.A @ fe.F)) > 1e-9 * (1.0 + normF):
        bad.append("A F != 0")

    # Strict descent away from critical points.
    rate = dissipation(fe)
    if normF > 1e-6 and not rate < 0:
        bad.append(f"dissipation {rate:.3e} not negative at |F|={normF:.3e}")

    # Direct dot product agrees with the assembled dissipation rate.
    scale = 1e-9 * (1.0 + np.linalg.norm(fe.grad_theta) * normF)
    if abs(fe.dtheta_F - rate) > scale:
        bad.append("grad(theta).F disagrees with the dissipation identity")

    if p.k:
        # Boundary-rate identity for B F, with a fresh solve for Q^{-1} w.
        qinv_w = np.linalg.solve(fe.Q, fe.w)
        resid = fe.B @ fe.F - (fe.g * qinv_w - fe.r3 * fe.vplus)
        if np.max(np.abs(resid)) > 1e-9 * (1.0 + normF):
            bad.append("B F identity violated")

        # Per-row rate identity through omega.
        rows = fe.B @ fe.F
        model_rows = fe.g * fe.omega - fe.r3 * fe.vplus
        denom = 1.0 + np.abs(model_rows)
        if np.max(np.abs(rows - model_rows) / denom) > 1e-9:
            bad.append("per-row grad(g_j).F identity violated")

    return bad


def criticality_agreement(p, params, x, field_tol=1e-6, kkt_tol=1e-4,
                          gray_low=1e-8, gray_high=1e-4):
    """Compare |F|-based criticality with the KKT-residual notion.

    Returns "agree", "gray" (|F| inside the declared ambiguity band,
    disagreement permitted) or "disagree".
    """
    fe = field_eval(p, params, x)
    normF = float(np.linalg.norm(fe.F))
    by_field = normF <= field_tol
    lam, mu = multipliers(p, x, fe)
    rep = kkt_residual(p, x, lam, mu)
    worst = max(rep.stationarity_residual, rep.complementarity_residual,
                rep.mu_negativity)
    by_kkt = worst <= kkt_tol
    if by_field == by_kkt:
        return "agree"
    if gray_low < normF < gray_high:
        return "gray"
    return "disagree"
