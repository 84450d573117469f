"""Numerical uniform-observability checks along the true trajectory.

The error-state transition matrix of the true system has closed-form blocks
(single and double time integrals of the inertial specific force), which are
evaluated here by composite Simpson quadrature on the closed-form truth.
Windowed observability Gramians and the two persistent-excitation margins
(horizontal Pitot projection, horizontal specific-force coupling) are
assembled from those blocks; positive margins certify uniform observability
for the trajectory, which the Gramian spectrum then witnesses directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from . import dynamics
from .dynamics import TrajectorySpec
from .geometry import E3, skew
from .sensors import MagReference, ProbeSet, SensorKind

J_HORIZONTAL = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])

DEFAULT_QUAD_STEP = 1e-3
DEFAULT_WINDOW = 4.0

ALL_SENSORS = (SensorKind.PITOT, SensorKind.MAG, SensorKind.BARO)


@dataclass(frozen=True, eq=False)
class TransitionBlocks:
    """Closed-form blocks of the true-trajectory transition matrix."""

    phi11: np.ndarray
    phi21: np.ndarray
    t: float
    tau: float

    def full(self) -> np.ndarray:
        """Assemble the 7x7 transition matrix."""
        phi = np.zeros((7, 7))
        phi[0:6, 0:6] = self.phi11
        phi[6, 0:6] = self.phi21
        phi[6, 6] = 1.0
        return phi


@dataclass(frozen=True, eq=False)
class GramianReport:
    """Windowed Gramian spectrum plus the persistent-excitation margins."""

    W: np.ndarray
    lam_min: float
    lam_max: float
    delta: float
    mu_pi: float
    mu_api: float
    verdict: bool


@dataclass(frozen=True)
class WindowRow:
    """Per-window summary used by the observability report table."""

    t_start: float
    lam_min: float
    lam_max: float
    mu_pi: float
    mu_api: float
    verdict: bool


def _grid(tau: float, t: float, quad_step: float) -> np.ndarray:
    """Uniform quadrature grid over [tau, t] with an even interval count."""
    n = max(2, int(np.ceil((t - tau) / quad_step)))
    if n % 2:
        n += 1
    return np.linspace(tau, t, n + 1)


def _integrated_force(spec: TrajectorySpec, s: np.ndarray,
                      ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Specific force w(s) = R a and its first and second running integrals."""
    w = dynamics.inertial_specific_force(spec, s)
    g1 = cumulative_simpson(w, x=s, axis=0, initial=0.0)
    g2 = cumulative_simpson(g1, x=s, axis=0, initial=0.0)
    return w, g1, g2


def phi_blocks(spec: TrajectorySpec, t: float, tau: float,
               quad_step: float = DEFAULT_QUAD_STEP) -> TransitionBlocks:
    """Closed-form transition blocks over [tau, t].

    ``phi11`` is block lower-triangular with ``-(integral of (R a)^x)`` in
    the lower-left corner; ``phi21`` couples attitude and velocity errors
    into the altitude error through the double integral.
    """
    if tau > t:
        raise ValueError("tau must not exceed t")
    phi11 = np.eye(6)
    if t > tau:
        s = _grid(tau, t, quad_step)
        _, g1, g2 = _integrated_force(spec, s)
        phi11[3:6, 0:3] = -skew(g1[-1])
        phi21 = E3 @ np.hstack((-skew(g2[-1]), (t - tau) * np.eye(3)))
    else:
        phi21 = np.zeros(6)
    return TransitionBlocks(phi11=phi11, phi21=phi21, t=t, tau=tau)


def _a_star(spec: TrajectorySpec, s: float) -> np.ndarray:
    m = np.zeros((7, 7))
    m[3:6, 0:3] = -skew(dynamics.inertial_specific_force(spec, s))
    m[6, 3:6] = E3
    return m


def integrate_phi(spec: TrajectorySpec, t: float, tau: float,
                  step: float = DEFAULT_QUAD_STEP) -> np.ndarray:
    """RK4 integration of the transition-matrix ODE (validation oracle).

    The product A*(s) Phi is evaluated blockwise (two block rows of A* are
    nonzero) with the specific force precomputed on the half-step grid.
    """
    n = max(1, int(round((t - tau) / step)))
    h = (t - tau) / n
    times = tau + 0.5 * h * np.arange(2 * n + 1)
    w = dynamics.inertial_specific_force(spec, times)

    def a_mul(wk: np.ndarray, m: np.ndarray) -> np.ndarray:
        out = np.zeros((7, 7))
        out[3:6] = -skew(wk) @ m[0:3]
        out[6] = m[5]
        return out

    phi = np.eye(7)
    for k in range(n):
        w0, wm, w1 = w[2 * k], w[2 * k + 1], w[2 * k + 2]
        k1 = a_mul(w0, phi)
        k2 = a_mul(wm, phi + 0.5 * h * k1)
        k3 = a_mul(wm, phi + 0.5 * h * k2)
        k4 = a_mul(w1, phi + h * k3)
        phi = phi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return phi


def _batch_skew(v: np.ndarray) -> np.ndarray:
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def _output_rows(spec: TrajectorySpec, probes: ProbeSet,
                 mag_ref: MagReference, s: np.ndarray, sensors) -> np.ndarray:
    """True-trajectory output matrix C*(s) for all grid times."""
    n = s.shape[0]
    rot = dynamics.attitude_batch(spec, s)
    blocks = []
    for kind in ALL_SENSORS:
        if kind not in sensors:
            continue
        if kind is SensorKind.PITOT:
            va_inertial = dynamics.velocity(spec, s) - spec.wind
            bt_rt = np.einsum("ij,njk->nik", probes.B.T,
                              np.transpose(rot, (0, 2, 1)))
            block = np.zeros((n, probes.m, 7))
            block[:, :, 0:3] = np.einsum("nij,njk->nik", bt_rt,
                                         _batch_skew(va_inertial))
            block[:, :, 3:6] = bt_rt
        elif kind is SensorKind.MAG:
            block = np.zeros((n, 3, 7))
            block[:, :, 0:3] = -skew(mag_ref.m_I)
        else:
            block = np.zeros((n, 1, 7))
            block[:, 0, 6] = 1.0
        blocks.append(block)
    if not blocks:
        return np.zeros((n, 0, 7))
    return np.concatenate(blocks, axis=1)


def _transition_batch(spec: TrajectorySpec, s: np.ndarray) -> np.ndarray:
    """Phi*(s, s[0]) for every grid time, shape (n, 7, 7)."""
    n = s.shape[0]
    _, g1, g2 = _integrated_force(spec, s)
    phi = np.tile(np.eye(7), (n, 1, 1))
    phi[:, 3:6, 0:3] = -_batch_skew(g1)
    # e3^T [-skew(g2) | (s - t) I]
    phi[:, 6, 0] = g2[:, 1]
    phi[:, 6, 1] = -g2[:, 0]
    phi[:, 6, 5] = s - s[0]
    return phi


def gramian(spec: TrajectorySpec, probes: ProbeSet, mag_ref: MagReference,
            t: float, delta: float, quad_step: float = DEFAULT_QUAD_STEP,
            sensors=ALL_SENSORS) -> np.ndarray:
    """Windowed observability Gramian over [t, t + delta].

    Assembled as the Simpson integral of ``(C* Phi*)^T (C* Phi*) / delta``
    on the closed-form truth; the result is symmetrized, hence PSD up to
    quadrature error.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    if quad_step > delta / 100.0:
        raise ValueError("quad_step must be at most delta / 100")
    s = _grid(t, t + delta, quad_step)
    phi = _transition_batch(spec, s)
    c = _output_rows(spec, probes, mag_ref, s, sensors)
    m = np.einsum("nij,njk->nik", c, phi)
    integrand = np.einsum("nri,nrj->nij", m, m)
    w = simpson(integrand, x=s, axis=0) / delta
    return 0.5 * (w + w.T)


def pe_margins(spec: TrajectorySpec, probes: ProbeSet, t: float, delta: float,
               quad_step: float = DEFAULT_QUAD_STEP) -> tuple[float, float]:
    """Persistent-excitation margins over [t, t + delta].

    Returns
    -------
    (mu_pi, mu_api):
        Smallest eigenvalues of the windowed Gram matrices of the horizontal
        Pitot projection ``B^T R J`` and of the horizontal specific-force
        row ``e3^T (R a)^x J``.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    s = _grid(t, t + delta, quad_step)
    rot = dynamics.attitude_batch(spec, s)
    pi = np.einsum("ij,njk,kl->nil", probes.B.T, rot, J_HORIZONTAL)
    gram_pi = simpson(np.einsum("nij,nik->njk", pi, pi), x=s, axis=0) / delta
    w = dynamics.inertial_specific_force(spec, s)
    a_pi = np.stack((-w[:, 1], w[:, 0]), axis=-1)[:, None, :]
    gram_api = simpson(np.einsum("nij,nik->njk", a_pi, a_pi),
                       x=s, axis=0) / delta
    return (float(np.linalg.eigvalsh(gram_pi)[0]),
            float(np.linalg.eigvalsh(gram_api)[0]))


def observability_verdict(spec: TrajectorySpec, probes: ProbeSet,
                          mag_ref: MagReference,
                          delta: float = DEFAULT_WINDOW,
                          lam_threshold: float = 1e-6,
                          duration: float | None = None,
                          quad_step: float = DEFAULT_QUAD_STEP,
                          sensors=ALL_SENSORS,
                          ) -> tuple[GramianReport, list[WindowRow]]:
    """Sweep half-overlapping windows and aggregate a uniform-observability verdict.

    Window starts are ``0, delta/2, delta, ...`` while the window fits in
    ``[0, duration]``.  The overall verdict is true iff the smallest Gramian
    eigenvalue over all windows stays at or above ``lam_threshold``; the
    returned report carries the worst window's Gramian and the smallest PE
    margins for diagnosis.
    """
    if lam_threshold <= 0.0:
        raise ValueError("lam_threshold must be positive")
    if duration is None:
        duration = spec.duration
    starts = []
    t = 0.0
    while t + delta <= duration + 1e-9:
        starts.append(min(t, duration - delta))
        t += delta / 2.0
    if not starts:
        raise ValueError("duration shorter than one window")
    rows = []
    worst = None
    for t0 in starts:
        w = gramian(spec, probes, mag_ref, t0, delta, quad_step, sensors)
        eig = np.linalg.eigvalsh(w)
        mu_pi, mu_api = pe_margins(spec, probes, t0, delta, quad_step)
        row = WindowRow(t_start=t0, lam_min=float(eig[0]),
                        lam_max=float(eig[-1]), mu_pi=mu_pi, mu_api=mu_api,
                        verdict=bool(eig[0] >= lam_threshold))
        rows.append(row)
        if worst is None or row.lam_min < worst[0].lam_min:
            worst = (row, w)
    worst_row, worst_w = worst
    report = GramianReport(
        W=worst_w,
        lam_min=worst_row.lam_min,
        lam_max=worst_row.lam_max,
        delta=delta,
        mu_pi=min(r.mu_pi for r in rows),
        mu_api=min(r.mu_api for r in rows),
        verdict=all(r.verdict for r in rows),
    )
    return report, rows
