"""Riccati-gain nonlinear observer for attitude, air velocity and altitude.

The estimator runs a copy of the vehicle kinematics driven by IMU inputs and
injects innovation terms computed from a 7-state Riccati recursion
(attitude error, inertial air-velocity error, altitude error).  The discrete
per-tick cycle is: covariance prediction at the IMU period, measurement
update for whichever aiding sensors sampled on the tick, then state
integration (exponential step on SO(3), explicit step for the vector part).

Weight conventions
------------------
``RiccatiWeights`` stores the printed tuning matrices ``Qp``, ``Qm``, ``Qb``.
How they enter the gain is controlled by ``q_convention``:

* ``"covariance"`` (default): the blocks are used directly as the additive
  innovation-covariance term of the discrete gain,
* ``"precision"``: the blocks are information weights; their inverses form
  the additive term.

The continuous-time Riccati equation (:func:`cre_rhs`) always treats its
``Q`` argument as an information weight.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import geometry
from .exceptions import (
    DivergenceError,
    MissingPayloadError,
    SingularInnovationError,
)
from .geometry import E3, cross3, skew
from .sensors import MagReference, ProbeSet, SensorKind

I7 = np.eye(7)

# Sensors are always stacked in this order when more than one updates at once.
STACK_ORDER = (SensorKind.PITOT, SensorKind.MAG, SensorKind.BARO)

# Sequential single-sensor updates run in this order on partial coincidences.
UPDATE_ORDER = (SensorKind.BARO, SensorKind.MAG, SensorKind.PITOT)

STATE_FLOOR = 1e9
P_TRACE_FLOOR = 1e12

Q_CONVENTIONS = ("covariance", "precision")


def _check_spd(m: np.ndarray, name: str, sym_tol: float = 1e-9) -> np.ndarray:
    m = np.atleast_2d(np.array(m, dtype=float))
    if np.linalg.norm(m - m.T) > sym_tol:
        raise ValueError(f"{name} must be symmetric")
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise ValueError(f"{name} must be positive definite") from None
    m.flags.writeable = False
    return m


@dataclass(frozen=True, eq=False)
class RiccatiWeights:
    """Printed tuning matrices of the gain recursion (all SPD)."""

    Qp: np.ndarray
    Qm: np.ndarray
    Qb: float
    S: np.ndarray
    P0: np.ndarray

    def __post_init__(self):
        qp = _check_spd(self.Qp, "Qp")
        qm = _check_spd(self.Qm, "Qm")
        if qm.shape != (3, 3):
            raise ValueError("Qm must be 3 x 3")
        if self.Qb <= 0.0:
            raise ValueError("Qb must be positive")
        s = _check_spd(self.S, "S")
        p0 = _check_spd(self.P0, "P0")
        if s.shape != (7, 7) or p0.shape != (7, 7):
            raise ValueError("S and P0 must be 7 x 7")
        object.__setattr__(self, "Qp", qp)
        object.__setattr__(self, "Qm", qm)
        object.__setattr__(self, "S", s)
        object.__setattr__(self, "P0", p0)


@dataclass
class ObserverState:
    """Estimates plus the 7x7 Riccati covariance."""

    Rhat: np.ndarray
    Vahat: np.ndarray
    hhat: float
    P: np.ndarray

    def validate(self) -> None:
        """Check the SO(3) and SPD invariants; raises ValueError on failure."""
        if not geometry.is_rotation(self.Rhat):
            raise ValueError("Rhat is not a rotation matrix")
        if np.linalg.norm(self.P - self.P.T) > 1e-9:
            raise ValueError("P is not symmetric")
        if np.linalg.eigvalsh(self.P)[0] <= 0.0:
            raise ValueError("P is not positive definite")

    def copy(self) -> ObserverState:
        return ObserverState(self.Rhat.copy(), self.Vahat.copy(),
                             float(self.hhat), self.P.copy())


@dataclass(frozen=True, eq=False)
class Innovation:
    """Gain-weighted output corrections injected into the observer."""

    delta_R: np.ndarray
    delta_v: np.ndarray
    delta_h: float

    @classmethod
    def zero(cls) -> Innovation:
        return cls(delta_R=np.zeros(3), delta_v=np.zeros(3), delta_h=0.0)

    def as_vector(self) -> np.ndarray:
        return np.concatenate((self.delta_R, self.delta_v, [self.delta_h]))


@dataclass(frozen=True, eq=False)
class OutputStack:
    """Residual vector, output matrix and additive weight for one update."""

    y: np.ndarray
    C: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        if not (self.y.shape[0] == self.C.shape[0] == self.Q.shape[0]
                == self.Q.shape[1]):
            raise ValueError("y, C and Q row dimensions disagree")


def state_matrix_ct(rhat: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Continuous-time error-state matrix A(Rhat)."""
    m = np.zeros((7, 7))
    m[3:6, 0:3] = -skew(rhat @ a)
    m[6, 3:6] = E3
    return m


def state_matrix_dt(rhat: np.ndarray, a: np.ndarray, T: float) -> np.ndarray:
    """First-order discretization A_d = I + T A(Rhat)."""
    if T <= 0.0:
        raise ValueError("T must be positive")
    m = np.eye(7)
    m[3:6, 0:3] = -T * skew(rhat @ a)
    m[6, 3:6] = T * E3
    return m


def _subset_in_stack_order(subset) -> tuple[SensorKind, ...]:
    kinds = tuple(k for k in STACK_ORDER if k in set(subset))
    if not kinds:
        raise ValueError("sensor subset must be nonempty")
    return kinds


def output_matrix(rhat: np.ndarray, vahat: np.ndarray, probes: ProbeSet,
                  mag_ref: MagReference, subset) -> np.ndarray:
    """Stacked output matrix for the requested sensors (Pitot, Mag, Baro order).

    Row blocks::

        Pitot: [ B^T Rhat^T (Rhat Vahat)^x | B^T Rhat^T | 0 ]
        Mag:   [ -(m_I)^x                  | 0          | 0 ]
        Baro:  [ 0                         | 0          | 1 ]
    """
    rows = []
    for kind in _subset_in_stack_order(subset):
        if kind is SensorKind.PITOT:
            bt_rt = probes.B.T @ rhat.T
            block = np.zeros((probes.m, 7))
            block[:, 0:3] = bt_rt @ skew(rhat @ vahat)
            block[:, 3:6] = bt_rt
            rows.append(block)
        elif kind is SensorKind.MAG:
            block = np.zeros((3, 7))
            block[:, 0:3] = -skew(mag_ref.m_I)
            rows.append(block)
        else:
            block = np.zeros((1, 7))
            block[0, 6] = 1.0
            rows.append(block)
    return np.vstack(rows)


def residual(payloads, est: ObserverState, probes: ProbeSet,
             mag_ref: MagReference, subset) -> np.ndarray:
    """Stacked measurement residuals in the fixed sensor order.

    The magnetometer residual is formed in the inertial frame,
    ``m_I - Rhat m_B``.

    Raises
    ------
    MissingPayloadError
        If a sensor in ``subset`` has no payload.
    """
    parts = []
    for kind in _subset_in_stack_order(subset):
        if kind not in payloads:
            raise MissingPayloadError(f"no payload for {kind.value}")
        if kind is SensorKind.PITOT:
            parts.append(np.atleast_1d(payloads[kind]) - probes.B.T @ est.Vahat)
        elif kind is SensorKind.MAG:
            parts.append(mag_ref.m_I - est.Rhat @ np.asarray(payloads[kind]))
        else:
            parts.append(np.array([float(payloads[kind]) - est.hhat]))
    return np.concatenate(parts)


def additive_weight(weights: RiccatiWeights, subset, q_convention: str,
                    ) -> np.ndarray:
    """Additive innovation term for the requested sensors (stack order)."""
    if q_convention not in Q_CONVENTIONS:
        raise ValueError(f"unknown q_convention {q_convention!r}")
    blocks = []
    for kind in _subset_in_stack_order(subset):
        if kind is SensorKind.PITOT:
            block = np.array(weights.Qp)
        elif kind is SensorKind.MAG:
            block = np.array(weights.Qm)
        else:
            block = np.array([[weights.Qb]])
        if q_convention == "precision":
            block = np.linalg.inv(block)
        blocks.append(block)
    return scipy.linalg.block_diag(*blocks)


def build_output_stack(payloads, est: ObserverState, weights: RiccatiWeights,
                       probes: ProbeSet, mag_ref: MagReference, subset,
                       q_convention: str = "covariance") -> OutputStack:
    """Bundle residual, output matrix and additive weight for one update."""
    return OutputStack(
        y=residual(payloads, est, probes, mag_ref, subset),
        C=output_matrix(est.Rhat, est.Vahat, probes, mag_ref, subset),
        Q=additive_weight(weights, subset, q_convention),
    )


def riccati_predict(P: np.ndarray, A_d: np.ndarray, S: np.ndarray,
                    T: float) -> np.ndarray:
    """Covariance prediction ``A_d P A_d^T + S T``."""
    return A_d @ P @ A_d.T + S * T


def riccati_update(P: np.ndarray, C: np.ndarray, Q: np.ndarray,
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Measurement update: gain and corrected covariance.

    ``Q`` is the additive innovation term.  The innovation covariance is
    solved through a Cholesky factorization; a single 1e-12 jitter retry
    guards against marginal conditioning before giving up.

    Returns
    -------
    (K, P_new):
        Gain ``P C^T (C P C^T + Q)^-1`` and symmetrized ``(I - K C) P``.
    """
    s = C @ P @ C.T + Q
    s = 0.5 * (s + s.T)
    try:
        cho = scipy.linalg.cho_factor(s)
    except np.linalg.LinAlgError:
        try:
            cho = scipy.linalg.cho_factor(s + 1e-12 * np.eye(s.shape[0]))
        except np.linalg.LinAlgError:
            raise SingularInnovationError(
                "innovation covariance is not positive definite"
            ) from None
    k = scipy.linalg.cho_solve(cho, C @ P).T
    p_new = (I7 - k @ C) @ P
    return k, 0.5 * (p_new + p_new.T)


def innovation_from_gain(K: np.ndarray, y: np.ndarray) -> Innovation:
    """Partition ``u = -K y`` into the three innovation terms."""
    u = -K @ y
    return Innovation(delta_R=u[0:3], delta_v=u[3:6], delta_h=float(u[6]))


def observer_step_state(est: ObserverState, omega: np.ndarray, a: np.ndarray,
                        gravity: float, innov: Innovation, T: float,
                        ) -> tuple[np.ndarray, np.ndarray, float]:
    """One explicit integration step of the observer state.

    Exponential step on SO(3) for the attitude, explicit Euler for the
    air-velocity and altitude estimates.  The dynamics terms advance by the
    tick period ``T``; the innovation terms are discrete gain-weighted
    corrections and enter at full strength, which keeps the state correction
    consistent with the ``(I - K C) P`` covariance reduction of the
    measurement update.
    """
    if T <= 0.0:
        raise ValueError("T must be positive")
    rhat, vahat, hhat = est.Rhat, est.Vahat, est.hhat
    rhat_new = rhat @ geometry.exp_so3(omega * T - rhat.T @ innov.delta_R)
    if geometry.rotation_defect(rhat_new) > geometry.ORTHONORMALITY_TOL:
        rhat_new = geometry.project_to_so3(rhat_new)
    zeta1 = -cross3(omega, vahat) + gravity * (rhat.T @ E3) + a
    zeta2 = -rhat.T @ innov.delta_v + rhat.T @ cross3(innov.delta_R,
                                                      rhat @ vahat)
    vahat_new = vahat + T * zeta1 + zeta2
    hhat_new = float(hhat + T * (E3 @ (rhat @ vahat)) - innov.delta_h)
    return rhat_new, vahat_new, hhat_new


def _riccati_cycle(est: ObserverState, payloads, weights: RiccatiWeights,
                   probes: ProbeSet, mag_ref: MagReference, T: float,
                   q_convention: str,
                   additive_cache: dict | None = None,
                   ) -> tuple[np.ndarray, Innovation]:
    """Predict + measurement update; returns the new P and the innovation.

    All three aiding sensors present on the tick triggers one stacked
    update; otherwise the available sensors update sequentially in the
    fixed order barometer, magnetometer, Pitot.
    """
    omega, a = payloads[SensorKind.IMU]
    a_d = state_matrix_dt(est.Rhat, a, T)
    p = riccati_predict(est.P, a_d, weights.S, T)
    aiding = [k for k in UPDATE_ORDER if k in payloads]
    u = np.zeros(7)
    if additive_cache is None:
        additive_cache = {}

    def add_q(subset: tuple) -> np.ndarray:
        q = additive_cache.get(subset)
        if q is None:
            q = additive_weight(weights, subset, q_convention)
            additive_cache[subset] = q
        return q

    work = ObserverState(est.Rhat, est.Vahat, est.hhat, p)
    if len(aiding) == 3:
        y = residual(payloads, work, probes, mag_ref, STACK_ORDER)
        c = output_matrix(work.Rhat, work.Vahat, probes, mag_ref, STACK_ORDER)
        k, p = riccati_update(p, c, add_q(STACK_ORDER))
        u = innovation_from_gain(k, y).as_vector()
    else:
        for kind in aiding:
            subset = (kind,)
            y = residual(payloads, work, probes, mag_ref, subset)
            c = output_matrix(work.Rhat, work.Vahat, probes, mag_ref, subset)
            k, p = riccati_update(p, c, add_q(subset))
            u += innovation_from_gain(k, y).as_vector()
    p = 0.5 * (p + p.T)
    innov = Innovation(delta_R=u[0:3], delta_v=u[3:6], delta_h=float(u[6]))
    return p, innov


def _check_floor(state: ObserverState) -> None:
    v = state.Vahat
    biggest = max(abs(v[0]), abs(v[1]), abs(v[2]), abs(state.hhat))
    p_trace = float(np.trace(state.P))
    # NaN fails both comparisons, so non-finite states also trip the floor.
    if not (biggest < STATE_FLOOR) or not (p_trace < P_TRACE_FLOOR):
        raise DivergenceError("observer state exceeded the numerical floor")


def observer_tick(est: ObserverState, events, weights: RiccatiWeights,
                  probes: ProbeSet, mag_ref: MagReference, gravity: float,
                  T: float, q_convention: str = "covariance") -> ObserverState:
    """One full observer tick: predict, update, integrate.

    ``events`` is an iterable of :class:`~airnav.sensors.SensorEvent` (or a
    mapping kind -> payload) sharing one timestamp; the IMU payload must be
    present.

    Raises
    ------
    MissingPayloadError
        If no IMU payload is supplied.
    DivergenceError
        If the updated state exceeds the numerical divergence floor.
    """
    payloads = events if isinstance(events, dict) else {
        ev.kind: ev.payload for ev in events}
    if SensorKind.IMU not in payloads:
        raise MissingPayloadError("observer tick requires an IMU payload")
    p, innov = _riccati_cycle(est, payloads, weights, probes, mag_ref, T,
                              q_convention)
    omega, a = payloads[SensorKind.IMU]
    rhat, vahat, hhat = observer_step_state(est, omega, a, gravity, innov, T)
    new = ObserverState(Rhat=rhat, Vahat=vahat, hhat=hhat, P=p)
    _check_floor(new)
    return new


class AirDataObserver:
    """Stateful wrapper running the per-tick cycle over a schedule.

    Parameters
    ----------
    state0:
        Initial :class:`ObserverState` (``P`` is usually ``weights.P0``).
    weights, probes, mag_ref, gravity:
        Fixed configuration shared by all ticks.
    dt:
        IMU period in seconds.
    q_convention:
        ``"covariance"`` or ``"precision"`` (see module docstring).
    integrator:
        ``"euler"`` integrates the state exactly as the discrete algorithm
        lists; ``"ab2"`` replaces the input-driven part of the velocity,
        altitude and attitude steps by a two-step Adams-Bashforth rule
        (second order, causal), leaving the innovation injection unchanged.
    """

    def __init__(self, state0: ObserverState, weights: RiccatiWeights,
                 probes: ProbeSet, mag_ref: MagReference, dt: float,
                 gravity: float = 9.81, q_convention: str = "covariance",
                 integrator: str = "euler"):
        if q_convention not in Q_CONVENTIONS:
            raise ValueError(f"unknown q_convention {q_convention!r}")
        if integrator not in ("euler", "ab2"):
            raise ValueError(f"unknown integrator {integrator!r}")
        self.state = state0.copy()
        self.weights = weights
        self.probes = probes
        self.mag_ref = mag_ref
        self.dt = float(dt)
        self.gravity = float(gravity)
        self.q_convention = q_convention
        self.integrator = integrator
        self._prev: tuple[np.ndarray, np.ndarray, float] | None = None
        self._additive_cache: dict = {}

    def tick(self, payloads: dict) -> ObserverState:
        """Advance one IMU tick given ``{SensorKind: payload}``; returns state."""
        if SensorKind.IMU not in payloads:
            raise MissingPayloadError("observer tick requires an IMU payload")
        est = self.state
        p, innov = _riccati_cycle(est, payloads, self.weights, self.probes,
                                  self.mag_ref, self.dt, self.q_convention,
                                  self._additive_cache)
        omega, a = payloads[SensorKind.IMU]
        if self.integrator == "euler":
            rhat, vahat, hhat = observer_step_state(est, omega, a,
                                                    self.gravity, innov,
                                                    self.dt)
        else:
            rhat, vahat, hhat = self._step_ab2(est, omega, a, innov)
        self.state = ObserverState(Rhat=rhat, Vahat=vahat, hhat=hhat, P=p)
        _check_floor(self.state)
        return self.state

    def _step_ab2(self, est: ObserverState, omega: np.ndarray, a: np.ndarray,
                  innov: Innovation) -> tuple[np.ndarray, np.ndarray, float]:
        T = self.dt
        rhat, vahat = est.Rhat, est.Vahat
        zeta1 = -cross3(omega, vahat) + self.gravity * (rhat.T @ E3) + a
        hflow = float(E3 @ (rhat @ vahat))
        if self._prev is None:
            omega_eff, zeta1_eff, hflow_eff = omega, zeta1, hflow
        else:
            omega_prev, zeta1_prev, hflow_prev = self._prev
            omega_eff = 1.5 * omega - 0.5 * omega_prev
            zeta1_eff = 1.5 * zeta1 - 0.5 * zeta1_prev
            hflow_eff = 1.5 * hflow - 0.5 * hflow_prev
        self._prev = (omega, zeta1, hflow)
        rhat_new = rhat @ geometry.exp_so3(
            omega_eff * T - rhat.T @ innov.delta_R)
        if geometry.rotation_defect(rhat_new) > geometry.ORTHONORMALITY_TOL:
            rhat_new = geometry.project_to_so3(rhat_new)
        zeta2 = -rhat.T @ innov.delta_v + rhat.T @ cross3(innov.delta_R,
                                                          rhat @ vahat)
        vahat_new = vahat + T * zeta1_eff + zeta2
        hhat_new = float(est.hhat + T * hflow_eff - innov.delta_h)
        return rhat_new, vahat_new, hhat_new


def cre_rhs(P: np.ndarray, A_ct: np.ndarray, C: np.ndarray, Q: np.ndarray,
            S: np.ndarray) -> np.ndarray:
    """Right-hand side of the continuous Riccati equation.

    ``Q`` is the information-style weight multiplying ``C^T Q C``.
    """
    return A_ct @ P + P @ A_ct.T - P @ C.T @ Q @ C @ P + S


def integrate_cre(P0: np.ndarray, a_fn, c_fn, Q: np.ndarray, S: np.ndarray,
                  t0: float, t1: float, dt: float,
                  substeps: int = 1) -> np.ndarray:
    """Fixed-step RK4 integration of the continuous Riccati equation.

    ``a_fn`` and ``c_fn`` map time to the state and output matrices.
    ``substeps`` subdivides each ``dt`` for stiff configurations.
    """
    p = np.array(P0, dtype=float)
    n = int(round((t1 - t0) / dt))
    h = dt / substeps
    t = float(t0)
    for _ in range(n * substeps):
        k1 = cre_rhs(p, a_fn(t), c_fn(t), Q, S)
        k2 = cre_rhs(p + 0.5 * h * k1, a_fn(t + 0.5 * h), c_fn(t + 0.5 * h),
                     Q, S)
        k3 = cre_rhs(p + 0.5 * h * k2, a_fn(t + 0.5 * h), c_fn(t + 0.5 * h),
                     Q, S)
        k4 = cre_rhs(p + h * k3, a_fn(t + h), c_fn(t + h), Q, S)
        p = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        p = 0.5 * (p + p.T)
        t += h
    return p
