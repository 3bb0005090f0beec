"""Chopper-fed DC machine: continuous equations and the fixed-step update.

The discrete plant is the two-state linear recurrence

    im(k+1) = a_c * im(k) + b_c * wm(k) + g_c * vh(k)
    wm(k+1) = l_c * im(k) + m_c * wm(k) + n_c * sign(wm(k))

whose six constants are either taken from the reference set
(``REFERENCE_COEFFICIENTS``) or derived from physical parameters with a forward
Euler or second-order Runge-Kutta discretization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InstabilityError, NoSteadyStateError, NumericOverflowError

__all__ = [
    "MachineParameters",
    "PlantCoefficients",
    "PlantState",
    "REFERENCE_COEFFICIENTS",
    "DEFAULT_PARAMETERS",
    "chopper_voltage",
    "sign",
    "continuous_derivatives",
    "discrete_step",
    "derive_coefficients_euler",
    "derive_coefficients_rk2",
    "parameters_from_coefficients",
    "steady_state",
]


def _finite(*values: float) -> bool:
    return all(math.isfinite(v) for v in values)


@dataclass(frozen=True)
class MachineParameters:
    """Physical constants of the DC machine and its supply.

    Parameters
    ----------
    Rm : float
        Armature resistance (ohm).
    Lm : float
        Armature inductance (henry).
    J : float
        Rotor inertia (kg m^2).
    Km : float
        Torque / back-EMF constant (N m / A, equivalently V s / rad).
    K1, K2, K3 : float
        Quadratic, viscous and dry friction coefficients.
    Vin : float
        Chopper supply voltage (volt).
    """

    Rm: float
    Lm: float
    J: float
    Km: float
    K1: float = 0.0
    K2: float = 0.0
    K3: float = 0.0
    Vin: float = 60.0

    def __post_init__(self) -> None:
        fields = (self.Rm, self.Lm, self.J, self.Km, self.K1, self.K2, self.K3, self.Vin)
        if not _finite(*fields):
            raise DomainError("machine parameters must be finite")
        if self.Lm <= 0 or self.J <= 0 or self.Vin <= 0:
            raise DomainError("Lm, J and Vin must be strictly positive")
        if min(self.Rm, self.Km, self.K1, self.K2, self.K3) < 0:
            raise DomainError("Rm, Km and friction coefficients must be non-negative")


@dataclass(frozen=True)
class PlantCoefficients:
    """Constants of the discrete plant update plus supply voltage and step.

    ``a_c, b_c, g_c`` drive the current equation, ``l_c, m_c, n_c`` the speed
    equation. ``h`` is the model step in seconds.
    """

    a_c: float
    b_c: float
    g_c: float
    l_c: float
    m_c: float
    n_c: float
    Vin: float
    h: float

    def __post_init__(self) -> None:
        if not _finite(self.a_c, self.b_c, self.g_c, self.l_c, self.m_c, self.n_c, self.Vin, self.h):
            raise DomainError("plant coefficients must be finite")
        if self.h <= 0:
            raise DomainError(f"step size must be positive, got {self.h}")
        if self.Vin <= 0:
            raise DomainError(f"Vin must be positive, got {self.Vin}")

    @property
    def step_ns(self) -> int:
        """Step size rounded to whole nanoseconds."""
        return int(round(self.h * 1e9))

    @property
    def is_stable_form(self) -> bool:
        return 0 < self.a_c <= 1 and 0 < self.m_c <= 1


@dataclass(frozen=True)
class PlantState:
    """Machine current (A) and rotation speed (rad/s)."""

    im: float = 0.0
    wm: float = 0.0

    def __post_init__(self) -> None:
        if not _finite(self.im, self.wm):
            raise NumericOverflowError(f"non-finite plant state (im={self.im}, wm={self.wm})")


# Reference coefficient set; the model step that inverts cleanly is 1 us.
REFERENCE_COEFFICIENTS = PlantCoefficients(
    a_c=0.9995,
    b_c=-9.1977e-05,
    g_c=4.9987e-04,
    l_c=1.4603e-04,
    m_c=1.0,
    n_c=0.0,
    Vin=60.0,
    h=1e-6,
)


def chopper_voltage(duty: float, vin: float) -> float:
    """Mean chopper output ``(2 * duty - 1) * vin``."""
    if not _finite(duty, vin):
        raise DomainError("duty and vin must be finite")
    if not 0.0 <= duty <= 1.0:
        raise DomainError(f"duty must lie in [0, 1], got {duty}")
    if vin <= 0:
        raise DomainError(f"vin must be positive, got {vin}")
    return (2.0 * duty - 1.0) * vin


def sign(x: float) -> int:
    """Sign with ``sign(0) == 0`` so that rest is an equilibrium."""
    if not math.isfinite(x):
        raise DomainError(f"sign of non-finite value {x}")
    if x > 0:
        return 1
    if x < 0:
        return -1
    return 0


def continuous_derivatives(p: MachineParameters, s: PlantState, vh: float) -> tuple[float, float]:
    """Right-hand side of the machine ODE.

    Returns
    -------
    (dim_dt, dwm_dt) : tuple of float
        Current slope in A/s and angular acceleration in rad/s^2.
    """
    back_emf = p.Km * s.wm
    dim = (vh - back_emf - p.Rm * s.im) / p.Lm
    sg = sign(s.wm)
    torque = p.Km * s.im
    resistant = p.K1 * s.wm * s.wm * sg + p.K2 * s.wm + p.K3 * sg
    dwm = (torque - resistant) / p.J
    return dim, dwm


def discrete_step(c: PlantCoefficients, s: PlantState, vh: float) -> PlantState:
    """Advance the plant one step.

    Both right-hand sides read the step-k state, so the two updates may be
    evaluated in either order (or in parallel).
    """
    im, wm = s.im, s.wm
    im_next = c.a_c * im + c.b_c * wm + c.g_c * vh
    wm_next = c.l_c * im + c.m_c * wm + c.n_c * sign(wm)
    if not _finite(im_next, wm_next):
        raise NumericOverflowError(
            f"plant diverged: im={im_next}, wm={wm_next} from state {s} with vh={vh}"
        )
    return PlantState(im_next, wm_next)


def _check_linear(p: MachineParameters, h: float) -> None:
    if not math.isfinite(h) or h <= 0:
        raise DomainError(f"step size must be positive and finite, got {h}")
    if p.K1 != 0:
        raise DomainError("quadratic friction K1 has no linear coefficient form; set K1=0")


def _check_stable(c: PlantCoefficients) -> PlantCoefficients:
    if c.a_c <= 0 or c.m_c <= 0:
        raise InstabilityError(
            f"step h={c.h} too large: a_c={c.a_c:.6g}, m_c={c.m_c:.6g} (both must be > 0)"
        )
    return c


def derive_coefficients_euler(p: MachineParameters, h: float) -> PlantCoefficients:
    """Forward-Euler coefficients for step ``h`` (seconds)."""
    _check_linear(p, h)
    return _check_stable(
        PlantCoefficients(
            a_c=1.0 - h * p.Rm / p.Lm,
            b_c=-h * p.Km / p.Lm,
            g_c=h / p.Lm,
            l_c=h * p.Km / p.J,
            m_c=1.0 - h * p.K2 / p.J,
            n_c=-h * p.K3 / p.J,
            Vin=p.Vin,
            h=h,
        )
    )


def state_matrices(p: MachineParameters) -> tuple[np.ndarray, np.ndarray]:
    """Continuous ``(A, B)`` of the linearized machine (K1 = K3 = 0)."""
    A = np.array(
        [[-p.Rm / p.Lm, -p.Km / p.Lm],
         [p.Km / p.J, -p.K2 / p.J]]
    )
    B = np.array([1.0 / p.Lm, 0.0])
    return A, B


def derive_coefficients_rk2(p: MachineParameters, h: float) -> PlantCoefficients:
    """Second-order Runge-Kutta coefficients for step ``h`` (seconds).

    For the linear system ``x' = A x + B vh`` with ``vh`` held over the step,
    Heun's method gives ``x+ = (I + hA + h^2 A^2 / 2) x + (h I + h^2 A / 2) B vh``.
    The input column has a speed component as well; it is dropped because the
    discrete speed equation carries no voltage term (it is O(h^2) small).
    """
    _check_linear(p, h)
    A, B = state_matrices(p)
    eye = np.eye(2)
    Phi = eye + h * A + (h * h / 2.0) * (A @ A)
    Gam = (h * eye + (h * h / 2.0) * A) @ B
    return _check_stable(
        PlantCoefficients(
            a_c=float(Phi[0, 0]),
            b_c=float(Phi[0, 1]),
            g_c=float(Gam[0]),
            l_c=float(Phi[1, 0]),
            m_c=float(Phi[1, 1]),
            n_c=-h * p.K3 / p.J,
            Vin=p.Vin,
            h=h,
        )
    )


def parameters_from_coefficients(c: PlantCoefficients) -> MachineParameters:
    """Invert the Euler formulas to recover physical parameters.

    Requires ``g_c > 0`` and ``l_c > 0``; friction is read from ``m_c`` and
    ``n_c`` and quadratic friction is taken as zero.
    """
    if c.g_c <= 0 or c.l_c <= 0:
        raise DomainError("inversion needs g_c > 0 and l_c > 0")
    h = c.h
    Lm = h / c.g_c
    Km = -c.b_c * Lm / h
    J = h * Km / c.l_c
    return MachineParameters(
        Rm=(1.0 - c.a_c) * Lm / h,
        Lm=Lm,
        J=J,
        Km=Km,
        K1=0.0,
        K2=(1.0 - c.m_c) * J / h,
        K3=-c.n_c * J / h + 0.0,  # avoid -0.0
        Vin=c.Vin,
    )


# Physical parameters reconstructed from the reference coefficients at 1 us.
DEFAULT_PARAMETERS = parameters_from_coefficients(REFERENCE_COEFFICIENTS)


def _solve_fixed_point(c: PlantCoefficients, vh: float, s: int) -> tuple[float, float] | None:
    det = (1.0 - c.a_c) * (1.0 - c.m_c) - c.b_c * c.l_c
    if det == 0.0 or not math.isfinite(det):
        return None
    r1 = c.g_c * vh
    r2 = c.n_c * s
    im = ((1.0 - c.m_c) * r1 + c.b_c * r2) / det
    wm = (c.l_c * r1 + (1.0 - c.a_c) * r2) / det
    return im, wm


def steady_state(c: PlantCoefficients, vh: float) -> PlantState:
    """Analytic fixed point of :func:`discrete_step` under constant ``vh``.

    With dry friction (``n_c != 0``) the candidate for each speed sign is
    solved and the self-consistent one is returned.

    Raises
    ------
    NoSteadyStateError
        If the fixed-point system is singular or no sign is consistent.
    """
    if not math.isfinite(vh):
        raise DomainError(f"vh must be finite, got {vh}")
    if c.n_c == 0.0:
        sol = _solve_fixed_point(c, vh, 0)
        if sol is None:
            raise NoSteadyStateError(f"fixed-point system is singular for {c}")
        return PlantState(*sol)
    for s in (1, -1, 0):
        sol = _solve_fixed_point(c, vh, s)
        if sol is None:
            raise NoSteadyStateError(f"fixed-point system is singular for {c}")
        if sign(sol[1]) == s:
            return PlantState(*sol)
    raise NoSteadyStateError(f"no self-consistent fixed point for vh={vh}")
