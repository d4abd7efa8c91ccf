"""Protocol instances and the Ising <-> Rydberg parameter map on a ring.

Units throughout: hbar = 1, angular frequencies in rad/us, times in us,
lengths in um.
"""

from dataclasses import dataclass, field
import json
import math

import numpy as np

INITIAL_STATES = ("plus", "down", "afm")

# Rb n=60 Rydberg level
C6_RUBY = 865723.02
A_RUBY = 7.5


@dataclass(frozen=True)
class QuenchSpec:
    """One quench: ring size, field ratio, coupling, initial state, time grid."""

    L: int
    g: float = 1.0
    J: float = 1.0
    initial_state: str = "plus"
    time_grid: tuple = field(default=(0.0,))

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 3:
            raise ValueError(f"L must be an integer >= 3, got {self.L}")
        if self.J <= 0:
            raise ValueError("J must be positive")
        if self.g < 0:
            raise ValueError("g must be non-negative")
        if self.initial_state not in INITIAL_STATES:
            raise ValueError(f"unknown initial state {self.initial_state!r}")
        if self.initial_state == "afm" and self.L % 2:
            raise ValueError("the AFM state is not defined on an odd ring")
        times = tuple(float(t) for t in np.atleast_1d(self.time_grid))
        if len(times) == 0 or times[0] < 0 or np.any(np.diff(times) <= 0):
            raise ValueError("time grid must be non-negative and strictly increasing")
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "time_grid", times)

    @property
    def times(self):
        return np.asarray(self.time_grid)

    def to_dict(self, rydberg=None):
        d = {
            "L": self.L,
            "g": self.g,
            "J_rad_per_us": self.J,
            "initial_state": self.initial_state,
            "times_us": list(self.time_grid),
        }
        if rydberg is not None:
            d["rydberg"] = {
                "C6": rydberg.C6,
                "a_um": rydberg.a,
                "omega": rydberg.omega,
                "delta": rydberg.delta,
            }
        return d

    def to_json(self, rydberg=None):
        return json.dumps(self.to_dict(rydberg))

    @classmethod
    def from_dict(cls, d):
        return cls(
            L=d["L"],
            g=d["g"],
            J=d["J_rad_per_us"],
            initial_state=d["initial_state"],
            time_grid=tuple(d["times_us"]),
        )


@dataclass(frozen=True)
class RydbergParams:
    """Drive and geometry of a ring of Rydberg atoms."""

    C6: float
    a: float
    omega: float
    delta: float
    L: int
    positions: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.positions is None:
            object.__setattr__(self, "positions", ring_positions(self.L, self.a))

    @property
    def J(self):
        return self.C6 / (4 * self.a**6)


def ring_positions(L, a):
    """2-D coordinates of ``L`` atoms equally spaced on a circle with side ``a``."""
    radius = a / (2 * math.sin(math.pi / L))
    phi = 2 * np.pi * np.arange(L) / L
    return np.column_stack([radius * np.cos(phi), radius * np.sin(phi)])


def ring_distance(L, a, ell):
    """Chord distance between sites ``ell`` apart on a ring of side ``a``."""
    if not 1 <= ell <= L - 1:
        raise ValueError(f"ell must lie in [1, {L - 1}], got {ell}")
    # evaluate on the short arc so that ell and L - ell agree bit for bit
    ell = min(ell, L - ell)
    return a * math.sin(math.pi * ell / L) / math.sin(math.pi / L)


def induced_field_hatm(L):
    """Induced longitudinal field sum_{l=1}^{L-1} (a / r_l)^6, closed form."""
    if L < 3:
        raise ValueError("L must be >= 3")
    L2 = L * L
    return (L2 - 1) / 945 * (191 + 23 * L2 + 2 * L2 * L2) * math.sin(math.pi / L) ** 6


def coupling_J(C6, a):
    return C6 / (4 * a**6)


def ising_to_rydberg(spec, C6=C6_RUBY, a=A_RUBY, delta=None):
    """Drive parameters that realise ``spec`` (zero longitudinal field) on a ring.

    With the device Hamiltonian
    ``sum V_ij n_i n_j + omega/2 sum sigma^x - delta sum n_i`` the transverse
    term equals ``g J sigma^x`` for ``omega = 2 g J`` and the induced field
    ``J hatm`` cancels for ``delta = 2 J hatm``. Pass ``delta`` to override the
    exact per-L value (e.g. one fixed detuning for every L).

    Note the returned ``J`` is ``C6 / (4 a^6)`` and need not equal ``spec.J``.
    """
    if C6 <= 0 or a <= 0:
        raise ValueError("C6 and a must be positive")
    J = coupling_J(C6, a)
    omega = 2 * spec.g * J
    if delta is None:
        delta = 2 * J * induced_field_hatm(spec.L)
    return RydbergParams(C6=C6, a=a, omega=omega, delta=delta, L=spec.L)


def rydberg_ising_coefficients(params):
    """Expand the Rydberg ring into sigma^z sigma^z / sigma^x / sigma^z terms.

    Returns a dict with ``zz`` (coupling per distance ell = 1..L//2, counting
    each pair once), ``x`` (transverse coefficient) and ``z`` (uniform
    longitudinal coefficient), all in rad/us. Constants are dropped.
    """
    L = params.L
    V = {ell: params.C6 / ring_distance(L, params.a, ell) ** 6 for ell in range(1, L)}
    zz = {ell: V[ell] / 4 for ell in range(1, L // 2 + 1)}
    z = sum(V.values()) / 4 - params.delta / 2
    return {"zz": zz, "x": params.omega / 2, "z": z}


def blockade_radius(C6, omega):
    """Distance at which the van der Waals shift equals the drive, (C6/omega)^(1/6)."""
    if omega <= 0:
        raise ValueError("blockade radius needs a positive amplitude")
    return (C6 / omega) ** (1 / 6)
