"""Dense exact diagonalisation, dephasing dynamics and noisy shot sampling.

Basis convention: site i (0-based) is bit L-1-i of the basis index, bit b = 1
means sz = +1 (Rydberg-excited, n = 1). The all-down state is index 0.
"""

from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import expm_multiply

from .errors import IntegrationError, ResourceError
from .quench_model import RydbergParams

MAX_DENSE_L = 14


def _check_size(L, max_L=MAX_DENSE_L):
    if L < 2:
        raise ValueError("L must be >= 2")
    if L > max_L:
        raise ResourceError(f"L = {L} exceeds the dense limit of {max_L} sites")


def spin_table(L):
    """(2^L, L) array of sz eigenvalues, column i for site i."""
    idx = np.arange(2**L)
    bits = (idx[:, None] >> (L - 1 - np.arange(L))[None, :]) & 1
    return 2 * bits - 1


@dataclass
class DenseHamiltonian:
    L: int
    matrix: np.ndarray
    kind: str
    _eig: tuple = field(default=None, repr=False)

    def eig(self):
        if self._eig is None:
            self._eig = np.linalg.eigh(self.matrix)
        return self._eig

    def sparse(self):
        return sparse.csr_matrix(self.matrix)


def _transverse(L, coeff):
    """Sparse sum_i coeff * sx_i."""
    dim = 2**L
    idx = np.arange(dim)
    rows = np.concatenate([idx] * L)
    cols = np.concatenate([idx ^ (1 << (L - 1 - i)) for i in range(L)])
    return sparse.csr_matrix((np.full(rows.size, float(coeff)), (rows, cols)), shape=(dim, dim))


def ising_diagonal(L, J):
    s = spin_table(L)
    return J * np.sum(s * np.roll(s, -1, axis=1), axis=1).astype(float)


def ising_sparse(L, g, J):
    return sparse.diags(ising_diagonal(L, J)) + _transverse(L, g * J)


def build_ising_ring(L, g, J=1.0):
    """J sum sz_i sz_{i+1} + g J sum sx_i with periodic bonds."""
    _check_size(L)
    return DenseHamiltonian(L, ising_sparse(L, g, J).toarray(), "ising")


def rydberg_diagonal(positions, C6, delta):
    """Diagonal of sum_{i<j} C6 / r_ij^6 n_i n_j - delta sum_i n_i."""
    positions = np.asarray(positions, dtype=float)
    L = positions.shape[0]
    n = (spin_table(L) + 1) // 2
    diag = -delta * n.sum(axis=1).astype(float)
    for i in range(L):
        for j in range(i + 1, L):
            r = np.linalg.norm(positions[i] - positions[j])
            diag += C6 / r**6 * (n[:, i] * n[:, j])
    return diag


def rydberg_sparse(positions, C6, omega, delta):
    L = np.asarray(positions).shape[0]
    return sparse.diags(rydberg_diagonal(positions, C6, delta)) + _transverse(L, omega / 2)


def build_rydberg_ring(params: RydbergParams):
    """Long-range Rydberg ring with chord-distance couplings; constants dropped."""
    _check_size(params.L)
    H = rydberg_sparse(params.positions, params.C6, params.omega, params.delta)
    return DenseHamiltonian(params.L, H.toarray(), "rydberg")


def shift_operator(L):
    """Permutation matrix of the cyclic translation i -> i + 1."""
    s = (spin_table(L) + 1) // 2
    shifted = np.roll(s, 1, axis=1)
    target = shifted @ (1 << (L - 1 - np.arange(L)))
    P = np.zeros((2**L, 2**L))
    P[target, np.arange(2**L)] = 1.0
    return P


# ---------------------------------------------------------------------------
# states and evolution
# ---------------------------------------------------------------------------


def initial_state(L, name):
    dim = 2**L
    if name == "down":
        psi = np.zeros(dim, dtype=complex)
        psi[0] = 1.0
    elif name == "plus":
        psi = np.full(dim, 2 ** (-L / 2), dtype=complex)
    elif name == "afm":
        if L % 2:
            raise ValueError("the AFM state is not defined on an odd ring")
        # down on even sites, up on odd sites
        index = sum(1 << (L - 1 - i) for i in range(1, L, 2))
        psi = np.zeros(dim, dtype=complex)
        psi[index] = 1.0
    else:
        raise ValueError(f"unknown initial state {name!r}")
    return psi


def evolve(H, psi0, t):
    """exp(-i H t) psi0; ``t`` may be a scalar or a 1-D grid (rows of the result)."""
    psi0 = np.asarray(psi0, dtype=complex)
    norm = np.linalg.norm(psi0)
    if abs(norm - 1) > 1e-10:
        raise ValueError(f"initial state is not normalised (norm = {norm})")
    E, V = H.eig()
    coeff = V.conj().T @ psi0
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = (np.exp(-1j * np.outer(ts, E)) * coeff) @ V.T
    return out[0] if np.ndim(t) == 0 else out


def observables(psi, L):
    """One-point <sz_i>, two-point <sz_i sz_j> and connected matrices."""
    p = np.abs(np.asarray(psi)) ** 2
    s = spin_table(L).astype(float)
    one = p @ s
    two = (s * p[:, None]).T @ s
    return {"one_point": one, "two_point": two, "connected": two - np.outer(one, one)}


def ring_g2(psi, L, ells=None):
    """Translation-averaged <sz_i sz_{i+ell}>, <sz> and connected g2 per ell."""
    ells = range(1, L // 2 + 1) if ells is None else ells
    obs = observables(psi, L)
    one = obs["one_point"].mean()
    two = np.array([np.mean([obs["two_point"][i, (i + ell) % L] for i in range(L)]) for ell in ells])
    conn = np.array([np.mean([obs["connected"][i, (i + ell) % L] for i in range(L)]) for ell in ells])
    return {"one_point": one, "two_point": two, "connected": conn}


def density_g2(rho, L, ells=None):
    """Same as :func:`ring_g2` for a density matrix (only its diagonal matters)."""
    p = np.real(np.diag(rho))
    return ring_g2(np.sqrt(np.clip(p, 0, None)), L, ells)


def half_chain_entropy(psi, L):
    """Von Neumann entropy (nats) of the first L/2 sites."""
    if L % 2:
        raise ValueError("half-chain entropy needs an even L")
    m = np.asarray(psi).reshape(2 ** (L // 2), 2 ** (L // 2))
    sv = np.linalg.svd(m, compute_uv=False)
    lam = sv**2
    lam = lam[lam > 1e-15]
    return float(-np.sum(lam * np.log(lam)))


# ---------------------------------------------------------------------------
# dephasing
# ---------------------------------------------------------------------------

# Forest-Ruth fourth-order composition weights
_FR_THETA = 1 / (2 - 2 ** (1 / 3))
_FR_WEIGHTS = (_FR_THETA, 1 - 2 * _FR_THETA, _FR_THETA)


def _hamming_matrix(L):
    idx = np.arange(2**L)
    x = idx[:, None] ^ idx[None, :]
    # popcount
    count = np.zeros_like(x)
    for b in range(L):
        count += (x >> b) & 1
    return count.astype(float)


def lindblad_dephasing(H, psi0, gamma, time_grid, dt=None, tol=1e-6, max_L=10):
    """Density matrices at ``time_grid`` under dephasing jumps sqrt(gamma) sz_m.

    The dissipator acts on rho in the sz basis as elementwise damping by
    exp(-2 gamma d_H(a, b) t), d_H the Hamming distance, so each step composes
    exact unitary and exact dephasing sub-flows in the fourth-order Forest-Ruth
    pattern. The step is halved until two successive step sizes agree to
    ``tol`` at every output time. With gamma = 0 the result is exact.
    """
    L = H.L
    _check_size(L, max_L)
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    times = np.asarray(time_grid, dtype=float)
    if times.ndim != 1 or times[0] < 0 or np.any(np.diff(times) < 0):
        raise ValueError("time grid must be non-negative and non-decreasing")
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1) > 1e-10:
        raise ValueError("initial state is not normalised")
    rho0 = np.outer(psi0, psi0.conj())
    if gamma == 0:
        return np.array([np.outer(p, p.conj()) for p in evolve(H, psi0, times)])

    E, V = H.eig()
    ham = _hamming_matrix(L)
    if dt is None:
        dt = 1.0 / max(np.max(np.abs(E)), 1.0)
    gaps = np.diff(np.concatenate([[0.0], times]))
    if np.any(gaps > 0):
        # a step longer than an interval would not be refined by halving
        dt = min(dt, float(gaps[gaps > 0].min()))

    def run(step):
        cache = {}

        def flows(h):
            key = round(h, 15)
            if key not in cache:
                cache[key] = [((V * np.exp(-1j * E * w * h)) @ V.conj().T,
                               np.exp(-gamma * ham * w * h)) for w in _FR_WEIGHTS]
            return cache[key]

        out = np.empty((len(times),) + rho0.shape, dtype=complex)
        rho = rho0.copy()
        for i, gap in enumerate(gaps):
            if gap > 0:
                n = int(math.ceil(gap / step - 1e-9))
                subs = flows(gap / n)
                for _ in range(n):
                    # each sub-flow: half damping, unitary, half damping
                    for U, D in subs:
                        rho = D * (U @ (D * rho) @ U.conj().T)
            out[i] = rho
        return out

    coarse = run(dt)
    for _ in range(8):
        fine = run(dt / 2)
        err = np.max(np.abs(fine - coarse))
        if err <= tol:
            return fine
        dt /= 2
        coarse = fine
    raise IntegrationError(f"dephasing integrator did not converge (last step change {err:.3e}, dt = {dt:.3e})")


def dephasing_eta(L, g, gammas, J=1.0, state="down", span=1.6, n_t=161):
    """Ratio of the antipodal connected peak with and without dephasing.

    Peaks are taken over a uniform grid on [0, span * t_F],
    t_F = L / (4 J min(g, 1)).

    Returns
    -------
    list of float
        eta(gamma) for each entry of ``gammas``.
    """
    if g <= 0:
        raise ValueError("g must be positive")
    H = build_ising_ring(L, g, J)
    psi0 = initial_state(L, state)
    ts = np.linspace(0.0, span * L / (4 * J * min(g, 1.0)), n_t)

    def peak(gamma):
        rhos = lindblad_dephasing(H, psi0, gamma, ts)
        return max(density_g2(r, L, [L // 2])["connected"][0] for r in rhos)

    p0 = peak(0.0)
    return [peak(gm) / p0 for gm in gammas]


def density_checks(rho):
    """Trace, hermiticity defect and smallest eigenvalue of ``rho``."""
    tr = float(np.real(np.trace(rho)))
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    lam_min = float(np.min(np.linalg.eigvalsh((rho + rho.conj().T) / 2)))
    return tr, herm, lam_min


# ---------------------------------------------------------------------------
# noisy shot sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseParams:
    T1: float = 100.0
    T2: float = 20.0
    sigma_r_xy: float = 0.18
    sigma_r_z: float = 0.67
    p_prep: float = 0.01
    p_fn: float = 0.07
    p_fp: float = 0.01
    sigma_omega_rel: float = 0.02
    sigma_delta: float = 2 * np.pi * 0.05
    gamma_dephasing: float = 0.0

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("p_prep", "p_fn", "p_fp"):
            if getattr(self, name) > 1:
                raise ValueError(f"{name} must be a probability")

    @classmethod
    def noiseless(cls):
        return cls(0, 0, 0, 0, 0, 0, 0, 0, 0, 0)

    @classmethod
    def from_T2(cls, T2, **kw):
        """Dephasing-only convenience constructor with gamma = 2 / T2."""
        return cls(T1=0, T2=T2, sigma_r_xy=0, sigma_r_z=0, p_prep=0, p_fn=0, p_fp=0,
                   sigma_omega_rel=0, sigma_delta=0, gamma_dephasing=2.0 / T2, **kw)

    def with_readout(self, p_fp, p_fn):
        return replace(self, p_fp=p_fp, p_fn=p_fn)


def _shot_rng(seed, shot):
    entropy = [int(x) for x in seed] if isinstance(seed, (tuple, list)) else int(seed)
    return np.random.default_rng(np.random.SeedSequence(entropy=entropy, spawn_key=(shot,)))


def _apply_readout(bits, rng, p_fn, p_fp):
    u = rng.random(bits.shape)
    flip = np.where(bits == 1, u < p_fn, u < p_fp)
    return np.where(flip, 1 - bits, bits)


def _sample_bits(psi, L, rng, n=1):
    p = np.abs(psi) ** 2
    p /= p.sum()
    idx = rng.choice(p.size, size=n, p=p)
    return ((idx[:, None] >> (L - 1 - np.arange(L))[None, :]) & 1).astype(np.int8)


def _is_quiet(noise):
    return (noise.sigma_r_xy == 0 and noise.sigma_r_z == 0 and noise.sigma_omega_rel == 0
            and noise.sigma_delta == 0 and noise.p_prep == 0)


def noisy_shot_sampler(params, noise, t, n_shots, seed, initial="down", device_id="ed-sampler",
                       g=None, max_L=12, hamiltonian="rydberg"):
    """Sample ``n_shots`` bitstrings of the Rydberg ring at time ``t``.

    Per shot: Gaussian 3-D position jitter, relative amplitude jitter and an
    additive detuning offset are drawn, the Hamiltonian is rebuilt and the
    state evolved; atoms lost in preparation are removed from the dynamics and
    read as 0; finally readout flips 1 -> 0 (p_fn) and 0 -> 1 (p_fp) are
    applied. Every shot uses its own stream derived from (seed, shot index).
    Dephasing (``gamma_dephasing``) is not part of the per-shot model.

    With ``hamiltonian="ising"`` the nearest-neighbour Ising ring with the
    same J and g is sampled instead; only readout flips are then allowed.
    """
    from .records import ShotRecordSet

    L = params.L
    _check_size(L, max_L)
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    psi0_full = initial_state(L, initial)
    pos0 = np.column_stack([np.asarray(params.positions, float), np.zeros(L)])
    bits = np.empty((n_shots, L), dtype=np.int8)
    if g is None:
        g = params.omega / (2 * params.J)
    if hamiltonian not in ("rydberg", "ising"):
        raise ValueError(f"unknown hamiltonian {hamiltonian!r}")
    if hamiltonian == "ising" and not _is_quiet(noise):
        raise ValueError("the Ising sampler supports readout noise only")

    if _is_quiet(noise):
        # no per-shot Hamiltonian randomness: one evolution serves all shots
        if hamiltonian == "ising":
            H = ising_sparse(L, g, params.J)
        else:
            H = rydberg_sparse(pos0, params.C6, params.omega, params.delta)
        psi = expm_multiply(-1j * t * H, psi0_full) if t > 0 else psi0_full
        for s in range(n_shots):
            rng = _shot_rng(seed, s)
            b = _sample_bits(psi, L, rng)[0]
            bits[s] = _apply_readout(b, rng, noise.p_fn, noise.p_fp)
    else:
        for s in range(n_shots):
            rng = _shot_rng(seed, s)
            jitter = rng.normal(size=(L, 3)) * [noise.sigma_r_xy, noise.sigma_r_xy, noise.sigma_r_z]
            amp = 1 + noise.sigma_omega_rel * rng.normal()
            ddelta = noise.sigma_delta * rng.normal()
            present = rng.random(L) >= noise.p_prep
            b = np.zeros(L, dtype=np.int8)
            m = int(present.sum())
            if m > 0:
                pos = (pos0 + jitter)[present]
                H = rydberg_sparse(pos, params.C6, params.omega * amp, params.delta + ddelta)
                psi0 = initial_state(m, initial) if initial != "afm" else _afm_subset(L, present)
                psi = expm_multiply(-1j * t * H, psi0) if t > 0 else psi0
                b[present] = _sample_bits(psi, m, rng)[0]
            bits[s] = _apply_readout(b, rng, noise.p_fn, noise.p_fp)

    meta = {
        "device_id": device_id,
        "L": L,
        "a_um": params.a,
        "g": float(g),
        "J": params.J,
        "initial_state": initial,
        "t_us": float(t),
        "n_shots": int(n_shots),
        "seed": list(seed) if isinstance(seed, (tuple, list)) else seed,
    }
    return ShotRecordSet(meta, bits)


def _afm_subset(L, present):
    full = np.zeros(L, dtype=int)
    full[1::2] = 1
    sub = full[present]
    m = sub.size
    psi = np.zeros(2**m, dtype=complex)
    psi[int(sum(int(b) << (m - 1 - i) for i, b in enumerate(sub)))] = 1.0
    return psi
