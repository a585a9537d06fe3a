"""Builders for the two battery-charger models.

Basis conventions (fixed package-wide):

* Qubits are ordered (ground, excited): index 0 = |down>, index 1 = |up>, so
  ``sigma_z = diag(-1, +1)`` and energy increases with the basis index, like a
  Fock ladder.
* Cavity Fock index = photon number, truncated at ``n_ph`` (dimension n_ph+1).
* The collective-spin battery lives in its symmetric ladder |S=N/2, m>, with
  basis index k = m + N/2 = number of excitations, dimension N+1.  The ladder
  sector is exactly preserved: the Hamiltonian is collective and the jump
  operator acts on the cavity alone.
* Subsystem order is (Battery, Charger, Cavity) for the spin-spin model and
  (Cavity, Spin ladder) for the collective model.

Battery Hamiltonians are ground-shifted so the empty battery has energy 0;
ergotropy is shift-invariant, energy and efficiency use the shifted value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hilbert import (
    HilbertError,
    LinearOp,
    PureState,
    SpaceLayout,
    embed,
    expectation,
    kron_compose,
    partial_trace,
)

__all__ = [
    "ModelError",
    "SpinSpinConfig",
    "DickeConfig",
    "ModelInstance",
    "build_spin_spin",
    "build_dicke",
    "default_fock_cutoff",
    "charging_schedule",
    "sigma_x",
    "sigma_z",
    "destroy",
    "collective_spin",
    "basis_vector",
]

DEFAULT_SPIN_SPIN_CUTOFF = 20


class ModelError(HilbertError):
    """Invalid model configuration."""


def sigma_x() -> np.ndarray:
    return np.array([[0, 1], [1, 0]], dtype=np.complex128)


def sigma_y() -> np.ndarray:
    return np.array([[0, 1j], [-1j, 0]], dtype=np.complex128)


def sigma_z() -> np.ndarray:
    # (ground, excited) ordering puts -1 first
    return np.array([[-1, 0], [0, 1]], dtype=np.complex128)


def destroy(dim: int) -> np.ndarray:
    """Truncated bosonic annihilation operator, a|n> = sqrt(n)|n-1>."""
    a = np.zeros((dim, dim), dtype=np.complex128)
    for n in range(1, dim):
        a[n - 1, n] = math.sqrt(n)
    return a


def collective_spin(n_tls: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Sx, Sy, Sz) in the symmetric S = N/2 ladder, index k = m + N/2."""
    s = n_tls / 2.0
    dim = n_tls + 1
    m = np.arange(dim) - s
    sz = np.diag(m).astype(np.complex128)
    sp = np.zeros((dim, dim), dtype=np.complex128)
    for k in range(dim - 1):
        sp[k + 1, k] = math.sqrt(s * (s + 1) - m[k] * (m[k] + 1))
    sm = sp.conj().T
    sx = 0.5 * (sp + sm)
    sy = -0.5j * (sp - sm)
    return sx, sy, sz


def basis_vector(dim: int, index: int) -> np.ndarray:
    v = np.zeros(dim, dtype=np.complex128)
    v[index] = 1.0
    return v


@dataclass(frozen=True)
class SpinSpinConfig:
    """Cavity-mediated spin-spin battery: one battery qubit, one charger qubit,
    both coupled through a lossy cavity mode.  All rates share omega's units
    (hbar = 1); the three bare frequencies are resonant at ``omega``."""

    omega: float = 1.0
    g_b: float = 0.1
    g_c: float = 0.2
    gamma: float = 0.0
    n_ph: int = DEFAULT_SPIN_SPIN_CUTOFF

    def __post_init__(self):
        if self.omega <= 0:
            raise ModelError(f"omega must be positive, got {self.omega}")
        if self.g_b < 0 or self.g_c < 0:
            raise ModelError("coupling strengths must be non-negative")
        if self.gamma < 0:
            raise ModelError(f"gamma must be non-negative, got {self.gamma}")
        if self.n_ph < 1:
            raise ModelError(f"n_ph must be >= 1, got {self.n_ph}")


@dataclass(frozen=True)
class DickeConfig:
    """Collective N-qubit battery charged by a single lossy cavity mode, with
    counter-rotating terms kept.  ``lambda_bar`` is the coupling rate in the
    same units as omega (lambda_bar = omega reproduces the strong-coupling
    reference point)."""

    omega: float = 1.0
    lambda_bar: float = 1.0
    kappa: float = 0.0
    n_tls: int = 4
    n_ph: int | None = None

    def __post_init__(self):
        if self.omega <= 0:
            raise ModelError(f"omega must be positive, got {self.omega}")
        if self.lambda_bar < 0:
            raise ModelError(f"lambda_bar must be non-negative, got {self.lambda_bar}")
        if self.kappa < 0:
            raise ModelError(f"kappa must be non-negative, got {self.kappa}")
        if self.n_tls < 1:
            raise ModelError(f"n_tls must be >= 1, got {self.n_tls}")
        if self.n_ph is None:
            object.__setattr__(self, "n_ph", default_fock_cutoff(self.n_tls))
        if self.n_ph < self.n_tls:
            raise ModelError(
                f"n_ph = {self.n_ph} < n_tls = {self.n_tls}: "
                "the initial Fock state exceeds the cavity cutoff"
            )


@dataclass(frozen=True)
class ModelInstance:
    """Assembled model: Hamiltonians, jump operator, initial state, layout.

    ``h_battery`` lives on the battery subsystem alone (ground-shifted), while
    ``h_battery_spectrum`` lists (energy, multiplicity) pairs of the physical
    battery space — the full 2^N spectrum for the collective model, since
    passive-state construction may use arbitrary unitaries on the N qubits.
    """

    layout: SpaceLayout
    h_total: LinearOp
    h_battery_part: LinearOp
    h_charger_part: LinearOp
    h_interaction: LinearOp
    h_battery: LinearOp
    h_battery_spectrum: tuple[tuple[float, int], ...]
    jump_op: LinearOp
    initial_state: PureState
    battery_index: int
    cavity_index: int
    omega: float
    label: str
    config: SpinSpinConfig | DickeConfig = field(repr=False)

    def __post_init__(self):
        self.h_total.validate()
        self.h_battery.validate()
        self.initial_state.validate()
        rho_b = partial_trace(self.initial_state, self.battery_index)
        e0 = expectation(LinearOp(self.h_battery.matrix, rho_b.layout, True), rho_b).real
        if abs(e0) > 1e-10:
            raise ModelError(f"initial battery energy {e0:.3e} != 0 (ground-shifted convention)")

    @property
    def dim(self) -> int:
        return self.layout.total_dim

    @property
    def battery_dim(self) -> int:
        return self.layout.dims[self.battery_index]


def default_fock_cutoff(n_tls: int) -> int:
    """Photon-number cutoff rule for the collective model: 20 below 5 qubits,
    4N from 5 up."""
    if n_tls < 1:
        raise ModelError(f"n_tls must be >= 1, got {n_tls}")
    return 20 if n_tls < 5 else 4 * n_tls


def build_spin_spin(cfg: SpinSpinConfig) -> ModelInstance:
    """Battery qubit + charger qubit exchanging energy through a cavity mode.

    H = (omega/2) sz_B + (omega/2) sz_C + omega a†a
        + (g_b sx_B + g_c sx_C)(a + a†),   jump = sqrt(gamma) a.
    Starts as |down>_B |up>_C |0>_A.
    """
    w = cfg.omega
    nc = cfg.n_ph + 1
    layout = SpaceLayout((2, 2, nc))
    a = destroy(nc)
    x_cav = a + a.conj().T

    h_b = 0.5 * w * embed(sigma_z(), 0, layout, hermitian=True).matrix
    h_c = 0.5 * w * embed(sigma_z(), 1, layout, hermitian=True).matrix
    h_int = (
        w * embed(a.conj().T @ a, 2, layout, hermitian=True).matrix
        + cfg.g_b * kron_compose([sigma_x(), np.eye(2), x_cav], layout).matrix
        + cfg.g_c * kron_compose([np.eye(2), sigma_x(), x_cav], layout).matrix
    )
    h_total = LinearOp(h_b + h_c + h_int, layout, hermitian=True)

    jump = LinearOp(math.sqrt(cfg.gamma) * embed(a, 2, layout).matrix, layout)

    psi0 = np.kron(np.kron(basis_vector(2, 0), basis_vector(2, 1)), basis_vector(nc, 0))

    batt_layout = SpaceLayout((2,))
    h_batt = LinearOp(0.5 * w * (sigma_z() + np.eye(2)), batt_layout, hermitian=True)

    return ModelInstance(
        layout=layout,
        h_total=h_total,
        h_battery_part=LinearOp(h_b, layout, hermitian=True),
        h_charger_part=LinearOp(h_c, layout, hermitian=True),
        h_interaction=LinearOp(h_int, layout, hermitian=True),
        h_battery=h_batt,
        h_battery_spectrum=((0.0, 1), (w, 1)),
        jump_op=jump,
        initial_state=PureState(psi0, layout),
        battery_index=0,
        cavity_index=2,
        omega=w,
        label="spin_spin",
        config=cfg,
    )


def build_dicke(cfg: DickeConfig) -> ModelInstance:
    """Collective battery in the symmetric ladder, charged by an N-photon cavity.

    H = omega a†a + omega Sz + 2 lambda_bar Sx (a + a†),  jump = sqrt(2 kappa) a.
    Starts as |N>_cavity |m = -N/2>.  Dimension (n_ph+1)(N+1) instead of the
    full (n_ph+1) 2^N: the collective Hamiltonian and the cavity-only jump
    operator cannot leave the S = N/2 sector.
    """
    w = cfg.omega
    n = cfg.n_tls
    nc = cfg.n_ph + 1
    layout = SpaceLayout((nc, n + 1))
    a = destroy(nc)
    sx, _, sz = collective_spin(n)

    h_c = w * embed(a.conj().T @ a, 0, layout, hermitian=True).matrix
    h_b = w * embed(sz, 1, layout, hermitian=True).matrix
    h_int = 2.0 * cfg.lambda_bar * kron_compose([a + a.conj().T, sx], layout).matrix
    h_total = LinearOp(h_c + h_b + h_int, layout, hermitian=True)

    jump = LinearOp(math.sqrt(2.0 * cfg.kappa) * embed(a, 0, layout).matrix, layout)

    psi0 = np.kron(basis_vector(nc, n), basis_vector(n + 1, 0))

    batt_layout = SpaceLayout((n + 1,))
    h_batt = LinearOp(w * (sz + 0.5 * n * np.eye(n + 1)), batt_layout, hermitian=True)
    spectrum = tuple((k * w, math.comb(n, k)) for k in range(n + 1))

    return ModelInstance(
        layout=layout,
        h_total=h_total,
        h_battery_part=LinearOp(h_b, layout, hermitian=True),
        h_charger_part=LinearOp(h_c, layout, hermitian=True),
        h_interaction=LinearOp(h_int, layout, hermitian=True),
        h_battery=h_batt,
        h_battery_spectrum=spectrum,
        jump_op=jump,
        initial_state=PureState(psi0, layout),
        battery_index=1,
        cavity_index=0,
        omega=w,
        label="dicke",
        config=cfg,
    )


def charging_schedule(model: ModelInstance, t: float) -> LinearOp:
    """Charging-on Hamiltonian at time t.

    The coupling stays on for the whole simulated window; each sampled time is
    read out as if it were the disconnection time, so the schedule is constant
    and tau_c is a label, not a dynamical switch.
    """
    if t < 0:
        raise ModelError(f"time must be non-negative, got {t}")
    return model.h_total
