"""Work-extraction figures of merit.

Ergotropy is computed spectrally: populations of the battery state sorted
descending, paired against battery energy levels sorted ascending, give the
passive-state energy; ergotropy is the stored energy minus that.  No unitary
optimization is ever performed here (a randomized brute force exists in the
test suite as an independent oracle).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hilbert import DensityOp, HilbertError, LinearOp

__all__ = [
    "ThermoError",
    "BatterySpectrum",
    "WorkMetrics",
    "DaemonicMetrics",
    "battery_energy",
    "ergotropy",
    "ergotropy_from_populations",
    "daemonic_ergotropy",
    "daemonic_efficiency",
    "charging_power",
    "enhancement_ratio",
]

# negative ergotropy beyond this is a bug, within it is rounding noise
_CLAMP_TOL = 1e-10


class ThermoError(ValueError):
    pass


@dataclass(frozen=True)
class BatterySpectrum:
    """Battery energy levels with multiplicities, ascending, ground-shifted.

    ``space`` records whether the multiplicities refer to the full 2^N battery
    space (binomial) or to the symmetric ladder (all ones).
    """

    levels: tuple[tuple[float, int], ...]
    space: str = "full"

    def __post_init__(self):
        if self.space not in ("full", "symmetric"):
            raise ThermoError(f"unknown spectrum space {self.space!r}")
        if not self.levels:
            raise ThermoError("spectrum must contain at least one level")
        levels = tuple((float(e), int(m)) for e, m in self.levels)
        object.__setattr__(self, "levels", levels)
        energies = [e for e, _ in levels]
        if any(m < 1 for _, m in levels):
            raise ThermoError("multiplicities must be >= 1")
        if any(e2 < e1 for e1, e2 in zip(energies, energies[1:])):
            raise ThermoError("levels must be sorted ascending")
        if abs(energies[0]) > 1e-12:
            raise ThermoError(f"lowest level must be 0 (ground-shifted), got {energies[0]}")

    @classmethod
    def from_levels(cls, levels, space: str = "full") -> "BatterySpectrum":
        """Build from (energy, multiplicity) pairs; the symmetric space drops
        the multiplicities (one ladder state per level)."""
        if space == "symmetric":
            return cls(tuple((float(e), 1) for e, _ in levels), space)
        return cls(tuple(levels), space)

    def expanded(self) -> np.ndarray:
        """Energies repeated by multiplicity, ascending."""
        return np.repeat([e for e, _ in self.levels],
                         [m for _, m in self.levels]).astype(float)

    def diagonal_energies(self, dim: int) -> np.ndarray:
        """Energies of the battery *simulation* basis, one per distinct level.

        Both models simulate the battery in an energy-ordered basis with one
        basis state per distinct level (qubit, or symmetric ladder), so the
        diagonal of H_B is the distinct-level list regardless of ``space``.
        """
        distinct = np.array([e for e, _ in self.levels], dtype=float)
        if distinct.shape[0] < dim:
            raise ThermoError(
                f"spectrum has {distinct.shape[0]} distinct levels, state dimension is {dim}"
            )
        return distinct[:dim]


@dataclass(frozen=True)
class WorkMetrics:
    """Per-time unconditional read-outs of the battery state."""

    times: np.ndarray
    energy: np.ndarray
    ergotropy: np.ndarray
    power: np.ndarray
    purity: np.ndarray


@dataclass(frozen=True)
class DaemonicMetrics:
    """Per-time conditional (measurement-conditioned) read-outs, paired with
    the unconditional run that bounds them."""

    times: np.ndarray
    daemonic_ergotropy: np.ndarray
    std: np.ndarray
    unconditional_ergotropy: np.ndarray
    unconditional_energy: np.ndarray
    efficiency: np.ndarray
    n_traj: int
    enhancement_ratio: np.ndarray | None = None

    def mc_tol(self) -> np.ndarray:
        """3 sigma / sqrt(n), the Monte Carlo slack used by the bound checks."""
        return 3.0 * self.std / np.sqrt(self.n_traj)


def battery_energy(rho_b: DensityOp | np.ndarray, h_b: LinearOp | np.ndarray) -> float:
    """Tr[H_B rho_B] with the ground-shifted battery Hamiltonian (so it is >= 0)."""
    m = rho_b.matrix if isinstance(rho_b, DensityOp) else rho_b
    h = h_b.matrix if isinstance(h_b, LinearOp) else h_b
    if m.shape != h.shape:
        raise HilbertError(f"state {m.shape} and Hamiltonian {h.shape} dimensions differ")
    return float(np.einsum("ij,ji->", h, m).real)


def ergotropy_from_populations(populations_desc: np.ndarray, energies_asc: np.ndarray,
                               energy: float | np.ndarray) -> np.ndarray:
    """Vectorized core: E - sum_j r_j eps_j over descending populations.

    ``populations_desc`` may be a stack [..., d]; ``energies_asc`` must have at
    least d entries with multiplicity (embedding a ladder state into a larger
    battery space only appends zero populations, which contribute nothing).
    """
    d = populations_desc.shape[-1]
    if energies_asc.shape[0] < d:
        raise ThermoError(
            f"spectrum with multiplicity has {energies_asc.shape[0]} levels, "
            f"state rank can reach {d}: inconsistent spaces"
        )
    passive = populations_desc @ energies_asc[:d]
    out = np.asarray(energy - passive, dtype=float)
    if np.any(out < -_CLAMP_TOL):
        raise ThermoError(
            f"ergotropy {out.min():.3e} below -{_CLAMP_TOL}: inconsistent inputs"
        )
    return np.clip(out, 0.0, None)


def ergotropy(rho_b: DensityOp | np.ndarray, spectrum: BatterySpectrum,
              h_b: LinearOp | np.ndarray | None = None) -> float:
    """Maximum unitarily extractable work of a battery state.

    When ``h_b`` is omitted, the battery Hamiltonian is taken diagonal in the
    simulation basis with the spectrum's distinct levels (the convention of
    both built-in models).
    """
    m = rho_b.matrix if isinstance(rho_b, DensityOp) else np.asarray(rho_b, dtype=np.complex128)
    if h_b is None:
        e = float(np.diag(m).real @ spectrum.diagonal_energies(m.shape[0]))
    else:
        e = battery_energy(m, h_b)
    pops = np.clip(np.linalg.eigvalsh(m)[::-1], 0.0, None)
    return float(ergotropy_from_populations(pops, spectrum.expanded(), e))


def daemonic_ergotropy(conditional_states, spectrum: BatterySpectrum,
                       h_b: LinearOp | np.ndarray | None = None
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Mean and unbiased std of the conditional-state ergotropy, per sampled time.

    ``conditional_states`` is an array [n_traj, n_times, d, d] (or any nested
    sequence convertible to it).  n_traj = 1 returns std = 0.
    """
    states = np.asarray(conditional_states, dtype=np.complex128)
    if states.ndim != 4:
        raise ThermoError(f"expected [n_traj, n_times, d, d] stack, got shape {states.shape}")
    n_traj = states.shape[0]
    if n_traj == 0:
        raise ThermoError("empty conditional ensemble")
    d = states.shape[-1]
    if h_b is None:
        h = np.diag(spectrum.diagonal_energies(d)).astype(np.complex128)
    else:
        h = h_b.matrix if isinstance(h_b, LinearOp) else h_b
    energy = np.einsum("ij,ktji->kt", h, states).real
    pops = np.clip(np.linalg.eigvalsh(states)[..., ::-1], 0.0, None)
    erg = ergotropy_from_populations(pops, spectrum.expanded(), energy)
    mean = erg.mean(axis=0)
    std = erg.std(axis=0, ddof=1) if n_traj > 1 else np.zeros_like(mean)
    return mean, std


def daemonic_efficiency(daemonic, unconditional_ergotropy, energy,
                        degenerate_tol: float = 1e-12):
    """(E_bar - eps) / (E - eps); 0 by convention when there is no passive
    energy to convert (E - eps below ``degenerate_tol``)."""
    e_bar = np.asarray(daemonic, dtype=float)
    eps = np.asarray(unconditional_ergotropy, dtype=float)
    e = np.asarray(energy, dtype=float)
    gap = e - eps
    scalar = gap.ndim == 0
    gap = np.atleast_1d(gap)
    num = np.atleast_1d(e_bar - eps)
    out = np.zeros(gap.shape)
    ok = gap >= degenerate_tol
    out[ok] = num[ok] / gap[ok]
    return float(out[0]) if scalar else out


def charging_power(energy_series, times):
    """P(tau) = E(tau)/tau, with P(0) defined as 0."""
    e = np.asarray(energy_series, dtype=float)
    t = np.asarray(times, dtype=float)
    p = np.zeros_like(e)
    nz = t > 0
    p[nz] = e[nz] / t[nz]
    return p


def enhancement_ratio(daemonic_series, zero_dissipation_ergotropy_series,
                      floor: float = 1e-9):
    """E_bar / eps_0 per grid point; NaN marks points where eps_0 is below the
    floor (undefined ratio, never an infinity)."""
    e_bar = np.asarray(daemonic_series, dtype=float)
    eps0 = np.asarray(zero_dissipation_ergotropy_series, dtype=float)
    scalar = e_bar.ndim == 0 and eps0.ndim == 0
    e_bar, eps0 = np.atleast_1d(e_bar), np.atleast_1d(eps0)
    e_bar, eps0 = np.broadcast_arrays(e_bar, eps0)
    out = np.full(eps0.shape, np.nan)
    ok = eps0 > floor
    out[ok] = e_bar[ok] / eps0[ok]
    return float(out[0]) if scalar else out
