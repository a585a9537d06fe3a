"""Dense complex linear algebra on composite (tensor-product) Hilbert spaces.

Conventions used throughout the package:

* A composite space is described by a :class:`SpaceLayout`, an ordered tuple of
  subsystem dimensions.  The global index runs in row-major (C) order over the
  subsystem indices, i.e. ``amplitudes.reshape(layout.dims)[i0, i1, ...]`` is
  the amplitude of the product basis state ``|i0> ⊗ |i1> ⊗ ...``.
* Everything is stored dense, complex128.  Problem sizes here stay well below
  a few thousand dimensions, where dense BLAS kernels beat any sparse scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "HilbertError",
    "DimensionMismatchError",
    "SpaceLayout",
    "PureState",
    "DensityOp",
    "LinearOp",
    "kron_compose",
    "embed",
    "partial_trace",
    "expectation",
    "purity",
    "trace_distance",
]


class HilbertError(ValueError):
    """Base error for invalid states, operators or layouts."""


class DimensionMismatchError(HilbertError):
    """Operator/state dimensions do not match the declared layout."""


@dataclass(frozen=True)
class SpaceLayout:
    """Ordered subsystem dimensions of a composite Hilbert space."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if not dims:
            raise HilbertError("layout needs at least one subsystem")
        for k, d in enumerate(dims):
            if d < 1:
                raise HilbertError(f"subsystem {k} has non-positive dimension {d}")

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    @property
    def n_subsystems(self) -> int:
        return len(self.dims)

    def check_index(self, subsystem: int) -> None:
        if not 0 <= subsystem < len(self.dims):
            raise HilbertError(
                f"subsystem index {subsystem} out of range for {len(self.dims)} subsystems"
            )


def _as_complex_matrix(matrix) -> np.ndarray:
    m = np.ascontiguousarray(matrix, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise HilbertError(f"expected a square matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True)
class PureState:
    """Normalized state vector on a composite space."""

    amplitudes: np.ndarray
    layout: SpaceLayout

    def __post_init__(self):
        amps = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if amps.ndim != 1:
            raise HilbertError(f"state vector must be 1-D, got shape {amps.shape}")
        if amps.shape[0] != self.layout.total_dim:
            raise DimensionMismatchError(
                f"vector length {amps.shape[0]} != layout total_dim {self.layout.total_dim}"
            )
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "PureState":
        return PureState(self.amplitudes / self.norm(), self.layout)

    def validate(self, tol: float = 1e-10) -> None:
        dev = abs(self.norm() - 1.0)
        if dev > tol:
            raise HilbertError(f"state not normalized: |norm - 1| = {dev:.3e}")

    def projector(self) -> "DensityOp":
        return DensityOp(np.outer(self.amplitudes, self.amplitudes.conj()), self.layout)


@dataclass(frozen=True)
class DensityOp:
    """Density matrix on a composite space.

    Construction only checks shape; :meth:`validate` checks the physical
    invariants (Hermiticity, unit trace, positivity) at the spec tolerances.
    """

    matrix: np.ndarray
    layout: SpaceLayout

    def __post_init__(self):
        m = _as_complex_matrix(self.matrix)
        if m.shape[0] != self.layout.total_dim:
            raise DimensionMismatchError(
                f"matrix dimension {m.shape[0]} != layout total_dim {self.layout.total_dim}"
            )
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def validate(self, herm_tol: float = 1e-10, trace_tol: float = 1e-8,
                 positivity_tol: float = -1e-8) -> None:
        herm = np.max(np.abs(self.matrix - self.matrix.conj().T))
        if herm > herm_tol:
            raise HilbertError(f"density matrix not Hermitian: max dev {herm:.3e}")
        tr = self.matrix.trace()
        if abs(tr - 1.0) > trace_tol:
            raise HilbertError(f"density matrix trace {tr} != 1")
        lo = float(np.linalg.eigvalsh(self.matrix)[0])
        if lo < positivity_tol:
            raise HilbertError(f"density matrix not positive: min eigenvalue {lo:.3e}")


@dataclass(frozen=True)
class LinearOp:
    """Dense operator on a composite space, with an optional Hermiticity hint."""

    matrix: np.ndarray
    layout: SpaceLayout
    hermitian: bool = field(default=False)

    def __post_init__(self):
        m = _as_complex_matrix(self.matrix)
        if m.shape[0] != self.layout.total_dim:
            raise DimensionMismatchError(
                f"matrix dimension {m.shape[0]} != layout total_dim {self.layout.total_dim}"
            )
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def validate(self, tol: float = 1e-10) -> None:
        if self.hermitian:
            dev = np.max(np.abs(self.matrix - self.matrix.conj().T))
            if dev > tol:
                raise HilbertError(f"operator flagged Hermitian but max deviation {dev:.3e}")

    def dagger(self) -> "LinearOp":
        return LinearOp(self.matrix.conj().T.copy(), self.layout, self.hermitian)


def kron_compose(factors: Sequence[LinearOp | np.ndarray], layout: SpaceLayout) -> LinearOp:
    """Kronecker product of one operator per subsystem, in layout order."""
    if len(factors) != layout.n_subsystems:
        raise DimensionMismatchError(
            f"got {len(factors)} factors for {layout.n_subsystems} subsystems"
        )
    mats = []
    hermitian = True
    for k, f in enumerate(factors):
        m = f.matrix if isinstance(f, LinearOp) else _as_complex_matrix(f)
        if m.shape[0] != layout.dims[k]:
            raise DimensionMismatchError(
                f"factor for subsystem {k} has dimension {m.shape[0]}, "
                f"layout expects {layout.dims[k]}"
            )
        if isinstance(f, LinearOp):
            hermitian = hermitian and f.hermitian
        else:
            hermitian = hermitian and bool(np.allclose(m, m.conj().T, atol=1e-14))
        mats.append(m)
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return LinearOp(out, layout, hermitian=hermitian)


def embed(op: LinearOp | np.ndarray, subsystem: int, layout: SpaceLayout,
          hermitian: bool | None = None) -> LinearOp:
    """Lift a single-subsystem operator to the full space (identities elsewhere)."""
    layout.check_index(subsystem)
    m = op.matrix if isinstance(op, LinearOp) else _as_complex_matrix(op)
    if m.shape[0] != layout.dims[subsystem]:
        raise DimensionMismatchError(
            f"operator dimension {m.shape[0]} != dims[{subsystem}] = {layout.dims[subsystem]}"
        )
    if hermitian is None:
        if isinstance(op, LinearOp):
            hermitian = op.hermitian
        else:
            hermitian = bool(np.allclose(m, m.conj().T, atol=1e-14))
    factors = [np.eye(d, dtype=np.complex128) for d in layout.dims]
    factors[subsystem] = m
    out = factors[0]
    for f in factors[1:]:
        out = np.kron(out, f)
    return LinearOp(out, layout, hermitian=hermitian)


def _normalize_keep(keep: Union[int, Iterable[int]], n: int) -> tuple[int, ...]:
    if isinstance(keep, (int, np.integer)):
        keep_t = (int(keep),)
    else:
        keep_t = tuple(sorted(int(k) for k in keep))
    if len(set(keep_t)) != len(keep_t):
        raise HilbertError(f"duplicate subsystem indices in keep set {keep_t}")
    for k in keep_t:
        if not 0 <= k < n:
            raise HilbertError(f"keep index {k} out of range for {n} subsystems")
    if len(keep_t) == 0:
        raise HilbertError("keep set must not be empty (scalar trace is a separate call)")
    if len(keep_t) == n:
        raise HilbertError("keep set must be a proper subset (no-op trace not supported)")
    return keep_t


def reduced_from_vector(amplitudes: np.ndarray, dims: Sequence[int],
                        keep: tuple[int, ...]) -> np.ndarray:
    """Reduced density matrix of a pure state, as a raw array (hot-path helper)."""
    n = len(dims)
    rest = [k for k in range(n) if k not in keep]
    psi = amplitudes.reshape(dims).transpose(list(keep) + rest)
    d_keep = math.prod(dims[k] for k in keep)
    m = psi.reshape(d_keep, -1)
    return m @ m.conj().T


def partial_trace(state: PureState | DensityOp, keep: Union[int, Iterable[int]]) -> DensityOp:
    """Trace out every subsystem not in ``keep``; returns the reduced density matrix.

    Kept subsystems appear in ascending layout order.  Implemented by index
    reshaping and contraction, O(total_dim^2).
    """
    layout = state.layout
    keep_t = _normalize_keep(keep, layout.n_subsystems)
    kept_layout = SpaceLayout(tuple(layout.dims[k] for k in keep_t))
    if isinstance(state, PureState):
        red = reduced_from_vector(state.amplitudes, layout.dims, keep_t)
        return DensityOp(red, kept_layout)
    n = layout.n_subsystems
    rest = [k for k in range(n) if k not in keep_t]
    rho = state.matrix.reshape(layout.dims + layout.dims)
    # bring kept row/col axes to the front, traced axes paired at the back
    perm = (list(keep_t) + [n + k for k in keep_t]
            + rest + [n + k for k in rest])
    rho = rho.transpose(perm)
    d_keep = kept_layout.total_dim
    d_rest = layout.total_dim // d_keep
    rho = rho.reshape(d_keep, d_keep, d_rest, d_rest)
    red = np.einsum("ijkk->ij", rho)
    return DensityOp(np.ascontiguousarray(red), kept_layout)


def expectation(op: LinearOp, state: PureState | DensityOp) -> complex:
    """<psi|A|psi> for pure states, Tr[A rho] for density matrices."""
    if op.dim != state.layout.total_dim:
        raise DimensionMismatchError(
            f"operator dimension {op.dim} != state dimension {state.layout.total_dim}"
        )
    if isinstance(state, PureState):
        return complex(np.vdot(state.amplitudes, op.matrix @ state.amplitudes))
    return complex(np.einsum("ij,ji->", op.matrix, state.matrix))


def purity(rho: DensityOp | np.ndarray) -> float:
    """Tr[rho^2]; equals sum |rho_ij|^2 for Hermitian rho."""
    m = rho.matrix if isinstance(rho, DensityOp) else rho
    return float(np.vdot(m, m).real)


def trace_distance(a: DensityOp | np.ndarray, b: DensityOp | np.ndarray) -> float:
    """(1/2) * trace norm of a - b, via the eigenvalues of the Hermitian difference."""
    ma = a.matrix if isinstance(a, DensityOp) else a
    mb = b.matrix if isinstance(b, DensityOp) else b
    diff = ma - mb
    diff = 0.5 * (diff + diff.conj().T)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))
