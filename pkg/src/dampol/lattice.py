"""Periodic cubic lattice, spectral vector-field operators, and kernel algebra.

Discretization conventions used by the whole package:

* spatial integrals become cell sums, ``integral dr -> v * sum_r`` with
  ``v`` the cell volume, so the spatial delta is the identity matrix
  divided by ``v``;
* frequency integrals become quadrature sums over a `FrequencyGrid`,
  with the frequency delta equal to ``1/w_k`` at node ``k``;
* a two-point tensor kernel ``K_ij(r, r')`` is stored as a dense complex
  square matrix of dimension ``3M`` with row index ``(site, component)``,
  and kernel composition carries the volume factor, ``A o B = v * A @ B``.

Differential operators (curl, double curl, Laplacian) are realized
spectrally with the exact discrete wave vectors, so transversality
identities close to machine precision rather than to O(spacing^2).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DampolError

_LEVI_CIVITA = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    _LEVI_CIVITA[_i, _j, _k] = 1.0
    _LEVI_CIVITA[_i, _k, _j] = -1.0


@dataclass(frozen=True)
class Lattice:
    """Periodic cubic lattice with ``n_per_axis**3`` sites.

    The flag `k0_transverse` assigns the k = 0 Fourier mode to the
    transverse subspace (constant fields are divergence-free); flipping it
    moves that mode to the longitudinal projector instead.
    """

    n_per_axis: int
    spacing: float = 1.0
    k0_transverse: bool = True

    def __post_init__(self):
        if int(self.n_per_axis) != self.n_per_axis or self.n_per_axis < 1:
            raise DampolError(f"n_per_axis must be a positive integer, got {self.n_per_axis}")
        if not self.spacing > 0:
            raise DampolError(f"spacing must be positive, got {self.spacing}")

    @property
    def n_sites(self) -> int:
        return self.n_per_axis ** 3

    @property
    def dim(self) -> int:
        """Dimension of the flattened (site, component) index space."""
        return 3 * self.n_sites

    @property
    def cell_volume(self) -> float:
        return float(self.spacing) ** 3

    @cached_property
    def sites(self) -> np.ndarray:
        """(M, 3) array of site positions, C-ordered over integer triples."""
        n = self.n_per_axis
        idx = np.indices((n, n, n)).reshape(3, -1).T
        return idx * self.spacing

    @cached_property
    def kvecs(self) -> np.ndarray:
        """(M, 3) array of reciprocal vectors in the DFT convention."""
        n = self.n_per_axis
        per_axis = 2.0 * np.pi * np.fft.fftfreq(n, d=self.spacing)
        grids = np.meshgrid(per_axis, per_axis, per_axis, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    @cached_property
    def _phases(self) -> np.ndarray:
        # (M, M) matrix exp(i k . r) / sqrt(M); columns indexed by k
        ph = np.exp(1j * self.sites @ self.kvecs.T)
        return ph / np.sqrt(self.n_sites)

    def _assemble(self, blocks: np.ndarray) -> np.ndarray:
        """Assemble a position-space operator matrix from per-k 3x3 blocks."""
        ph = self._phases
        op = np.einsum("rk,kab,sk->rasb", ph, blocks, ph.conj(), optimize=True)
        return np.ascontiguousarray(op.reshape(self.dim, self.dim))

    @cached_property
    def _unit_k(self) -> np.ndarray:
        k = self.kvecs
        norms = np.linalg.norm(k, axis=1)
        safe = np.where(norms > 0, norms, 1.0)
        return k / safe[:, None]

    @cached_property
    def transverse_matrix(self) -> np.ndarray:
        """Orthogonal projector matrix onto the transverse subspace."""
        khat = self._unit_k
        blocks = np.eye(3)[None, :, :] - khat[:, :, None] * khat[:, None, :]
        zero = np.linalg.norm(self.kvecs, axis=1) == 0
        blocks[zero] = np.eye(3) if self.k0_transverse else np.zeros((3, 3))
        mat = self._assemble(blocks)
        # exact spectral construction is real symmetric
        return mat.real

    @cached_property
    def longitudinal_matrix(self) -> np.ndarray:
        return np.eye(self.dim) - self.transverse_matrix

    @cached_property
    def curl_matrix(self) -> np.ndarray:
        """Spectral curl acting on position-space vector fields (Hermitian)."""
        blocks = 1j * np.einsum("abc,kb->kac", _LEVI_CIVITA, self.kvecs)
        return self._assemble(blocks)

    @cached_property
    def double_curl_matrix(self) -> np.ndarray:
        """curl-of-curl operator, spectrally k^2 (1 - khat khat); real PSD."""
        k = self.kvecs
        ksq = np.einsum("ki,ki->k", k, k)
        khat = self._unit_k
        blocks = ksq[:, None, None] * (np.eye(3)[None] - khat[:, :, None] * khat[:, None, :])
        return self._assemble(blocks).real

    @cached_property
    def laplacian_matrix(self) -> np.ndarray:
        """Vector Laplacian, spectrally -k^2 on every component."""
        ksq = np.einsum("ki,ki->k", self.kvecs, self.kvecs)
        blocks = -ksq[:, None, None] * np.eye(3)[None]
        return self._assemble(blocks).real

    @cached_property
    def transverse_basis(self) -> np.ndarray:
        """Real orthonormal (3M, M_T) basis of the transverse subspace."""
        evals, evecs = np.linalg.eigh(self.transverse_matrix)
        cols = evecs[:, evals > 0.5]
        return np.ascontiguousarray(cols)

    def compatible(self, other: "Lattice") -> bool:
        return (
            self.n_per_axis == other.n_per_axis
            and self.spacing == other.spacing
            and self.k0_transverse == other.k0_transverse
        )


def build_lattice(n_per_axis: int, spacing: float, k0_transverse: bool = True) -> Lattice:
    """Construct a periodic lattice; rejects non-positive sizes."""
    return Lattice(n_per_axis=n_per_axis, spacing=spacing, k0_transverse=k0_transverse)


@dataclass(frozen=True, eq=False)
class TensorKernel:
    """Dense two-point, two-index complex kernel K_ij(r, r') on a lattice.

    The delta convention is ``delta(r - r') -> identity / cell_volume``, so
    `TensorKernel.identity` composes as a true unit element.
    """

    lattice: Lattice
    mat: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.mat, dtype=complex)
        if mat.shape != (self.lattice.dim, self.lattice.dim):
            raise DampolError(f"kernel shape {mat.shape} does not match lattice dim {self.lattice.dim}")
        if not np.all(np.isfinite(mat)):
            raise DampolError("kernel contains non-finite entries")
        object.__setattr__(self, "mat", mat)

    # -- algebra ---------------------------------------------------------

    def __matmul__(self, other: "TensorKernel") -> "TensorKernel":
        self._check(other)
        return TensorKernel(self.lattice, self.lattice.cell_volume * (self.mat @ other.mat))

    def __add__(self, other: "TensorKernel") -> "TensorKernel":
        self._check(other)
        return TensorKernel(self.lattice, self.mat + other.mat)

    def __sub__(self, other: "TensorKernel") -> "TensorKernel":
        self._check(other)
        return TensorKernel(self.lattice, self.mat - other.mat)

    def __mul__(self, scalar: complex) -> "TensorKernel":
        return TensorKernel(self.lattice, self.mat * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "TensorKernel":
        return TensorKernel(self.lattice, -self.mat)

    @property
    def T(self) -> "TensorKernel":
        """Full transpose: swaps the two (site, component) slots jointly."""
        return TensorKernel(self.lattice, self.mat.T)

    def conj(self) -> "TensorKernel":
        return TensorKernel(self.lattice, self.mat.conj())

    @property
    def H(self) -> "TensorKernel":
        return TensorKernel(self.lattice, self.mat.conj().T)

    def inv(self) -> "TensorKernel":
        """Kernel inverse: K o K.inv() = identity."""
        v = self.lattice.cell_volume
        return TensorKernel(self.lattice, np.linalg.inv(self.mat) / v**2)

    def norm(self) -> float:
        """Frobenius norm in kernel units (volume-weighted)."""
        return self.lattice.cell_volume * float(np.linalg.norm(self.mat))

    def trace(self) -> complex:
        return complex(np.trace(self.mat))

    def real_part(self) -> "TensorKernel":
        return TensorKernel(self.lattice, self.mat.real.astype(complex))

    def allclose(self, other: "TensorKernel", tol: float = 1e-12) -> bool:
        scale = max(self.norm(), other.norm(), 1e-300)
        return (self - other).norm() <= tol * scale

    def _check(self, other: "TensorKernel"):
        if not self.lattice.compatible(other.lattice):
            raise DampolError("kernels live on incompatible lattices")

    # -- constructors ----------------------------------------------------

    @classmethod
    def identity(cls, lattice: Lattice) -> "TensorKernel":
        return cls(lattice, np.eye(lattice.dim) / lattice.cell_volume)

    @classmethod
    def zero(cls, lattice: Lattice) -> "TensorKernel":
        return cls(lattice, np.zeros((lattice.dim, lattice.dim)))


def transverse_projector(lattice: Lattice) -> TensorKernel:
    """Transverse delta kernel; idempotent under kernel composition."""
    return TensorKernel(lattice, lattice.transverse_matrix / lattice.cell_volume)


def longitudinal_projector(lattice: Lattice) -> TensorKernel:
    """Longitudinal delta kernel, identity minus the transverse one."""
    return TensorKernel(lattice, lattice.longitudinal_matrix / lattice.cell_volume)


def curl_operator(lattice: Lattice) -> TensorKernel:
    return TensorKernel(lattice, lattice.curl_matrix / lattice.cell_volume)


def double_curl_operator(lattice: Lattice) -> TensorKernel:
    return TensorKernel(lattice, lattice.double_curl_matrix / lattice.cell_volume)


def laplacian_operator(lattice: Lattice) -> TensorKernel:
    return TensorKernel(lattice, lattice.laplacian_matrix / lattice.cell_volume)


def double_curl(kernel: TensorKernel, lattice: Lattice | None = None) -> TensorKernel:
    """Repeated left-acting curl on the primed (second) kernel argument.

    Annihilates kernels that are longitudinal in their second argument; on a
    transverse plane-wave kernel at mode k it multiplies by -k^2.
    """
    lat = lattice or kernel.lattice
    return TensorKernel(lat, -kernel.mat @ lat.double_curl_matrix)


def double_curl_left(kernel: TensorKernel, lattice: Lattice | None = None) -> TensorKernel:
    """Same operation applied to the unprimed (first) kernel argument."""
    lat = lattice or kernel.lattice
    return TensorKernel(lat, -lat.double_curl_matrix @ kernel.mat)


@dataclass(frozen=True)
class FrequencyGrid:
    """Quadrature nodes and weights on (0, omega_max) plus the cut offset eta.

    ``eta`` is the finite stand-in for the infinitesimal imaginary offset in
    resolvent denominators; every quantity computed with it records it.
    """

    nodes: np.ndarray
    weights: np.ndarray
    eta: float
    omega_max: float
    eta_factor: float | None = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape or nodes.size == 0:
            raise DampolError("nodes and weights must be matching non-empty 1-d arrays")
        if not np.all(np.diff(nodes) > 0):
            raise DampolError("nodes must be strictly increasing")
        if nodes[0] <= 0 or nodes[-1] >= self.omega_max:
            raise DampolError("nodes must lie strictly inside (0, omega_max)")
        if not np.all(weights > 0):
            raise DampolError("weights must be positive")
        if not np.isclose(weights.sum(), self.omega_max, rtol=1e-6):
            raise DampolError("weights must sum to omega_max")
        if self.eta < 0:
            raise DampolError("eta must be non-negative")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def midpoint(cls, n_nodes: int, omega_max: float, eta_factor: float = 2.0) -> "FrequencyGrid":
        """Uniform midpoint rule with eta tied to the node spacing."""
        if n_nodes < 1:
            raise DampolError("n_nodes must be at least 1")
        if omega_max <= 0:
            raise DampolError("omega_max must be positive")
        step = omega_max / n_nodes
        nodes = (np.arange(n_nodes) + 0.5) * step
        weights = np.full(n_nodes, step)
        return cls(nodes=nodes, weights=weights, eta=eta_factor * step,
                   omega_max=omega_max, eta_factor=eta_factor)

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def spacing(self) -> float:
        return float(np.min(np.diff(self.nodes))) if self.n_nodes > 1 else self.omega_max

    def refined(self, factor: int = 2) -> "FrequencyGrid":
        """Same cutoff with `factor` times the nodes and eta reduced alike."""
        if self.eta_factor is None:
            raise DampolError("refined() requires a grid built by FrequencyGrid.midpoint")
        return FrequencyGrid.midpoint(self.n_nodes * factor, self.omega_max, self.eta_factor)

    def delta_weight(self, k: int) -> float:
        """Discrete frequency delta at coincident nodes: 1 / w_k."""
        return 1.0 / float(self.weights[k])
