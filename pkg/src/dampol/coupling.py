"""Medium coupling tensors: construction, constraint checks, model library.

The frequency-indexed coupling tensor T(r, r', w) is the single free input
of the model.  Couplings are generated through the Lagrangian route (a real
coefficient tensor plus a unitary gauge per node), which makes the canonical
pair constraints hold per node at machine precision instead of merely to
quadrature accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .constants import HBAR
from .errors import DampolError, DegenerateCouplingError, ModelError
from .lattice import FrequencyGrid, Lattice, TensorKernel

#: relative tolerance used by default for the canonical-pair constraints
DEFAULT_TOL_CONSTRAINT = 1e-10

#: relative imaginary residue allowed when extracting the structure tensor
IMAG_RESIDUE_TOL = 1e-12

#: singular-value ratio below which an operator counts as non-invertible
INVERTIBILITY_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class RealCoupling:
    """Lagrangian-route input: real coefficient kernels plus a unitary gauge.

    `t0` and `unitary` are stacks of shape (K, 3M, 3M), one kernel per
    frequency node.
    """

    lattice: Lattice
    grid: FrequencyGrid
    t0: np.ndarray
    unitary: np.ndarray

    def __post_init__(self):
        t0 = np.asarray(self.t0, dtype=float)
        uni = np.asarray(self.unitary, dtype=complex)
        shape = (self.grid.n_nodes, self.lattice.dim, self.lattice.dim)
        if t0.shape != shape or uni.shape != shape:
            raise DampolError(f"coupling stacks must have shape {shape}")
        v = self.lattice.cell_volume
        # kernel unitarity: Utilde o U* = delta  <=>  v^2 U^T conj(U) = 1
        gram = v**2 * np.einsum("kji,kjl->kil", uni, uni.conj())
        if not np.allclose(gram, np.eye(self.lattice.dim), atol=1e-10):
            raise DampolError("unitary gauge kernels are not unitary")
        object.__setattr__(self, "t0", t0)
        object.__setattr__(self, "unitary", uni)

    @classmethod
    def identity_gauge(cls, lattice: Lattice, grid: FrequencyGrid, t0: np.ndarray) -> "RealCoupling":
        ident = np.eye(lattice.dim) / lattice.cell_volume
        uni = np.broadcast_to(ident, (grid.n_nodes, lattice.dim, lattice.dim)).astype(complex)
        return cls(lattice=lattice, grid=grid, t0=t0, unitary=uni.copy())


@dataclass(frozen=True, eq=False)
class CouplingTensor:
    """Coupling kernels T(w_k) stacked over the frequency grid."""

    lattice: Lattice
    grid: FrequencyGrid
    kernels: np.ndarray  # (K, 3M, 3M) complex

    def __post_init__(self):
        kern = np.asarray(self.kernels, dtype=complex)
        shape = (self.grid.n_nodes, self.lattice.dim, self.lattice.dim)
        if kern.shape != shape:
            raise DampolError(f"coupling kernel stack must have shape {shape}")
        if not np.all(np.isfinite(kern)):
            raise DampolError("coupling kernels contain non-finite entries")
        object.__setattr__(self, "kernels", kern)

    @classmethod
    def zero(cls, lattice: Lattice, grid: FrequencyGrid) -> "CouplingTensor":
        return cls(lattice, grid, np.zeros((grid.n_nodes, lattice.dim, lattice.dim), dtype=complex))

    def kernel(self, k: int) -> TensorKernel:
        return TensorKernel(self.lattice, self.kernels[k])

    @cached_property
    def density_stack(self) -> np.ndarray:
        """Per-node spectral densities Ttilde o T*, shape (K, 3M, 3M).

        These positive-semidefinite kernels carry the dissipative content of
        the medium; the cut discontinuity of the susceptibility is
        proportional to them.
        """
        v = self.lattice.cell_volume
        return v * np.einsum("kji,kjl->kil", self.kernels, self.kernels.conj())

    def spectral_density(self, k: int) -> TensorKernel:
        return TensorKernel(self.lattice, self.density_stack[k])

    def is_zero(self) -> bool:
        return not np.any(self.kernels)

    def node_invertible(self, k: int, rtol: float = INVERTIBILITY_RTOL) -> bool:
        sv = np.linalg.svd(self.kernels[k], compute_uv=False)
        return sv[-1] > rtol * sv[0]


@dataclass(frozen=True)
class ConstraintReport:
    """Residuals of the two canonical-pair constraints on the coupling.

    `moment0` is the zeroth frequency moment of the imaginary part of the
    spectral density (it must vanish for the polarization components to
    commute); `moment2` is the second moment (momentum components).
    """

    moment0: float
    moment2: float
    scale: float
    tol: float

    @property
    def moment0_pass(self) -> bool:
        return self.moment0 <= self.tol * self.scale

    @property
    def moment2_pass(self) -> bool:
        return self.moment2 <= self.tol * self.scale

    @property
    def passed(self) -> bool:
        return self.moment0_pass and self.moment2_pass


def check_constraints(coupling: CouplingTensor, tol: float = DEFAULT_TOL_CONSTRAINT) -> ConstraintReport:
    """Evaluate both coupling constraints under the grid quadrature (report only)."""
    w = coupling.grid.weights
    nodes = coupling.grid.nodes
    dens = coupling.density_stack
    v = coupling.lattice.cell_volume
    imbalance = dens - dens.conj()
    m0 = v * np.linalg.norm(np.einsum("k,kij->ij", w, imbalance))
    m2 = v * np.linalg.norm(np.einsum("k,kij->ij", w * nodes**2, imbalance))
    scale = v * float(np.einsum("k,k->", w, np.linalg.norm(dens, axis=(1, 2))))
    if scale == 0.0:
        scale = 1.0
    return ConstraintReport(moment0=float(m0), moment2=float(m2), scale=scale, tol=tol)


def pernode_reality_residual(coupling: CouplingTensor) -> float:
    """Largest per-node imaginary part of the spectral density, relative.

    Lagrangian-built couplings satisfy this stronger per-node condition at
    machine precision, which implies both quadrature constraints.
    """
    dens = coupling.density_stack
    num = np.linalg.norm(dens.imag, axis=(1, 2))
    den = np.maximum(np.linalg.norm(dens, axis=(1, 2)), 1e-300)
    return float(np.max(num / den))


def coupling_from_lagrangian(t0: RealCoupling, grid: FrequencyGrid | None = None,
                             tol: float = DEFAULT_TOL_CONSTRAINT) -> CouplingTensor:
    """Build the coupling tensor from real coefficients and a unitary gauge.

    Per node, T(w) = -(2 hbar w)^(-1/2) U(w) o T0(w).  The resulting
    spectral density is real node by node, so the quadrature constraints
    hold automatically; residuals above `tol` signal corrupted inputs.
    """
    grid = grid or t0.grid
    v = t0.lattice.cell_volume
    pref = -((2.0 * HBAR * grid.nodes) ** -0.5)
    kernels = pref[:, None, None] * v * np.einsum("kij,kjl->kil", t0.unitary, t0.t0)
    coupling = CouplingTensor(t0.lattice, grid, kernels)
    report = check_constraints(coupling, tol=tol)
    if not report.passed:
        raise DampolError(
            f"constraint residuals {report.moment0:.3e}/{report.moment2:.3e} "
            f"exceed tolerance; quadrature or gauge input is inconsistent")
    return coupling


@dataclass(frozen=True, eq=False)
class StructureTensor:
    """Real positive-definite kernel mediating the field-medium coupling."""

    kernel: TensorKernel
    source: CouplingTensor

    @cached_property
    def inverse(self) -> TensorKernel:
        return self.kernel.inv()


def structure_tensor(coupling: CouplingTensor, imag_tol: float = IMAG_RESIDUE_TOL) -> StructureTensor:
    """First frequency moment of the symmetrized spectral density.

    Fails loudly if the imaginary residue is above `imag_tol` (relative) or
    if the resulting Hermitian form is not positive-definite; a degenerate
    structure tensor has no inverse and the canonical momentum density is
    then undefined.
    """
    grid = coupling.grid
    dens = coupling.density_stack
    raw = np.einsum("k,kij->ij", grid.weights * grid.nodes, dens + dens.conj())
    scale = np.linalg.norm(raw)
    if scale > 0 and np.linalg.norm(raw.imag) > imag_tol * scale:
        raise DegenerateCouplingError(
            f"structure tensor has imaginary residue {np.linalg.norm(raw.imag) / scale:.3e}")
    mat = raw.real
    evals = np.linalg.eigvalsh((mat + mat.T) / 2.0)
    if evals.size and evals[0] <= 1e-12 * max(abs(evals[-1]), 1e-300):
        raise DegenerateCouplingError(
            f"structure tensor not positive-definite (min eigenvalue {evals[0]:.3e})")
    return StructureTensor(kernel=TensorKernel(coupling.lattice, mat), source=coupling)


def momentum_kernel(coupling: CouplingTensor, structure: StructureTensor) -> list[TensorKernel]:
    """Per-node kernels -w T(w) o F^-1 entering the canonical momentum density."""
    finv = structure.inverse
    out = []
    for k, w in enumerate(coupling.grid.nodes):
        out.append(-w * (coupling.kernel(k) @ finv))
    return out


# -- model library -------------------------------------------------------

_MODEL_NAMES = ("local_lorentz", "uniaxial_local", "gaussian_nonlocal")


def _line_shape(nodes: np.ndarray, omega_max: float, resonance: float, width: float,
                strength: float) -> np.ndarray:
    """Square root of a windowed single-resonance Lorentzian profile.

    The smooth window (x(1-x))^2 vanishes quadratically at both grid edges.
    At the lower edge this keeps the coupling bounded against the static
    1/z^2 pole of the propagator; at the cutoff it avoids truncating a
    finite spectral weight.  Both matter for the regularized identities to
    converge at first order in the node spacing.
    """
    x = nodes / omega_max
    window = 16.0 * (x * (1.0 - x)) ** 2
    lor = (width / np.pi) / ((nodes - resonance) ** 2 + width**2)
    return strength * window * np.sqrt(lor)


def _min_image_sq_dist(lattice: Lattice) -> np.ndarray:
    """(M, M) squared minimum-image distances on the periodic lattice."""
    period = lattice.n_per_axis * lattice.spacing
    diff = np.abs(lattice.sites[:, None, :] - lattice.sites[None, :, :])
    diff = np.minimum(diff, period - diff)
    return np.einsum("ijk,ijk->ij", diff, diff)


def builtin_model(name: str, lattice: Lattice, grid: FrequencyGrid, params: dict | None = None) -> RealCoupling:
    """Construct one of the shipped medium models as a Lagrangian coupling.

    Models:

    * ``local_lorentz``     isotropic, on-site, single-resonance line shape;
    * ``uniaxial_local``    like the above with a distinct strength along one axis;
    * ``gaussian_nonlocal`` spatial kernel exp(-|r-r'|^2 / 2 l^2), genuine
      spatial dispersion with correlation length ``l``.

    Shared parameters (defaults relative to the grid cutoff): ``resonance``,
    ``width``, ``strength``.  ``uniaxial_local`` adds ``axis`` and ``ratio``;
    ``gaussian_nonlocal`` adds ``corr_length``.
    """
    params = dict(params or {})
    if name not in _MODEL_NAMES:
        raise ModelError(f"unknown model {name!r}; expected one of {_MODEL_NAMES}")
    resonance = float(params.pop("resonance", 0.5 * grid.omega_max))
    width = float(params.pop("width", 0.2 * grid.omega_max))
    strength = float(params.pop("strength", 1.0))
    if width <= 0 or strength < 0 or not (0 < resonance < grid.omega_max):
        raise ModelError("line-shape parameters out of range")
    tau = _line_shape(grid.nodes, grid.omega_max, resonance, width, strength)

    v = lattice.cell_volume
    d = lattice.dim
    if name == "local_lorentz":
        if params:
            raise ModelError(f"unexpected parameters {sorted(params)} for local_lorentz")
        base = np.eye(d) / v
    elif name == "uniaxial_local":
        axis = str(params.pop("axis", "z"))
        ratio = float(params.pop("ratio", 2.0))
        if params:
            raise ModelError(f"unexpected parameters {sorted(params)} for uniaxial_local")
        if axis not in ("x", "y", "z") or ratio <= 0:
            raise ModelError("uniaxial axis must be x/y/z with positive ratio")
        scale = np.ones(3)
        scale["xyz".index(axis)] = ratio
        base = np.kron(np.eye(lattice.n_sites), np.diag(scale)) / v
    else:  # gaussian_nonlocal
        corr = float(params.pop("corr_length", 0.75 * lattice.spacing))
        if params:
            raise ModelError(f"unexpected parameters {sorted(params)} for gaussian_nonlocal")
        if corr <= 0:
            raise ModelError("corr_length must be positive")
        site_kernel = np.exp(-_min_image_sq_dist(lattice) / (2.0 * corr**2))
        base = np.kron(site_kernel, np.eye(3)) / v

    t0 = tau[:, None, None] * base[None, :, :]
    return RealCoupling.identity_gauge(lattice, grid, t0)


def random_coupling(lattice: Lattice, grid: FrequencyGrid, rng: np.random.Generator,
                    scale: float = 0.5, envelope: bool = True,
                    diag_weight: float = 0.0) -> RealCoupling:
    """Random Lagrangian coupling: i.i.d. real coefficients, random gauge.

    Used by identity tests and the random draws of the verification suite;
    an optional smooth envelope keeps the spectral weight away from the
    grid edges.  `diag_weight` adds that multiple of the identity to the
    raw coefficients, which keeps the per-node kernels well conditioned for
    checks that invert them.
    """
    d = lattice.dim
    v = lattice.cell_volume
    K = grid.n_nodes
    amp = scale / v
    if envelope:
        x = grid.nodes / grid.omega_max
        amp = amp * np.sqrt(np.clip(np.sin(np.pi * x), 0.0, None))
    else:
        amp = np.full(K, amp)
    t0 = amp[:, None, None] * (rng.standard_normal((K, d, d))
                               + diag_weight * np.eye(d)[None])
    unitaries = np.empty((K, d, d), dtype=complex)
    for k in range(K):
        q, r = np.linalg.qr(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
        unitaries[k] = q * (np.diagonal(r) / np.abs(np.diagonal(r)))[None, :]
    return RealCoupling(lattice=lattice, grid=grid, t0=t0, unitary=unitaries / v)
