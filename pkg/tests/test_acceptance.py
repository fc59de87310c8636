"""Acceptance suite: every shipped criterion at its stated tolerance.

Each criterion prints one PASS line when it holds; failures raise with the
offending numbers.  The refinement tracks are computed once per session and
shared across criteria.
"""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from dampol.constants import HBAR
from dampol.bath import (
    bath_coefficients,
    hamiltonian_equivalence,
    verify_bath_canonical,
    verify_bath_independence,
)
from dampol.coupling import (
    CouplingTensor,
    builtin_model,
    coupling_from_lagrangian,
    pernode_reality_residual,
    random_coupling,
    structure_tensor,
)
from dampol.diagonalize import fano_residual, mode_coefficients, streamed_mode_checks
from dampol.fields import (
    commutator,
    field_form,
    medium_momentum_form,
    medium_polarization_form,
    noise_commutator_expected,
    noise_mode_form,
)
from dampol.green import (
    solve_green,
    sweep_at_nodes,
    verify_adjoint,
    verify_conjugation,
    verify_reciprocity,
)
from dampol.lattice import (
    FrequencyGrid,
    TensorKernel,
    build_lattice,
    longitudinal_projector,
)
from dampol.oracle import assemble_hamiltonian, diagonal_form_check
from dampol.susceptibility import (
    Susceptibility,
    asymptote_residual,
    chi_at,
    verify_kramers_kronig,
    verify_sum_rules,
)

OMEGA_MAX = 3.0
ETA_FACTOR = 1.0
LINE = {"resonance": 1.5, "width": 0.6, "strength": 1.0}
MODELS = {
    "local_lorentz": dict(LINE),
    "uniaxial_local": dict(LINE, axis="z", ratio=2.0),
    "gaussian_nonlocal": dict(LINE, corr_length=0.35),
}
CONVERGENCE_FACTOR = 1.8
CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

LATTICE = build_lattice(2, 1.0)


def make_coupling(name, n_nodes):
    grid = FrequencyGrid.midpoint(n_nodes, OMEGA_MAX, eta_factor=ETA_FACTOR)
    return coupling_from_lagrangian(builtin_model(name, LATTICE, grid, dict(MODELS[name])))


def announce(criterion, label, ok=True):
    print(f"ACCEPT-{criterion} {label}: {'PASS' if ok else 'FAIL'}")


@pytest.fixture(scope="module")
def refinement_data():
    """Residual sequences for every convergence-class check, three models.

    Tracks (levels double the node count and halve the offset together):
      * kernel identities and bath independence, streamed:  24 / 48 / 96
      * commutator deviations, streamed deep:  64 / 128 / 256
      * assembled-Hamiltonian checks:  8 / 16 / 32
    """
    data = {}
    for name in MODELS:
        seq = {k: [] for k in ("wave", "resonant", "antiresonant",
                               "bath_polarization", "bath_momentum")}
        for K in (24, 48, 96):
            coupling = make_coupling(name, K)
            st = structure_tensor(coupling)
            chi = Susceptibility(coupling)
            sweep = sweep_at_nodes(chi, side=-1)
            sc = streamed_mode_checks(coupling, sweep, st)
            seq["wave"].append(sc.wave)
            seq["resonant"].append(max(sc.resonant.values()))
            seq["antiresonant"].append(max(sc.antiresonant.values()))
            indep = verify_bath_independence(bath_coefficients(coupling, chi), coupling, st)
            seq["bath_polarization"].append(indep["polarization"])
            seq["bath_momentum"].append(indep["momentum"])
        seq.update({"commutation": [], "annihilator": []})
        for K in (64, 128, 256):
            coupling = make_coupling(name, K)
            st = structure_tensor(coupling)
            sweep = sweep_at_nodes(Susceptibility(coupling), side=-1)
            sc = streamed_mode_checks(coupling, sweep, st, commutation_only=True)
            seq["commutation"].append(max(sc.commutation.values()))
            seq["annihilator"].append(max(sc.annihilator.values()))
        seq.update({"equivalence": [], "master": [], "fano_peak": []})
        for K in (8, 16, 32):
            coupling = make_coupling(name, K)
            st = structure_tensor(coupling)
            chi = Susceptibility(coupling)
            sweep = sweep_at_nodes(chi, side=-1)
            modes = mode_coefficients(coupling, sweep)
            ham = assemble_hamiltonian(coupling, st)
            bath = bath_coefficients(coupling, chi)
            seq["equivalence"].append(
                hamiltonian_equivalence(coupling, st, bath, ham, chi)["weak"])
            seq["master"].append(diagonal_form_check(ham, modes))
            seq["fano_peak"].append(fano_residual(modes, coupling, st).max_residual())
        data[name] = seq
    return data


class TestCriterion1ExactIdentities:
    """Discrete identities that close at machine precision."""

    TOL = 1e-10

    @pytest.mark.parametrize("name", sorted(MODELS))
    def test_builtin_models(self, name):
        coupling = make_coupling(name, 12)
        st = structure_tensor(coupling)
        self._assert_exact(coupling, st)

    def test_random_lagrangian(self):
        grid = FrequencyGrid.midpoint(10, OMEGA_MAX, eta_factor=ETA_FACTOR)
        rng = np.random.default_rng(2024)
        coupling = coupling_from_lagrangian(
            random_coupling(LATTICE, grid, rng, diag_weight=3.0))
        st = structure_tensor(coupling)
        self._assert_exact(coupling, st)
        announce(1, "exact-identities")

    def _assert_exact(self, coupling, st):
        grid = coupling.grid
        # noise-polarization commutator against the cut discontinuity
        for k in (0, grid.n_nodes // 2, grid.n_nodes - 1):
            pn = noise_mode_form(coupling, k)
            got = commutator(pn, pn.dagger())
            expected = noise_commutator_expected(coupling, k)
            assert (got - expected).norm() <= self.TOL * expected.norm()
        # cut representation of the susceptibility
        rng = np.random.default_rng(7)
        for _ in range(4):
            z = complex(rng.uniform(-3, 3), rng.choice([-1, 1]) * rng.uniform(0.2, 1.5))
            assert verify_kramers_kronig(coupling, z) <= self.TOL
        # sum rules
        rules = verify_sum_rules(coupling, st)
        assert rules.max_residual() <= self.TOL
        # per-node reality of the spectral density
        assert pernode_reality_residual(coupling) <= self.TOL
        # canonical bath identity
        bath = bath_coefficients(coupling, Susceptibility(coupling))
        assert verify_bath_canonical(bath, coupling) <= self.TOL
        # canonical matter pair
        w_form = medium_momentum_form(coupling, st)
        p_form = medium_polarization_form(coupling)
        ident = TensorKernel.identity(coupling.lattice)
        scale = HBAR * ident.norm()
        assert (commutator(w_form, p_form) - (-1j * HBAR) * ident).norm() <= self.TOL * scale
        assert commutator(p_form, p_form).norm() <= self.TOL * scale
        assert commutator(w_form, w_form).norm() <= self.TOL * scale


class TestCriterion2GreenSuite:
    def test_random_draws(self):
        rng = np.random.default_rng(2025)
        draws = 0
        worst = {"defining": 0.0, "adjoint": 0.0, "reciprocity": 0.0, "conjugation": 0.0}
        while draws < 20:
            name = rng.choice(sorted(MODELS))
            coupling = make_coupling(name, int(rng.integers(8, 14)))
            chi = Susceptibility(coupling)
            z = complex(rng.uniform(0.1, 0.95) * OMEGA_MAX,
                        rng.choice([-1, 1]) * rng.uniform(0.3, 3.0) * coupling.grid.eta)
            g = solve_green(chi, z)
            worst["defining"] = max(worst["defining"], g.residual)
            worst["adjoint"] = max(worst["adjoint"], verify_adjoint(g))
            worst["reciprocity"] = max(worst["reciprocity"], verify_reciprocity(chi, z))
            worst["conjugation"] = max(worst["conjugation"], verify_conjugation(chi, z))
            draws += 1
        assert worst["defining"] <= 1e-10
        assert worst["adjoint"] <= 1e-9
        assert worst["reciprocity"] <= 1e-9
        assert worst["conjugation"] <= 1e-9

    def test_vacuum_closed_forms(self):
        grid = FrequencyGrid.midpoint(4, OMEGA_MAX)
        chi = Susceptibility(CouplingTensor.zero(LATTICE, grid))
        z = 1.1 - 0.6j
        g = solve_green(chi, z)
        pl = longitudinal_projector(LATTICE)
        assert ((g.kernel @ pl) - (1.0 / z**2) * pl).norm() <= 1e-12 * pl.norm()
        # transverse Fourier blocks
        for kidx in range(1, LATTICE.n_sites):
            kvec = LATTICE.kvecs[kidx]
            ksq = kvec @ kvec
            phase = np.exp(1j * (LATTICE.sites @ kvec))
            pol = np.array([kvec[1], -kvec[0], 0.0])
            if np.linalg.norm(pol) < 1e-12:
                pol = np.array([0.0, kvec[2], -kvec[1]])
            pol /= np.linalg.norm(pol)
            vec = (phase[:, None] * pol[None, :]).ravel()
            out = LATTICE.cell_volume * g.kernel.mat @ vec
            assert np.linalg.norm(out - vec / (z**2 - ksq)) <= 1e-12 * np.linalg.norm(vec)
        announce(2, "green-function-suite")


class TestCriterion3Convergence:
    @pytest.mark.parametrize("name", sorted(MODELS))
    def test_residuals_fall_fast_enough(self, refinement_data, name):
        seq = refinement_data[name]
        for check, values in seq.items():
            if check == "fano_peak":
                continue
            ratios = [a / b for a, b in zip(values[:-1], values[1:])]
            assert min(ratios) >= CONVERGENCE_FACTOR, (
                f"{name}/{check}: residuals {values} give ratios {ratios}")
        if name == sorted(MODELS)[-1]:
            announce(3, "regularized-identity-convergence")


class TestCriterion4OracleCrossValidation:
    def test_master_check_tracks_kernel_route(self, refinement_data):
        for name, seq in refinement_data.items():
            for master, peak in zip(seq["master"], seq["fano_peak"]):
                assert master <= 3.0 * peak, (name, master, peak)
                assert master >= peak / 3.0, (name, master, peak)
        announce(4, "oracle-cross-validation")


class TestCriterion5MaxwellConstitutive:
    @pytest.mark.parametrize("name", sorted(MODELS))
    def test_residuals_bounded_by_solver(self, name):
        coupling = make_coupling(name, 12)
        chi = Susceptibility(coupling)
        sweep = sweep_at_nodes(chi, side=-1)
        forms = {k: field_form(k, coupling, sweep) for k in ("B", "D", "P", "E", "Pn")}
        lattice = coupling.lattice
        curl = lattice.curl_matrix
        for l in range(coupling.grid.n_nodes):
            bound = 10.0 * sweep[l].residual
            lhs = curl @ forms["B"].alpha[l]
            rhs = -1j * coupling.grid.nodes[l] * forms["D"].alpha[l]
            mx = np.linalg.norm(lhs - rhs) / max(np.linalg.norm(lhs), 1e-300)
            assert mx <= bound, f"maxwell node {l}: {mx} > {bound}"
            chi_up = chi.at(coupling.grid.nodes[l] + 1j * chi.eta)
            pred = lattice.cell_volume * chi_up.mat @ forms["E"].alpha[l] + forms["Pn"].alpha[l]
            cn = np.linalg.norm(forms["P"].alpha[l] - pred) \
                / max(np.linalg.norm(forms["P"].alpha[l]), 1e-300)
            assert cn <= bound, f"constitutive node {l}: {cn} > {bound}"
        if name == sorted(MODELS)[-1]:
            announce(5, "maxwell-and-constitutive")


class TestCriterion6Structural:
    @pytest.mark.parametrize("name", sorted(MODELS))
    def test_structure_positive_definite(self, name):
        coupling = make_coupling(name, 12)
        st = structure_tensor(coupling)
        assert np.linalg.eigvalsh(st.kernel.mat)[0] > 0

    def test_displacement_transverse(self):
        coupling = make_coupling("local_lorentz", 12)
        sweep = sweep_at_nodes(Susceptibility(coupling), side=-1)
        d_form = field_form("D", coupling, sweep)
        long_part = LATTICE.longitudinal_matrix[None] @ d_form.alpha
        assert np.linalg.norm(long_part) <= 1e-12 * np.linalg.norm(d_form.alpha)

    def test_susceptibility_symmetries(self):
        coupling = make_coupling("uniaxial_local", 12)
        rng = np.random.default_rng(11)
        for _ in range(6):
            z = complex(rng.uniform(-2.5, 2.5), rng.choice([-1, 1]) * rng.uniform(0.2, 1.4))
            here = chi_at(coupling, z)
            scale = max(here.norm(), 1e-300)
            assert (here.T - chi_at(coupling, -z)).norm() <= 1e-10 * scale
            assert (here.conj() - chi_at(coupling, -np.conj(z))).norm() <= 1e-10 * scale

    def test_asymptote_quartic_decay(self):
        for name in MODELS:
            coupling = make_coupling(name, 12)
            st = structure_tensor(coupling)
            z = 50.0 * OMEGA_MAX * 1j
            ratio = asymptote_residual(coupling, st, z) / asymptote_residual(coupling, st, 2 * z)
            assert ratio == pytest.approx(16.0, rel=0.3), name
        announce(6, "structural-assertions")


class TestCriterion7CliContract:
    def run_cli(self, *args):
        return subprocess.run([sys.executable, "-m", "dampol.cli", *args],
                              capture_output=True, text=True)

    @pytest.mark.parametrize("config", ["lorentz.ini", "uniaxial.ini", "gaussian.ini"])
    def test_verify_all_passes(self, tmp_path, config):
        proc = self.run_cli("verify-all", "--config", str(CONFIG_DIR / config),
                            "--out", str(tmp_path / "out"))
        assert proc.returncode == 0, proc.stderr

    def test_determinism(self, tmp_path):
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            proc = self.run_cli("chi", "--config", str(CONFIG_DIR / "lorentz.ini"),
                                "--out", str(out))
            assert proc.returncode == 0
            outs.append({p.name: p.read_bytes() for p in out.iterdir()})
        assert outs[0] == outs[1]

    def test_chi_violator_exits_one_with_flag(self, tmp_path):
        out = tmp_path / "v"
        proc = self.run_cli("green", "--config", str(CONFIG_DIR / "violator_chi.ini"),
                            "--out", str(out))
        assert proc.returncode == 1
        rep = json.loads((out / "green.json").read_text())
        failed = {c["check_id"] for c in rep["checks"] if not c["passed"]}
        assert "green.adjoint_residual" in failed

    def test_bath_violator_exits_one_with_flag(self, tmp_path):
        out = tmp_path / "v"
        proc = self.run_cli("bath", "--config", str(CONFIG_DIR / "violator_bath.ini"),
                            "--out", str(out))
        assert proc.returncode == 1
        rep = json.loads((out / "bath.json").read_text())
        failed = {c["check_id"] for c in rep["checks"] if not c["passed"]}
        assert "bath.canonical_identity" in failed
        announce(7, "cli-contract")
