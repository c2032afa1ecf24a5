"""Generator assembly: kernel-formula route, cumulant route, equivalence."""

import math

import numpy as np
import pytest

import tclgen.tcl
from tclgen.algebra import SuperOp, SystemModel
from tclgen.bath import BathSpec
from tclgen.quadrature import QuadratureSpec
from tclgen.tcl import (
    EquivalenceError,
    K2_influence,
    K4_cumulant_ordered,
    K4_influence,
    K4_TERM_TABLE,
    _k4_ordered_pieces,
    build_generator,
    format_k4_table,
)
from tclgen.cumulant import K_n_cumulant

SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)

GL8 = QuadratureSpec("gauss-legendre-nested", 8, 1e-8)
GL16 = QuadratureSpec("gauss-legendre-nested", 16, 1e-8)

SPIN_BOSON = SystemModel(2, 0.5 * SZ, SX, 0.3)
DEPHASING = SystemModel(2, 0.5 * SZ, SZ, 0.3)
BATH = BathSpec(modes=[(1.0, 1.0, 1.0)], beta=1.0)


def random_model(rng, d, alpha=0.1):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = (a + a.conj().T) / 2.0
    b = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    x = (b + b.conj().T) / 2.0
    return SystemModel(d, h, x, alpha)


# --- zero-time values -------------------------------------------------------------


def test_generators_vanish_at_time_zero():
    assert K2_influence(SPIN_BOSON, BATH, 0.0, GL8).norm_fro() == 0.0
    assert K4_influence(SPIN_BOSON, BATH, 0.0, GL8).norm_fro() == 0.0
    assert K4_cumulant_ordered(SPIN_BOSON, BATH, 0.0, GL8).norm_fro() == 0.0


# --- closed-form structure for a commuting coupling ---------------------------------


def test_pure_decoherence_second_order_matrix():
    # H and X commute: populations are untouched and both coherence columns
    # decay at the rate 2 * int_0^t D1 = 2 coth(beta/2) sin(t) for the unit
    # mode, with no contribution from the dissipation kernel.
    t = 1.3
    k2 = K2_influence(DEPHASING, BATH, t, GL16).matrix
    rate = -2.0 / math.tanh(0.5) * math.sin(t)
    expected = np.zeros((4, 4), dtype=complex)
    expected[1, 1] = rate
    expected[2, 2] = rate
    assert np.max(np.abs(k2 - expected)) < 1e-12


def test_pure_decoherence_fourth_order_vanishes():
    k4 = K4_influence(DEPHASING, BATH, 1.0, GL16)
    assert k4.norm_fro() < 1e-9


def test_pure_decoherence_order4_generator_equals_order2():
    g2 = build_generator(DEPHASING, BATH, 2, GL16, 1.5, n_cache=7)
    g4 = build_generator(DEPHASING, BATH, 4, GL16, 1.5, n_cache=7)
    for t in (0.5, 1.0, 1.5):
        diff = np.max(np.abs(g2(t).matrix - g4(t).matrix))
        assert diff < 1e-9


# --- cross-route agreement -----------------------------------------------------------


def test_second_order_routes_agree():
    rng = np.random.default_rng(30)
    for d in (2, 3):
        model = random_model(rng, d)
        direct = K2_influence(model, BATH, 1.2, GL8).matrix
        cumulant = K_n_cumulant(model, BATH, 1.2, 2, GL8).matrix
        scale = max(np.linalg.norm(direct), 1e-300)
        assert np.linalg.norm(direct - cumulant) / scale < 1e-12


@pytest.mark.parametrize(
    "d,modes,beta,npu",
    [
        (2, [(1.0, 1.0, 1.0)], 1.0, 8),
        (2, [(1.0, 1.0, 1.0), (0.6, 1.7, 1.0)], 2.5, 8),
        (3, [(1.0, 1.0, 1.0)], math.inf, 12),
        (3, [(0.8, 1.3, 0.7)], 1.0, 12),
    ],
)
def test_fourth_order_routes_agree(d, modes, beta, npu):
    # Random 3-level spectra produce Bohr frequencies near 5, which need a
    # denser Gauss rule before the product-form route converges.
    rng = np.random.default_rng(d * 7 + len(modes))
    model = random_model(rng, d)
    bath = BathSpec(modes=modes, beta=beta)
    quad = QuadratureSpec("gauss-legendre-nested", npu, 1e-8)
    table = K4_influence(model, bath, 1.0, quad).matrix
    cumulant = K4_cumulant_ordered(model, bath, 1.0, quad).matrix
    scale = max(np.linalg.norm(table), np.linalg.norm(cumulant), 1e-300)
    assert np.linalg.norm(table - cumulant) / scale < 1e-10


def test_ordered_and_unordered_pieces_agree():
    ordered, unordered = _k4_ordered_pieces(SPIN_BOSON, BATH, 1.0, GL16)
    scale = max(np.linalg.norm(ordered), 1e-300)
    assert np.linalg.norm(ordered - unordered) / scale < 1e-8


def test_equivalence_tripwire_fires(monkeypatch):
    original = K_n_cumulant

    def perturbed(model, bath, t, n, quad):
        out = original(model, bath, t, n, quad)
        return SuperOp(out.dim, out.matrix + 1e-3 * np.eye(out.dim**2))

    monkeypatch.setattr(tclgen.tcl, "K_n_cumulant", perturbed)
    with pytest.raises(EquivalenceError, match="disagree"):
        K4_cumulant_ordered(SPIN_BOSON, BATH, 1.0, GL8)


def test_equivalence_error_is_a_runtime_error():
    assert issubclass(EquivalenceError, RuntimeError)


# --- scaling in time and coupling ------------------------------------------------------


def test_short_time_growth_exponents():
    # K2 opens linearly; the fourth-order table cancels at coincident times,
    # so K4 opens one power above the simplex volume, as t^4.
    ts = [1e-3, 1e-2, 1e-1]
    n2 = [K2_influence(SPIN_BOSON, BATH, t, GL16).norm_fro() for t in ts]
    n4 = [K4_influence(SPIN_BOSON, BATH, t, GL16).norm_fro() for t in ts]
    slope2 = np.polyfit(np.log(ts), np.log(n2), 1)[0]
    slope4 = np.polyfit(np.log(ts), np.log(n4), 1)[0]
    assert 0.9 < slope2 < 1.1
    assert 3.7 < slope4 < 4.3


def test_generator_preserves_trace_and_hermiticity():
    rng = np.random.default_rng(31)
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    rho = (a + a.conj().T) / 2.0
    for op in (K2_influence(SPIN_BOSON, BATH, 0.9, GL16), K4_influence(SPIN_BOSON, BATH, 0.9, GL16)):
        out = op.apply(rho)
        assert abs(np.trace(out)) < 1e-12
        assert np.max(np.abs(out - out.conj().T)) < 1e-12


# --- term table display ------------------------------------------------------------------


def test_term_table_shape():
    assert len(K4_TERM_TABLE) == 16
    coeffs = [term.coeff for term in K4_TERM_TABLE]
    assert sum(1 for c in coeffs if c.imag != 0) == 8
    for term in K4_TERM_TABLE:
        assert term.ops[0] == ("c", 0)
        assert term.kernel_a in ("D", "D1") and term.kernel_b in ("D", "D1")
        assert term.pattern in ("t-2,1-3", "t-3,1-2")


def test_format_k4_table_layout():
    text = format_k4_table()
    lines = text.split("\n")
    assert len(lines) == 18
    assert lines[0].startswith("# coeff")
    assert lines[-1] == "# global prefactor 1/4, integrated over t >= t1 >= t2 >= t3 >= 0"
    assert "Xc(t)" in lines[1]


# --- cached generators ---------------------------------------------------------------------


def test_build_generator_validation():
    with pytest.raises(ValueError, match="order must be 2 or 4"):
        build_generator(SPIN_BOSON, BATH, 3, GL8, 1.0)
    with pytest.raises(ValueError, match="t_max must be positive"):
        build_generator(SPIN_BOSON, BATH, 2, GL8, 0.0)
    with pytest.raises(ValueError, match="unknown interpolation"):
        build_generator(SPIN_BOSON, BATH, 2, GL8, 1.0, interp="quadratic")


def test_default_grid_sizing():
    gen = build_generator(SPIN_BOSON, BATH, 2, GL8, 1.0, n_cache=None)
    assert len(gen.grid) == 33  # floor for short windows
    gen2 = build_generator(SPIN_BOSON, BATH, 2, GL8, 5.0, n_cache=5)
    assert np.array_equal(gen2.grid, np.linspace(0.0, 5.0, 5))


def test_uncoupled_generator_is_zero():
    model = SystemModel(2, 0.5 * SZ, SX, 0.0)
    gen = build_generator(model, BATH, 4, GL8, 1.0, n_cache=5)
    for t in (0.0, 0.5, 1.0):
        assert gen(t).norm_fro() == 0.0


def test_linear_interpolation_is_exact_on_nodes():
    gen = build_generator(SPIN_BOSON, BATH, 2, GL8, 1.0, n_cache=9)
    for t in gen.grid:
        direct = SPIN_BOSON.alpha**2 * K2_influence(SPIN_BOSON, BATH, float(t), GL8).matrix
        assert np.array_equal(gen(float(t)).matrix, direct)


def test_linear_interpolation_range_check():
    gen = build_generator(SPIN_BOSON, BATH, 2, GL8, 1.0, n_cache=9)
    with pytest.raises(ValueError, match="outside cached range"):
        gen(1.5)


def test_cubic_matches_direct_off_nodes():
    gen_c = build_generator(SPIN_BOSON, BATH, 4, GL16, 2.0, interp="cubic")
    gen_d = build_generator(SPIN_BOSON, BATH, 4, GL16, 2.0, interp="direct")
    for t in (0.13, 0.777, 1.501, 1.999):
        dev = np.max(np.abs(gen_c(t).matrix - gen_d(t).matrix))
        assert dev < 1e-5


def test_direct_mode_memoizes(monkeypatch):
    calls = {"n": 0}
    original = K2_influence

    def counting(model, bath, t, quad):
        calls["n"] += 1
        return original(model, bath, t, quad)

    monkeypatch.setattr(tclgen.tcl, "K2_influence", counting)
    gen = build_generator(SPIN_BOSON, BATH, 2, GL8, 1.0, interp="direct")
    first = gen(0.7).matrix
    for _ in range(3):
        assert np.array_equal(gen(0.7).matrix, first)
    assert calls["n"] == 1
