import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracpen.errors import DomainError, InputError, ParameterDomainError, PreconditionWarning
from fracpen.fracops import (
    apply_fraclap_direct,
    apply_fraclap_spectral,
    fourier_interpolate,
    fourier_shift,
    gagliardo_nirenberg_quotient,
    gagliardo_seminorm_sq,
    hardy_quotient,
    kernel_constant,
    resample,
    upsample,
)
from fracpen.grid import Field, Grid


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
@pytest.mark.parametrize("k", [1, 2, 5, 31])
def test_cosine_modes_are_eigenfunctions(s, k):
    g = Grid(1, 3.0, 64)
    xi = np.pi * k / g.L
    u = Field.from_function(g, lambda x: np.cos(xi * x))
    out = apply_fraclap_spectral(u, s).values
    assert np.max(np.abs(out - xi ** (2 * s) * u.values)) < 1e-12 * xi ** (2 * s) * 10


def test_cos2x_half_laplacian():
    g = Grid(1, np.pi, 128)
    u = Field.from_function(g, lambda x: np.cos(2 * x))
    assert np.max(np.abs(apply_fraclap_spectral(u, 0.5).values - 2 * u.values)) < 1e-12
    assert gagliardo_seminorm_sq(u, 0.5) == pytest.approx(2 * np.pi, rel=1e-12)
    assert u.inner(apply_fraclap_spectral(u, 0.5)) == pytest.approx(2 * np.pi, rel=1e-12)


def test_two_dimensional_mode():
    g = Grid(2, np.pi, 32)
    u = Field.from_function(g, lambda x, y: np.cos(3 * x) * np.cos(4 * y))
    out = apply_fraclap_spectral(u, 0.3).values
    assert np.allclose(out, 5**0.6 * u.values, atol=1e-12)


@pytest.mark.parametrize("c", [0.0, 1.0, -7.5])
def test_constants_in_kernel(c):
    g = Grid(1, 5.0, 64)
    u = Field(g, np.full(g.shape, c))
    assert apply_fraclap_spectral(u, 0.4).max_abs() < 1e-12
    assert gagliardo_seminorm_sq(u, 0.4) < 1e-20
    with pytest.warns(PreconditionWarning) if c else np.errstate():
        d = apply_fraclap_direct(u, 0.4, [[0.0], [1.3]])
    assert np.all(np.abs(d) < 1e-10)


@pytest.mark.parametrize("s", [0.0, 1.0, -0.2, 1.5])
def test_order_outside_unit_interval(s):
    u = Field(Grid(1, 1.0, 16), np.zeros(16))
    with pytest.raises(ParameterDomainError):
        apply_fraclap_spectral(u, s)


def test_nonfinite_input_rejected():
    with pytest.raises(InputError):
        Field(Grid(1, 1.0, 16), np.full(16, np.nan))


@settings(max_examples=25, deadline=None)
@given(s=st.floats(0.05, 0.95), seed=st.integers(0, 10_000))
def test_self_adjoint(s, seed):
    rng = np.random.default_rng(seed)
    g = Grid(1, 4.0, 64)
    u, v = Field(g, rng.normal(size=64)), Field(g, rng.normal(size=64))
    a = apply_fraclap_spectral(u, s).inner(v)
    b = u.inner(apply_fraclap_spectral(v, s))
    assert abs(a - b) <= 1e-10 * max(abs(a), 1.0)


@settings(max_examples=25, deadline=None)
@given(s=st.floats(0.05, 0.45), t=st.floats(0.05, 0.45))
def test_semigroup(s, t):
    g = Grid(1, 6.0, 128)
    u = Field.from_function(g, lambda x: np.exp(-x * x) * (1 + 0.3 * x))
    two = apply_fraclap_spectral(apply_fraclap_spectral(u, s), t).values
    one = apply_fraclap_spectral(u, s + t).values
    assert np.max(np.abs(two - one)) <= 1e-10 * np.max(np.abs(one))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_seminorm_nonnegative(seed):
    rng = np.random.default_rng(seed)
    g = Grid(1, 2.0, 32)
    assert gagliardo_seminorm_sq(Field(g, rng.normal(size=32)), 0.3) > 0


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_direct_matches_spectral_on_gaussian(s):
    g = Grid(1, 40.0, 4096)
    u = Field.from_function(g, lambda x: np.exp(-x * x / 2))
    pts = np.array([-5.0, -2.5, -1.0, 0.0, 0.5, 3.0, 5.0])
    d = apply_fraclap_direct(u, s, pts[:, None])
    ref = fourier_interpolate(apply_fraclap_spectral(u, s), [pts])
    assert np.max(np.abs(d - ref)) < 1e-3


def test_direct_off_node_point():
    g = Grid(1, 20.0, 1024)
    u = Field.from_function(g, lambda x: np.exp(-x * x))
    x = 0.3 + g.h / 3
    d = apply_fraclap_direct(u, 0.5, [[x]])[0]
    ref = fourier_interpolate(apply_fraclap_spectral(u, 0.5), [np.array([x])])[0]
    assert d == pytest.approx(ref, abs=1e-4)


def test_direct_cosine_interior():
    g = Grid(1, 10 * np.pi, 1024)
    u = Field.from_function(g, np.cos)
    with pytest.warns(PreconditionWarning):
        d = apply_fraclap_direct(u, 0.5, [[0.0], [np.pi]])
    assert np.allclose(d, [1.0, -1.0], rtol=1e-2)


def test_direct_rejects_points_outside():
    g = Grid(1, 5.0, 64)
    u = Field.from_function(g, lambda x: np.exp(-x * x))
    with pytest.raises(DomainError):
        apply_fraclap_direct(u, 0.5, [[6.0]])


def test_direct_two_dimensional():
    g = Grid(2, 12.0, 128)
    u = Field.from_function(g, lambda x, y: np.exp(-(x * x + y * y)))
    sp = apply_fraclap_spectral(u, 0.25).values
    i = g.index_of([0.0, 0.0])
    j = g.index_of([0.75, -0.375])
    d = apply_fraclap_direct(u, 0.25, [[0.0, 0.0], [0.75, -0.375]])
    assert np.allclose(d, [sp[i], sp[j]], rtol=2e-2)


def test_kernel_constant_half_laplacian():
    assert kernel_constant(1, 0.5) == pytest.approx(1 / np.pi)
    assert kernel_constant(3, 0.5) == pytest.approx(1 / np.pi**2)


def test_soliton_identity():
    g = Grid(1, 200.0, 2**14)
    u = Field.from_function(g, lambda x: 2 / (1 + x * x))
    r = apply_fraclap_spectral(u, 0.5).values + u.values - u.values**2
    idx = [g.index_of([x])[0] for x in (0.0, 1.0, 3.0)]
    assert np.max(np.abs(r[idx])) < 1e-3


def test_soliton_identity_by_direct_quadrature():
    g = Grid(1, 200.0, 2**14)
    u = Field.from_function(g, lambda x: 2 / (1 + x * x))
    d = apply_fraclap_direct(u, 0.5, [[0.0], [1.0], [3.0]])
    x = np.array([0.0, 1.0, 3.0])
    v = 2 / (1 + x * x)
    assert np.max(np.abs(d + v - v * v)) < 1e-3


def test_hardy_dilation_invariance():
    g = Grid(1, 30.0, 4096)
    q1 = hardy_quotient(Field.from_function(g, lambda x: np.exp(-x * x)), 0.25)
    q2 = hardy_quotient(Field.from_function(g, lambda x: np.exp(-4 * x * x)), 0.25)
    assert q2 == pytest.approx(q1, rel=1e-2)


def test_hardy_gaussian_closed_form():
    # int e^{-2x^2}|x|^{-1/2} / [e^{-x^2}]^2_{1/4} = Gamma(1/4)/Gamma(3/4)
    from scipy.special import gamma

    g = Grid(1, 30.0, 4096)
    q = hardy_quotient(Field.from_function(g, lambda x: np.exp(-16 * x * x)), 0.25)
    assert q == pytest.approx(gamma(0.25) / gamma(0.75), rel=2e-3)


def test_hardy_translation_family_bounded():
    g = Grid(1, 30.0, 4096)
    qs = [hardy_quotient(Field.from_function(g, lambda x: np.exp(-((x - c) ** 2))), 0.25) for c in (0, 1, 2, 4)]
    assert max(qs) <= 10 * qs[0]
    # moving the bump away from the weight's singularity lowers the quotient
    assert qs[-1] < qs[0]


def test_hardy_zero_field():
    with pytest.raises(InputError):
        hardy_quotient(Field(Grid(1, 1.0, 16), np.zeros(16)), 0.25)


def test_gagliardo_nirenberg_bounded_on_random_family():
    rng = np.random.default_rng(7)
    g = Grid(1, 20.0, 1024)
    vals = []
    for _ in range(50):
        a, w, c, k = rng.uniform([0.5, 0.3, -3, 0], [2, 3, 3, 4])
        u = Field.from_function(g, lambda x: a * np.exp(-((x - c) / w) ** 2) * (1 + 0.5 * np.cos(k * x)))
        vals.append(gagliardo_nirenberg_quotient(u, 0.25, 3.5))
    assert np.all(np.isfinite(vals))
    assert max(vals) < 10 * min(vals)


def test_gagliardo_nirenberg_exponent_range():
    u = Field.from_function(Grid(1, 5.0, 64), lambda x: np.exp(-x * x))
    with pytest.raises(ParameterDomainError):
        gagliardo_nirenberg_quotient(u, 0.25, 5.0)


def test_fourier_shift_and_interpolate_agree():
    g = Grid(1, 10.0, 256)
    u = Field.from_function(g, lambda x: np.exp(-x * x) * np.sin(x))
    shifted = fourier_shift(u, 0.37).values
    interp = fourier_interpolate(u, [g.x + 0.37])
    assert np.allclose(shifted, interp, atol=1e-12)
    assert np.allclose(shifted, np.exp(-(g.x + 0.37) ** 2) * np.sin(g.x + 0.37), atol=1e-10)


@pytest.mark.parametrize("dim", [1, 2])
def test_upsample_reproduces_nodes(dim):
    g = Grid(dim, 6.0, 64)
    u = Field.from_function(g, (lambda x: np.exp(-x * x)) if dim == 1 else (lambda x, y: np.exp(-x * x - 2 * y * y)))
    fine = upsample(u, 4)
    sl = tuple([slice(None, None, 4)] * dim)
    assert np.max(np.abs(fine.values[sl] - u.values)) < 1e-14


def test_resample_close_to_trig_interpolant():
    g = Grid(1, 8.0, 512)
    u = Field.from_function(g, lambda x: np.exp(-x * x))
    pts = np.linspace(-3, 3, 301)
    assert np.max(np.abs(resample(u, [pts]) - np.exp(-pts * pts))) < 1e-6
