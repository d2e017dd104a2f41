import numpy as np
import pytest
from scipy.integrate import quad

from disqme.distributions import ScalarDistribution
from disqme.ensembles import (
    UnsupportedForKindError,
    chi_bar,
    chi_bar_deriv,
    finite_list_ensemble,
    gue_ensemble,
    haar_fourth_moment,
    haar_second_moment,
    haar_unitary,
    level_spacing_cf,
    level_spacing_cf_deriv,
    poisson_ensemble,
    qubit_spectral,
    realizations,
    sample_gue_matrices,
    sample_realization,
    sample_spectra,
    spectral_general,
    spectral_global,
    spectral_uncorrelated,
)
from disqme.gue_kernel import (
    chi_bar_gue,
    chi_bar_gue_large_d,
    hermite_functions,
    pair_fourier_matrix,
    pair_fourier_matrix_deriv,
)


def make_all_kinds(omega0=1.0):
    g = ScalarDistribution("gaussian", 0.2, 0.7)
    b = ScalarDistribution("uniform-box", -0.1, 1.5)
    rng = np.random.default_rng(99)
    h = rng.normal(size=(3, 3, 3)) + 1j * rng.normal(size=(3, 3, 3))
    h = h + h.conj().transpose(0, 2, 1)
    return [
        spectral_general(omega0, (g, b), [[0.7, 0.1], [-0.2, 0.5], [0.0, -0.6]]),
        spectral_global(omega0, g, [1.0, 2.0, 4.0]),
        spectral_uncorrelated(omega0, (g, b, ScalarDistribution("cauchy-lorentz", 0.0, 0.4))),
        poisson_ensemble(3, omega0, 4.0),
        gue_ensemble(3, omega0),
        finite_list_ensemble(omega0, h, [0.5, 0.3, 0.2]),
    ]


@pytest.mark.parametrize("ens", make_all_kinds(), ids=lambda e: e.kind)
def test_sampled_realizations_are_hermitian(ens):
    rng = np.random.default_rng(1)
    for _ in range(5):
        r = sample_realization(ens, rng)
        assert np.max(np.abs(r.hamiltonian - r.hamiltonian.conj().T)) < 1e-12


def test_spectral_realizations_commute():
    ens = spectral_uncorrelated(1.0, (ScalarDistribution("gaussian"),) * 3)
    rng = np.random.default_rng(2)
    h1 = sample_realization(ens, rng).hamiltonian
    h2 = sample_realization(ens, rng).hamiltonian
    assert np.max(np.abs(h1 @ h2 - h2 @ h1)) < 1e-10


def test_global_point_mass_returns_reference():
    ref = np.array([1.0, 2.0, 4.0])
    ens = spectral_global(1.0, ScalarDistribution("point-mass", 1.0), ref)
    h = sample_realization(ens, np.random.default_rng(0)).hamiltonian
    np.testing.assert_allclose(h, np.diag(ref), atol=1e-12)


def test_gue_entry_variance_normalization():
    # <|H_jk|^2>/omega0^2 = 1/d for every entry
    d, n = 8, 10_000
    m = sample_gue_matrices(d, np.random.default_rng(3), n)
    off = np.mean(np.abs(m[:, 0, 1]) ** 2), np.mean(np.abs(m[:, 2, 5]) ** 2)
    dia = np.mean(m[:, 0, 0].real ** 2)
    for v in (*off, dia):
        assert abs(v * d - 1.0) < 0.05


def test_pe_eigenvalues_inside_box():
    ens = poisson_ensemble(4, 1.0, 2.0, location=0.5)
    lams, vecs = sample_spectra(ens, np.random.default_rng(4), 200)
    assert lams.min() >= 0.5 - 1.0 and lams.max() <= 0.5 + 1.0
    h = sample_realization(ens, np.random.default_rng(5)).hamiltonian
    ev = np.linalg.eigvalsh(h)
    assert ev.min() >= -0.5 - 1e-10 and ev.max() <= 1.5 + 1e-10
    assert np.max(np.abs(np.einsum("nab,ncb->nac", vecs, vecs.conj()) - np.eye(4))) < 1e-10


def test_finite_list_realizations_and_weights():
    ens = make_all_kinds()[5]
    rs = realizations(ens)
    assert len(rs) == 3
    assert abs(sum(r.weight for r in rs) - 1.0) < 1e-12
    with pytest.raises(ValueError):
        finite_list_ensemble(1.0, ens.hamiltonians, [0.5, 0.5, 0.5])


def test_haar_identity_conjugation_exact():
    w = haar_unitary(3, np.random.default_rng(6), 10)
    out = np.einsum("nab,bc,ndc->nad", w, np.eye(3, dtype=complex), w.conj())
    np.testing.assert_allclose(out, np.broadcast_to(np.eye(3), (10, 3, 3)), atol=1e-12)


def test_weingarten_second_moment():
    rng = np.random.default_rng(7)
    d, n = 3, 20_000
    x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    w = haar_unitary(d, rng, n)
    samples = np.einsum("nab,bc,ndc->nad", w, x, w.conj())
    mean = samples.mean(axis=0)
    se = samples.std(axis=0).real / np.sqrt(n) + 1e-12
    z = np.abs(mean - haar_second_moment(x)) / se
    assert z.max() < 4.0


def test_weingarten_fourth_moment():
    rng = np.random.default_rng(8)
    d, n = 3, 40_000
    xs = [rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) for _ in range(3)]
    w = haar_unitary(d, rng, n)
    t1 = np.einsum("nab,bc,ndc->nad", w, xs[0], w.conj())
    samples = t1 @ xs[1] @ np.einsum("nab,bc,ndc->nad", w, xs[2], w.conj())
    mean = samples.mean(axis=0)
    closed = haar_fourth_moment(*xs)
    for part in (np.real, np.imag):
        se = part(samples).std(axis=0) / np.sqrt(n) + 1e-12
        z = np.abs(part(mean) - part(closed)) / se
        assert z.max() < 4.0


def test_unitary_invariance_of_sampled_ensembles():
    # entry statistics of H and V H V^dag agree for a fixed unitary V
    rng = np.random.default_rng(9)
    d, n = 3, 30_000
    v = haar_unitary(d, np.random.default_rng(123))
    for ens in (poisson_ensemble(d, 1.0, 2.0), gue_ensemble(d, 1.0)):
        lams, vecs = sample_spectra(ens, rng, n)
        h = np.einsum("nab,nb,ncb->nac", vecs, lams, vecs.conj())
        hv = np.einsum("ab,nbc,dc->nad", v, h, v.conj())
        for stat in (lambda m: m[:, 0, 0].real, lambda m: np.abs(m[:, 0, 1]) ** 2):
            a, b = stat(h), stat(hv)
            se = np.hypot(a.std() / np.sqrt(n), b.std() / np.sqrt(n))
            assert abs(a.mean() - b.mean()) < 4 * se
        # trace moments are conjugation invariant identically, per sample
        for k in (1, 2, 3):
            np.testing.assert_allclose(np.trace(np.linalg.matrix_power(h, k), axis1=1, axis2=2),
                                       np.trace(np.linalg.matrix_power(hv, k), axis1=1, axis2=2), atol=1e-8)


def test_level_spacing_cf_trivial_and_degenerate():
    ens = spectral_global(1.0, ScalarDistribution("gaussian", 0.0, 1.0), [1.0, 1.0, 3.0])
    t = np.linspace(0, 5, 11)
    np.testing.assert_allclose(level_spacing_cf(ens, 1, 1, t), 1.0, atol=1e-14)
    # degenerate reference frequencies: the pair's spacing CF is 1 for all t
    np.testing.assert_allclose(level_spacing_cf(ens, 0, 1, t), 1.0, atol=1e-14)
    np.testing.assert_allclose(level_spacing_cf_deriv(ens, 0, 1, t), 0.0, atol=1e-14)


def test_level_spacing_cf_uncorrelated_gaussians():
    sig = 0.8
    laws = (ScalarDistribution("gaussian", 0.0, sig), ScalarDistribution("gaussian", 0.0, sig))
    ens = spectral_uncorrelated(1.0, laws)
    t = np.array([0.3, 1.1])
    expect = np.exp(-(sig * t) ** 2)  # product of two CFs
    np.testing.assert_allclose(level_spacing_cf(ens, 0, 1, t), expect, atol=1e-12)
    # double-integral quadrature oracle
    u = 0.7
    re = quad(lambda x: laws[0].density(x) * np.cos(x * u), -40 * sig, 40 * sig, limit=400)[0]
    im = quad(lambda x: laws[0].density(x) * np.sin(x * u), -40 * sig, 40 * sig, limit=400)[0]
    phi1 = re + 1j * im
    np.testing.assert_allclose(level_spacing_cf(ens, 0, 1, u), phi1 * np.conj(phi1), atol=1e-9)


def test_level_spacing_cf_empirical():
    rng = np.random.default_rng(10)
    n = 60_000
    for ens in make_all_kinds()[:4]:
        lams, _ = sample_spectra(ens, rng, n)
        for t in (0.4, 1.2):
            samples = np.exp(1j * (lams[:, 0] - lams[:, 1]) * ens.omega0 * t)
            se = np.hypot(samples.real.std(), samples.imag.std()) / np.sqrt(n)
            assert abs(samples.mean() - level_spacing_cf(ens, 0, 1, t)) < 4 * se


def test_level_spacing_cf_gue_unsupported():
    with pytest.raises(UnsupportedForKindError):
        level_spacing_cf(gue_ensemble(3, 1.0), 0, 1, 0.5)


def test_spacing_deriv_matches_finite_difference():
    for ens in make_all_kinds()[:4]:
        for t in (0.25, 0.9):
            h = 1e-6
            fd = (level_spacing_cf(ens, 0, 2 % ens.dim, t + h) - level_spacing_cf(ens, 0, 2 % ens.dim, t - h)) / (2 * h)
            assert abs(level_spacing_cf_deriv(ens, 0, 2 % ens.dim, t) - fd) < 1e-6


def test_chi_bar_normalization_and_pe_value():
    for ens in (poisson_ensemble(2, 1.0, 1.0), gue_ensemble(4, 1.0)):
        assert abs(chi_bar(ens, 0.0) - 1.0) < 1e-12
    # d = 2 box of width sigma at sigma*w0*t = 2 pi: the sinc vanishes
    ens = poisson_ensemble(2, 1.0, 1.0)
    assert abs(chi_bar(ens, 2 * np.pi) - 0.5) < 1e-12


def test_chi_bar_pe_monte_carlo_oracle():
    rng = np.random.default_rng(11)
    d, n, sig, t = 2, 100_000, 1.0, 2 * np.pi
    lams = ScalarDistribution("uniform-box", 0.0, sig).sample(rng, n * d).reshape(n, d)
    ph = np.exp(-1j * lams * t)
    vals = np.abs(ph.sum(axis=1)) ** 2 / d**2  # sum_jk e^{-i(lj-lk)t}/d^2
    se = vals.std() / np.sqrt(n)
    assert abs(vals.mean() - chi_bar(poisson_ensemble(d, 1.0, sig), t)) < 4 * se


def test_chi_bar_pe_matches_two_point_quadrature():
    # R2 = d(d-1) p_B(l1) p_B(l2): chi = 1/d + (d-1)/d |int p_B e^{-iul}|^2
    d, sig, u = 4, 2.0, 0.9
    re = quad(lambda x: np.cos(u * x) / sig, -sig / 2, sig / 2, epsabs=1e-12)[0]
    im = quad(lambda x: np.sin(u * x) / sig, -sig / 2, sig / 2, epsabs=1e-12)[0]
    expect = 1.0 / d + (d - 1.0) / d * (re**2 + im**2)
    assert abs(chi_bar(poisson_ensemble(d, 1.0, sig), u) - expect) < 1e-9


def test_chi_bar_pe_location_cancels():
    t = np.linspace(0.0, 3.0, 7)
    a = chi_bar(poisson_ensemble(3, 1.0, 2.0, location=0.0), t)
    b = chi_bar(poisson_ensemble(3, 1.0, 2.0, location=2.7), t)
    np.testing.assert_allclose(a, b, atol=1e-14)


def test_chi_bar_gue_monte_carlo_oracle():
    rng = np.random.default_rng(12)
    d, n = 3, 60_000
    m = sample_gue_matrices(d, rng, n)
    lams = np.linalg.eigvalsh(m)
    for t in (0.5, 1.5):
        ph = np.exp(-1j * lams * t)
        vals = np.abs(ph.sum(axis=1)) ** 2 / d**2
        se = vals.std() / np.sqrt(n)
        assert abs(vals.mean() - chi_bar(gue_ensemble(d, 1.0), t)) < 4 * se


def test_chi_bar_gue_large_d_limits():
    assert abs(chi_bar_gue_large_d(0.0) - 1.0) < 1e-12
    assert abs(chi_bar(gue_ensemble(8, 1.0), 1e-9, large_d=True) - 1.0) < 1e-8


def test_chi_bar_deriv_matches_finite_difference():
    h = 1e-6
    for ens in (poisson_ensemble(3, 1.0, 2.0), gue_ensemble(3, 1.0)):
        for t in (0.3, 1.2):
            fd = (chi_bar(ens, t + h) - chi_bar(ens, t - h)) / (2 * h)
            assert abs(chi_bar_deriv(ens, t) - fd) < 1e-6
        for t in (0.3, 1.2):
            fd = (chi_bar(ens, t + h, large_d=True) - chi_bar(ens, t - h, large_d=True)) / (2 * h)
            assert abs(chi_bar_deriv(ens, t, large_d=True) - fd) < 1e-6


def test_hermite_functions_orthonormal():
    # Gauss-Hermite quadrature: int psi_n psi_m dy with psi = e^{-y^2/2} h(y)
    n_max = 12
    nodes, weights = np.polynomial.hermite.hermgauss(80)
    psi = hermite_functions(n_max, nodes)
    # reweight: integrand = psi_n psi_m = e^{-y^2} (h_n h_m), GH handles e^{-y^2}
    h = psi * np.exp(nodes**2 / 2.0)[None, :]
    gram = np.einsum("ny,my,y->nm", h, h, weights)
    np.testing.assert_allclose(gram, np.eye(n_max), atol=1e-10)


@pytest.mark.parametrize("k", [0.0, 0.4, 1.7, 4.0])
def test_pair_fourier_matrix_against_quadrature(k):
    n_max = 6
    nodes, weights = np.polynomial.hermite.hermgauss(120)
    psi = hermite_functions(n_max, nodes)
    h = psi * np.exp(nodes**2 / 2.0)[None, :]
    oracle = np.einsum("ny,my,y->nm", h * np.exp(1j * k * nodes)[None, :], h, weights)
    np.testing.assert_allclose(pair_fourier_matrix(n_max, k), oracle, atol=1e-9)


def test_pair_fourier_matrix_deriv():
    h = 1e-6
    for k in (0.3, 2.1):
        fd = (pair_fourier_matrix(5, k + h) - pair_fourier_matrix(5, k - h)) / (2 * h)
        np.testing.assert_allclose(pair_fourier_matrix_deriv(5, k), fd, atol=1e-7)


def test_chi_bar_gue_d2_closed_form():
    # the kernel route reduces to 1/2 + e^{-u^2/2}(1 - u^2)/2 at d = 2
    u = np.linspace(0.0, 3.0, 13)
    expect = 0.5 + 0.5 * np.exp(-(u**2) / 2) * (1 - u**2)
    np.testing.assert_allclose(chi_bar_gue(2, u), expect, atol=1e-12)


def test_sigma_scale_choices():
    assert poisson_ensemble(3, 1.0, 4.0).sigma_scale() == 4.0
    assert gue_ensemble(5, 1.0).sigma_scale() == 4.0
    ens = qubit_spectral(1.0, ScalarDistribution("gaussian", 0.0, 2.0))
    assert abs(ens.sigma_scale() - 2.0) < 1e-12
