import json
import math

import numpy as np
import pytest
from scipy import integrate, optimize
from scipy.special import erf

from fockconc import concentration as C
from fockconc.fock import density, kernel_function, make_fock, monomial, random_polynomial
from fockconc.stability import perturbed_gaussian


@pytest.fixture(scope="module")
def gauss_grid():
    F = make_fock(1, [1.0])
    return F, C.sample_density(F, C.GridSpec(4.0, 512))


def test_total_mass_of_gaussian(gauss_grid):
    _, g = gauss_grid
    assert abs(g.total_mass() - 1.0) < 1e-9


def test_centred_disc_is_extremal(gauss_grid):
    F, g = gauss_grid
    for s in (0.5, 1.0, 2.0):
        rep = C.deficit(F, C.disc_mask(g.spec, area=s), g)
        assert abs(rep.deficit) < 2e-3
        assert not rep.violation


def test_square_against_erf(gauss_grid):
    F, g = gauss_grid
    # side 1 aligns with the cell edges, so the raster square is exact
    m = C.square_mask(g.spec, side=1.0)
    assert abs(m.measure - 1.0) < 1e-14
    rep = C.deficit(F, m, g)
    oracle = erf(math.sqrt(math.pi) / 2) ** 2
    assert abs(rep.concentration - oracle) <= rep.quad_err
    assert abs(rep.concentration - oracle) < 1e-8
    assert rep.deficit > 0


def test_offset_disc_against_polar_quadrature():
    F = make_fock(1, [1.0])
    spec = C.GridSpec(4.0, 1024)
    m = C.disc_mask(spec, 1.0 + 0j, area=1.0)
    rep = C.deficit(F, m, spec)
    rho = 1 / math.sqrt(math.pi)
    mass, _ = integrate.dblquad(
        lambda r, t: math.exp(-math.pi * abs(1 + r * complex(math.cos(t), math.sin(t))) ** 2) * r,
        0, 2 * math.pi, 0, rho, epsabs=1e-13,
    )
    oracle = 1 - mass / C.fk_bound(1.0)
    assert abs(rep.deficit - oracle) < 2e-4
    assert rep.deficit > 0.1


def test_e1_maximum():
    mx = C.global_max(monomial(1))
    assert abs(mx.T - math.exp(-1)) < 1e-12
    assert abs(abs(mx.argmax) - 1 / math.sqrt(math.pi)) < 1e-6


def test_kernel_maximum_at_centre():
    z0 = 0.4 - 0.7j
    mx = C.global_max(kernel_function(z0))
    assert abs(mx.T - 1) < 1e-10 and abs(mx.argmax - z0) < 1e-6


def test_e1_distribution_against_annulus_roots():
    F = monomial(1)
    p = C.profile(C.sample_density(F, C.GridSpec(4.0, 1024)))
    for t in (0.05, 0.15, 0.3):
        # {u > t} is the annulus x1 < pi r^2 < x2 where x e^{-x} = t
        x1 = optimize.brentq(lambda x: x * math.exp(-x) - t, 0, 1)
        x2 = optimize.brentq(lambda x: x * math.exp(-x) - t, 1, 50)
        mu = float(p.mu(t))
        k = int(round(mu / p.cell_area))
        assert abs(mu - (x2 - x1)) <= p.cell_area * (p.edges[k] + 1)


def test_near_gaussian_profile_properties():
    F = perturbed_gaussian(0.1).normalized()
    p = C.profile(C.sample_density(F, C.default_grid(F, n=512)))
    assert C.ratio_margin(p) >= 0
    assert C.mu_lower_margin(p, np.linspace(0.02, 0.98, 40) * p.T_unit) >= 0
    assert C.crossing_count(p, F) == 1
    cv = C.convexity_G(p)
    assert cv.min_margin >= 0 and cv.excess_margin <= 0
    assert math.isfinite(C.mu_peak_ratio(p))
    b = C.lemma_bounds(p, 1.0)
    assert b.holds and b.lhs > 0 and math.isfinite(b.reinforced_ratio)


def test_equality_case_profile(gauss_grid):
    p = C.profile(gauss_grid[1])
    assert p.degenerate and math.isnan(p.s_star)
    cv = C.convexity_G(p)
    assert abs(cv.min_second_diff) < 1e-4
    b = C.lemma_bounds(p, 1.0)
    assert b.lhs == 0 and b.mid == 0 and b.holds


def test_lemma_bounds_require_unit_norm():
    F = make_fock(1, [2.0, 0.0, 0.3])
    p = C.profile(C.sample_density(F, C.GridSpec(5.0, 256)))
    with pytest.raises(ValueError, match="unit-norm"):
        C.lemma_bounds(p, 1.0)


def test_superlevel_set_of_kernel_is_disc():
    z0 = 0.5 + 0j
    F = kernel_function(z0)
    g = C.sample_density(F, C.GridSpec(4.0, 512))
    m, d = C.superlevel_mask(g, 1.0)
    disc = C.disc_mask(g.spec, z0, area=m.measure)
    diff = np.count_nonzero(m.cells ^ disc.cells)
    assert diff <= 2 * disc.boundary_cells()
    assert abs(d) < 2e-3


def test_superlevel_sets_minimise_deficit(rng):
    F = random_polynomial(rng, 5)
    spec = C.GridSpec(C.default_radius(5), 384)
    g = C.sample_density(F, spec)
    for _ in range(20):
        m = C.random_mask(spec, rng, area=1.0)
        rep = C.deficit(F, m, g)
        assert rep.deficit >= rep.superlevel_deficit - rep.quad_err


def test_fk_holds_on_random_masks(rng):
    for _ in range(30):
        F = random_polynomial(rng, int(rng.integers(0, 9)))
        spec = C.GridSpec(C.default_radius(8), 256)
        rep = C.deficit(F, C.random_mask(spec, rng), spec)
        assert not rep.violation


def test_density_laplacian_against_finite_differences():
    F = make_fock(1, [0.6, 0.3j, -0.5, 0.2])
    z = np.array([0.1 + 0.2j, -0.5 + 0.3j, 0.8 - 0.1j])
    h = 1e-4
    fd = (
        density(F, z + h) + density(F, z - h) + density(F, z + 1j * h) + density(F, z - 1j * h) - 4 * density(F, z)
    ) / h ** 2
    assert np.allclose(C.density_laplacian(F, z), fd, rtol=1e-5, atol=1e-6)


def test_corrected_masses_beat_midpoint():
    F = make_fock(1, [1.0])
    g = C.sample_density(F, C.GridSpec(4.0, 64))
    m = C.square_mask(g.spec, side=1.0)
    oracle = erf(math.sqrt(math.pi) / 2) ** 2
    raw = g.values[m.cells].sum() * g.spec.cell_area
    corrected = g.cell_mass[m.cells].sum()
    assert abs(corrected - oracle) < 0.01 * abs(raw - oracle)
    assert abs(corrected - oracle) <= g.cell_error[m.cells].sum()


def test_mask_round_trip(tmp_path, rng):
    spec = C.GridSpec(3.0, 64, 0.5 - 0.25j)
    m = C.random_mask(spec, rng, area=2.0, max_offset=0.2)
    p = tmp_path / "m.mask"
    m.save(p)
    back = C.load_mask(p)
    assert back.spec == spec and np.array_equal(back.cells, m.cells)


def test_grid_round_trip(tmp_path):
    F = make_fock(1, [1.0, 0.5])
    g = C.sample_density(F, C.GridSpec(5.0, 64))
    p = tmp_path / "g.grid"
    g.save(p)
    back = C.load_grid(p)
    assert back.spec == g.spec and np.array_equal(back.values, g.values)


@pytest.mark.parametrize(
    "text",
    ["", "mask v2 64 3 0 0\n", "mask v1 64 3 0\n", "mask v1 64 3 0 0\n" + "0" * 64 + "\n"],
)
def test_corrupt_mask_rejected(text):
    with pytest.raises(ValueError):
        C.loads_mask(text)


def test_grid_errors():
    with pytest.raises(ValueError):
        C.GridSpec(1.0, 16)
    with pytest.raises(ValueError):
        C.GridSpec(-1.0, 128)
    with pytest.raises(ValueError, match="two-dimensional"):
        C.sample_density(make_fock(2, {(0, 0): 1.0}), C.GridSpec(4.0, 64))
    with pytest.raises(ValueError, match="tail mass"):
        C.sample_density(monomial(20), C.GridSpec(1.0, 64))
    spec = C.GridSpec(4.0, 64)
    with pytest.raises(ValueError, match="empty"):
        C.deficit(make_fock(1, [1.0]), C.RegionMask(spec, np.zeros((64, 64), bool)), spec)
    with pytest.raises(ValueError, match="grid mismatch"):
        C.deficit(make_fock(1, [1.0]), C.disc_mask(spec, area=1), C.GridSpec(4.0, 128))
    with pytest.raises(ValueError):
        C.fk_bound(-1.0)


def test_report_json_keys():
    F = make_fock(1, [1.0])
    spec = C.GridSpec(4.0, 128)
    js = C.deficit(F, C.disc_mask(spec, area=1.0), spec).to_json()
    assert list(json.loads(js)) == [
        "concentration", "fk_bound", "deficit", "superlevel_deficit", "area", "norm_sq", "quad_err",
    ]
