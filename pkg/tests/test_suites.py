import pytest

from fockconc import suites


def test_small_suites_pass():
    ctx = suites.Context(seed=3, scale=0.1)
    res = suites.run_suites(ctx, ["fock_core", "transforms", "highdim"])
    bad = [f"{k}.{r.name}" for k, rs in res.items() for r in rs if not r.passed]
    assert not bad


def test_tolerance_override_can_fail_a_check():
    ctx = suites.Context(scale=0.1, tol={"parseval": 1e-30})
    (r,) = [c for c in suites.run_suites(ctx, ["fock_core"])["fock_core"] if c.name == "parseval"]
    assert not r.passed


def test_unknown_suite():
    with pytest.raises(ValueError, match="unknown suite"):
        suites.run_suites(suites.Context(), ["nope"])
