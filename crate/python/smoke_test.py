"""Smoke test for the `hara` extension module.

Build first:
    cargo build -p hara-py --release --features extension-module
then run:
    python3 python/smoke_test.py
"""

import importlib.machinery
import importlib.util
import math
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libhara.so"
        if lib.exists():
            loader = importlib.machinery.ExtensionFileLoader("hara", str(lib))
            spec = importlib.util.spec_from_file_location("hara", lib, loader=loader)
            mod = importlib.util.module_from_spec(spec)
            loader.exec_module(mod)
            return mod
    sys.exit("libhara.so not found; build hara-py with --features extension-module")


def main():
    hara = load()
    market = hara.MarketParams(r=0.02, sigma=0.2, T=1.0)

    prior = hara.Prior.discrete([(0.2, 0.5), (0.6, 0.5)])
    assert prior.sign_class() == "positive"
    assert abs(prior.mean() - 0.4) < 1e-12
    assert 0.2 < prior.theta_hat(0.5, 0.3) < 0.6

    model = hara.Model(prior, market)
    power = hara.Utility.power(-2.0)
    rep = model.policy_report(power, 0.0, 1.0, 0.0)
    assert math.isclose(rep["pi_hat"], rep["pi_myopic"] + rep["hedging"], rel_tol=1e-12)
    assert 0.0 < rep["ratio"] < 1.0, rep

    # point mass: optimal equals Merton
    pm = hara.Model(hara.Prior.point_mass(0.4), market)
    merton = hara.pi_merton(power, market, 0.0, 1.0, 0.0, 0.4)
    assert math.isclose(pm.pi_hat(power, 0.0, 1.0, 0.0), merton, rel_tol=1e-10)

    rows = model.gamma_sweep([-5.0, -1.0, 0.5])
    ratios = [r["ratio"] for r in rows]
    assert ratios == sorted(ratios), ratios

    # Gaussian prior with a long horizon and risk seeking γ has no solution
    g = hara.Model(hara.Prior.gaussian(0.3, 2.0), hara.MarketParams(0.0, 0.2, 5.0))
    try:
        g.pi_hat(hara.Utility.power(0.9), 0.0, 1.0, 0.0)
    except hara.DivergenceError:
        pass
    else:
        raise AssertionError("expected DivergenceError")

    try:
        hara.Prior.discrete([(0.1, -1.0)])
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")

    sim = hara.simulate(prior, market, power, n_paths=2000, n_steps=50, seed=7, antithetic=True)
    names = [s["strategy"] for s in sim["strategies"]]
    assert names == ["optimal", "myopic"], names
    lo, hi = sim["paired"][0]["ci95"]
    assert lo <= hi
    again = hara.simulate(prior, market, power, n_paths=2000, n_steps=50, seed=7, antithetic=True)
    assert again == sim

    print("smoke test passed")
    print("  policy:", {k: round(v, 6) for k, v in rep.items() if v is not None})
    print("  paired optimal-myopic: %.3e [%.3e, %.3e]" % (sim["paired"][0]["mean"], lo, hi))


if __name__ == "__main__":
    main()
