"""Smoke test for the brecs_py extension module."""

import brecs_py as b


def main():
    data = b.simulate(n=200, q=3, p=5, r0=2, kind="sparse", p_star=2, seed=7)
    assert len(data["y"]) == 200 and len(data["y"][0]) == 3
    assert len(data["x"][0]) == 5

    sampler = b.Sampler(param="rrcs", n_iter=3000, burn_in=1000, seed=11)
    assert sampler.retained() == 2000
    fit = b.fit(data["y"], data["x"], sampler=sampler, center=True)
    print(fit)
    assert abs(sum(fit.rank_posterior) - 1.0) < 1e-12
    assert len(fit.c_hat) == 5 and len(fit.c_hat[0]) == 3
    assert all(0.0 <= v <= 1.0 for row in fit.pip for v in row)
    assert len(fit.ri[0]) == 4
    stat, pval = fit.rank_uniformity
    assert 0.0 <= pval <= 1.0
    print("rank posterior", fit.rank_posterior, "map", fit.map_rank)
    print("kept", fit.kept())
    print("mse", b.mse(fit.c_hat, data["c0"]))
    mcc, tpr, fnr = b.classification(fit.c_hat, data["c0"])
    print("mcc", mcc, "tpr", tpr)

    assert b.zeta(0.5) == 1.0 and b.zeta(1.0) == 0.0
    s, p = b.chi2_uniformity([10, 10, 10])
    assert s == 0.0 and abs(p - 1.0) < 1e-12
    sparse = b.savs([[1.0, 0.01], [0.0, 2.0]], [1.0, 1.0])
    assert len(sparse) == 2

    res = b.run_experiment(n=50, q=3, p=4, r0=1, seed=3, replications=2,
                           sampler=b.Sampler(n_iter=600, burn_in=200))
    assert res["replications"] == 2
    print("experiment", res)

    try:
        b.fit([[1.0]], [[1.0, 2.0]])
    except ValueError as e:
        print("rejected:", e)
    else:
        raise AssertionError("mismatched shapes accepted")
    print("smoke test OK")


if __name__ == "__main__":
    main()
