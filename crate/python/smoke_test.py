"""Smoke test for the fpt_exact extension module.

Build and install first:  pip install --no-build-isolation -e crates/python
"""

import json
import math
import tempfile
from pathlib import Path

import fpt_exact as fe


def main():
    ex1 = fe.ExactSampler.example1()
    assert abs(ex1.kappa - 6.48) < 1e-12
    draws = ex1.sample(2000, seed=1)
    assert all(d.finite and d.time > 0 for d in draws)
    mean_props = sum(d.proposals for d in draws) / len(draws)
    # exp(A(b) - A(x0)) with A(x) = K x - cos x
    target = math.exp(1.6 * 0.5 - math.cos(0.5) + 1.0)
    assert abs(mean_props - target) < 0.3, mean_props

    # Worker count must not change the draws.
    assert ex1.times(500, seed=3, workers=1) == ex1.times(500, seed=3, workers=4)

    grid = [d.time for d in ex1.grid(2000, 2.0 ** -8, seed=2) if d.finite]
    d, p = fe.ks_two_sample([d.time for d in draws], grid)
    assert 0.0 <= d <= 1.0 and 0.0 <= p <= 1.0

    ts = fe.sample_fpt_constant(1.0, 5000, seed=4)
    n, mean, var, lo, hi = fe.summary_stats(ts)
    assert n == 5000 and lo > 0

    ex2 = fe.ExactSampler.example2(epsilon=2.0 ** -4)
    m = fe.summary_stats(ex2.times(1000, seed=5))[1]
    assert 0.3 < m < 0.6, m

    custom = fe.ExactSampler.from_config(json.dumps({
        "experiment": "sample",
        "drift": {"kind": "constant", "c": 0.5},
        "threshold": {"kind": "linear", "slope": -0.5, "intercept": 1.0},
    }))
    assert len(custom.times(100)) == 100

    assert fe.choose_split_count(-1.0, 5.0, 6.48) == 14
    assert abs(fe.iteration_bound_linear(-1.0, 0.5, 6.48) - 3.928) < 1e-3

    spikes = fe.simulate_spike_train(2.0, seed=1, current=20.0)
    assert spikes == sorted(spikes) and all(0 < t < 2 for t in spikes)

    try:
        fe.ExactSampler.example1(k=0.5)
    except fe.FptError as e:
        assert e.args[0] == "configuration"
    else:
        raise AssertionError("expected FptError")

    with tempfile.TemporaryDirectory() as tmp:
        files = fe.run_experiment('{"experiment":"example1","n":100}', tmp)
        assert {Path(f).name for f in files} == {"samples.csv", "summary.json"}

    print("smoke test ok")


if __name__ == "__main__":
    main()
