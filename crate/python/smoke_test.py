"""Smoke test for the `mixpred` extension module.

Build and place the module next to this script, then run it:

    cargo build -p mixpred-py --release
    cp target/release/libmixpred.so python/mixpred.so
    python3 python/smoke_test.py
"""

import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import mixpred  # noqa: E402


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    # Measures
    mu = mixpred.Measure.bernoulli(0.25)
    assert close(mu.marginal([1, 0, 0]), 0.25 * 0.75 * 0.75)
    assert close(mu.conditional([1, 1], 1), 0.25)
    assert mu.log2_marginal([]) == 0.0
    m = mixpred.Measure.from_json('{"kind": "dirac", "prefix": "101", "tail": 0}')
    assert m.marginal([1, 0, 1, 0]) == 1.0
    assert m.log2_marginal([0]) == -math.inf
    assert mu.sample(20, seed=5) == mu.sample(20, seed=5)

    # Losses
    rho = mixpred.Measure.bernoulli(0.5)
    kl = mixpred.cumulative_kl(mu, rho, 6)
    step = 0.25 * math.log2(0.25 / 0.5) + 0.75 * math.log2(0.75 / 0.5)
    assert close(kl, 6 * step, 1e-10), kl
    est = mixpred.mc_loss(mu, rho, 6, 20000, 11)
    assert abs(est["mean"] - kl) < 5 * est["std_error"] + 1e-9, est
    try:
        mixpred.cumulative_kl(mu, rho, 30, budget=1024)
        raise AssertionError("expected a budget error")
    except mixpred.BudgetError:
        pass

    # Class, prior, verification
    cls = mixpred.ModelClass.from_json(
        json.dumps({"family": "bernoulli-grid", "alphabet_size": 2, "grid": {"resolution": 10}})
    )
    assert len(cls) == 9 and cls[0].id == "bernoulli(0.1)"
    prior = mixpred.Prior.construct(cls, rho, 8)
    assert close(sum(prior.member_weights()), 1.0, 1e-10)
    rows = prior.verify(rho, 8)
    assert len(rows) == 9 * 6 and all(r["pass"] for r in rows)
    again = mixpred.Prior.from_dump(prior.to_dump(), cls)
    assert again.member_weights() == prior.member_weights()
    nxt = prior.predict_next([1, 1, 1])
    assert close(sum(nxt), 1.0) and nxt[1] > 0.5

    assert close(mixpred.bound_rhs(4), 35.56837034679164, 1e-12)

    # Lower bound
    curve = mixpred.Prior.preset("uniform", 8).lower_bound()
    guarantees = [r["guarantee_bits"] for r in curve]
    assert len(curve) == 7
    assert all(a <= b for a, b in zip(guarantees, guarantees[1:]))
    assert all(r["actual_regret_bits"] >= r["guarantee_bits"] - 1e-9 for r in curve)
    assert mixpred.Prior.preset("single-delta", 5).lower_bound()[0]["actual_regret_bits"] == math.inf

    print("mixpred smoke test: ok")


if __name__ == "__main__":
    main()
