"""Smoke test for the ursa_py extension: plan, estimate, schedule, simulate."""

import math
import sys
import tempfile
from pathlib import Path

import ursa_py

BASE = (6, 8)


def main():
    ws = ursa_py.Workloads.generate(seed=0)
    ids = ws.ids()
    assert len(ws) == len(ids) == 55

    planner = ursa_py.Planner.train(ws, [BASE], ids=ids[:44], seed=0)
    with tempfile.TemporaryDirectory() as d:
        path = str(Path(d) / "model.json")
        planner.save(path)
        planner = ursa_py.Planner.load(path)
    assert planner.bases() == [BASE]

    w = ids[50]
    x = ws.observe_indexes(w, BASE, 0.05)
    assert len(x) == 15
    up = planner.recommend(x, BASE, (1, 2), target=1.5)
    down = planner.recommend(x, BASE, (12, 16), epsilon=0.05)
    print(f"workload {w}: scale-up -> {up}, scale-down -> {down}")
    try:
        planner.recommend(x, BASE, (1, 2), target=1000.0)
        raise AssertionError("expected an infeasible plan")
    except ursa_py.InfeasibleError:
        pass

    assert math.isclose(ursa_py.contention_risk([1, 1, 1, 1], [2, 2, 2, 0]), 6.6, rel_tol=1e-12)

    items = []
    for i in ids:
        spec = ws.origin(i)
        est = ws.estimate_profile(i, spec)
        assert est == ws.profile(i, spec)
        items.append((i, spec, est))
    results = {}
    for policy in ("ursa", "lrp"):
        placed = ursa_py.schedule(items, policy=policy)
        assert [p[0] for p in placed] == ids
        report = ursa_py.simulate([(p[0], p[1]) for p in placed], items)
        assert len(report["workloads"]) == 55
        assert all(0.0 < e["sd"] <= 1.0 for e in report["workloads"])
        results[policy] = report
        print(f"{policy}: p_sys {report['p_sys']:.3f} unfairness {report['unfairness']:.4f}")
    print("ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
