"""Smoke test for the `smsp` extension module.

Build and run:
    cargo build --release -p smsp-py --features extension-module
    cp target/release/libsmsp.so python/smsp.so
    python3 python/smoke_test.py
"""

import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent))

import smsp  # noqa: E402

ROOT = pathlib.Path(__file__).resolve().parent.parent
REFERENCE_FACTS = (ROOT / "data" / "reference.lp").read_text()


def main():
    inst = smsp.Instance.from_facts(REFERENCE_FACTS)
    assert inst.validate() == [], inst.validate()
    assert (inst.n_lots, inst.n_operations, inst.n_machines) == (2, 10, 3)
    assert smsp.lower_bound(inst) >= 46

    res = smsp.solve(inst, search="exact")
    assert res.objectives == (89, 1, 0), res
    assert res.stage1_optimal and res.stage2_optimal
    assert smsp.evaluate(inst, res.schedule_json) == (89, 1, 0)
    assert json.loads(res.schedule_json)[0]["slots"]
    assert res.log and res.log[-1][1:] == (89, 1, 0)

    svg = smsp.gantt(inst, res.schedule_json, "svg")
    assert svg.count('<g class="machine"') == 3

    objectives, _ = smsp.oracle_optimum(inst, max_ops_per_lot=5)
    assert objectives == (89, 1, 0)

    # a schedule missing operations is rejected with the reason
    broken = json.loads(res.schedule_json)
    broken[0]["slots"] = []
    try:
        smsp.evaluate(inst, json.dumps(broken))
    except ValueError as e:
        assert "coverage" in str(e) or "unscheduled" in str(e), e
    else:
        raise AssertionError("incomplete schedule accepted")

    gen = smsp.Instance.generate(lots=3, route_len=4, seed=5)
    assert gen.validate() == []
    again = smsp.Instance.from_facts(gen.to_facts())
    assert again.to_facts() == gen.to_facts()

    bad = smsp.Instance.from_facts(
        "tool(g,1). pm(g,c,lots,4,2,1). route(1,1,g,5,1,1,0). lot(1,1). lot(2,1). lot(3,1)."
    )
    try:
        smsp.solve(bad)
    except smsp.InfeasibleError:
        pass
    else:
        raise AssertionError("infeasible instance solved")

    print("smoke test passed")


if __name__ == "__main__":
    main()
