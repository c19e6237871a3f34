"""Smoke test for the extension module.

Build and run from the repository root:

    cargo build --release -p coopercept-py
    python3 crates/py/python/smoke_test.py
"""

import os
import shutil
import sys
import tempfile

HERE = os.path.dirname(os.path.abspath(__file__))
ROOT = os.path.abspath(os.path.join(HERE, "..", "..", ".."))


def load():
    try:
        import coopercept
        return coopercept
    except ImportError:
        pass
    candidates = [os.environ.get("COOPERCEPT_LIB")]
    candidates += [os.path.join(ROOT, "target", p, "libcoopercept_py.so") for p in ("release", "debug")]
    for lib in candidates:
        if lib and os.path.exists(lib):
            tmp = tempfile.mkdtemp()
            shutil.copy(lib, os.path.join(tmp, "coopercept.so"))
            sys.path.insert(0, tmp)
            import coopercept
            return coopercept
    sys.exit("extension not built: cargo build --release -p coopercept-py")


def main():
    cp = load()

    budgets = cp.frame_budgets()
    assert len(budgets) == 10 and budgets[1] == 9000, budgets

    value, chosen = cp.knapsack_exact([9.0, 6.0, 4.0], [5000, 2000, 2000], 5000)
    assert value == 10.0 and chosen == [1, 2], (value, chosen)
    approx, _ = cp.knapsack_fptas([9.0, 6.0, 4.0], [5000, 2000, 2000], 5000, 0.1)
    assert approx >= 0.9 * value

    items = [
        (0, 1, 4000, [0.0, 1.0, 1.0]),
        (1, 1, 6000, [1.0, 0.0, 0.0]),
        (2, 1, 3000, [1.0, 1.0, 0.0]),
    ]
    problem = cp.Problem([0, 1, 2], items, [9000, 9000])
    greedy = problem.greedy()
    optimal = problem.optimal()
    assert sum(greedy.used) <= 18000
    assert greedy.total_weight == optimal.total_weight == 5.0, (greedy, optimal)
    assert problem.agnostic().total_weight <= greedy.total_weight
    mdp_value, _ = problem.mdp(1.0)
    assert abs(mdp_value - 5.0) < 1e-9

    box = lambda x, y: [(x - 1, y - 1), (x + 1, y - 1), (x + 1, y + 1), (x - 1, y + 1)]
    hidden = cp.visibility((0.0, 0.0), [box(20, 0), [(5, -3), (6, -3), (6, 3), (5, 3)]], n_targets=1)
    assert hidden == [False], hidden

    assert cp.link(0.0) == 0.95 and cp.link(171.0) == 0.0

    run = cp.run("red_light", "greedy", density=5, delta=0.5, seed=1)
    assert run.outcome in ("safe_passage", "near_miss", "crash", "deadlock")
    assert run.trace.startswith("interval,frame")
    again = cp.run("red_light", "greedy", density=5, delta=0.5, seed=1)
    assert again.trace == run.trace

    try:
        cp.run("red_light", "greedy", speed=55.0)
    except ValueError:
        pass
    else:
        raise AssertionError("invalid speed accepted")

    print("ok:", run)


if __name__ == "__main__":
    main()
