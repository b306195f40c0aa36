"""Smoke test for the hyperlab Python extension.

Build and run from the repository root:

    cargo build --release -p hyperlab-py --features extension-module
    cp target/release/libhyperlab_py.so python/hyperlab.so
    python3 python/smoke_test.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import hyperlab  # noqa: E402


def main():
    f2 = hyperlab.Group("free:2")
    assert f2.sphere_sizes(5) == [1, 4, 12, 36, 108, 324]
    assert f2.reduce("aAb") == f2.reduce("b")
    assert f2.word_length("abAB") == 4

    aut = f2.automaton()
    assert aut.sphere_sizes(6)[1:] == [4 * 3 ** (n - 1) for n in range(1, 7)]
    report = aut.analyze()
    assert abs(report["lambda"] - 3.0) < 1e-10
    assert aut.validate(f2, depth=6)["first_failure"] is None
    assert hyperlab.Automaton.from_json(aut.to_json()).vertices == aut.vertices

    rep = hyperlab.Representation.builtin("sanov", f2)
    assert rep.dimension == 2
    f = hyperlab.Functional.log_norm(rep)
    assert abs(f("a") - math.log(1 + math.sqrt(2))) < 1e-12
    est = hyperlab.estimate(aut, f, exact_to=10)
    assert est["lambda"] > 0.5 and est["standard_error"] < est["lambda"]

    stats = hyperlab.sphere_statistics(aut, f, 6)
    assert int(stats["count"]) == 972

    words = hyperlab.sample_sphere(aut, 12, count=5, seed=1)
    assert all(f2.word_length(w) == 12 for w in words)

    ps = hyperlab.PattersonSullivan(aut)
    assert abs(ps.growth_rate - 3.0) < 1e-10
    masses = [ps.cylinder_mass(x) for x in "aAbB"]
    assert abs(sum(masses) - 1.0) < 1e-12
    assert f2.word_length(ps.sample_ray(20, seed=3)) == 20

    traj = hyperlab.simulate(256, seed=2)
    assert len(traj["log_norm"]) == 256
    traj = hyperlab.simulate(64, automaton=aut, rep=rep, seed=2)
    assert len(traj["log_norm"]) == 64

    suite = hyperlab.clt_suite(aut, [4, 6], c=[1.0])
    assert suite

    try:
        hyperlab.Group("nope:1")
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")

    print("python smoke test: OK")


if __name__ == "__main__":
    main()
