"""Smoke test for the genskel Python bindings."""

from fractions import Fraction

import genskel


def main():
    law = genskel.OffspringLaw("geometric-half")
    assert law.gamma == 2.0
    assert abs(sum(law.pmf(k) for k in range(60)) - 1.0) < 1e-12

    tree = genskel.Tree.grow_conditioned(law, 20, seed=7)
    assert tree.height >= 20
    assert sum(tree.generation_sizes()) == len(tree)
    vs = tree.uniform_vertices(3, seed=1)
    assert tree.uniform_vertices(2, seed=1) == vs[:2]
    tau = tree.branch_matrix(vs)
    for i, v in enumerate(vs):
        assert tau[i][i] == tree.generation(v)
        for j, u in enumerate(vs):
            assert tau[i][j] == tree.generation(tree.mrca(v, u))
    assert len(tree.positions(2, seed=3)) == len(tree)

    small = genskel.Tree.from_offspring_counts([2, 0, 0])
    assert small.children(0) == [1, 2] and small.parent(2) == 0
    assert genskel.shape_of([[2, 1], [1, 2]]) is not None
    assert genskel.shape_of([[2, 2], [2, 2]]) is None

    assert [len(genskel.enumerate_shapes(k)) for k in range(2, 6)] == [1, 3, 15, 105]
    assert genskel.count_shapes(6) == 945
    assert Fraction(genskel.exact_survival_geometric(9)) == Fraction(1, 10)
    assert abs(genskel.survival_probability(law, 9) - 0.1) < 1e-12
    assert genskel.lifetime_tail_limit(2.0) == 0.25
    try:
        genskel.lifetime_tail_limit(0.5)
    except ValueError:
        pass
    else:
        raise AssertionError("t <= 1 must raise")

    ens = genskel.lattice_ensemble(1, 1, "1", 2)
    assert Fraction(ens["partition"]) == Fraction(11, 4)
    assert ens["edge_counts"] == [1, 2, 3]

    assert "survival" in genskel.experiments()
    rec = genskel.run_experiment("survival", "replicas = 2000\nm_grid = [0, 1, 5]\nseed = 3")
    assert rec["experiment"] == "survival" and rec["schema_version"] == 1
    assert all(c["passed"] for c in rec["checks"]), rec["checks"]
    again = genskel.run_experiment("survival", "replicas = 2000\nm_grid = [0, 1, 5]\nseed = 3\nthreads = 2")
    assert again["content_hash"] == rec["content_hash"]
    print("python smoke test passed")


if __name__ == "__main__":
    main()
