"""Smoke test for the feec Python extension."""

import math

import feec


def main():
    torus = feec.Mesh.generate("torus:3,3")
    assert torus.counts == [9, 27, 18], torus.counts
    assert torus.betti() == [1, 2, 1]
    assert torus.betti(order=2) == [1, 2, 1]
    assert torus.euler_characteristic() == 0

    tri = feec.Mesh.generate("simplex:2")
    assert tri.relative_betti() == [0, 0, 1]
    assert all(step["ok"] for step in feec.Mesh.generate("book").mayer_vietoris())

    again = feec.Mesh.from_json(torus.to_json())
    assert again.counts == torus.counts

    d0, d1 = torus.coboundary(0), torus.coboundary(1)
    for row in d1:
        for j in range(len(d0[0])):
            assert sum(row[i] * d0[i][j] for i in range(len(row))) == 0

    report = feec.Mesh.generate("book").wedge_check(1, 1, 1, 1, trials=10, seed=3)
    assert report["ok"] and report["seed"] == 3

    level = feec.HodgeLevel(feec.Mesh.generate("sphere:2"))
    assert level.betti == [1, 0, 1]
    assert len(level.harmonic_basis(2)) == 1
    parts = level.hodge_decompose(1, [0.3, -1.0, 0.5, 0.2, 0.7, -0.4])
    assert parts["checks"]["reconstruction"] < 1e-12
    c, b = level.poincare_constant(0), level.inf_sup_constant(0)
    assert abs(b * c - 1.0) < 1e-9

    circle = feec.HodgeLevel(feec.Mesh.generate("circle:24"))
    assert abs(circle.poincare_constant(0) * 2 * math.pi / 24 - 1) < 0.1
    u = [math.sin(i) for i in range(24)]
    assert max(abs(a - b) for a, b in zip(circle.fortin_project(0, u), u)) < 1e-10

    study = feec.Mesh.generate("circle:12").spectral_study(0, levels=2)
    assert len(study["levels"]) == 2

    code, text = feec.run_cli(["betti", "--generate", "sphere:2"])
    assert code == 0 and '"betti"' in text
    code, _ = feec.run_cli(["betti", "--bogus"])
    assert code == 2

    print("python smoke test passed")


if __name__ == "__main__":
    main()
