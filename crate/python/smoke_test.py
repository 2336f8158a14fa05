"""Smoke test for the fracmg extension module.

Build and install first, e.g. ``maturin build --release -m crates/python/Cargo.toml``
followed by ``pip install target/wheels/fracmg-*.whl``.
"""

import math

import fracmg


def main() -> None:
    t = fracmg.Toeplitz([2.0, -1.0, 0.0, 0.0])
    y = t.matvec([1.0, 1.0, 1.0, 1.0])
    assert max(abs(a - b) for a, b in zip(y, [1.0, 0.0, 0.0, 1.0])) < 1e-14
    assert t.is_m_matrix()

    nodes, weights = fracmg.gauss_jacobi(0.0, 0.0, 5)
    assert abs(sum(weights) - 2.0) < 1e-13 and len(nodes) == 5

    assert abs(fracmg.kappa(1.5) - 1.0 / math.sqrt(2.0)) < 1e-14
    assert fracmg.coercivity_constant(1.5, 0.0, 1.0) is None

    cfg = fracmg.MgConfig()
    p = fracmg.Problem.example2(1.5, 0.5)
    h = fracmg.Hierarchy(p, 64, 1.0 / 64, cfg)
    assert h.sizes == [7, 15, 31, 63]
    sol, iters, converged, _ = h.solve([1.0] * 63)
    assert converged and iters <= 30
    residual = max(abs(a - 1.0) for a in h.apply(sol))
    assert residual < 1e-8
    assert h.contraction_factor() < 0.9

    run = fracmg.run_simulation(fracmg.Problem.example1(1.8), 128, 128)
    assert abs(run["l2_error"] - 1.5598e-2) / 1.5598e-2 < 0.05
    rows = fracmg.difference_table(p, [32, 64])
    assert rows[1][2] is not None

    try:
        fracmg.Problem.example2(2.5)
    except ValueError:
        pass
    else:
        raise AssertionError("alpha outside (1, 2) must raise")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
