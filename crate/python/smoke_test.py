"""Smoke test for the homoflow extension: run after `maturin develop` in crates/python."""

import math

import homoflow


def main():
    w = homoflow.cross_product([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    assert w == [0.0, 0.0, 1.0], w
    assert homoflow.rot_perp([1.0, 2.0]) == (2.0, -1.0)
    cof = homoflow.cofactor_matrix([[2.0, 1.0], [0.0, 3.0]])
    assert cof == [[3.0, 0.0], [-1.0, 2.0]], cof

    fam = homoflow.Family("family.name = deltagamma\nfamily.delta = 0.3\nfamily.gamma = 0.3\n")
    assert fam.name == "deltagamma" and fam.dim == 2
    coeffs = fam.coefficients()
    assert abs(coeffs["sigma0"] - 1.0) < 1e-10
    assert abs(coeffs["xi0"][0] - 1.0) < 1e-10 and abs(coeffs["xi0"][1]) < 1e-10

    sys = fam.system(0.1)
    x = [0.3, -0.7]
    assert max(abs(r) for r in sys.rectification_residual(x)) < 1e-10
    assert abs(sys.determinant_residual(x)) < 1e-10
    report = sys.invariants(samples=200)
    assert all(p for (_, _, p) in report.values()), report

    state = sys.advect(x, 1.0)
    det = state["jac"][0][0] * state["jac"][1][1] - state["jac"][0][1] * state["jac"][1][0]
    assert abs(det - math.exp(state["logdet"])) < 1e-8
    back = sys.advect(state["pos"], -1.0, jacobian=False)["pos"]
    assert max(abs(a - b) for a, b in zip(back, x)) < 1e-8

    sol = fam.solve(0.1, [0.0, 0.0])
    assert abs(sol.eval(0.0, [0.0, 0.0]) - 1.0) < 1e-12
    assert sol.eval(1.0, [5.0, 5.0]) == 0.0

    csv_text = homoflow.homogenize("family.name = shear\nfamily.gamma = 0.5\n")
    assert csv_text.startswith("# homoflow-csv v1"), csv_text
    table, ok = homoflow.check("family.name = identity\neps_list = 0.5\ncheck.samples = 50\n")
    assert ok and table.startswith("# homoflow-csv v1")

    try:
        homoflow.Family("family.name = deltagamma\nfamily.delta = 1.1\nfamily.gamma = 1\n")
    except ValueError as e:
        assert "family.delta" in str(e), e
    else:
        raise AssertionError("degenerate family accepted")

    print("homoflow smoke test passed")


if __name__ == "__main__":
    main()
