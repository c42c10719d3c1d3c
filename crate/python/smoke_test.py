import os

import ri_py

ROOT = os.path.join(os.path.dirname(__file__), "..")
CONFIGS = os.path.join(ROOT, "configs")


def test_tree():
    a = ri_py.Tree("( K(H()) O() )", 3)
    b = ri_py.Tree("(O() K(H()))", 3)
    assert a == b and hash(a) == hash(b)
    assert a.encode() == "(O() K(H()))"
    assert a.omega_count() == 1 and a.h_count() == 1


def test_sector_and_coproduct():
    s = ri_py.Sector.from_file(os.path.join(CONFIGS, "pam3d.json"))
    assert s.d == 3
    t = ri_py.Tree("(O() K(H()))", 3)
    assert s.contains(ri_py.Tree("(O() K(O()))", 3))
    assert len(ri_py.coproduct(s, t, "1/100", "inf")) == 2
    assert len(ri_py.coproduct(s, t, "1/100", "5")) == 5
    i_eps, _, cells = s.phase("0")
    assert i_eps == ["3/1", "6/1", "inf"]
    assert len(cells) == 3
    try:
        s.epsilon0()
    except ValueError as e:
        assert "genericity" in str(e)
    else:
        raise AssertionError("expected a genericity error")


def test_counterterms():
    s = ri_py.Sector.from_file(os.path.join(CONFIGS, "rule2d.json"))
    rep = s.verify_counterterms({"(O() K(O()))": "1/2"})
    assert rep["ok"]
    assert len(s.b_minus()) == 3


def test_model():
    m = ri_py.Model(os.path.join(CONFIGS, "numeric_3d.json"))
    x = m.base_points()[0]
    one = m.pi(ri_py.Tree("()", 3), x)
    assert len(one) == m.sizes[0] * m.sizes[1] * m.sizes[2]
    assert all(v == 1.0 for v in one)
    assert m.comparison_defect(ri_py.Tree("(O() K(H()))", 3), x, "5") <= 1e-9


if __name__ == "__main__":
    for name, f in list(globals().items()):
        if name.startswith("test_"):
            f()
            print(name, "ok")
