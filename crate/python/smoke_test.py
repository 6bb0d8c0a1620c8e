"""Smoke test for the hloop extension module.

Build and install first, e.g.
    pip install maturin
    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/hloop-*.whl
"""

import json
import math

import hloop


def bisect(f, a, b):
    for _ in range(200):
        m = 0.5 * (a + b)
        if f(a) * f(m) <= 0:
            b = m
        else:
            a = m
    return 0.5 * (a + b)


def main():
    one = hloop.Field.constant(1.0)
    u = hloop.Loop.circle(1.0)
    assert abs(u.length() - 1.0) < 1e-12
    assert abs(hloop.energy(one, u) - 0.5) < 1e-12
    assert hloop.gradient_norm(one, u) < 1e-12
    assert u.winding_number(0.0, 0.0) == -1
    assert abs(u.area() + 0.5) < 1e-12

    h = hloop.Field.beta_t(3.0, 0.2)
    n = 3.0 * 0.2 * math.sqrt(3.0 / 16.0)
    assert abs(h.n() - n) < 1e-9, h.n()
    assert abs(h.rescale(2.0).n() - n) < 1e-9

    same = hloop.Field.from_json(h.to_json())
    assert same(0.3, 0.4) == h(0.3, 0.4)
    try:
        hloop.Field.from_json('{"kind": "constant", "value": 1, "extra": 0}')
    except ValueError:
        pass
    else:
        raise AssertionError("unknown key accepted")

    hbt = hloop.Field.beta_t(2.0, 0.5)
    report, v = hloop.find_critical(hbt, hloop.Loop.circle(0.6))
    report = json.loads(report)
    assert report["outcome"] == "converged_loop", report["outcome"]
    radius = sum(math.hypot(x, y) for x, y in v.points()) / len(v)
    r_star = bisect(lambda r: r ** 3 - 4 * r + 2, 0.0, 1.0)
    assert abs(radius - r_star) < 1e-4, (radius, r_star)
    assert hloop.shooting_defect(hbt, v) < 1e-8

    cmp = json.loads(hloop.mountain_pass(one))
    assert abs(cmp["value"] - 0.5) < 1e-3, cmp["value"]

    assert hloop.near_optimizer_ratio() >= 0.99
    print("smoke test ok")


if __name__ == "__main__":
    main()
