"""Regenerate ``frozen.json`` from first principles at 50 digits.

Does not import the package: the obstacle is written out directly and the
tangent-line conditions are solved with mpmath.  Run from the repo root:

    python3 tests/oracle/generate.py
"""
import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 50
LAM, A = mp.mpf("0.5"), mp.mpf("0.4")
S = mp.sqrt(2 * LAM)
C_HAT = (1 + A) / 2
R_HAT = (1 - C_HAT) * (C_HAT - A)


def R(c):
    return (1 - c) * (c - A)


def H(y, c):
    core = mp.sqrt(y) * mp.log(y) / (2 * S)
    if y <= mp.e ** -2:
        return R(c) * core
    return -mp.e ** -1 * R_HAT / S - (R_HAT - R(c)) * core


def Hy(y, c):
    k = R(c) if y <= mp.e ** -2 else -(R_HAT - R(c))
    return k * (1 + mp.log(y) / 2) / (2 * S * mp.sqrt(y))


def two_sided(c, guess):
    # common tangent: equal slopes and the chord slope equals both; y1 = exp(t1)
    def f(t1, y2):
        y1 = mp.exp(t1)
        return [Hy(y1, c) - Hy(y2, c), H(y2, c) - H(y1, c) - Hy(y1, c) * (y2 - y1)]
    return mp.findroot(f, guess)


def single(c):
    # tangent from the origin
    return mp.findroot(lambda y: H(y, c) - y * Hy(y, c), (mp.mpf("1.5"), mp.e ** 2 - mp.mpf("0.01")),
                       solver="anderson")


def boundary(y):
    return mp.log(y) / (2 * S)


def main():
    out = {"lam": 0.5, "a": 0.4, "single": {}, "pair": {}}
    for c in ("0", "0.1", "0.2", "0.3", "0.35", "0.4"):
        y2 = single(mp.mpf(c))
        out["single"][c] = {"y2": float(y2), "beta_hat": float(boundary(y2))}
    guess = (mp.mpf(-5), mp.mpf("3.5"))
    for c in ("0.45", "0.5", "0.55", "0.6", "0.65", "0.69"):
        sol = two_sided(mp.mpf(c), guess)
        y1, y2 = mp.exp(sol[0]), sol[1]
        out["pair"][c] = {"y1": float(y1), "y2": float(y2),
                          "gamma_hat": float(boundary(y1)), "beta_hat": float(boundary(y2))}
        guess = (sol[0], sol[1])
    # y2 as c -> c_hat, approached along the two-sided branch
    for k in range(3, 13):
        sol = two_sided(C_HAT - mp.mpf(10) ** -k, guess)
        guess = (sol[0], sol[1])
    out["chat_limit_y2"] = float(guess[1])
    Path(__file__).with_name("frozen.json").write_text(json.dumps(out, indent=2) + "\n")


if __name__ == "__main__":
    main()
