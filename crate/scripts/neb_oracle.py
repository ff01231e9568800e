#!/usr/bin/env python3
"""High-precision reference values for the empty-ball scenarios.

Design: first n points of the base-2 van der Corput sequence on [0, 1]
(0.5, 0.25, 0.75, ...). Target x = 2. Writes

  crates/kriglab/tests/data/neb_gaussian_oracle.csv     k(h) = exp(-h^2)
  crates/kriglab/tests/data/neb_exponential_oracle.csv  k(h) = exp(-|h|)

with the simple-kriging variance and Lebesgue constant at each n, computed
by Cholesky in mpmath (400 digits for the Gaussian kernel, 60 for the
exponential one).
"""

import csv
import pathlib

import mpmath as mp

OUT = pathlib.Path(__file__).resolve().parent.parent / "crates" / "kriglab" / "tests" / "data"


def van_der_corput(i):
    v, f = mp.mpf(0), mp.mpf(1) / 2
    while i:
        if i & 1:
            v += f
        i >>= 1
        f /= 2
    return v


def curve(k, sizes, x):
    pts = [van_der_corput(i) for i in range(1, max(sizes) + 1)]
    rows = []
    for n in sizes:
        p = pts[:n]
        K = mp.matrix(n, n)
        for i in range(n):
            for j in range(n):
                K[i, j] = k(p[i] - p[j])
        kx = mp.matrix([k(x - q) for q in p])
        L = mp.cholesky(K)
        y = mp.lu_solve(L, kx)  # L is triangular, so this is a forward solve
        w = mp.lu_solve(L.T, y)
        sigma2 = k(0) - sum(kx[i] * w[i] for i in range(n))
        lebesgue = sum(abs(w[i]) for i in range(n))
        rows.append((n, sigma2, lebesgue))
    return rows


def write(name, rows, digits):
    with open(OUT / name, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["n", "sigma2", "lebesgue"])
        for n, s, lam in rows:
            out.writerow([n, mp.nstr(s, digits, min_fixed=1, max_fixed=0), mp.nstr(lam, digits, min_fixed=1, max_fixed=0)])


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    mp.mp.dps = 400
    gauss = curve(lambda h: mp.exp(-h * h), [5, 10, 20, 40], mp.mpf(2))
    write("neb_gaussian_oracle.csv", gauss, 25)
    mp.mp.dps = 60
    expo = curve(lambda h: mp.exp(-abs(h)), [5, 10, 20, 40, 64, 128, 256], mp.mpf(2))
    write("neb_exponential_oracle.csv", expo, 25)


if __name__ == "__main__":
    main()
