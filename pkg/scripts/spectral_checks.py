"""Marchenko-Pastur and Haar sanity checks over a small parameter grid."""
import argparse

import numpy as np
from scipy import integrate, stats

from koopmuq.numkernel import RngHandle
from koopmuq.spectral import MPParams, eigenvalue_moments, haar_sample, mp_density, mp_sample


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--draws", type=int, default=10**6)
    ap.add_argument("--haar", type=int, default=10**4)
    ap.add_argument("--dim", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    root = RngHandle(args.seed)

    print("ratio sigma2      mass   m1 err   m2 err  sample mean/sigma2")
    for k, (ratio, sigma2) in enumerate((r, s) for r in (0.25, 0.5, 1.0) for s in (0.5, 1.0, 2.0)):
        p = MPParams(ratio, sigma2)
        mass, _ = integrate.quad(lambda x: mp_density(x, p), p.lower, p.upper, limit=200)
        m1, m2 = eigenvalue_moments(p, 2)
        x = mp_sample(root.child(k), p, args.draws)
        print(f"{ratio:5.2f} {sigma2:6.2f} {mass:9.6f} {m1 - sigma2:8.1e} "
              f"{m2 - sigma2**2 * (1 + ratio):8.1e}  {x.mean() / sigma2:.5f}")

    Qs = np.stack(haar_sample(root.child(100), args.dim, args.haar))
    ortho = np.max(np.abs(np.einsum("kji,kjl->kil", Qs, Qs) - np.eye(args.dim)))
    a = (args.dim - 1) / 2
    ks = stats.kstest((Qs[:, 0, 0] + 1) / 2, stats.beta(a, a).cdf).statistic
    print(f"Haar dim={args.dim} n={args.haar}: max orthogonality error {ortho:.2e}, "
          f"KS of Q11 vs exact marginal {ks:.4f}")


if __name__ == "__main__":
    main()
