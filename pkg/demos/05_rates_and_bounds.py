"""Closed-form convergence rates, cutoff splittings, Coulomb quadratures.

Pure formula evaluation: the decay exponents of the three regimes (and the
improved variant), the norm bookkeeping of the level-set splitting of a
singular interaction, and the confined-Coulomb defect integrals with their
analytic leading behavior.
"""

import numpy as np

from confinedbose.bounds import (
    RateSpec,
    coulomb_confined_norms,
    potential_split,
    rate_exponent,
)

print("decay exponents (functional / trace-norm):")
for s in (1.3, 1.5, 1.7, 1.9, 2.0):
    base = rate_exponent(RateSpec("singular", s=s))
    fast = rate_exponent(RateSpec("singular-improved", s=s))
    print(f"  s={s:.2f}:  base {base.eta:.4f}/{base.eta_trace:.4f}"
          f"   improved {fast.eta:.4f}/{fast.eta_trace:.4f}")
for theta in (0.26, 7 / 24, 0.30, 0.32):
    r = rate_exponent(RateSpec("short-range", theta=theta))
    print(f"  theta={theta:.4f}:  short-range regime {r.eta:.4f}/{r.eta_trace:.4f}")

print("\nlevel-set splitting of a truncated Coulomb core (s = 1.8):")
n, L = 96, 3.0
h = L / n
ax = (np.arange(n) - n / 2 + 0.5) * h
X, Y, Z = np.meshgrid(ax, ax, ax, indexing="ij")
r = np.sqrt(X**2 + Y**2 + Z**2)
w = np.where(r < 1.0, 1.0 / np.maximum(r, 1e-12), 0.0)
for cutoff in (3.0, 10.0, 30.0):
    _, _, repd = potential_split(w, h**3, cutoff=cutoff, s=1.8)
    print(f"  c={cutoff:5.1f}:  ||w1||_s0 = {repd['w1_ls0']:.4f}"
          f" (bound {repd['w1_ls0_bound']:.4f}),"
          f"  ||w2||_2 = {repd['w2_l2']:.4f} (bound {repd['w2_l2_bound']:.4f})")

print("\nconfined-Coulomb defects over an eps ladder:")
for eps in (0.1, 0.05, 0.025):
    res = coulomb_confined_norms(eps)
    print(f"  eps={eps:6.3f}:  L1 defect {res.l1_defect:.5f}"
          f"  (defect/eps = {res.l1_defect / eps:.4f}, leading constant 2 pi)")
    print(f"             sup defect {res.linf_defect:.2e} (<= eps^2 = {eps**2:.1e})"
          f"   squared-kernel integral {res.log_divergence:.4f}")
print("  (the squared-kernel integral grows like 4 pi log(1/eps))")
