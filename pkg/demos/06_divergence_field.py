"""Writing a potential as the divergence of a vector field.

The free-space field xi = (-grad Newton kernel) * f satisfies div xi = f;
for radial sources Gauss's theorem pins the field exactly, and the Young
inequality ||xi||_q <= C ||f||_s with 1/q = 1/s - 1/3 shows up as stable
ratios across unrelated source profiles.
"""

import numpy as np
from scipy.integrate import quad

from confinedbose.bounds import divergence_residual, poisson_vector_field

n, L = 32, 12.0
h = L / n
ax = (np.arange(n) - n / 2 + 0.5) * h
X, Y, Z = np.meshgrid(ax, ax, ax, indexing="ij")
r2 = X**2 + Y**2 + Z**2
f = np.exp(-r2 / 2.0) * (r2 < 4.5**2)

print(f"divergence residual ||div xi - f|| / ||f|| = {divergence_residual(f, h):.2e}")

xi = poisson_vector_field(f, h)


def enclosed(r):
    val, _ = quad(lambda s: 4 * np.pi * s**2 * np.exp(-(s**2) / 2.0), 0.0, r)
    return val


print("\nGauss's theorem on the radial source:")
j = n // 2
for off in (2, 4, 6, 8, 10):
    i = j + off
    x, y, z = ax[i], ax[j], ax[j]
    rr = np.sqrt(x * x + y * y + z * z)
    exact = enclosed(rr) / (4 * np.pi * rr**2) * (x / rr)
    print(f"  r={rr:5.2f}:  xi_x = {xi[0][i, j, j]:+.6f}   exact {exact:+.6f}")

print("\nYoung-type ratios ||xi||_q / ||f||_s across profiles (s=1.5, q=3):")
s = 1.5
q = 1.0 / (1.0 / s - 1.0 / 3.0)
profiles = {
    "wide gaussian": np.exp(-r2 / 2.0) * (r2 < 20.0),
    "narrow gaussian": np.exp(-r2 / 0.5) * (r2 < 9.0),
    "shifted": np.exp(-((X - 1.5) ** 2 + Y**2 + Z**2) / 1.2)
    * (((X - 1.5) ** 2 + Y**2 + Z**2) < 9.0),
    "double bump": (np.exp(-((X - 1) ** 2 + Y**2 + Z**2))
                    + np.exp(-((X + 1) ** 2 + Y**2 + Z**2))) * (r2 < 16.0),
}
for name, src in profiles.items():
    field = poisson_vector_field(src, h)
    mag = np.sqrt(np.sum(field**2, axis=0))
    ratio = (np.sum(mag**q) * h**3) ** (1 / q) / (np.sum(np.abs(src) ** s) * h**3) ** (1 / s)
    print(f"  {name:16s} {ratio:.4f}")
