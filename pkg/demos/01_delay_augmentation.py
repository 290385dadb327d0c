"""How link delays enlarge the state and what that does to the spectrum.

A delayed linear recursion z_k = sum_r W_r z_{k-1-r} becomes a delay-free
one on the stacked history. When every entry carries the same delay the
spectral radius is exactly the (tau+1)-th root of the original one. With
mixed delays it stays below that root only for nonnegative weights.
"""
import numpy as np

from delayest.augment import build_augmented, verify_delay_roots
from delayest.linalg import spectral_radius
from delayest.model import DelayProfile, SensorNetwork, assign_delays

net = SensorNetwork(np.array([[0.6, 0.4, 0.0],
                              [0.0, 0.7, 0.3],
                              [0.5, 0.0, 0.5]]))
print("consensus weights P:\n", net.p)

# consensus on delayed data: the augmented matrix stays stochastic
prof = assign_delays(net, "heterogeneous", 4, seed=1)
print("link delays (receiver, sender) -> delay:", dict(prof.tau))
op = build_augmented(net.p, prof)
print(f"augmented size {op.matrix.shape}, row sums in "
      f"[{op.matrix.sum(1).min():.15f}, {op.matrix.sum(1).max():.15f}], "
      f"spectral radius {spectral_radius(op.matrix):.15f}")

# a contraction keeps contracting, just more slowly per step
w = 0.8 * net.p
for tau in (0, 2, 5, 10):
    rep = verify_delay_roots(w, tau)
    print(f"every entry delayed by {tau:2d}: radius {rep.rho_augmented:.6f}, "
          f"root bound {rep.bound:.6f}")

# mixed delays on a signed matrix: the root bound can break
a = np.array([[0.8, 0.8], [-0.9, -0.9]])
rep = verify_delay_roots(a, DelayProfile({(0, 0): 1, (0, 1): 1, (1, 0): 0, (1, 1): 0}, 1))
print(f"signed matrix with radius {rep.rho_base:.2f}, first row delayed: "
      f"augmented radius {rep.rho_augmented:.4f} vs bound {rep.bound:.4f}")
