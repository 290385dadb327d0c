"""Where the spectral delay certificate does not carry over to mixed delays.

The certificate tests (I - K D)(P kron A^(tau+1)); its (tau+1)-th root is
exactly the radius of the augmented closed loop when every entry of P,
self-loops included, is delayed by tau. If self-loops are undelayed, or
delays differ per link, the closed loop can be unstable even though the
certificate holds, because the closed-loop weights are not nonnegative.
"""
import numpy as np

from delayest.augment import build_augmented_pa
from delayest.gain import closed_loop_augmented, design_gain, delay_test_bound
from delayest.linalg import spectral_radius
from delayest.model import assign_delays, generate_network, generate_system
from delayest.observability import dbar_c

seed, target = 18, np.linspace(1.01, 1.1, 20)[18]
sys = generate_system(6, 4, target, seed)
net = generate_network(4, "cycle", seed)
gain, report = design_gain(net.p, sys.a, sys.c_rows, seed=seed)
dbar = dbar_c(sys.c_rows)
print(f"plant radius {target:.4f}; certified delay {report.tau_star}")

print("\ndelay  certificate  all-delayed  self-undelayed")
for tau in range(report.tau_star.value + 1):
    rows = []
    for mode in ("homogeneous_full", "homogeneous"):
        pa = build_augmented_pa(net.p, sys.a, assign_delays(net, mode, tau))
        rows.append(spectral_radius(closed_loop_augmented(pa, gain, dbar)))
    print(f"{tau:5d}  {delay_test_bound(net.p, sys.a, gain, dbar, tau):11.6f}  {rows[0]:11.6f}  {rows[1]:14.6f}")

# noise-free error growth confirms the instability directly
pa = build_augmented_pa(net.p, sys.a, assign_delays(net, "homogeneous", 1))
m = closed_loop_augmented(pa, gain, dbar)
e = np.random.default_rng(0).standard_normal(m.shape[0])
norms = []
for _ in range(2000):
    e = m @ e
    norms.append(np.linalg.norm(e))
print(f"\nerror growth per step with one-step link delays: {(norms[-1] / norms[-1001]) ** (1 / 1000):.5f}")
