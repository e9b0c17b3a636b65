"""IDM acceleration for v0=30, v=20, closing speed 5, gap 30 with the default
parameters (s0=1, T=0.5, a=3, b=2.5, delta=4)."""
import math

v0, v, dv, gap = 30.0, 20.0, 5.0, 30.0
s0, T, a, b, delta = 1.0, 0.5, 3.0, 2.5, 4.0
s_star = s0 + v * T + v * dv / (2 * math.sqrt(a * b))
print(repr(a * (1 - (v / v0) ** delta - (s_star / gap) ** 2)))
