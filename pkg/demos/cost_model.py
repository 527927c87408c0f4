"""
Analytic cost model
===================

Per-message computation costs on 32 MHz vehicle hardware, on-air times on the
channels each message actually crosses, and the pad length a lane needs so
authentication finishes before the vehicle leaves the first pad.
"""

from fractions import Fraction

from dwpt_auth.netsim import (
    TimingModel,
    cost_asymptotic,
    cost_first_pad,
    message_cost_rows,
    pad_length_m,
    sending_time_us,
)

tm = TimingModel.rounded_table()

print(f"{'msg':4} {'comp_ms':>8} {'send_us':>8} {'bytes':>6}  channel")
for row in message_cost_rows(10, tm):
    print(f"{row['message']:4} {float(row['computation_ms']):8.2f} "
          f"{float(row['sending_us']):8.2f} {row['bytes']:6d}  {row['channel']}")

# closed forms: setup plus first chain value, then one hash per extra pad
for n in (1, 10, 100, 200):
    print(f"n={n:3d}: first pad {float(cost_first_pad(n, tm)):7.2f} ms, "
          f"recompute-from-base total {float(cost_asymptotic(n, tm)):8.2f} ms")

# accounting is exact rational arithmetic, floats only at the edges
assert cost_first_pad(100, tm) == Fraction("317.12")
print("\ncost_first_pad(100) == 317.12 exactly:", True)

# the two timing modes agree to better than a percent
cycles = TimingModel.cycle_accurate()
for kind in ("m1", "m4"):
    a, b = tm.message_cost_ms(kind, 1), cycles.message_cost_ms(kind, 1)
    print(f"{kind}: table {float(a):.2f} ms vs cycle-accurate {float(b):.6f} ms")

# lane geometry: how long each pad must be so the handshake fits on pad 1
speeds = (10, 30, 50, 70, 90, 110, 130)
counts = (10, 50, 100, 150, 200)
print("\npad length (m) by speed (km/h) and pads per lane")
print("km/h | " + "".join(f"{f'n={n}':>8}" for n in counts))
for v in speeds:
    cells = "".join(f"{float(pad_length_m(v, n, tm)):8.2f}" for n in counts)
    print(f"{v:4d} | {cells}")
