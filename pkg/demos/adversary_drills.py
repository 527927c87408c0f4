"""
Adversary drills
================

Five scripted attacks against a live lane: replayed chain values, replayed
handshakes, forged arrival messages, double-spent pad credits, and stale
deliveries. Every adversary action must bounce with a named reason.
"""

from dwpt_auth.netsim import SCENARIOS, run_adversary
from dwpt_auth.registration import ra_setup, register_vehicle
from dwpt_auth.ring import TIERS

ra = ra_setup(TIERS["default"], seed="drill-demo")
creds = register_vehicle(ra, b"EV-drill", count=2)

for scenario in sorted(SCENARIOS):
    report = run_adversary(scenario, ra, creds, n_pads=3, seed="drill")
    verdict = "CLEAN" if report.passed else "BREACH"
    print(f"\n[{verdict}] {scenario} (honest accepts before attack: "
          f"{report.honest_accepts})")
    for a in report.actions:
        mark = "ACCEPTED" if a.accepted else "rejected"
        print(f"  {mark}: {a.description} @ {a.target} -> {a.reason}")

# the drills run on a sandboxed copy; the real wallet is untouched
print("\nslots spent on the real credentials:", sorted(creds.spent))
