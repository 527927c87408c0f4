"""
Offline registration and the operator dataset
=============================================

The registration authority is the only party that ever sees a vehicle's real
identity. It issues pseudonym credentials in bulk; the charging operator gets
a lookup table keyed by pseudonym, never by vehicle.
"""

from dwpt_auth.registration import (
    export_cspa_dataset,
    ra_setup,
    register_vehicle,
    storage_estimate,
    storage_report,
)
from dwpt_auth.ring import TIERS

ra = ra_setup(TIERS["test"], seed="registration-demo")
print("authority ready; operator:", ra.cspa_identity.decode())

# each registration burns one pseudonym slot per future session
creds = register_vehicle(ra, b"EV-demo-001", count=5)
print(f"\n{creds.vehicle_id.decode()} holds {len(creds.entries)} credentials")
for e in creds.entries[:3]:
    print(f"  slot {e.index}: pseudonym {e.pseudonym.hex()[:24]}...")

register_vehicle(ra, b"EV-demo-002", count=5)

# the exported dataset is keyed by pseudonym and carries shared secrets only
dataset = export_cspa_dataset(ra)
print(f"\ndataset rows: {len(dataset.entries)}")
row = next(iter(dataset.entries.values()))
print("row fields:", sorted(vars(row)))
leak = any(b"EV-demo" in r.z + r.w for r in dataset.entries.values())
print("vehicle ids leak into the shared secrets:", leak)

# nominal storage budget: bytes per vehicle and for a whole fleet
per_vehicle, fleet = storage_estimate(10**7, 3650, 96)
print(f"\n10-year budget at one session/day, 96 B records:")
print(f"  per vehicle: {per_vehicle:,} B (~{per_vehicle / 1e3:.1f} KB)")
print(f"  10M vehicles: {fleet:,} B (~{fleet / 1e12:.3f} TB)")

# and the concrete accounting for what this authority holds right now
print("\nthis registry:")
for key, value in storage_report(ra).items():
    print(f"  {key}: {value}")
