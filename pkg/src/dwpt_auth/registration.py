"""Registration authority: master keys, vehicle credentials, CSPA datasets.

The authority owns the IBE trapdoor and the symmetric group keys.  Vehicles
register once and receive a batch of unlinkable pseudonyms with per-pseudonym
secret shares and extracted keys; charging-station operators receive the
pseudonym-indexed dataset with no way back to vehicle identities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from dwpt_auth.errors import DuplicateRegistration, EmptyRegistry, ResampleExhausted
from dwpt_auth.ibe import (
    MasterPublicKey,
    MasterSecretKey,
    UserSecretKey,
    extract,
    master_key_gen,
)
from dwpt_auth.ring import RingParams
from dwpt_auth.rng import RandomSource
from dwpt_auth.symcrypto import SymmetricKey, derive_pseudonym

_MAX_PSEUDONYM_RESAMPLES = 64

#: Key roles for the two pre-shared group keys.
ROLE_CSPA_RSU = "group-cspa-rsu"
ROLE_RSU_CP = "group-rsu-cp"


@dataclass(frozen=True)
class CredentialEntry:
    """One pseudonym slot issued to a vehicle."""

    index: int
    blind: int  # per-slot public scalar a_i
    shared_point: int  # d_ev * a_i, the pseudonym preimage
    pseudonym: bytes
    z: bytes  # share known to EV and CSPA, sent in the first message
    w: bytes  # share never sent alone; CSPA proves knowledge via z + w
    usk: UserSecretKey  # decryption key for traffic addressed to the pseudonym


@dataclass
class VehicleCredentials:
    vehicle_id: bytes
    d_ev: int
    entries: list[CredentialEntry]
    spent: set[int] = field(default_factory=set)

    def pick_entry(self, index: int | None = None) -> CredentialEntry:
        """Entry to use for the next session: explicit index or first unspent."""
        if index is not None:
            if not 0 <= index < len(self.entries):
                raise EmptyRegistry(f"no pseudonym slot {index}")
            return self.entries[index]
        for entry in self.entries:
            if entry.index not in self.spent:
                return entry
        raise EmptyRegistry("all pseudonym slots spent")


@dataclass(frozen=True)
class DatasetEntry:
    pseudonym: bytes
    z: bytes
    w: bytes
    consumed: bool


@dataclass
class CspaDataset:
    """Everything the charging-station operator needs, and nothing more."""

    cspa_identity: bytes
    usk: UserSecretKey
    gk_cspa_rsu: SymmetricKey
    entries: dict[bytes, DatasetEntry]


@dataclass
class RegistrationAuthority:
    params: RingParams
    seed: bytes
    mpk: MasterPublicKey
    msk: MasterSecretKey
    cspa_identity: bytes
    gk_cspa_rsu: SymmetricKey
    gk_rsu_cp: SymmetricKey
    vehicles: dict[bytes, VehicleCredentials] = field(default_factory=dict)
    pseudonym_owner: dict[bytes, tuple[bytes, int]] = field(default_factory=dict)
    consumed: set[bytes] = field(default_factory=set)


def ra_setup(
    params: RingParams, seed, cspa_identity: bytes = b"CSPA-1"
) -> RegistrationAuthority:
    """Generate the authority state: trapdoor, group keys, empty registry.

    Deterministic in the seed; two authorities set up from the same seed and
    parameters are byte-identical once serialized.
    """
    root = RandomSource(seed)
    mpk, msk = master_key_gen(params, root.child("master-key"))
    groups = root.child("group-keys")
    return RegistrationAuthority(
        params=params,
        seed=root.key,
        mpk=mpk,
        msk=msk,
        cspa_identity=cspa_identity,
        gk_cspa_rsu=SymmetricKey(groups.bytes(32), ROLE_CSPA_RSU),
        gk_rsu_cp=SymmetricKey(groups.bytes(32), ROLE_RSU_CP),
    )


def register_vehicle(
    ra: RegistrationAuthority, vehicle_id: bytes, count: int
) -> VehicleCredentials:
    """Issue `count` pseudonym slots to a new vehicle.

    Each slot carries a fresh blind scalar a_i, the pseudonym
    H(ID || d_ev * a_i), two 32-byte secret shares, and the extracted key for
    the pseudonym identity.  Pseudonyms are unique across the whole registry;
    re-registering an id raises DuplicateRegistration.
    """
    if vehicle_id in ra.vehicles:
        raise DuplicateRegistration(f"vehicle {vehicle_id!r} already registered")
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = RandomSource(b"vehicle\x00" + ra.seed + vehicle_id)
    d_ev = int.from_bytes(rng.bytes(32), "big")
    entries = []
    for i in range(count):
        for _ in range(_MAX_PSEUDONYM_RESAMPLES):
            blind = int.from_bytes(rng.bytes(32), "big")
            point = d_ev * blind
            pseudonym = derive_pseudonym(vehicle_id, point)
            if pseudonym not in ra.pseudonym_owner:
                break
        else:
            raise ResampleExhausted("could not find an unused pseudonym")
        entry = CredentialEntry(
            index=i,
            blind=blind,
            shared_point=point,
            pseudonym=pseudonym,
            z=rng.bytes(32),
            w=rng.bytes(32),
            usk=extract(ra.msk, pseudonym),
        )
        entries.append(entry)
        ra.pseudonym_owner[pseudonym] = (vehicle_id, i)
    creds = VehicleCredentials(vehicle_id=vehicle_id, d_ev=d_ev, entries=entries)
    ra.vehicles[vehicle_id] = creds
    return creds


def export_cspa_dataset(ra: RegistrationAuthority) -> CspaDataset:
    """Pseudonym-indexed view for the CSPA, sorted for reproducible bytes.

    Contains pseudonyms, secret shares, consumption flags, the CSPA identity
    key, and the CSPA-RSU group key; vehicle identities and long-term secrets
    stay with the authority.
    """
    if not ra.vehicles:
        raise EmptyRegistry("no vehicles registered")
    entries = {}
    for pseudonym in sorted(ra.pseudonym_owner):
        vehicle_id, idx = ra.pseudonym_owner[pseudonym]
        slot = ra.vehicles[vehicle_id].entries[idx]
        entries[pseudonym] = DatasetEntry(
            pseudonym=pseudonym,
            z=slot.z,
            w=slot.w,
            consumed=pseudonym in ra.consumed,
        )
    return CspaDataset(
        cspa_identity=ra.cspa_identity,
        usk=extract(ra.msk, ra.cspa_identity),
        gk_cspa_rsu=ra.gk_cspa_rsu,
        entries=entries,
    )


def storage_estimate(
    vehicle_count: int, pseudonyms_per_vehicle: int, bytes_per_pseudonym_record: int
) -> tuple[int, int]:
    """Fleet-scale storage budget: (bytes per vehicle, bytes fleet-wide).

    A pseudonym record is the digest plus the two shares (32 + 64 bytes in
    the nominal accounting); ten years of daily pseudonyms for a ten-million
    vehicle fleet lands at a few terabytes on the operator side.
    """
    if vehicle_count < 1 or pseudonyms_per_vehicle < 1 or bytes_per_pseudonym_record < 1:
        raise ValueError("all arguments must be positive")
    per_vehicle = pseudonyms_per_vehicle * bytes_per_pseudonym_record
    return per_vehicle, per_vehicle * vehicle_count


def storage_report(ra: RegistrationAuthority) -> dict:
    """Byte budgets for the credential stores.

    `nominal` counts 32-byte fields only (pseudonym + two shares per slot,
    plus the blind scalar on the vehicle side); `serialized` measures the
    actual container encodings including extracted keys.
    """
    from dwpt_auth import keyfiles

    n_slots = len(ra.pseudonym_owner)
    per_vehicle = {
        vid.decode("latin-1"): len(creds.entries) for vid, creds in ra.vehicles.items()
    }
    vehicle_serialized = {
        vid.decode("latin-1"): len(keyfiles.vehicle_to_bytes(creds))
        for vid, creds in ra.vehicles.items()
    }
    dataset_bytes = (
        len(keyfiles.dataset_to_bytes(export_cspa_dataset(ra))) if ra.vehicles else 0
    )
    return {
        "slots_total": n_slots,
        "per_vehicle_slots": per_vehicle,
        "nominal_vehicle_bytes": {
            vid: 4 * 32 * n for vid, n in per_vehicle.items()
        },
        "nominal_dataset_bytes": 3 * 32 * n_slots,
        "serialized_vehicle_bytes": vehicle_serialized,
        "serialized_dataset_bytes": dataset_bytes,
    }
