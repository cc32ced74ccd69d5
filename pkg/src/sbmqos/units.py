"""Unit conversions. Every dB/linear conversion in the package goes through here."""
import numpy as np

# Analysis layer works in kilobits: theta is "per kbit" and D-functions are kbit/slot.
BIT_SCALE = 1000.0
DEFAULT_SLOT_SECONDS = 0.5e-3
SPEED_OF_LIGHT = 299_792_458.0


def db_to_linear(db):
    return np.power(10.0, np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm_to_mw(dbm):
    return db_to_linear(dbm)


def mw_to_dbm(mw):
    return linear_to_db(mw)


def mbps_to_bits_per_slot(mbps: float, slot_seconds: float = DEFAULT_SLOT_SECONDS) -> float:
    return mbps * 1e6 * slot_seconds


def slots_to_ms(slots, slot_seconds: float = DEFAULT_SLOT_SECONDS):
    return np.asarray(slots, dtype=float) * slot_seconds * 1e3


def ms_to_slots(ms: float, slot_seconds: float = DEFAULT_SLOT_SECONDS) -> int:
    slots = ms * 1e-3 / slot_seconds
    n = int(round(slots))
    if abs(slots - n) > 1e-9:
        raise ValueError(f"{ms} ms is not a whole number of {slot_seconds * 1e3} ms slots")
    return n
