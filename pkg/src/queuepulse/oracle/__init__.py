from queuepulse.oracle.des import EventKind, EventRecord, des_simulate, validate_against_oracle

__all__ = ["EventKind", "EventRecord", "des_simulate", "validate_against_oracle"]
