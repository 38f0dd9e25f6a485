"""pickleguard: static scanning for pickle-based ML model files."""

__version__ = "0.1.0"

from .pickle_vm import (  # noqa: E402,F401
    CallEvent,
    ImportRef,
    OpcodeEvent,
    StreamAnomaly,
    disassemble,
    detect_legacy_magic,
    emulate,
)
from .container_walker import (  # noqa: E402,F401
    ContainerNode,
    FormatTag,
    LoadingPathLabel,
    WalkConfig,
    label_path,
    sniff,
    tolerant_zip_read,
    unwrap,
)
from .risk_engine import (  # noqa: E402,F401
    Finding,
    GadgetDatabase,
    Policy,
    RiskCategory,
    Severity,
    Verdict,
    aggregate,
    classify,
    load_gadget_db,
)
from .scan import ScanConfig, scan_bytes, scan_file  # noqa: E402,F401
from .report import ScanReport, exit_code, render  # noqa: E402,F401
