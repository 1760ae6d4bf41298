"""NSL-KDD column schema and the attack-name -> category table."""

from __future__ import annotations

from enum import Enum

# The 41 feature columns in file order. Data files carry two extra trailing
# columns (label, difficulty); difficulty is discarded at parse time.
FEATURE_COLUMNS: tuple[str, ...] = (
    "duration",
    "protocol_type",
    "service",
    "flag",
    "src_bytes",
    "dst_bytes",
    "land",
    "wrong_fragment",
    "urgent",
    "hot",
    "num_failed_logins",
    "logged_in",
    "num_compromised",
    "root_shell",
    "su_attempted",
    "num_root",
    "num_file_creations",
    "num_shells",
    "num_access_files",
    "num_outbound_cmds",
    "is_host_login",
    "is_guest_login",
    "count",
    "srv_count",
    "serror_rate",
    "srv_serror_rate",
    "rerror_rate",
    "srv_rerror_rate",
    "same_srv_rate",
    "diff_srv_rate",
    "srv_diff_host_rate",
    "dst_host_count",
    "dst_host_srv_count",
    "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate",
    "dst_host_srv_serror_rate",
    "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
)

N_FILE_COLUMNS = len(FEATURE_COLUMNS) + 2  # + label + difficulty

CATEGORICAL_FEATURES: tuple[str, ...] = ("protocol_type", "service", "flag")

# Encoded as raw 0/1 values, in this fixed order.
BOOLEAN_FEATURES: tuple[str, ...] = (
    "land",
    "logged_in",
    "is_guest_login",
    "is_host_login",
)

CONTINUOUS_FEATURES: tuple[str, ...] = tuple(
    c
    for c in FEATURE_COLUMNS
    if c not in CATEGORICAL_FEATURES and c not in BOOLEAN_FEATURES
)


class AttackCategory(str, Enum):
    NORMAL = "Normal"
    DOS = "DoS"
    PROBE = "Probe"
    U2R = "U2R"
    R2L = "R2L"


DOS_ATTACKS = (
    "apache2",
    "back",
    "land",
    "mailbomb",
    "neptune",
    "pod",
    "processtable",
    "smurf",
    "teardrop",
    "udpstorm",
    "worm",
)

PROBE_ATTACKS = (
    "ipsweep",
    "mscan",
    "nmap",
    "portsweep",
    "saint",
    "satan",
)

U2R_ATTACKS = (
    "buffer_overflow",
    "httptunnel",
    "loadmodule",
    "perl",
    "ps",
    "rootkit",
    "sqlattack",
    "xterm",
)

R2L_ATTACKS = (
    "ftp_write",
    "guess_passwd",
    "imap",
    "multihop",
    "phf",
    "snmpgetattack",
    "snmpguess",
    "spy",
    "warezclient",
    "warezmaster",
    "xlock",
    "xsnoop",
)

# Two rare remote-to-local attacks appear only in the NSL-KDD test file and
# are missing from the usual category table; they are mapped here so parsing
# the full files stays total. Kept separate for auditability.
EXTRA_R2L_ATTACKS = ("named", "sendmail")

ATTACK_CATEGORIES: dict[str, AttackCategory] = {
    **{name: AttackCategory.DOS for name in DOS_ATTACKS},
    **{name: AttackCategory.PROBE for name in PROBE_ATTACKS},
    **{name: AttackCategory.U2R for name in U2R_ATTACKS},
    **{name: AttackCategory.R2L for name in R2L_ATTACKS},
    **{name: AttackCategory.R2L for name in EXTRA_R2L_ATTACKS},
}

NORMAL_LABEL = "normal"
