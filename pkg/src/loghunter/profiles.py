"""Built-in dataset profiles for the three supported network-log schemas."""

from __future__ import annotations

from .schema import ClassEntry, ClassRegistry, ColumnSpec, DatasetProfile


def _cols(rows):
    return tuple(ColumnSpec(name, kind, storage) for name, kind, storage in rows)


def _registry(rows):
    return ClassRegistry(tuple(ClassEntry(name, tuple(tactics)) for name, tactics in rows))


UWF2022 = DatasetProfile(
    name="uwf2022",
    columns=_cols([
        ("resp_pkts", "numeric", "int64"),
        ("service", "categorical", "text"),
        ("orig_ip_bytes", "numeric", "int64"),
        ("local_resp", "boolean", "bool"),
        ("missed_bytes", "numeric", "int64"),
        ("proto", "categorical", "text"),
        ("duration", "numeric", "float64"),
        ("conn_state", "categorical", "text"),
        ("dest_ip_zeek", "ipv4", "text"),
        ("orig_pkts", "numeric", "int64"),
        ("resp_ip_bytes", "numeric", "int64"),
        ("dest_port_zeek", "numeric", "int64"),
        ("orig_bytes", "numeric", "float64"),
        ("local_orig", "boolean", "bool"),
        ("datetime", "timestamp", "text"),
        ("resp_bytes", "numeric", "float64"),
        ("src_port_zeek", "numeric", "int64"),
        ("ts", "timestamp", "float64"),
        ("src_ip_zeek", "ipv4", "text"),
    ]),
    label_column="label_tactic",
    classes=_registry([
        ("Benign traffic", ["Desired traffic"]),
        ("Reconnaissance", ["T1590", "T1592", "T1595", "T1595.001", "T1595.002"]),
        ("Discovery", ["T1046", "T1135"]),
        ("Credential Access", ["T1003.002", "T1003.008", "T1110", "T1552"]),
        ("Privilege Escalation", ["T1068"]),
        ("Exfiltration", ["T1048.001"]),
        ("Lateral Movement", ["T1021", "T1021.004"]),
        ("Resource Development", ["T1587.004", "T1588.002"]),
        ("Defense Evasion", ["T1070", "T1070.002", "T1070.003", "T1564"]),
        ("Initial Access", ["T1189", "T1190"]),
        ("Persistence", ["T1098", "T1136", "T1136.001"]),
    ]),
)


CICIDS2017 = DatasetProfile(
    name="cicids2017",
    columns=_cols([
        ("Destination Port", "numeric", "int64"),
        ("Flow Duration", "numeric", "int64"),
        ("Total Fwd Packets", "numeric", "int64"),
        ("Total Backward Packets", "numeric", "int64"),
        ("Total Length Of Fwd Packets", "numeric", "int64"),
        ("Total Length Of Bwd Packets", "numeric", "int64"),
        ("Flow Bytes/s", "numeric", "float64"),
        ("Flow Packets/s", "numeric", "float64"),
        ("Fwd Header Length", "numeric", "int64"),
        ("Bwd Header Length", "numeric", "int64"),
        ("Fwd Packets/s", "numeric", "float64"),
        ("Bwd Packets/s", "numeric", "float64"),
        ("Min Packet Length", "numeric", "int64"),
        ("Max Packet Length", "numeric", "int64"),
        ("Avg Fwd Segment Size", "numeric", "float64"),
        ("Avg Bwd Segment Size", "numeric", "float64"),
        ("Init Win Bytes Forward", "numeric", "int64"),
        ("Init Win Bytes Backward", "numeric", "int64"),
        ("Act Data Pkt Fwd", "numeric", "int64"),
        ("Min Seg Size Forward", "numeric", "int64"),
    ]),
    label_column="Label",
    classes=_registry([
        ("Benign", ["Desired traffic"]),
        ("DoS Hulk", ["T1498"]),
        ("PortScan", ["T1046"]),
        ("DDoS", ["T1498", "T1498.002"]),
        ("DoS GoldenEye", ["T1498"]),
        ("FTP-Patator", ["T1110", "T1114"]),
        ("SSH-Patator", ["T1110", "T1114"]),
        ("DoS slowloris", ["T1498"]),
        ("DoS Slowhttptest", ["T1498"]),
        ("Bot", ["T1508"]),
        ("Web Attack Brute Force", ["T1110"]),
        ("Web Attack XSS", ["T1059"]),
        ("Infiltration", ["T1566"]),
        ("Web Attack Sql Injection", ["T1110"]),
        ("Heartbleed", ["T1504"]),
    ]),
)


TONIOT = DatasetProfile(
    name="toniot",
    columns=_cols([
        ("src_ip", "ipv4", "text"),
        ("src_port", "numeric", "int64"),
        ("dst_ip", "ipv4", "text"),
        ("dst_port", "numeric", "int64"),
        ("proto", "categorical", "text"),
        ("duration", "numeric", "float64"),
        ("src_bytes", "numeric", "int64"),
        ("dst_bytes", "numeric", "int64"),
        ("conn_state", "categorical", "text"),
        ("src_pkts", "numeric", "int64"),
        ("src_ip_bytes", "numeric", "int64"),
        ("dst_pkts", "numeric", "int64"),
        ("dst_ip_bytes", "numeric", "int64"),
    ]),
    label_column="label",
    classes=_registry([
        ("Benign", ["Desired traffic"]),
        ("Scanning", ["T1595"]),
        ("DoS", ["T1498"]),
        ("Injection", ["T1203"]),
        ("Ddos", ["T1498", "T1498.002"]),
        ("Password", ["T1110"]),
        ("Xss", ["T1189"]),
        ("Ransomware", ["T1486"]),
        ("Backdoor", ["T1098"]),
        ("Mitm", ["T1557"]),
    ]),
)


def builtin_profiles() -> list[DatasetProfile]:
    """The three built-in schemas, in fixed order."""
    return [UWF2022, CICIDS2017, TONIOT]


def builtin_profile(name: str) -> DatasetProfile:
    for p in builtin_profiles():
        if p.name == name:
            return p
    raise KeyError(name)
