import math

import numpy as np
import pytest

from feintchain.alerts import (
    FlowSchema,
    LineWarning,
    Protocol,
    RawAlert,
    format_fast_alert,
    format_ip,
    load_alert_log,
    load_flow_csv,
    parse_fast_alert,
    parse_ip,
    write_flow_csv,
)
from feintchain.errors import ParseError, SchemaError

ICMP_LINE = ("03/07-08:51:38.000000 [**] [1:469:1] ICMP PING [**] "
             "[Classification: Misc activity] [Priority: 3] "
             "{ICMP} 202.77.162.213 -> 172.16.115.20")


def test_parse_icmp_line():
    alert = parse_fast_alert(ICMP_LINE)
    assert alert.attack_type == "ICMP PING"
    assert alert.protocol is Protocol.ICMP
    assert alert.s_port is None and alert.d_port is None
    assert alert.classification == "Misc activity"
    assert alert.priority == 3
    assert format_ip(alert.s_ip) == "202.77.162.213"
    assert format_ip(alert.d_ip) == "172.16.115.20"


def test_parse_tcp_ports():
    line = ("01/02-03:04:05.000001 [**] [1:1:1] RSERVICES rsh root [**] "
            "[Classification: Bad Traffic] [Priority: 2] {TCP} 1.2.3.4:514 -> 5.6.7.8:514")
    alert = parse_fast_alert(line)
    assert alert.s_port == 514 and alert.d_port == 514
    assert alert.protocol is Protocol.TCP


def test_missing_priority_names_component():
    line = ICMP_LINE.replace(" [Priority: 3]", "")
    with pytest.raises(ParseError, match="priority"):
        parse_fast_alert(line)


def test_parse_errors_name_components():
    for mangled, word in [
        ("garbage", "timestamp"),
        (ICMP_LINE.replace("[Classification: Misc activity] ", ""), "classification"),
        (ICMP_LINE.replace("{ICMP} ", ""), "protocol"),
        (ICMP_LINE.replace(" -> 172.16.115.20", ""), "endpoint"),
    ]:
        with pytest.raises(ParseError, match=word):
            parse_fast_alert(mangled)


def test_parse_error_carries_byte_offset():
    line = ICMP_LINE.replace(" [Priority: 3]", " [Priority: x]")
    with pytest.raises(ParseError) as excinfo:
        parse_fast_alert(line)
    assert excinfo.value.offset == line.index("[Priority: x]")


def test_ipv6_rejected():
    line = ICMP_LINE.replace("202.77.162.213", "2001:db8::1")
    with pytest.raises(ParseError, match="IPv6"):
        parse_fast_alert(line)


def test_icmp_with_ports_rejected():
    line = ICMP_LINE.replace("202.77.162.213", "202.77.162.213:80")
    with pytest.raises(ParseError):
        parse_fast_alert(line)


def test_tcp_without_ports_rejected():
    line = ICMP_LINE.replace("{ICMP}", "{TCP}")
    with pytest.raises(ParseError, match="port"):
        parse_fast_alert(line)


def test_unknown_protocol_maps_to_other():
    line = ("01/02-03:04:05.000001 [**] [1:1:1] odd traffic [**] "
            "[Classification: c] [Priority: 1] {IGMP} 1.2.3.4:1 -> 5.6.7.8:2")
    assert parse_fast_alert(line).protocol is Protocol.OTHER


def test_priority_zero_rejected():
    line = ICMP_LINE.replace("[Priority: 3]", "[Priority: 0]")
    with pytest.raises(ParseError, match="priority"):
        parse_fast_alert(line)


def test_base_year_applies():
    a2000 = parse_fast_alert(ICMP_LINE, base_year=2000)
    a2017 = parse_fast_alert(ICMP_LINE, base_year=2017)
    assert a2017.timestamp - a2000.timestamp > 16 * 365 * 86400


def test_round_trip_random_alerts():
    rng = np.random.default_rng(4)
    protos = [Protocol.TCP, Protocol.UDP, Protocol.ICMP, Protocol.OTHER]
    for _ in range(300):
        proto = protos[rng.integers(len(protos))]
        ports = (None, None) if proto is Protocol.ICMP else \
            (int(rng.integers(0, 65536)), int(rng.integers(0, 65536)))
        alert = RawAlert(
            timestamp=float(946684800 + rng.integers(0, 300 * 86400))
            + int(rng.integers(0, 1_000_000)) / 1e6,
            protocol=proto,
            s_ip=int(rng.integers(0, 2**32)),
            d_ip=int(rng.integers(0, 2**32)),
            s_port=ports[0], d_port=ports[1],
            attack_type="SIG " + str(rng.integers(1000)),
            classification="class-" + str(rng.integers(10)),
            priority=int(rng.integers(1, 5)),
        )
        assert parse_fast_alert(format_fast_alert(alert)) == alert


def test_invariant_ports_iff_icmp():
    with pytest.raises(ValueError):
        RawAlert(0.0, Protocol.TCP, 1, 2, None, None, "t", "c", 1)
    with pytest.raises(ValueError):
        RawAlert(0.0, Protocol.ICMP, 1, 2, 80, 80, "t", "c", 1)
    with pytest.raises(ValueError):
        RawAlert(float("nan"), Protocol.ICMP, 1, 2, None, None, "t", "c", 1)


def test_parse_ip_validation():
    assert parse_ip("0.0.0.0") == 0
    assert parse_ip("255.255.255.255") == 0xFFFFFFFF
    for bad in ("1.2.3", "1.2.3.4.5", "256.1.1.1", "a.b.c.d"):
        with pytest.raises(ValueError):
            parse_ip(bad)


def test_load_alert_log_empty(tmp_path):
    path = tmp_path / "empty.log"
    path.write_text("", encoding="utf-8")
    alerts, skipped = load_alert_log(path)
    assert alerts == [] and skipped == []


def test_load_alert_log_mixed(tmp_path):
    path = tmp_path / "mixed.log"
    path.write_text("\n".join([ICMP_LINE, ICMP_LINE, "not an alert", ICMP_LINE]) + "\n",
                    encoding="utf-8")
    alerts, skipped = load_alert_log(path)
    assert len(alerts) == 3
    assert skipped == [LineWarning(3, 0, "malformed or missing timestamp")]


def test_load_alert_log_benchmark_count(tmp_path, benchmark_log):
    text, _ = benchmark_log
    path = tmp_path / "bench.log"
    path.write_text(text, encoding="utf-8")
    alerts, skipped = load_alert_log(path)
    assert len(alerts) == 17169
    assert not skipped


def _write_csv(path, rows, n_features=83):
    header = ",".join([f"f{i:02d}" for i in range(n_features)] + ["Label"])
    path.write_text("\n".join([header, *rows]) + "\n", encoding="utf-8")


def test_load_flow_csv_basic(tmp_path):
    path = tmp_path / "flows.csv"
    row1 = ",".join(["0.5"] * 83) + ",BENIGN"
    row2 = ",".join(["1.5"] * 83) + ",Bot"
    _write_csv(path, [row1, row2])
    ds = load_flow_csv(path)
    assert ds.class_names == ("BENIGN", "Bot")
    assert len(ds) == 2
    assert ds.normalization.shape == (83, 2)


def test_load_flow_csv_sanitization(tmp_path):
    path = tmp_path / "flows.csv"
    rows = [
        ",".join(["Infinity"] + ["1.0"] * 82) + ",A",
        ",".join(["-Infinity"] + ["1.0"] * 82) + ",A",
        ",".join(["NaN"] + ["1.0"] * 82) + ",A",
        ",".join(["2.0"] + ["1.0"] * 82) + ",A",
        ",".join(["4.0"] + ["1.0"] * 82) + ",A",
    ]
    _write_csv(path, rows)
    ds = load_flow_csv(path)
    col = ds.feature_matrix()[:, 0]
    assert col[0] == 4.0   # +inf -> observed max
    assert col[1] == 2.0   # -inf -> observed min
    assert col[2] == 0.0   # NaN -> 0
    assert np.all(np.isfinite(ds.feature_matrix()))


def test_constant_column_normalizes_to_zero(tmp_path):
    path = tmp_path / "flows.csv"
    rows = [",".join(["7.0"] * 83) + ",A", ",".join(["7.0"] * 83) + ",A"]
    _write_csv(path, rows)
    ds = load_flow_csv(path)
    assert np.all(ds.normalized_matrix() == 0.0)


def test_load_flow_csv_determinism(tmp_path, overlap_dataset):
    path = tmp_path / "flows.csv"
    write_flow_csv(overlap_dataset, path)
    ds1 = load_flow_csv(path)
    ds2 = load_flow_csv(path)
    assert ds1.class_names == ds2.class_names
    assert np.array_equal(ds1.feature_matrix(), ds2.feature_matrix())
    assert np.array_equal(ds1.normalization, ds2.normalization)
    assert ds1.labels() == ds2.labels()


def test_flow_csv_round_trip(tmp_path, overlap_dataset):
    path = tmp_path / "flows.csv"
    write_flow_csv(overlap_dataset, path)
    loaded = load_flow_csv(path)
    assert np.array_equal(loaded.feature_matrix(), overlap_dataset.feature_matrix())
    assert loaded.labels() == overlap_dataset.labels()


def test_load_flow_csv_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(SchemaError):
        load_flow_csv(empty)

    wrong = tmp_path / "wrong.csv"
    wrong.write_text("a,b,c\n1,2,x\n", encoding="utf-8")
    with pytest.raises(SchemaError, match="columns"):
        load_flow_csv(wrong)

    headed = tmp_path / "headeronly.csv"
    _write_csv(headed, [])
    with pytest.raises(SchemaError, match="no data rows"):
        load_flow_csv(headed)


def test_flow_schema_validation():
    with pytest.raises(SchemaError):
        FlowSchema(feature_columns=("a", "b"), label_column="Label")
