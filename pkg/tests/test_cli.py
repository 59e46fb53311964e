import json

from minordecomp.cli import main


def test_gen_then_decompose_then_verify(tmp_path):
    gpath = str(tmp_path / "g.txt")
    dpath = str(tmp_path / "d.json")
    tpath = str(tmp_path / "trace.csv")
    assert main(["gen", "grid:6x6", "-o", gpath]) == 0
    assert main(["decompose", "edt", gpath, "--eps", "1/4",
                 "-o", dpath, "--trace-csv", tpath]) == 0
    data = json.loads(open(dpath).read())
    assert data["decomposition"]["clusters"]
    assert "config_hash" in data
    assert open(tpath).readline().strip() == "iter,eps,D,T,charged_rounds"
    assert main(["verify", gpath, "--edt", dpath, "--eps", "1/4"]) == 0


def test_verify_corrupted_exits_2(tmp_path):
    gpath = str(tmp_path / "g.txt")
    dpath = str(tmp_path / "d.json")
    main(["gen", "path:12", "-o", gpath])
    main(["decompose", "edt", gpath, "--eps", "1/3", "-o", dpath])
    data = json.loads(open(dpath).read())
    # drop a vertex entirely: the partition no longer covers the graph
    cl = data["decomposition"]["clusters"]
    cl[0]["members"].pop()
    open(dpath, "w").write(json.dumps(data))
    out = str(tmp_path / "rep.json")
    assert main(["verify", gpath, "--edt", dpath, "--eps", "1/3",
                 "-o", out]) == 2


def test_usage_error_exit_1(tmp_path):
    assert main(["decompose", "edt", "no-such-file.txt", "--eps", "1/4"]) == 1
    assert main(["gen", "unknown:5", "-o", str(tmp_path / "x.txt")]) == 1


def test_approx_cli(tmp_path):
    out = str(tmp_path / "r.json")
    assert main(["approx", "mis", "cycle:6", "--eps", "3/10", "-o", out]) == 0
    data = json.loads(open(out).read())
    assert data["opt"] == 3 and data["feasible"]


def test_test_cli(tmp_path):
    out = str(tmp_path / "v.json")
    assert main(["test", "planarity", "grid:5x5", "--eps", "1/4", "-o", out]) == 0
    data = json.loads(open(out).read())
    assert data["accepted"] is True and data["rejects"] == []


def test_route_cli(tmp_path):
    out = str(tmp_path / "r.json")
    assert main(["route", "balance", "star:8", "-o", out]) == 0
    data = json.loads(open(out).read())
    assert data["fraction"] == "1" and data["delivered"] == 16


def test_bench_csv(tmp_path):
    cfg = tmp_path / "bench.json"
    cfg.write_text(json.dumps({"runs": [
        {"graph": "grid:5x5", "eps": "1/4"},
        {"graph": "path:30", "eps": "1/4"},
    ]}))
    out = str(tmp_path / "bench.csv")
    assert main(["bench", "--config", str(cfg), "-o", out]) == 0
    lines = open(out).read().splitlines()
    assert lines[0].startswith("instance,n,m,eps")
    assert len(lines) == 3

    empty = tmp_path / "empty.json"
    empty.write_text(json.dumps({"runs": []}))
    out2 = str(tmp_path / "b2.csv")
    assert main(["bench", "--config", str(empty), "-o", out2]) == 0
    assert len(open(out2).read().splitlines()) == 1


def test_bench_deterministic(tmp_path):
    cfg = tmp_path / "bench.json"
    cfg.write_text(json.dumps({"runs": [{"graph": "tree:25", "eps": "1/4",
                                         "seed": 3}]}))
    outs = []
    for name in ("a.csv", "b.csv"):
        out = str(tmp_path / name)
        assert main(["bench", "--config", str(cfg), "-o", out]) == 0
        text = open(out).read()
        outs.append("\n".join(line.rsplit(",", 1)[0]
                              for line in text.splitlines()))  # drop wall time
    assert outs[0] == outs[1]


def test_reports_embed_config_hash(tmp_path):
    out1 = str(tmp_path / "r1.json")
    out2 = str(tmp_path / "r2.json")
    main(["approx", "mis", "path:10", "--eps", "3/10", "-o", out1])
    main(["approx", "mis", "path:10", "--eps", "3/10", "-o", out2])
    assert open(out1).read() == open(out2).read()  # byte-identical reruns
