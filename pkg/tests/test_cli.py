import csv
import datetime as dt
import hashlib
import json

import pytest

from customs_selection.cli import main, parse_cli

REFERENCE_COMMAND = (
    "--data synthetic --semi_supervised 0 --batch_size 512 --sampling hybrid "
    "--subsamplings DATE/bATE --weights 0.9/0.1 --mode scratch --train_from 20130101 "
    "--test_from 20130201 --test_length 7 --valid_length 28 --initial_inspection_rate 100 "
    "--final_inspection_rate 10 --epoch 10 --closs bce --rloss full --save 0 --numweeks 100 "
    "--inspection_plan fast_linear_decay"
).split()


def _replace(argv, flag, value):
    argv = list(argv)
    argv[argv.index(flag) + 1] = value
    return argv


class TestParse:
    def test_reference_command(self):
        args = parse_cli(REFERENCE_COMMAND)
        assert args.strategy.kind == "hybrid"
        assert [c.kind for c in args.strategy.children] == ["exploit", "bate"]
        assert args.strategy.weights == [0.9, 0.1]
        assert args.train_from == dt.date(2013, 1, 1) and args.test_from == dt.date(2013, 2, 1)
        assert args.numweeks == 100

    def test_defaults(self):
        args = parse_cli([])
        assert args.data == "synthetic" and args.batch_size == 512 and args.epoch == 10
        assert args.test_length == 7 and args.valid_length == 28
        assert args.initial_inspection_rate == 100 and args.final_inspection_rate == 10
        assert args.inspection_plan == "fast_linear_decay"

    @pytest.mark.parametrize(
        "argv",
        [
            ["--weights", "0.5/0.6"],
            ["--semi_supervised", "1"],
            ["--unknown_flag", "1"],
            ["--train_from", "2013-01-01"],
            ["--final_inspection_rate", "50", "--initial_inspection_rate", "20"],
            ["--sampling", "xgb"],
            ["--closs", "focal"],
            ["--drift", "3:melt:0.5"],
        ],
    )
    def test_usage_errors(self, argv, capsys):
        with pytest.raises(SystemExit) as exc:
            parse_cli(argv)
        assert exc.value.code == 2
        assert "error" in capsys.readouterr().err

    def test_weights_message(self, capsys):
        with pytest.raises(SystemExit):
            parse_cli(["--weights", "0.5/0.6"])
        assert "sum" in capsys.readouterr().err


def _small(tmp_path, *extra):
    return ["--numweeks", "4", "--epoch", "2", "--output_dir", str(tmp_path), "--sampling", "DATE", *extra]


class TestMain:
    def test_valid_run(self, tmp_path, capsys):
        assert main(_small(tmp_path)) == 0
        perf = tmp_path / "results" / "performances"
        csv_path = perf / "synthetic-exploit-seed0.csv"
        with open(csv_path) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 4
        assert (perf / "synthetic-exploit-seed0.precision.csv").exists()
        echo = json.loads((perf / "synthetic-exploit-seed0.config.json").read_text())
        assert echo["numweeks"] == 4 and echo["strategy"] == "exploit"
        out = capsys.readouterr().out
        assert "Norm-Rev" in out and "post-decay" in out

    def test_unreadable_path(self, tmp_path, capsys):
        missing = tmp_path / "nope.csv"
        assert main(["--data", str(missing), "--output_dir", str(tmp_path)]) != 0
        assert str(missing) in capsys.readouterr().err

    def test_csv_input_with_rejects(self, tmp_path):
        from customs_selection.ingest import write_declarations
        from customs_selection.synthgen import GeneratorConfig, generate

        items = generate(GeneratorConfig(num_items=4000, num_weeks=8, num_importers=500, num_tariff_codes=100, seed=1))
        data = tmp_path / "stream.csv"
        with open(data, "w", newline="") as fh:
            write_declarations(items, fh)
        lines = data.read_text().splitlines()
        lines.append(lines[1].replace(lines[1].split(",")[0], "BROKEN", 1).rsplit(",", 2)[0] + ",x,0")
        data.write_text("\n".join(lines) + "\n")
        assert main(["--data", str(data), *_small(tmp_path)]) == 0
        perf = tmp_path / "results" / "performances"
        assert (perf / "stream-exploit-seed0.csv").exists()
        assert (perf / "stream-exploit-seed0.rejects.csv").exists()

    def test_identical_runs(self, tmp_path):
        digests = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            assert main(_small(out, "--sampling", "hybrid", "--subsamplings", "DATE/gATE")) == 0
            perf = out / "results" / "performances"
            digests.append({p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in perf.glob("*.csv")})
        assert digests[0] == digests[1] and len(digests[0]) == 3

    def test_repeat_and_save(self, tmp_path):
        assert main(_small(tmp_path, "--repeat", "2", "--save", "1", "--numweeks", "2")) == 0
        perf = tmp_path / "results" / "performances"
        assert {p.name for p in perf.glob("*seed?.csv")} == {"synthetic-exploit-seed0.csv", "synthetic-exploit-seed1.csv"}
        assert len(list((tmp_path / "results" / "models" / "synthetic-exploit-seed1").glob("*.json"))) == 2

    def test_env_output_root(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CUSTOMS_SELECTION_OUTPUT", str(tmp_path))
        assert main(["--numweeks", "1", "--sampling", "random"]) == 0
        assert (tmp_path / "results" / "performances" / "synthetic-random-seed0.csv").exists()
