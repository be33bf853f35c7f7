import json
import math
from pathlib import Path

import pytest

from ctxmt.cli import main
from ctxmt.stats import point_biserial

PAYLOADS_BY_COMMAND = {
    "train": ("tokenizer.json", "checkpoint.json", "train_log.csv"),
    "cxmi": ("cxmi.json", "cxmi_per_sample.csv"),
    "sweep": ("sweep.json", "sweep.csv"),
    "contrastive": ("contrastive.json",),
    "correlate": ("correlation.json",),
    "translate": ("hypotheses.txt", "bleu.json"),
}


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    """make-demo + one trained model, shared by the command tests."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    assert main([
        "make-demo", "--n-docs", "30", "--sentences-per-doc", "4",
        "--hint-fraction", "0.8", "--n-contrastive-pairs", "10",
        "--seed", "0", "--out-dir", str(data),
    ]) == 0

    config = {
        "model": {"layers": 1, "heads": 2, "model_dim": 32, "ff_dim": 64,
                  "max_positions": 96, "dropout": 0.0},
        "train": {"peak_lr": 2e-3, "warmup_steps": 20, "max_steps": 60,
                  "patience": 1000, "batch_size": 16, "valid_interval": 30},
        "augment": {"coword_p": 0.2, "k_min": 0, "k_max": 1,
                    "context_side": "target"},
    }
    cfg_path = root / "config.json"
    cfg_path.write_text(json.dumps(config))

    run = root / "run"
    assert main([
        "train", "--corpus", str(data / "train.jsonl"),
        "--valid", str(data / "valid.jsonl"),
        "--config", str(cfg_path), "--vocab-size", "96",
        "--seed", "0", "--out-dir", str(run),
    ]) == 0
    return {
        "root": root,
        "data": data,
        "config": cfg_path,
        "run": run,
        "checkpoint": run / "checkpoint.json",
        "tokenizer": run / "tokenizer.json",
    }


def model_args(work):
    return ["--checkpoint", str(work["checkpoint"]),
            "--tokenizer", str(work["tokenizer"])]


def test_make_demo_outputs(work):
    data = work["data"]
    for name in ("train.jsonl", "valid.jsonl", "contrastive.jsonl"):
        assert (data / name).exists()
    docs = [json.loads(l) for l in (data / "train.jsonl").read_text().splitlines()]
    assert len(docs) == 27  # 30 docs minus a tenth held out
    assert all(len(d["pairs"]) == 4 for d in docs)


def test_train_outputs(work):
    run = work["run"]
    for name in PAYLOADS_BY_COMMAND["train"]:
        assert (run / name).exists()
    meta = json.loads((run / "train.meta.json").read_text())
    assert meta["command"] == "train"
    assert "elapsed_seconds" in meta and "written_at_unix" in meta
    ckpt = json.loads((run / "checkpoint.json").read_text())
    assert ckpt["format"] == "ctxmt-checkpoint-v1"
    assert ckpt["trained_context"]["coword_p"] == 0.2
    log = (run / "train_log.csv").read_text().splitlines()
    assert log[0] == "# schema: train-log-v1"
    assert len(log) == 2 + 60


def test_cxmi_command(work, tmp_path):
    out = tmp_path / "cxmi"
    code = main([
        "cxmi", "--corpus", str(work["data"] / "valid.jsonl"),
        *model_args(work), "--side", "target", "--k", "1", "--per-word",
        "--out-dir", str(out),
    ])
    assert code == 0
    blob = json.loads((out / "cxmi.json").read_text())
    assert blob["schema"] == "cxmi-report-v1"
    assert blob["k"] == 1 and blob["side"] == "target"
    assert math.isfinite(blob["corpus_cxmi"])
    assert blob["per_word"]  # requested per-word gains are present
    csv_lines = (out / "cxmi_per_sample.csv").read_text().splitlines()
    assert csv_lines[0] == "# schema: cxmi-per-sample-v1"
    assert len(csv_lines) == 2 + blob["n_samples"]


def test_sweep_command(work, tmp_path):
    out = tmp_path / "sweep"
    # k-max 2 exceeds the k_max=1 the model was trained with
    with pytest.warns(UserWarning, match="trained with k_max=1"):
        code = main([
            "sweep", "--corpus", str(work["data"] / "valid.jsonl"),
            *model_args(work), "--side", "target", "--k-max", "2",
            "--out-dir", str(out),
        ])
    assert code == 0
    blob = json.loads((out / "sweep.json").read_text())
    ks = [p["k"] for p in blob["points"]]
    assert ks == [0, 1, 2]
    assert blob["points"][0]["cxmi"] == 0.0  # no context, no information gain


def test_contrastive_command(work, tmp_path):
    out = tmp_path / "contrastive"
    code = main([
        "contrastive", *model_args(work),
        "--set", str(work["data"] / "contrastive.jsonl"),
        "--k", "1", "--side", "target", "--out-dir", str(out),
    ])
    assert code == 0
    blob = json.loads((out / "contrastive.json").read_text())
    assert blob["schema"] == "contrastive-eval-v1"
    assert len(blob["rows"]) == 20
    assert blob["side"] == "target"


def _fake_eval_file(path, rows):
    payload = {
        "schema": "contrastive-eval-v1",
        "k": 1, "side": "both",
        "accuracy_contextual": 0.5, "accuracy_agnostic": 0.25,
        "n_ties_contextual": 0, "n_ties_agnostic": 0,
        "rows": [
            {"example_id": ex_id, "phenomenon": "pronoun",
             "rank_contextual": 1, "tie_contextual": False,
             "rank_agnostic": 2, "tie_agnostic": False,
             "indicator": ind, "per_sample_cxmi": val}
            for ex_id, val, ind in rows
        ],
    }
    path.write_text(json.dumps(payload))


def test_correlate_command(tmp_path):
    rows = [
        ("a", 0.9, 1), ("b", 0.7, 1), ("c", 0.1, 0),
        ("d", 0.2, 0), ("e", 0.8, 1), ("f", 0.05, 0),
    ]
    eval_path = tmp_path / "eval.json"
    _fake_eval_file(eval_path, rows)
    out = tmp_path / "corr"
    code = main([
        "correlate", "--values", str(eval_path),
        "--indicators", str(eval_path), "--out-dir", str(out),
    ])
    assert code == 0
    blob = json.loads((out / "correlation.json").read_text())
    expected = point_biserial([r[1] for r in rows], [r[2] for r in rows])
    assert blob["r_pb"] == pytest.approx(expected.r_pb)
    assert blob["p_value"] == pytest.approx(expected.p_value)
    assert blob["n"] == 6


def test_correlate_reports_missing_ids(tmp_path, capsys):
    values_path = tmp_path / "values.json"
    indicators_path = tmp_path / "indicators.json"
    _fake_eval_file(values_path, [("a", 0.9, 1), ("b", 0.1, 0)])
    _fake_eval_file(
        indicators_path, [("a", 0.9, 1), ("b", 0.1, 0), ("zz", 0.5, 1)]
    )
    code = main([
        "correlate", "--values", str(values_path),
        "--indicators", str(indicators_path),
        "--out-dir", str(tmp_path / "corr2"),
    ])
    assert code == 3
    assert "zz" in capsys.readouterr().err


def test_translate_command(work, tmp_path):
    # sources and references in the blank-line-separated text layout
    data = work["data"]
    docs = [
        json.loads(l) for l in (data / "valid.jsonl").read_text().splitlines()
    ][:2]
    src_path = tmp_path / "src.txt"
    ref_path = tmp_path / "ref.txt"
    src_path.write_text(
        "\n\n".join("\n".join(p[0] for p in d["pairs"]) for d in docs) + "\n"
    )
    ref_path.write_text(
        "\n\n".join("\n".join(p[1] for p in d["pairs"]) for d in docs) + "\n"
    )
    out = tmp_path / "translate"
    code = main([
        "translate", *model_args(work), "--src", str(src_path),
        "--ref", str(ref_path), "--tgt-context", "1", "--beam", "2",
        "--out-dir", str(out),
    ])
    assert code == 0
    hyp_docs = (out / "hypotheses.txt").read_text().strip("\n").split("\n\n")
    assert len(hyp_docs) == 2
    assert all(len(d.split("\n")) == 4 for d in hyp_docs)
    blob = json.loads((out / "bleu.json").read_text())
    assert blob["schema"] == "bleu-v1"
    assert 0.0 <= blob["bleu"] <= 100.0
    assert blob["n_sentences"] == 8


def test_translate_structure_mismatch(work, tmp_path):
    src_path = tmp_path / "src.txt"
    ref_path = tmp_path / "ref.txt"
    src_path.write_text("look at the dog\n")
    ref_path.write_text("a\nb\n")
    code = main([
        "translate", *model_args(work), "--src", str(src_path),
        "--ref", str(ref_path), "--out-dir", str(tmp_path / "t2"),
    ])
    assert code == 3


def test_augment_preview_command(work, tmp_path):
    out = tmp_path / "preview"
    code = main([
        "augment-preview", "--corpus", str(work["data"] / "valid.jsonl"),
        "--tokenizer", str(work["tokenizer"]), "--coword-p", "1.0",
        "--k-min", "1", "--k-max", "1", "--limit", "4",
        "--out-dir", str(out),
    ])
    assert code == 0
    text = (out / "preview.txt").read_text()
    assert text.count("example ") == 4
    assert "<mask>" in text  # p = 1 masks every current source token


def test_unknown_config_section_exits_2(work, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"optimizer": {}}))
    code = main([
        "train", "--corpus", str(work["data"] / "train.jsonl"),
        "--config", str(bad), "--out-dir", str(tmp_path / "out"),
    ])
    assert code == 2


def test_unknown_config_option_exits_2(work, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"model": {"n_layers": 2}}))
    code = main([
        "train", "--corpus", str(work["data"] / "train.jsonl"),
        "--config", str(bad), "--out-dir", str(tmp_path / "out"),
    ])
    assert code == 2


def test_missing_corpus_exits_3(work, tmp_path):
    code = main([
        "cxmi", "--corpus", str(tmp_path / "nope.jsonl"), *model_args(work),
        "--out-dir", str(tmp_path / "out"),
    ])
    assert code == 3


def test_divergent_training_exits_4(work, tmp_path):
    bad = tmp_path / "diverge.json"
    bad.write_text(json.dumps({
        "model": {"layers": 1, "heads": 2, "model_dim": 16, "ff_dim": 32},
        "train": {"peak_lr": 1e18, "warmup_steps": 1, "max_steps": 30,
                  "batch_size": 16},
    }))
    code = main([
        "train", "--corpus", str(work["data"] / "train.jsonl"),
        "--valid", str(work["data"] / "valid.jsonl"),
        "--config", str(bad), "--vocab-size", "96", "--seed", "0",
        "--out-dir", str(tmp_path / "out"),
    ])
    assert code == 4


def _run_twice(argv_tail, out_a, out_b, names):
    for out in (out_a, out_b):
        assert main(argv_tail + ["--out-dir", str(out)]) == 0
    for name in names:
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


def test_reports_are_byte_identical_across_reruns(work, tmp_path):
    data, run = work["data"], work["run"]

    _run_twice(
        ["train", "--corpus", str(data / "train.jsonl"),
         "--valid", str(data / "valid.jsonl"),
         "--config", str(work["config"]), "--vocab-size", "96", "--seed", "0"],
        tmp_path / "t1", tmp_path / "t2", PAYLOADS_BY_COMMAND["train"],
    )
    # the rerun reproduces the fixture-trained model exactly as well
    assert (tmp_path / "t1" / "checkpoint.json").read_bytes() == (
        run / "checkpoint.json"
    ).read_bytes()

    _run_twice(
        ["cxmi", "--corpus", str(data / "valid.jsonl"), *model_args(work),
         "--k", "1", "--bootstrap", "50"],
        tmp_path / "c1", tmp_path / "c2", PAYLOADS_BY_COMMAND["cxmi"],
    )
    _run_twice(
        ["contrastive", *model_args(work),
         "--set", str(data / "contrastive.jsonl"), "--k", "1"],
        tmp_path / "e1", tmp_path / "e2", PAYLOADS_BY_COMMAND["contrastive"],
    )
