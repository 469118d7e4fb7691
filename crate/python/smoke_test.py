"""Exercise the storyline_py bindings end to end on a tiny synthetic world.

Build first:  pip install --no-build-isolation ./crates/python
Run:          python3 python/smoke_test.py
"""

import math
import os
import tempfile
from pathlib import Path

import storyline_py as sl

ROOT = Path(__file__).resolve().parent.parent
TINY = ROOT / "configs" / "tiny-world.conf"


def check_cli_and_models(work: Path) -> None:
    def cli(*args: str) -> None:
        code = sl.run([*args, "--run-log", str(work / "runs.jsonl")])
        assert code == 0, f"storyline {args} exited {code}"

    cli("synth", "--out-dir", str(work / "w"), "--config", str(TINY), "--seed", "5")
    cli("split", "--manifest", str(work / "w/manifest.jsonl"), "--output", str(work / "split.json"),
        "--set", "train=0.6", "--set", "val=0.2", "--set", "test=0.2")
    cli("train-tags", "--features", str(work / "w/features.shtf"), "--manifest", str(work / "w/manifest.jsonl"),
        "--split", str(work / "split.json"), "--output", str(work / "tags.ckpt"), "--set", "epochs=20")

    store = sl.FeatureStore.load(str(work / "w/features.shtf"))
    videos = store.videos()
    assert len(store) > 0 and store.dim == 32
    movie = next(v for v in videos if v.startswith("movie_"))
    assert len(store.get(movie, 0)) == store.dim

    model = sl.TagModel.load(str(work / "tags.ckpt"))
    genres, keywords = model.score_average(store, movie)
    assert len(genres) == len(model.genre_names()) and len(keywords) == len(model.keyword_names())
    assert all(0.0 <= s <= 1.0 for s in genres)

    response = model.shot_response(store, movie, model.genre_names()[0])
    assert [o for o, _ in response] == list(range(store.shot_count(movie)))

    try:
        model.shot_response(store, movie, "not-a-tag")
    except ValueError as e:
        assert "not-a-tag" in str(e)
    else:
        raise AssertionError("unknown tag accepted")

    assert sl.run(["synth", "--out-dir", str(work / "x"), "--set", "nope=1"]) == 1


def check_detector() -> None:
    width, height, per_shot = 16, 12, 20
    colours = [(220, 30, 30), (30, 200, 40), (40, 40, 210)]
    frames = bytearray()
    for r, g, b in colours:
        frames += bytes([r, g, b]) * (width * height * per_shot)
    shots = sl.detect_shots(width, height, bytes(frames))
    assert shots == [(0, 20), (20, 40), (40, 60)], shots


def check_metrics() -> None:
    scores = [[0.9, 0.1, 0.5], [0.2, 0.8, 0.3]]
    truths = [[0, 2], [2]]
    assert math.isclose(sl.recall_at_k(scores, truths, 1), 0.5)
    # label 0: AP 1, label 2: ranks 1 (video 0) and 2 (video 1) -> AP 1
    assert math.isclose(sl.mean_average_precision(scores, truths), 1.0)


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        check_cli_and_models(Path(tmp))
    check_detector()
    check_metrics()
    print("smoke test passed")


if __name__ == "__main__":
    os.chdir(ROOT)
    main()
