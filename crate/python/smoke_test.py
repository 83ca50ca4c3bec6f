"""Smoke test for the sdgm extension module.

Build and run:
    maturin build --release -m crates/python/Cargo.toml -o target/wheels
    pip install target/wheels/sdgm-*.whl
    python python/smoke_test.py
"""

import json
import math
import os
import tempfile

import sdgm

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def close(a, b, tol):
    return all(abs(x - y) <= tol for x, y in zip(a, b)) and len(a) == len(b)


def main():
    assert sdgm.expanded_dim(2) == 6
    assert sdgm.expand([2.0, 3.0]) == [1.0, 2.0, 3.0, 4.0, 6.0, 9.0]
    x, y = [0.5, -1.0], [2.0, 0.25]
    assert math.isclose(sdgm.poly_kernel(x, y), (0.5 * 2.0 - 0.25 + 1.0) ** 2)
    phi = sum(a * b for a, b in zip(sdgm.expand(x), sdgm.expand(y)))
    assert math.isclose(sdgm.phi_kernel(x, y), phi)

    w = sdgm.collapse_gaussian([0.0], [[1.0]])
    log_density = sum(a * b for a, b in zip(w, sdgm.expand([0.3])))
    assert math.isclose(math.exp(log_density), math.exp(-0.045) / math.sqrt(2 * math.pi), rel_tol=1e-12)

    xs, ys, names = sdgm.load_csv(os.path.join(ROOT, "data", "ripley", "ripley_train.csv"))
    assert len(xs) == 250 and names == ["0", "1"]
    model, report = sdgm.fit(xs, ys, json.dumps({"form": "dual", "components": [2]}))
    assert model.form == "dual" and model.num_classes == 2 and model.input_dim == 2
    assert report["final_metrics"]["train_error_rate"] < 0.2

    tx, ty, _ = sdgm.load_csv(os.path.join(ROOT, "data", "ripley", "ripley_test.csv"))
    wrong = sum(p != t for p, t in zip(model.predict_many(tx), ty))
    print(f"ripley test error {100.0 * wrong / len(ty):.2f}%, {model}")
    assert wrong / len(ty) < 0.12
    assert model.sparsity()["nonzero_weights"] <= 30

    original = model.to_original()
    for probe in tx[:50]:
        assert close(model.posterior(probe), original.posterior(probe), 1e-8)
        assert math.isclose(sum(model.posterior(probe)), 1.0)

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.json")
        model.save(path)
        loaded = sdgm.Model.load(path)
        assert loaded.to_json() == model.to_json()
        assert sdgm.Model.from_json(model.to_json()).predict(tx[0]) == model.predict(tx[0])

    (gx, gy), (hx, hy) = sdgm.synth_gmm(64, 32, seed=3)
    assert len(gx) == 64 and len(hx) == 32 and set(gy) == {0, 1}

    try:
        sdgm.expand([])
    except ValueError:
        pass
    else:
        raise AssertionError("empty input accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
