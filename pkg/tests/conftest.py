import numpy as np
import pytest
from PIL import Image


def pytest_runtest_logreport(report):
    # One visible pass/fail line per acceptance criterion.
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    status = "PASS" if report.passed else "FAIL"
    print(f"\n[{status}] {name}")


@pytest.fixture
def toy_corpus(tmp_path):
    """Factory writing a small labeled image corpus; returns (dir, labels_csv)."""

    def build(n_images=2, size=96, superclasses=("dog", "cat", "car", "boat")):
        corpus = tmp_path / "corpus"
        corpus.mkdir(exist_ok=True)
        rng = np.random.default_rng(1234)
        rows = ["id,path,true_superclass,dataset_tag"]
        for i in range(n_images):
            arr = rng.integers(40, 216, size=(size, size, 3), dtype=np.uint8)
            name = f"img{i:03d}.png"
            Image.fromarray(arr, "RGB").save(corpus / name)
            label = superclasses[i % len(superclasses)]
            rows.append(f"img{i:03d},{name},{label},in-distribution")
        labels = tmp_path / "labels.csv"
        labels.write_text("\n".join(rows) + "\n", encoding="utf-8")
        return corpus, labels

    return build
