import numpy as np
import pytest

from beamsim.measurement import Dataset, DatasetSample


def make_separable_dataset(
    n_samples=200,
    n_classes=4,
    input_shape=(8, 8),
    noise=0.05,
    seed=0,
    val_fraction=0.15,
    test_fraction=0.15,
):
    """Synthetic unimodal-RSRP-style dataset: one bright blob per class whose
    location encodes both the beam label and the (x, y) position target."""
    rng = np.random.default_rng(seed)
    h, w = input_shape
    centers = [(int((c + 0.5) * h / n_classes), int((c + 0.5) * w / n_classes)) for c in range(n_classes)]
    samples = []
    for i in range(n_samples):
        label = int(rng.integers(0, n_classes))
        cy, cx = centers[label]
        ys, xs = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
        blob = np.exp(-((ys - cy) ** 2 + (xs - cx) ** 2) / 4.0)
        features = blob + noise * rng.standard_normal((h, w))
        samples.append(
            DatasetSample(
                features=features,
                label_fine_beam=label,
                sector_id=int(rng.integers(1, 4)),
                position=(float(cx), float(cy), 1.5),
                ue_id=i,
            )
        )
    order = rng.permutation(n_samples)
    n_val = max(1, int(val_fraction * n_samples))
    n_test = max(1, int(test_fraction * n_samples))
    split = {
        "val": [int(i) for i in order[:n_val]],
        "test": [int(i) for i in order[n_val : n_val + n_test]],
        "train": [int(i) for i in order[n_val + n_test :]],
    }
    return Dataset(samples=samples, split=split, provenance={"synthetic": True})


@pytest.fixture
def separable_dataset():
    return make_separable_dataset()
