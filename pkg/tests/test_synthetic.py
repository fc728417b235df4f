import numpy as np

from tfcw.synthetic import synthetic_classification, synthetic_segmentation


def test_classification_set_balanced_and_seeded():
    a_train, a_test = synthetic_classification(n_train=10, n_test=6, points=64, seed=5)
    b_train, _ = synthetic_classification(n_train=10, n_test=6, points=64, seed=5)
    assert len(a_train) == 10 and len(a_test) == 6
    labels = [c.class_label for c in a_train.clouds]
    assert labels.count(0) == labels.count(1) == 5
    for x, y in zip(a_train.clouds, b_train.clouds):
        assert np.array_equal(x.points, y.points)


def test_segmentation_set_has_both_parts():
    train, test = synthetic_segmentation(n_train=3, n_test=2, points=128, seed=2)
    assert train.num_classes == 2
    for c in train.clouds + test.clouds:
        assert c.point_labels is not None
        present = set(np.unique(c.point_labels).tolist())
        assert present == {0, 1}
        assert c.n == 128


def test_segmentation_cap_sits_above_body():
    train, _ = synthetic_segmentation(n_train=1, n_test=1, points=256, seed=3)
    cloud = train.clouds[0]
    cap_z = cloud.points[cloud.point_labels == 1][:, 2]
    body_z = cloud.points[cloud.point_labels == 0][:, 2]
    assert cap_z.mean() > body_z.mean()
