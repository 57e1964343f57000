"""Path-level features with a forest and an SVM, clean and perturbed.

The perturbation jitters each path the way an imperfect channel estimate
would. Both classifiers were trained on clean features.
"""
import numpy as np

from twinlink.features import FEATURE_NAMES, Perturbation, extract_features, feature_matrix, perturb_paths
from twinlink.harness import light_config, split_by_ratio
from twinlink.models import fit_forest, fit_svm
from twinlink.scene import generate_grid_dataset, sample_rng

cfg = light_config()
grid = generate_grid_dataset(cfg.scene_config())
train, _, test = split_by_ratio(grid, seed=0)
x_tr, y_tr = feature_matrix(train)
x_te, y_te = feature_matrix(test)
noisy = np.array([extract_features(perturb_paths(s.paths, sample_rng(0, 21, i), Perturbation())).as_array()
                  for i, s in enumerate(test)])

print("class means (LoS / NLoS):")
for j, name in enumerate(FEATURE_NAMES):
    print(f"  {name:13s} {x_tr[y_tr == 0, j].mean():11.4g} {x_tr[y_tr == 1, j].mean():11.4g}")

forest = fit_forest(x_tr, y_tr, cfg.forest)
svm = fit_svm(x_tr, y_tr, cfg.svm)
for name, m in (("forest", forest), ("svm", svm)):
    clean = np.mean(m.predict(x_te) == y_te)
    pert = np.mean(m.predict(noisy) == y_te)
    print(f"{name:6s} clean {clean:.3f}  perturbed {pert:.3f}")
print(f"svm: {len(svm.support_coef)} support vectors of {len(y_tr)}, SMO iterations {svm.iterations}")
