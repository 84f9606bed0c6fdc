"""Project latent vectors to 2-D for visual inspection.

After training, nominal records and anomalies occupy different regions of
the bottleneck space, and the separation sharpens at the estimator's
hidden layer. This script trains briefly, projects both representations
onto their top-2 singular directions, and writes plottable CSVs.
"""
import numpy as np

import chadkit as ck
from chadkit.evaluate import latent_projection, write_projection_csv
from chadkit.synthdata import make_clustered_dataset, split_train_test

raw = make_clustered_dataset(4000, seed=4)
train_set, test_set = split_train_test(raw, 0.25, seed=4)
stats = ck.fit_normalize(train_set)
train_n, test_n = ck.apply_normalize(stats, train_set), ck.apply_normalize(stats, test_set)

model = ck.ChadModel(train_n.schema, ck.ModelConfig(), np.random.default_rng(4))
sched = ck.TrainSchedule(phase_epochs=(15, 6, 10), learning_rate=5e-3, batch_size=256)
ck.train(model, train_n, sched, ck.NegSamplerConfig(m=10))

labeled = ck.synth_anomalies(test_n, 0.15, np.random.default_rng(44))
latents = model.encode(labeled.cat, labeled.cont)

for name, vectors in (("bottleneck", latents),
                      ("estimator_hidden", model.estimator.penultimate(latents))):
    points, axes = latent_projection(vectors)
    path = f"projection_{name}.csv"
    write_projection_csv(path, points, labeled.labels)
    nominal = points[labeled.labels == 0]
    anom = points[labeled.labels == 1]
    gap = np.linalg.norm(nominal.mean(axis=0) - anom.mean(axis=0))
    spread = nominal.std(axis=0).mean()
    print(f"{name:17s}: wrote {path}; class-center gap {gap:.2f} "
          f"vs nominal spread {spread:.2f}")
print("plot x,y colored by label to see the separation")
