"""Independent oracle for the ideal predictor's amplification slope.

Reads a run directory produced by `structamp synth` (data/model.json and
data/dataset.csv) and recomputes, without any of the Rust code:

  * factor posterior means E[f | z] = S L' (L S L' + D)^-1 z, where z holds
    level midpoints and D adds the midpoint rounding variance to the
    response noise,
  * target item predictions mapped back onto the response scale,
  * sub-scale scores, Big Five x target-sub-scale correlations on both
    sides, and the OLS slope of model r on human r.

Usage: ideal_k_oracle.py RUN_DIR [RUN_DIR ...]   (prints JSON)
"""

import csv
import json
import sys

import numpy as np


def item_specs(registry):
    return {it["item_id"]: it for s in registry["scales"] for it in s["items"]}


def marginal_sd(loading, latent_var, noise):
    return np.sqrt(loading**2 * latent_var + noise**2)


def midpoint(value, spec, sd):
    lo, hi = spec["response_min"], spec["response_max"]
    levels = hi - lo + 1
    v = lo + hi - value if spec["reverse_scored"] else value
    return sd * ((v - lo + 0.5) * 6.0 / levels - 3.0)


def to_scale(z, spec, sd):
    lo, hi = spec["response_min"], spec["response_max"]
    levels = hi - lo + 1
    v = lo + levels * (z / sd + 3.0) / 6.0 - 0.5
    return lo + hi - v if spec["reverse_scored"] else v


def scored(value, spec):
    return spec["response_min"] + spec["response_max"] - value if spec["reverse_scored"] else value


def oracle(run_dir):
    meta = json.load(open(f"{run_dir}/data/model.json"))
    model, registry = meta["model"], meta["registry"]
    specs = item_specs(registry)
    factors = model["factors"]
    cov = np.array(model["factor_covariance"])
    noise = model["response_noise_std"]
    paths = {p["subscale_id"]: p for p in model["paths"]}

    with open(f"{run_dir}/data/dataset.csv") as fh:
        rows = list(csv.DictReader(fh))

    inputs = model["input_items"]
    loadings = np.zeros((len(inputs), len(factors)))
    d = np.zeros(len(inputs))
    in_sd = []
    for i, it in enumerate(inputs):
        f = factors.index(it["latent"])
        loadings[i, f] = it["loading"]
        sd = marginal_sd(it["loading"], cov[f, f], noise)
        spec = specs[it["item_id"]]
        width = 6.0 * sd / (spec["response_max"] - spec["response_min"] + 1)
        d[i] = noise**2 + width**2 / 12.0
        in_sd.append(sd)
    gain = cov @ loadings.T @ np.linalg.inv(loadings @ cov @ loadings.T + np.diag(d))

    targets = model["target_items"]
    t_sd = []
    for it in targets:
        p = paths[it["latent"]]
        w = np.array(p["weights"])
        t_sd.append(marginal_sd(it["loading"], w @ cov @ w + p["noise_std"] ** 2, noise))

    predicted = {}
    for row in rows:
        z = np.array([midpoint(int(row[it["item_id"]]), specs[it["item_id"]], sd) for it, sd in zip(inputs, in_sd)])
        f_hat = gain @ z
        predicted[row["pid"]] = {
            it["item_id"]: to_scale(it["loading"] * np.dot(paths[it["latent"]]["weights"], f_hat), specs[it["item_id"]], sd)
            for it, sd in zip(targets, t_sd)
        }

    def subscale_table(get):
        out = {}
        for scale in registry["scales"]:
            if scale["role"] == "check":
                continue
            for sub in scale["subscales"]:
                out[sub["id"]] = np.array(
                    [np.mean([scored(get(row, i), specs[i]) for i in sub["items"]]) for row in rows]
                )
        return out

    human = subscale_table(lambda row, i: float(row[i]))
    model_side = subscale_table(
        lambda row, i: float(row[i]) if specs[i]["scale_id"] == registry["input_scale"] else predicted[row["pid"]][i]
    )
    big5 = [
        sub["id"] for s in registry["scales"] if s["scale_id"] == registry["input_scale"] for sub in s["subscales"]
    ]
    target_subs = [
        sub["id"] for s in registry["scales"] if s["role"] == "target" for sub in s["subscales"]
    ]
    hr, mr = [], []
    for f in big5:
        for t in target_subs:
            hr.append(np.corrcoef(human[f], human[t])[0, 1])
            mr.append(np.corrcoef(model_side[f], model_side[t])[0, 1])
    hr, mr = np.array(hr), np.array(mr)
    k, b = np.polyfit(hr, mr, 1)
    resid = mr - (k * hr + b)
    r2 = 1.0 - resid @ resid / ((mr - mr.mean()) @ (mr - mr.mean()))
    return {"seed": meta["config"]["seed"], "n": len(rows), "k": k, "intercept": b, "r_squared": r2, "n_pairs": len(hr)}


if __name__ == "__main__":
    print(json.dumps([oracle(d) for d in sys.argv[1:]], indent=2))
