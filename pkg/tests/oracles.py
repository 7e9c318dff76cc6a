"""Independent reference implementations shared by unit and acceptance tests."""
import numpy as np

from idsadv import attacks, neuralnet
from idsadv.dataio import encode_one_hot

H = 1e-5
REL_TOL = 1e-4
ABS_FLOOR = 1e-6
KINK_MARGIN = 1e-4
LAYER_KINDS = ("hidden_weight", "hidden_bias", "output_weight", "output_bias", "input")


# finite differences

def _random_model(variant, rng, d=10, k=5):
    cfg = neuralnet.ModelConfig(variant, d, output_dim=k, dropout_rate=0.1,
                                seed=int(rng.integers(2**31)))
    model = neuralnet.init_model(cfg)
    for b in model.biases:
        b += rng.normal(0.0, 0.1, b.shape)
    model.trained = True
    return model


def _row_losses(model, x, y, mode, mask_seed):
    rng = np.random.default_rng(mask_seed) if mode == "train" else None
    return neuralnet.loss_cross_entropy(neuralnet.forward(model, x, mode, rng), y)


def _near_kink(model, x, mode, mask_seed):
    rng = np.random.default_rng(mask_seed) if mode == "train" else None
    _, (cache, _, _) = neuralnet._forward(model, x, mode, rng)
    return min(np.abs(z).min() for _, z, _ in cache) < KINK_MARGIN


def relative_error(analytic, numeric):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), ABS_FLOOR)


def gradient_probe(variant, kind, rng, mode="infer", rows=4):
    """One (analytic, numeric) pair for a random coordinate of the given layer kind."""
    while True:
        model = _random_model(variant, rng)
        x = rng.uniform(0.0, 1.0, (rows, model.input_dim))
        y = encode_one_hot(rng.integers(0, model.num_classes, rows), model.num_classes)
        mask_seed = int(rng.integers(2**31))
        if not _near_kink(model, x, mode, mask_seed):
            break

    if kind == "input":
        i, j = rng.integers(rows), rng.integers(model.input_dim)
        analytic = neuralnet.grad_input(model, x, y)[i, j]
        xp, xm = x.copy(), x.copy()
        xp[i, j] += H
        xm[i, j] -= H
        lp = _row_losses(model, xp, y, "infer", None)[i]
        lm = _row_losses(model, xm, y, "infer", None)[i]
        return analytic, (lp - lm) / (2 * H)

    layer = (int(rng.integers(len(model.weights) - 1)) if kind.startswith("hidden")
             else len(model.weights) - 1)
    params = model.weights if kind.endswith("weight") else model.biases
    target = params[layer]
    idx = tuple(int(rng.integers(s)) for s in target.shape)
    dws, dbs = neuralnet.grad_params(model, x, y, mode, np.random.default_rng(mask_seed)
                                     if mode == "train" else None)
    analytic = (dws if kind.endswith("weight") else dbs)[layer][idx]
    orig = target[idx]
    target[idx] = orig + H
    lp = _row_losses(model, x, y, mode, mask_seed).mean()
    target[idx] = orig - H
    lm = _row_losses(model, x, y, mode, mask_seed).mean()
    target[idx] = orig
    return analytic, (lp - lm) / (2 * H)


def gradient_check(variant, kind, n_probes, seed, mode="infer"):
    """Worst relative error over ``n_probes`` seeded probes."""
    rng = np.random.default_rng([seed, neuralnet.VARIANTS.index(variant), LAYER_KINDS.index(kind),
                                 mode == "train"])
    return max(relative_error(*gradient_probe(variant, kind, rng, mode)) for _ in range(n_probes))


# metrics without a confusion matrix

def brute_force_metrics(y_true, y_pred, k):
    n = len(y_true)
    agree = 0
    tp = [0] * k
    true_count = [0] * k
    pred_count = [0] * k
    for t, p in zip(y_true, y_pred):
        agree += t == p
        true_count[t] += 1
        pred_count[p] += 1
        if t == p:
            tp[t] += 1
    accuracy = agree / n
    precision = [tp[c] / pred_count[c] if pred_count[c] else 0.0 for c in range(k)]
    recall = [tp[c] / true_count[c] if true_count[c] else 0.0 for c in range(k)]
    f1 = [2 * p * r / (p + r) if p + r else 0.0 for p, r in zip(precision, recall)]

    p_e = sum(true_count[c] * pred_count[c] for c in range(k)) / (n * n)
    if p_e == 1.0:
        kappa = 1.0 if accuracy == 1.0 else 0.0
    else:
        kappa = (accuracy - p_e) / (1 - p_e)

    # MCC as the correlation of the one-hot indicator matrices
    mean_t = [c / n for c in true_count]
    mean_p = [c / n for c in pred_count]
    cov_tp = cov_tt = cov_pp = 0.0
    for t, p in zip(y_true, y_pred):
        for c in range(k):
            dt = (t == c) - mean_t[c]
            dp = (p == c) - mean_p[c]
            cov_tp += dt * dp
            cov_tt += dt * dt
            cov_pp += dp * dp
    mcc = cov_tp / (cov_tt * cov_pp) ** 0.5 if cov_tt * cov_pp > 0 else 0.0

    weights = [c / n for c in true_count]
    return {
        "accuracy": accuracy, "precision": precision, "recall": recall, "f1": f1,
        "macro_precision": sum(precision) / k, "macro_recall": sum(recall) / k,
        "macro_f1": sum(f1) / k,
        "weighted_precision": sum(w * v for w, v in zip(weights, precision)),
        "weighted_recall": sum(w * v for w, v in zip(weights, recall)),
        "weighted_f1": sum(w * v for w, v in zip(weights, f1)),
        "cohen_kappa": kappa, "mcc": mcc,
    }


def metric_discrepancy(rep, oracle):
    worst = 0.0
    for name, expected in oracle.items():
        got = getattr(rep, name)
        worst = max(worst, float(np.max(np.abs(np.asarray(got) - np.asarray(expected)))))
    return worst


# attack invariants

def random_attack_case(rng):
    variant = ("FNN", "SNN")[rng.integers(2)]
    d, k = int(rng.integers(2, 12)), int(rng.integers(2, 6))
    model = _random_model(variant, rng, d=d, k=k)
    if rng.random() < 0.5:
        lo, hi = np.zeros(d), np.ones(d)
        scale = None
    else:
        lo = rng.uniform(-5.0, 5.0, d)
        hi = lo + rng.uniform(0.1, 10.0, d)
        scale = hi - lo
    eps = float(rng.choice([0.0, rng.uniform(0.001, 0.3)]) if rng.random() < 0.1
                else rng.uniform(0.001, 0.3))
    step = eps * float(rng.uniform(0.05, 1.0))
    cfg = attacks.AttackConfig(epsilon=eps, step_size=step, iterations=int(rng.integers(1, 12)),
                               clip_min=lo, clip_max=hi, scale=scale,
                               seed=int(rng.integers(2**31)))
    x = lo + rng.uniform(0.0, 1.0, (int(rng.integers(1, 40)), d)) * (hi - lo)
    # some rows sit exactly on the box faces
    edge = rng.random(x.shape) < 0.1
    x = np.where(edge, np.where(rng.random(x.shape) < 0.5, lo, hi), x)
    y = rng.integers(0, k, x.shape[0])
    return model, x, y, cfg


def attack_invariant_violations(model, x, y, cfg):
    """Names of the invariants that fail on one case (empty list means all hold)."""
    d = x.shape[1]
    eps, _ = cfg.budgets(d)
    lo, hi = cfg.bounds(d)
    failed = []
    out = {name: attacks.run_attack(name, model, x, y, cfg).perturbed for name in attacks.ATTACKS}
    for name, adv in out.items():
        if np.any(np.abs(adv - x) > eps + 1e-9):
            failed.append(f"{name}: budget")
        if np.any(adv < lo) or np.any(adv > hi):
            failed.append(f"{name}: clip box")
    if not np.array_equal(out["BIM"], out["PGD"]):
        failed.append("BIM != PGD")
    g = neuralnet.grad_input(model, x, encode_one_hot(y, model.num_classes))
    target = x + eps * np.sign(g)
    free = (g != 0) & (target >= lo) & (target <= hi)
    if np.any(np.abs(np.abs(out["FGSM"] - x) - eps)[free] > 1e-12 * np.maximum(1, np.abs(x))[free]):
        failed.append("FGSM: |delta| != eps on free coordinates")
    return failed


# self-normalization

def layer_moments(variant, seed=0, rows=10_000, d=10):
    cfg = neuralnet.ModelConfig(variant, d, seed=seed)
    model = neuralnet.init_model(cfg)
    x = np.random.default_rng(seed).standard_normal((rows, d))
    return [(float(a.mean()), float(a.var())) for a in neuralnet.layer_activations(model, x)]
