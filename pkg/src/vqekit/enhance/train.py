"""Training loops for the two stages and the joint finetune.

Everything is plain Adam on the hand-written backward passes. Stage 1 updates
predictor weights and (by default) the lattice entries of the LUT bank
together; the trilinear map is linear in the lattice, so those gradients are
exact. The joint finetune backpropagates the stage-2 loss through the restorer
into the fused LUT and the weight predictor. All loops are bit-deterministic
given (seed, data order).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import nn
from ..lut import LutBank, apply_lut_raw, fuse_bank, fuse_weight_gradients, initial_bank, \
    lut_gradients, lut_regularizers
from ..rand import seeded_rng
from ..resize import resize_bilinear
from ..validation import ValidationError
from .losses import LossWeights, quality_loss, stage1_loss, stage2_loss, total_loss
from .models import StageOneModel, StageTwoModel, default_stage2


@dataclass
class TrainConfig:
    iterations: int = 1000
    batch: int = 8
    patch: int = 64
    lr: float = 2e-4
    halve_every: int = 10_000
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.99
    train_lattice: bool = True
    smooth_weight: float = 1e-4
    mono_weight: float = 10.0
    bank_k: int = 5
    lut_n: int = 33
    bank_perturbation: float = 0.02
    predictor_downsample: int = 64
    restorer_preset: str = "default"
    weights: LossWeights = field(default_factory=LossWeights)
    log_every: int = 100

    def __post_init__(self):
        if self.iterations < 0:
            raise ValidationError("iterations must be >= 0")
        if self.batch < 1 or self.patch < 1:
            raise ValidationError("batch and patch must be >= 1")
        if self.lr < 0:
            raise ValidationError("lr must be >= 0")
        if self.halve_every < 1:
            raise ValidationError("halve_every must be >= 1")


# Published-scale presets kept for completeness; desk runs shrink everything.
PRESETS = {
    "tmobile-stage1": dict(iterations=200_000, batch=32, patch=512,
                           lr=2e-4, halve_every=10_000),
    "tmobile-stage2": dict(iterations=300_000, batch=16, patch=512,
                           lr=2e-4, halve_every=10_000),
    "tmobile-joint": dict(iterations=20_000, batch=16, patch=512,
                          lr=1e-5, halve_every=10 ** 9),
    "summer": dict(restorer_preset="residual_chain", bank_k=5),
    "wizard-loss": dict(lr=1e-4, adam_beta2=0.999),
}


def preset_config(name: str, **overrides) -> TrainConfig:
    if name not in PRESETS:
        raise ValidationError(f"unknown preset {name!r} (have {sorted(PRESETS)})")
    kw = dict(PRESETS[name])
    kw.update(overrides)
    return TrainConfig(**kw)


def check_pairs(pairs):
    out = []
    for i, (x, t) in enumerate(pairs):
        x = np.asarray(x, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64)
        if x.shape != t.shape or x.ndim != 3 or x.shape[2] != 3:
            raise ValidationError(f"pair {i}: need matching (h, w, 3) frames, "
                                  f"got {x.shape} vs {t.shape}")
        out.append((x, t))
    if not out:
        raise ValidationError("need at least one training pair")
    return out


def pairs_from_clips(degraded, target):
    if len(degraded) != len(target):
        raise ValidationError("clips differ in frame count")
    return [(degraded.frames[i], target.frames[i]) for i in range(len(degraded))]


def _sample_batch(pairs, cfg: TrainConfig, rng):
    h, w = pairs[0][0].shape[:2]
    ph = min(cfg.patch, h)
    pw = min(cfg.patch, w)
    idx = rng.integers(0, len(pairs), size=cfg.batch)
    xs, ts = [], []
    for i in idx:
        x, t = pairs[i]
        oy = int(rng.integers(0, h - ph + 1))
        ox = int(rng.integers(0, w - pw + 1))
        xs.append(x[oy:oy + ph, ox:ox + pw])
        ts.append(t[oy:oy + ph, ox:ox + pw])
    return np.stack(xs), np.stack(ts)


def _lr_at(cfg: TrainConfig, step: int) -> float:
    return cfg.lr * 0.5 ** (step // cfg.halve_every)


def _bank_params(bank: LutBank) -> dict:
    # optimizer mutates these arrays in place; they are the very tables the
    # bank's Lut3D objects hold, so the bank trains live
    return {"bank": {f"lut{i}": bank.luts[i].table for i in range(bank.k)}}


def _bank_reg(bank: LutBank, cfg: TrainConfig):
    """Mean regularizer penalty over the basis plus lattice gradients."""
    k = bank.k
    loss = 0.0
    grads = np.zeros((k,) + bank.luts[0].table.shape)
    if cfg.smooth_weight == 0 and cfg.mono_weight == 0:
        return loss, grads
    for i, lut in enumerate(bank.luts):
        s, m, gs, gm = lut_regularizers(lut)
        loss += (cfg.smooth_weight * s + cfg.mono_weight * m) / k
        grads[i] = (cfg.smooth_weight * gs + cfg.mono_weight * gm) / k
    return loss, grads


def _predict_weights_batch(s1: StageOneModel, x):
    d = s1.downsample
    small = np.stack([resize_bilinear(f, d, d) for f in x])
    inp = small.transpose(0, 3, 1, 2)
    y, cache = nn.forward(s1.predictor_spec, s1.predictor_params, inp)
    return y.reshape(y.shape[0], -1), cache, y.shape


def stage1_batch_grads(s1: StageOneModel, x, t, weights: LossWeights, cfg: TrainConfig):
    """Loss and exact gradients of the stage-1 objective on one batch.

    Returns (loss, grad_predictor_params, grad_tables (k,n,n,n,3), preds).
    """
    b = x.shape[0]
    wts, cache, out_shape = _predict_weights_batch(s1, x)
    loss = 0.0
    grad_wts = np.zeros_like(wts)
    grad_tables = np.zeros((s1.bank.k,) + s1.bank.luts[0].table.shape)
    preds = np.empty_like(x)
    for i in range(b):
        fused = fuse_bank(s1.bank, wts[i])
        y = apply_lut_raw(fused, x[i])
        preds[i] = y
        v, g = stage1_loss(y, t[i], weights)
        loss += v / b
        g = g / b
        gf = lut_gradients(fused, x[i], g)
        grad_wts[i] = fuse_weight_gradients(s1.bank, gf)
        grad_tables += wts[i][:, None, None, None, None] * gf[None]
    reg, reg_g = _bank_reg(s1.bank, cfg)
    loss += reg
    grad_tables += reg_g
    grad_params, _ = nn.backward(s1.predictor_spec, s1.predictor_params, cache,
                                 grad_wts.reshape(out_shape))
    return loss, grad_params, grad_tables, preds


def train_stage1(pairs, cfg: TrainConfig, s1: StageOneModel = None,
                 scorers=None):
    """Fit the LUT bank and weight predictor; returns (model, history)."""
    pairs = check_pairs(pairs)
    if s1 is None:
        from .models import predictor_spec
        init_rng = seeded_rng(cfg.seed)
        spec = predictor_spec(cfg.bank_k)
        params = nn.init_params(spec, init_rng)
        bank = initial_bank(k=cfg.bank_k, n=cfg.lut_n,
                            perturbation=cfg.bank_perturbation, rng=init_rng)
        s1 = StageOneModel(bank, spec, params, downsample=cfg.predictor_downsample)
    data_rng = seeded_rng(cfg.seed + 1)
    opt_p = nn.Adam(max(cfg.lr, 1e-300), cfg.adam_beta1, cfg.adam_beta2)
    opt_l = nn.Adam(max(cfg.lr, 1e-300), cfg.adam_beta1, cfg.adam_beta2)
    bank_params = _bank_params(s1.bank)
    history = []
    for step in range(cfg.iterations):
        lr = _lr_at(cfg, step)
        opt_p.lr = opt_l.lr = lr
        x, t = _sample_batch(pairs, cfg, data_rng)
        loss, gp, gt, preds = stage1_batch_grads(s1, x, t, cfg.weights, cfg)
        if not np.isfinite(loss):
            raise ValidationError(f"non-finite loss at step {step}")
        if cfg.lr > 0:
            opt_p.step(s1.predictor_params, gp)
            if cfg.train_lattice:
                opt_l.step(bank_params,
                           {"bank": {f"lut{i}": gt[i] for i in range(s1.bank.k)}})
        if step % cfg.log_every == 0 or step == cfg.iterations - 1:
            rec = {"step": step, "loss": float(loss), "lr": lr}
            if scorers is not None:
                q = quality_loss(np.clip(preds, 0.0, 1.0), *scorers)
                rec["quality"] = q
                rec["total"] = total_loss(float(loss), q, cfg.weights.lambda_quality)
            history.append(rec)
    return s1, history


def stage2_batch_grads(s2: StageTwoModel, x, t, weights: LossWeights):
    """Loss and gradients of the stage-2 objective on one batch (NHWC in)."""
    b = x.shape[0]
    inp = x.transpose(0, 3, 1, 2)
    y, cache = nn.forward(s2.spec, s2.params, inp)
    grad_y = np.empty_like(y)
    loss = 0.0
    for i in range(b):
        v, g = stage2_loss(y[i].transpose(1, 2, 0), t[i], weights)
        loss += v / b
        grad_y[i] = g.transpose(2, 0, 1) / b
    grad_params, _ = nn.backward(s2.spec, s2.params, cache, grad_y)
    return loss, grad_params, y


def train_stage2(pairs, cfg: TrainConfig, s2: StageTwoModel = None, scorers=None):
    """Fit the residual restorer; returns (model, history)."""
    pairs = check_pairs(pairs)
    if s2 is None:
        s2 = default_stage2(cfg.seed, preset=cfg.restorer_preset)
    data_rng = seeded_rng(cfg.seed + 1)
    opt = nn.Adam(max(cfg.lr, 1e-300), cfg.adam_beta1, cfg.adam_beta2)
    history = []
    for step in range(cfg.iterations):
        opt.lr = _lr_at(cfg, step)
        x, t = _sample_batch(pairs, cfg, data_rng)
        loss, gp, y = stage2_batch_grads(s2, x, t, cfg.weights)
        if not np.isfinite(loss):
            raise ValidationError(f"non-finite loss at step {step}")
        if cfg.lr > 0:
            opt.step(s2.params, gp)
        if step % cfg.log_every == 0 or step == cfg.iterations - 1:
            rec = {"step": step, "loss": float(loss), "lr": opt.lr}
            if scorers is not None:
                preds = np.clip(y.transpose(0, 2, 3, 1), 0.0, 1.0)
                q = quality_loss(preds, *scorers)
                rec["quality"] = q
                rec["total"] = total_loss(float(loss), q, cfg.weights.lambda_quality)
            history.append(rec)
    return s2, history


def joint_batch_grads(s1: StageOneModel, s2: StageTwoModel, x, t,
                      weights: LossWeights, cfg: TrainConfig):
    """End-to-end loss and gradients: stage-2 loss on the final output,
    backpropagated through the restorer, the fused LUT, and the predictor.

    Patch dims must divide by 8 (the restorer's total downsampling).
    """
    b, h, w = x.shape[:3]
    if h % 8 or w % 8:
        raise ValidationError(f"joint training patches must divide by 8, got {h}x{w}")
    wts, cache_p, out_shape = _predict_weights_batch(s1, x)
    fused_luts = []
    y1 = np.empty_like(x)
    for i in range(b):
        fused = fuse_bank(s1.bank, wts[i])
        fused_luts.append(fused)
        y1[i] = apply_lut_raw(fused, x[i])
    y2, cache_r = nn.forward(s2.spec, s2.params, y1.transpose(0, 3, 1, 2))
    loss = 0.0
    grad_y2 = np.empty_like(y2)
    for i in range(b):
        v, g = stage2_loss(y2[i].transpose(1, 2, 0), t[i], weights)
        loss += v / b
        grad_y2[i] = g.transpose(2, 0, 1) / b
    grad_restorer, grad_y1 = nn.backward(s2.spec, s2.params, cache_r, grad_y2)
    grad_y1 = grad_y1.transpose(0, 2, 3, 1)
    grad_wts = np.zeros_like(wts)
    grad_tables = np.zeros((s1.bank.k,) + s1.bank.luts[0].table.shape)
    for i in range(b):
        gf = lut_gradients(fused_luts[i], x[i], grad_y1[i])
        grad_wts[i] = fuse_weight_gradients(s1.bank, gf)
        grad_tables += wts[i][:, None, None, None, None] * gf[None]
    reg, reg_g = _bank_reg(s1.bank, cfg)
    loss += reg
    grad_tables += reg_g
    grad_predictor, _ = nn.backward(s1.predictor_spec, s1.predictor_params, cache_p,
                                    grad_wts.reshape(out_shape))
    return loss, grad_predictor, grad_tables, grad_restorer


def finetune_joint(s1: StageOneModel, s2: StageTwoModel, pairs, cfg: TrainConfig,
                   scorers=None):
    """Joint refinement of both stages; returns (s1, s2, history).

    cfg.lr == 0 is allowed and leaves every parameter untouched (useful as a
    dry run of the end-to-end gradient path).
    """
    pairs = check_pairs(pairs)
    data_rng = seeded_rng(cfg.seed + 1)
    opt_p = nn.Adam(max(cfg.lr, 1e-300), cfg.adam_beta1, cfg.adam_beta2)
    opt_l = nn.Adam(max(cfg.lr, 1e-300), cfg.adam_beta1, cfg.adam_beta2)
    opt_r = nn.Adam(max(cfg.lr, 1e-300), cfg.adam_beta1, cfg.adam_beta2)
    bank_params = _bank_params(s1.bank)
    history = []
    for step in range(cfg.iterations):
        lr = _lr_at(cfg, step)
        opt_p.lr = opt_l.lr = opt_r.lr = lr
        x, t = _sample_batch(pairs, cfg, data_rng)
        loss, gp, gt, gr = joint_batch_grads(s1, s2, x, t, cfg.weights, cfg)
        if not np.isfinite(loss):
            raise ValidationError(f"non-finite loss at step {step}")
        if cfg.lr > 0:
            opt_p.step(s1.predictor_params, gp)
            if cfg.train_lattice:
                opt_l.step(bank_params,
                           {"bank": {f"lut{i}": gt[i] for i in range(s1.bank.k)}})
            opt_r.step(s2.params, gr)
        if step % cfg.log_every == 0 or step == cfg.iterations - 1:
            history.append({"step": step, "loss": float(loss), "lr": lr})
    return s1, s2, history


def eval_rmse(s1, s2, pairs) -> float:
    """Mean per-pair RMSE of the enhanced output against the target."""
    from .models import enhance_frame
    pairs = check_pairs(pairs)
    errs = []
    for x, t in pairs:
        y = enhance_frame(s1, s2, x)
        errs.append(float(np.sqrt(np.mean((y - t) ** 2))))
    return float(np.mean(errs))
