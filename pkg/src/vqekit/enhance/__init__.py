from .models import (
    RESTORER_PRESETS,
    StageOneModel,
    StageTwoModel,
    default_stage1,
    default_stage2,
    enhance_clip,
    enhance_frame,
    load_stage1,
    load_stage2,
    predictor_spec,
    restorer_spec,
    restorer_spec_fullres,
    restorer_spec_residual_chain,
    save_stage1,
    save_stage2,
)
from .losses import (
    LossWeights,
    cosine_color_loss,
    edge_loss,
    l1_loss,
    l2_loss,
    proxy_perceptual_loss,
    quality_loss,
    stage1_loss,
    stage2_loss,
    total_loss,
)
from .scorers import ConstScorer, FileScorer, HashScorer, MeanLumaScorer
from .train import (
    PRESETS,
    TrainConfig,
    eval_rmse,
    finetune_joint,
    joint_batch_grads,
    pairs_from_clips,
    preset_config,
    stage1_batch_grads,
    stage2_batch_grads,
    train_stage1,
    train_stage2,
)
