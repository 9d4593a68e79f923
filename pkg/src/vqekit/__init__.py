"""vqekit: desk-scale video-quality-enhancement challenge toolkit.

Degradation synthesis, a two-stage LUT + restoration enhancement pipeline
with from-scratch training, MAC auditing, objective scoring, Bradley-Terry
ranking of pairwise votes, and a small HTTP study service.
"""

from .validation import ValidationError
from .io import Clip, Manifest, ManifestEntry, ScoreEntry, ScoreFile, read_clip, \
    read_lut_cube, read_manifest, read_ppm, read_scores, write_clip, write_lut_cube, \
    write_manifest, write_ppm, write_scores
from .lut import Lut3D, LutBank, apply_lut, apply_lut_raw, fuse_bank, identity_lut, \
    initial_bank, lut_gradients, lut_lookup, lut_regularizers
from .rand import frame_rng, seeded_rng
from .resize import resize_bilinear, resize_by_factor
from .degrade import DEFAULT_PROFILE, DegradationRecipe, add_gauss_noise, \
    add_poisson_noise, apply_blur, gg_blur_kernel, intensity_histogram, jpeg_simulate, \
    run_recipe, sample_recipe
from .rank import FACTORS, MethodScore, ObjectiveScore, PairCounts, RankingResult, \
    VoteRecord, bt_fit, mos, rank_with_tiebreak, read_votes_jsonl, rmse, s_obj, s_real, \
    s_synth, votes_to_counts, write_ranking, write_votes_jsonl
from . import nn
from . import enhance
from . import study

__version__ = "0.1.0"
