from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .model import (DESK, PAPER, PROFILES, VARIANTS, SizeProfile, Variant, aux_forward, backward,
                    forward, get_variant, init_aux_net, init_mask_net, loss)
from .optim import AdamState, adam_step
from .train import TrainConfig, TrainResult, fit, scene_features, train
