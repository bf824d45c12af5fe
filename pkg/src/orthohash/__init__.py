"""Single-loss deep hashing with binary orthogonal targets."""

from .codebook import (Codebook, bernoulli_codebook, expected_hamming, improve_codebook, make_codebook,
                       min_pairwise_distance, sylvester_hadamard)
from .encoder import BatchMode, EncoderParams, backward, encode, encode_binary, forward, init_encoder, recalibrate_bn
from .hamming import (PackedCode, collision_probability, cosine_from_hamming, hamming_distance, pack_code,
                      quantization_angle, sign_binarize)
from .loss import LossConfig, apply_margin, ce_loss, logits, loss_and_grad, smooth_labels
from .retrieval import (EvalReport, HammingIndex, bit_balance, build_index, distance_histograms, map_at_r,
                        mean_quantization_angle, orthogonality_score, query_top_r, separability)
from .trainer import LabeledDataset, TrainConfig, TrainHistory, adam_step, make_gaussian_clusters, train

__version__ = "0.1.0"
