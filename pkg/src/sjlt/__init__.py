"""Reduced-randomness fast Johnson-Lindenstrauss transform ``f_q = d^(-1/q) P H D``."""

from ._backend import active as backend
from .kwise import SignFamily, build_sign_family, required_independence, verify_kwise_exact
from .randbits import BitReport, BitSource, draw_bits, draw_index_pow2
from .rowsampler import RowPattern, expected_iterations_exact, iteration_stats, sample_subset
from .transform import (DenseFallbackMatrix, Embedding, EmbeddingPlan, SparseSignMatrix, apply,
                        build_embedding, l1_norm_estimate, manual_plan, pad_pow2, plan_for_pointset,
                        plan_l1, plan_l2)
from .verify import CheckReport, TestVectorSpec
from .wht import wht_apply, wht_apply_batch

__all__ = [
    "BitReport", "BitSource", "CheckReport", "DenseFallbackMatrix", "Embedding", "EmbeddingPlan",
    "RowPattern", "SignFamily", "SparseSignMatrix", "TestVectorSpec", "apply", "backend",
    "build_embedding", "build_sign_family", "draw_bits", "draw_index_pow2",
    "expected_iterations_exact", "iteration_stats", "l1_norm_estimate", "manual_plan", "pad_pow2",
    "plan_for_pointset", "plan_l1", "plan_l2", "required_independence", "sample_subset",
    "verify_kwise_exact", "wht_apply", "wht_apply_batch",
]
