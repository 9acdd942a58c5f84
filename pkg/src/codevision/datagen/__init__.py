"""Synthetic scenes, task generation, benchmark construction, and the
five-way orientation diagnostic."""

from .scene import Annotation, Overflow, SceneDoc, load_scene_docs, synth_scene
from .generate import (
    Ambiguous,
    BANNED_PHRASES,
    DIAGNOSTIC_OPTIONS,
    DIAGNOSTIC_QUESTION,
    DiagnosticItem,
    GenConfig,
    Infeasible,
    NoCandidate,
    TaskMeta,
    answer_diagnostic,
    audit_positional,
    corrupt_image,
    diagnostic_images,
    difficulty_filter,
    filter_small,
    gen_base_items,
    gen_diagnostic,
    gen_mvtool,
    gen_orientation_suite,
    is_ambiguous,
    make_task,
    multicrop_windows,
    question_candidates,
    sample_meta,
    sample_task_type,
    scene_stream,
)

__all__ = [
    "Annotation", "Overflow", "SceneDoc", "load_scene_docs", "synth_scene",
    "Ambiguous", "BANNED_PHRASES", "DIAGNOSTIC_OPTIONS", "DIAGNOSTIC_QUESTION",
    "DiagnosticItem", "GenConfig", "Infeasible", "NoCandidate", "TaskMeta",
    "answer_diagnostic", "audit_positional", "corrupt_image",
    "diagnostic_images", "difficulty_filter", "filter_small", "gen_base_items",
    "gen_diagnostic", "gen_mvtool", "gen_orientation_suite", "is_ambiguous",
    "make_task", "multicrop_windows", "question_candidates", "sample_meta",
    "sample_task_type", "scene_stream",
]
