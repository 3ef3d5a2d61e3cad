"""Vector-space toolkit for speaker-embedding anonymization and privacy evaluation.

Operates on pre-extracted speaker embeddings: composes pseudo-identities from
an external pool, aligns second-order statistics across embedding domains, and
measures identity protection as the equal error rate of cosine verification
under unprotected / ignorant / lazy-informed attackers. A synthetic-corpus
generator makes every protocol verifiable at desk scale.
"""

__version__ = "0.1.0"

from ._fileio import FORMAT_VERSION, FormatError
from .anonymizer import (AnonymizationPolicy, anonymize, anonymize_set,
                         chosen_pool_indices, cosine_distance, select_farthest)
from .coral import (CoralTransform, coral_apply, coral_apply_set, coral_fit,
                    load_transform, save_transform, transform_values)
from .metrics import (ScoreReport, compute_eer, eer_from_scores, make_report,
                      save_report, score_trials)
from .scenario import (CoralPlan, ExperimentReport, PartyPolicy, RunResult,
                       ScenarioConfig, coral_n_sweep, load_scenario_config,
                       run_ignorant, run_lazy_informed, run_scenario,
                       run_unprotected, save_experiment_report)
from .statslinalg import (DomainStats, denorm, fit_stats, project_2d,
                          save_projection, sym_power, znorm)
from .synth import (Diagonal, DomainSpec, Isotropic, RandomSPD, SynthSpec,
                    generate, parse_synth_spec)
from .vectorstore import (GENUINE, IMPOSTOR, SpeakerVector, TrialSet, VectorSet,
                          generate_trials, load_trials, load_vector_set,
                          save_trials, save_vector_set)

__all__ = [
    "FORMAT_VERSION", "FormatError", "__version__",
    "SpeakerVector", "VectorSet", "TrialSet", "GENUINE", "IMPOSTOR",
    "load_vector_set", "save_vector_set", "load_trials", "save_trials",
    "generate_trials",
    "DomainStats", "fit_stats", "znorm", "denorm", "sym_power", "project_2d",
    "save_projection",
    "CoralTransform", "coral_fit", "coral_apply", "coral_apply_set",
    "transform_values", "save_transform", "load_transform",
    "AnonymizationPolicy", "cosine_distance", "select_farthest",
    "chosen_pool_indices", "anonymize", "anonymize_set",
    "ScoreReport", "score_trials", "compute_eer", "eer_from_scores",
    "make_report", "save_report",
    "SynthSpec", "DomainSpec", "Isotropic", "Diagonal", "RandomSPD", "generate",
    "parse_synth_spec",
    "ScenarioConfig", "PartyPolicy", "CoralPlan", "RunResult", "ExperimentReport",
    "run_unprotected", "run_ignorant", "run_lazy_informed", "run_scenario",
    "coral_n_sweep", "load_scenario_config", "save_experiment_report",
]
