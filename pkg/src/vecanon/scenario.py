"""Attack-scenario orchestration and the fit-sample-size experiment matrix.

Three evaluation setups are modeled. ``unprotected`` scores original test
vectors against original enrollment. ``ignorant`` lets the user anonymize the
test side each run while the attacker keeps scoring against original
enrollment. ``lazy_informed`` additionally gives the attacker the algorithm:
the attacker anonymizes the enrollment side with independent randomness and an
independently fit covariance-alignment matrix.

Per-run randomness derives from one base seed per party mixed with the run
index (see ``seeding``), so user-side outputs never depend on attacker
configuration, runs are reproducible individually, and identical configs give
byte-identical reports.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from . import __version__
from ._fileio import FORMAT_VERSION, FormatError, atomic_write_text, comment_block, fmt_float, parse_kv_file
from ._kernels import BACKEND
from .anonymizer import (DEFAULT_FARTHEST_K, DEFAULT_SELECT_N, AnonymizationPolicy,
                         anonymize_set)
from .coral import DEFAULT_LAMBDA, DENORM_NONE, DENORM_TARGET, CoralTransform, coral_apply_set, coral_fit
from .metrics import SCORING_BACKEND, make_report
from .seeding import RNG_ID, TAG_CORAL_SRC, TAG_CORAL_TGT, check_seed, make_rng, mix_seed
from .vectorstore import TrialSet, VectorSet, load_trials, load_vector_set

log = logging.getLogger(__name__)

UNPROTECTED = "unprotected"
IGNORANT = "ignorant"
LAZY_INFORMED = "lazy_informed"
SCENARIOS = (UNPROTECTED, IGNORANT, LAZY_INFORMED)

DEFAULT_RUNS = 5


@dataclass(frozen=True)
class CoralPlan:
    """Covariance alignment applied after anonymization: where to draw fits from."""

    source: VectorSet
    target: VectorSet
    n_fit: int
    lam: float = DEFAULT_LAMBDA
    denorm_mode: str = DENORM_TARGET

    def __post_init__(self):
        if self.source.dimension != self.target.dimension:
            raise ValueError("coral source and target dimensions disagree")
        if self.n_fit < 2:
            raise ValueError(f"coral fit size must be >= 2, got {self.n_fit}")
        if self.n_fit > len(self.source) or self.n_fit > len(self.target):
            raise ValueError(
                f"coral fit size {self.n_fit} exhausts the fit sets "
                f"(source {len(self.source)}, target {len(self.target)})")
        if self.lam < 0:
            raise ValueError("coral lambda must be nonnegative")
        if self.denorm_mode not in (DENORM_TARGET, DENORM_NONE):
            raise ValueError(f"bad denorm_mode {self.denorm_mode!r}")


@dataclass(frozen=True)
class PartyPolicy:
    """One party's anonymization behavior (the user, or a lazy-informed attacker)."""

    seed: int
    pool: VectorSet
    farthest_k: int = DEFAULT_FARTHEST_K
    select_n: int = DEFAULT_SELECT_N
    per_speaker: bool = False
    coral: CoralPlan | None = None

    def __post_init__(self):
        check_seed(self.seed)
        if self.farthest_k > len(self.pool):
            raise ValueError(
                f"farthest_k={self.farthest_k} exceeds pool size {len(self.pool)}")
        if not 1 <= self.select_n <= self.farthest_k:
            raise ValueError("select_n must be in [1, farthest_k]")


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    enroll: VectorSet
    test: VectorSet
    trials: TrialSet
    user: PartyPolicy | None = None
    attacker: PartyPolicy | None = None
    runs: int = DEFAULT_RUNS
    freeze_anon_draw: bool = False
    freeze_coral_draw: bool = False
    allow_equal_seeds: bool = False

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.runs < 1:
            raise ValueError("runs must be positive")
        if self.scenario == UNPROTECTED:
            if self.user is not None or self.attacker is not None:
                raise ValueError("unprotected takes no user or attacker policy")
        elif self.scenario == IGNORANT:
            if self.user is None:
                raise ValueError("ignorant requires a user policy")
            if self.attacker is not None:
                raise ValueError("only lazy_informed takes an attacker policy")
        else:
            if self.user is None or self.attacker is None:
                raise ValueError("lazy_informed requires both user and attacker policies")
            if self.user.seed == self.attacker.seed and not self.allow_equal_seeds:
                raise ValueError(
                    "user and attacker seeds must differ (the threat model assumes "
                    "independent randomness); set allow_equal_seeds to override in tests")
        for e, t, _ in self.trials:
            if e not in self.enroll:
                raise ValueError(f"trial enroll id {e!r} missing from enroll set")
            if t not in self.test:
                raise ValueError(f"trial test id {t!r} missing from test set")


@dataclass(frozen=True)
class RunResult:
    run_index: int
    eer: float
    threshold: float
    n_genuine: int
    n_impostor: int
    coral_divergence: float | None = None
    # in-memory artifacts for inspection and testing, never serialized
    user_test_set: VectorSet | None = None
    attacker_enroll_set: VectorSet | None = None
    user_transform: CoralTransform | None = None
    attacker_transform: CoralTransform | None = None


@dataclass(frozen=True)
class ExperimentReport:
    scenario: str
    results: tuple[RunResult, ...]
    provenance: dict[str, str]

    @property
    def eers(self) -> list[float]:
        return [r.eer for r in self.results]

    @property
    def eer_mean(self) -> float:
        return float(np.mean(self.eers))

    @property
    def eer_std(self) -> float:
        """Sample std over runs; 0.0 for a single run."""
        return float(np.std(self.eers, ddof=1)) if len(self.results) > 1 else 0.0

    @property
    def divergences(self) -> list[float]:
        return [r.coral_divergence for r in self.results
                if r.coral_divergence is not None]

    @property
    def divergence_mean(self) -> float | None:
        divs = self.divergences
        return float(np.mean(divs)) if divs else None


def _sample_fit_vectors(vs: VectorSet, n: int, rng: np.random.Generator) -> VectorSet:
    idx = rng.choice(len(vs), size=n, replace=False)
    return vs.subset(sorted(int(i) for i in idx))


def _party_outputs(vectors: VectorSet, party: PartyPolicy, run_index: int,
                   freeze_anon: bool, freeze_coral: bool
                   ) -> tuple[VectorSet, CoralTransform | None]:
    """Anonymize a set as one party in one run, then optionally align covariance."""
    anon_run = 0 if freeze_anon else run_index
    policy = AnonymizationPolicy(
        seed=mix_seed(party.seed, anon_run),
        farthest_k=party.farthest_k, select_n=party.select_n,
        per_speaker=party.per_speaker, id_suffix="")
    out = anonymize_set(vectors, party.pool, policy)
    transform = None
    if party.coral is not None:
        coral_run = 0 if freeze_coral else run_index
        src = _sample_fit_vectors(party.coral.source, party.coral.n_fit,
                                  make_rng(party.seed, TAG_CORAL_SRC, coral_run))
        tgt = _sample_fit_vectors(party.coral.target, party.coral.n_fit,
                                  make_rng(party.seed, TAG_CORAL_TGT, coral_run))
        transform = coral_fit(src, tgt, party.coral.lam,
                              seed_provenance=f"seed={party.seed} run={coral_run} "
                                              f"n={party.coral.n_fit}")
        out = coral_apply_set(transform, out, party.coral.denorm_mode)
    return out, transform


def _party_provenance(tag: str, party: PartyPolicy | None) -> dict[str, str]:
    if party is None:
        return {}
    prov = {
        f"seed_{tag}": str(party.seed),
        f"farthest_k_{tag}": str(party.farthest_k),
        f"select_n_{tag}": str(party.select_n),
        f"per_speaker_{tag}": str(party.per_speaker).lower(),
        f"pool_size_{tag}": str(len(party.pool)),
        f"coral_{tag}": str(party.coral is not None).lower(),
    }
    if party.coral is not None:
        prov[f"coral_n_{tag}"] = str(party.coral.n_fit)
        prov[f"coral_lambda_{tag}"] = fmt_float(party.coral.lam)
        prov[f"denorm_mode_{tag}"] = party.coral.denorm_mode
        prov[f"coral_target_domain_{tag}"] = party.coral.target.domain_label()
    return prov


def _provenance(config: ScenarioConfig) -> dict[str, str]:
    prov: dict[str, str] = {
        "scenario": config.scenario,
        "format_version": str(FORMAT_VERSION),
        "toolkit_version": __version__,
        "scoring": SCORING_BACKEND,
        "rng": RNG_ID,
        "numpy_version": np.__version__,
        "kernel_backend": BACKEND,
        "runs": str(config.runs),
        "n_enroll": str(len(config.enroll)),
        "n_test": str(len(config.test)),
        "n_trials": str(len(config.trials)),
        "freeze_anon_draw": str(config.freeze_anon_draw).lower(),
        "freeze_coral_draw": str(config.freeze_coral_draw).lower(),
    }
    prov.update(_party_provenance("user", config.user))
    prov.update(_party_provenance("attacker", config.attacker))
    return prov


def run_unprotected(config: ScenarioConfig) -> ExperimentReport:
    """Score original test against original enrollment; one run, no randomness."""
    if config.scenario != UNPROTECTED:
        raise ValueError(f"config is for {config.scenario!r}, not {UNPROTECTED!r}")
    report = make_report(config.enroll, config.test, config.trials)
    result = RunResult(run_index=0, eer=report.eer, threshold=report.threshold,
                       n_genuine=report.n_genuine, n_impostor=report.n_impostor)
    prov = _provenance(config)
    prov["runs"] = "1"
    return ExperimentReport(UNPROTECTED, (result,), prov)


def run_ignorant(config: ScenarioConfig) -> ExperimentReport:
    """User anonymizes the test side per run; enrollment stays original."""
    if config.scenario != IGNORANT:
        raise ValueError(f"config is for {config.scenario!r}, not {IGNORANT!r}")
    results = []
    for r in range(config.runs):
        anon_test, user_t = _party_outputs(config.test, config.user, r,
                                           config.freeze_anon_draw, config.freeze_coral_draw)
        report = make_report(config.enroll, anon_test, config.trials)
        log.info("ignorant run %d: eer=%.4f", r, report.eer)
        results.append(RunResult(run_index=r, eer=report.eer, threshold=report.threshold,
                                 n_genuine=report.n_genuine, n_impostor=report.n_impostor,
                                 user_test_set=anon_test, user_transform=user_t))
    return ExperimentReport(IGNORANT, tuple(results), _provenance(config))


def run_lazy_informed(config: ScenarioConfig) -> ExperimentReport:
    """User anonymizes test vectors; the attacker independently anonymizes enrollment."""
    if config.scenario != LAZY_INFORMED:
        raise ValueError(f"config is for {config.scenario!r}, not {LAZY_INFORMED!r}")
    results = []
    for r in range(config.runs):
        anon_test, user_t = _party_outputs(config.test, config.user, r,
                                           config.freeze_anon_draw, config.freeze_coral_draw)
        anon_enroll, attacker_t = _party_outputs(config.enroll, config.attacker, r,
                                                 config.freeze_anon_draw,
                                                 config.freeze_coral_draw)
        divergence = None
        if user_t is not None and attacker_t is not None:
            divergence = float(np.linalg.norm(user_t.matrix - attacker_t.matrix, ord="fro"))
        report = make_report(anon_enroll, anon_test, config.trials)
        log.info("lazy_informed run %d: eer=%.4f divergence=%s", r, report.eer, divergence)
        results.append(RunResult(run_index=r, eer=report.eer, threshold=report.threshold,
                                 n_genuine=report.n_genuine, n_impostor=report.n_impostor,
                                 coral_divergence=divergence, user_test_set=anon_test,
                                 attacker_enroll_set=anon_enroll, user_transform=user_t,
                                 attacker_transform=attacker_t))
    return ExperimentReport(LAZY_INFORMED, tuple(results), _provenance(config))


def run_scenario(config: ScenarioConfig) -> ExperimentReport:
    runner = {UNPROTECTED: run_unprotected, IGNORANT: run_ignorant,
              LAZY_INFORMED: run_lazy_informed}[config.scenario]
    return runner(config)


def coral_n_sweep(base_config: ScenarioConfig, n_values: Iterable[int],
                  runs: int | None = None) -> list[ExperimentReport]:
    """Repeat a lazy-informed experiment at several coral fit sizes N.

    Both parties get the same N; their fit samples are still drawn from
    independent per-party streams, so each run's report carries the Frobenius
    distance between the two fitted matrices.
    """
    if base_config.scenario != LAZY_INFORMED:
        raise ValueError("the fit-size sweep compares user and attacker matrices and "
                         "needs a lazy_informed config")
    if base_config.user.coral is None or base_config.attacker.coral is None:
        raise ValueError("the fit-size sweep needs coral enabled for both parties")
    reports = []
    for n in n_values:
        config = replace(
            base_config,
            user=replace(base_config.user, coral=replace(base_config.user.coral, n_fit=n)),
            attacker=replace(base_config.attacker,
                             coral=replace(base_config.attacker.coral, n_fit=n)),
            runs=base_config.runs if runs is None else runs)
        reports.append(run_lazy_informed(config))
    return reports


# ---------------------------------------------------------------------------
# report serialization
# ---------------------------------------------------------------------------

def save_experiment_report(report: ExperimentReport, path,
                           comments: Iterable[str] = ()) -> None:
    """Provenance block, one TSV line per run, then the aggregate summary."""
    lines = comment_block(comments)
    for key, value in report.provenance.items():
        lines.append(f"{key}={value}")
    with_div = any(r.coral_divergence is not None for r in report.results)
    header = "run\teer\tthreshold\tn_genuine\tn_impostor"
    if with_div:
        header += "\tcoral_divergence"
    lines.append(header)
    for r in report.results:
        row = (f"{r.run_index}\t{fmt_float(r.eer)}\t{fmt_float(r.threshold)}"
               f"\t{r.n_genuine}\t{r.n_impostor}")
        if with_div:
            row += "\t" + (fmt_float(r.coral_divergence)
                           if r.coral_divergence is not None else "-")
        lines.append(row)
    lines.append(f"eer_mean={fmt_float(report.eer_mean)}")
    lines.append(f"eer_std={fmt_float(report.eer_std)}")
    if report.divergence_mean is not None:
        lines.append(f"divergence_mean={fmt_float(report.divergence_mean)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# config files (flat `key = value`; paths resolve relative to the config file)
# ---------------------------------------------------------------------------

_BASE_KEYS = {"scenario", "enroll", "test", "trials", "runs", "freeze_anon_draw",
              "freeze_coral_draw", "allow_equal_seeds"}
_USER_KEYS = {"pool", "seed_user", "farthest_k", "select_n", "per_speaker_draw",
              "coral", "coral_source", "coral_target", "coral_n_user", "coral_lambda",
              "denorm_mode"}
_ATTACKER_KEYS = {"seed_attacker", "attacker_pool", "attacker_farthest_k",
                  "attacker_select_n", "coral_n_attacker"}
_KNOWN_KEYS = _BASE_KEYS | _USER_KEYS | _ATTACKER_KEYS


def _parse_bool(value: str, key: str, path) -> bool:
    v = value.strip().lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise FormatError(f"{key} must be true/false, got {value!r}", path)


def _parse_int(value: str, key: str, path) -> int:
    try:
        return int(value)
    except ValueError:
        raise FormatError(f"{key} must be an integer, got {value!r}", path) from None


def load_scenario_config(path) -> ScenarioConfig:
    path = Path(path)
    base = path.parent
    kv: dict[str, str] = {}
    for line_no, key, value in parse_kv_file(path):
        if key not in _KNOWN_KEYS:
            raise FormatError(f"unknown config key {key!r}", path, line_no)
        if key in kv:
            raise FormatError(f"duplicate config key {key!r}", path, line_no)
        kv[key] = value

    def require(key: str) -> str:
        if key not in kv:
            raise FormatError(f"missing required key {key!r}", path)
        return kv[key]

    def load_set(key: str) -> VectorSet:
        return load_vector_set(base / require(key))

    scenario = require("scenario")
    if scenario not in SCENARIOS:
        raise FormatError(f"scenario must be one of {SCENARIOS}, got {scenario!r}", path)
    enroll = load_set("enroll")
    test = load_set("test")
    trials = load_trials(base / require("trials"))
    runs = _parse_int(kv["runs"], "runs", path) if "runs" in kv else DEFAULT_RUNS

    if scenario == UNPROTECTED:
        stray = sorted((set(kv) & (_USER_KEYS | _ATTACKER_KEYS)))
        if stray:
            raise FormatError(f"keys not used by unprotected: {stray}", path)
        return ScenarioConfig(scenario=scenario, enroll=enroll, test=test, trials=trials,
                              runs=runs)

    pool = load_set("pool")
    farthest_k = (_parse_int(kv["farthest_k"], "farthest_k", path)
                  if "farthest_k" in kv else DEFAULT_FARTHEST_K)
    select_n = (_parse_int(kv["select_n"], "select_n", path)
                if "select_n" in kv else DEFAULT_SELECT_N)
    per_speaker = _parse_bool(kv.get("per_speaker_draw", "false"), "per_speaker_draw", path)

    coral_on = _parse_bool(kv.get("coral", "false"), "coral", path)
    coral_source = coral_target = None
    lam = DEFAULT_LAMBDA
    denorm_mode = DENORM_TARGET
    if coral_on:
        coral_source = load_set("coral_source")
        coral_target = load_set("coral_target")
        if "coral_lambda" in kv:
            try:
                lam = float(kv["coral_lambda"])
            except ValueError:
                raise FormatError("coral_lambda must be a float", path) from None
        denorm_mode = kv.get("denorm_mode", DENORM_TARGET)
    elif {"coral_source", "coral_target", "coral_n_user", "coral_n_attacker",
          "coral_lambda", "denorm_mode"} & set(kv):
        raise FormatError("coral_* keys require 'coral = true'", path)

    def build_party(seed_key: str, n_key: str, pool_vs: VectorSet, k: int, n: int) -> PartyPolicy:
        seed = _parse_int(require(seed_key), seed_key, path)
        plan = None
        if coral_on:
            plan = CoralPlan(source=coral_source, target=coral_target,
                             n_fit=_parse_int(require(n_key), n_key, path),
                             lam=lam, denorm_mode=denorm_mode)
        return PartyPolicy(seed=seed, pool=pool_vs, farthest_k=k, select_n=n,
                           per_speaker=per_speaker, coral=plan)

    try:
        user = build_party("seed_user", "coral_n_user", pool, farthest_k, select_n)
        attacker = None
        if scenario == LAZY_INFORMED:
            attacker_pool = (load_vector_set(base / kv["attacker_pool"])
                             if "attacker_pool" in kv else pool)
            ak = (_parse_int(kv["attacker_farthest_k"], "attacker_farthest_k", path)
                  if "attacker_farthest_k" in kv else farthest_k)
            an = (_parse_int(kv["attacker_select_n"], "attacker_select_n", path)
                  if "attacker_select_n" in kv else select_n)
            attacker = build_party("seed_attacker", "coral_n_attacker", attacker_pool, ak, an)
        elif set(kv) & _ATTACKER_KEYS:
            raise FormatError(
                f"attacker keys are only valid for lazy_informed: {sorted(set(kv) & _ATTACKER_KEYS)}",
                path)
        return ScenarioConfig(
            scenario=scenario, enroll=enroll, test=test, trials=trials, user=user,
            attacker=attacker, runs=runs,
            freeze_anon_draw=_parse_bool(kv.get("freeze_anon_draw", "false"),
                                         "freeze_anon_draw", path),
            freeze_coral_draw=_parse_bool(kv.get("freeze_coral_draw", "false"),
                                          "freeze_coral_draw", path),
            allow_equal_seeds=_parse_bool(kv.get("allow_equal_seeds", "false"),
                                          "allow_equal_seeds", path))
    except ValueError as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(str(exc), path) from None
