"""Corpus curriculum toolkit.

Scores text corpora for per-document complexity (heuristic and
information-theoretic), turns the scores into batch schedules under
several curriculum samplers plus a random baseline, and measures how
fast a small deterministic classifier converges under each schedule.
"""

__version__ = "0.1.0"

from .corpus import (
    Corpus,
    CorpusFormatError,
    CorpusStats,
    Document,
    TokenizerConfig,
    build_stats,
    corpus_from_texts,
    load_corpus,
    load_stats,
    save_stats,
    tokenize,
)
from .infotheory import (
    BernoulliSequence,
    EntropyProfile,
    StatsMismatchError,
    binary_entropy,
    chain_entropy,
    entropy_profile,
    excess_entropy,
    score_infotheoretic,
    to_bernoulli,
    tse_bruteforce,
    tse_closed_form,
)
from .metrics import (
    INTERNAL_METRICS,
    METRIC_IDS,
    ComplexityScores,
    ScoreFileError,
    compute_scores,
    load_external_scores,
    read_scores,
    score_length,
    score_likelihood,
    score_max_word_rank,
    score_tfidf,
    sort_by_complexity,
    write_scores,
)
from .samplers import (
    SAMPLER_KINDS,
    IncompatibleMetricError,
    SamplerConfig,
    Schedule,
    ScheduleMeta,
    competence,
    epoch_of_step,
    hyp_bucket_probs,
    make_cb_schedule,
    make_db_schedule,
    make_hyp_schedule,
    make_random_schedule,
    make_schedule,
    make_sm_schedule,
    make_ss_schedule,
    metric_compatible,
    split_buckets,
)
from .schedule_io import (
    ScheduleFormatError,
    load_schedule,
    schedule_stats,
    write_schedule,
)
from .trainer import (
    UNREACHED,
    MatrixResult,
    RunResult,
    TrainerConfig,
    TrainerError,
    TrainingCurve,
    build_features,
    logistic_loss_and_grad,
    matrix_table,
    run_matrix,
    saturation_value,
    steps_to_threshold,
    train,
    train_split_size,
    write_curve_csv,
    write_runs_csv,
)
