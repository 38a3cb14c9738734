from .evaluation import RESULT_COLUMNS, DelayModel, Evaluation, evaluate, sweep, write_evaluations
from .policies import (
    CachePolicy,
    RandomPolicy,
    StaticPolicy,
    ThompsonPolicy,
    ThompsonState,
    hit_percentage,
    oracle,
    oracle_policy,
    popularity_policy,
    random_policy,
    thompson_policy,
)
from .popularity import (
    CacheState,
    PopularityScores,
    predict_popularity,
    select_top_n,
    top_n_ids,
    write_popularity_csv,
)
