"""Blockchain-simulated federated learning with group Shapley accounting."""

from .chain import (
    Block,
    ChainState,
    ConfigTx,
    EvalResultTx,
    MaskedUpdateTx,
    MinerSet,
    ProtocolResult,
    PubKeyTx,
    ScenarioConfig,
    TamperSpec,
    TxRejected,
    apply_block,
    export_chain,
    load_chain,
    propose_block,
    replay_chain,
    run_protocol,
    select_leader,
    verify_block,
)
from .data import NoiseConfig, SplitConfig, add_noise, load_optdigits, split_owners
from .experiments import (
    ExperimentConfig,
    ExperimentReport,
    cosine_similarity,
    ground_truth_sv,
    run_experiment_suite,
)
from .model import (
    Dataset,
    TrainConfig,
    UtilityEvaluator,
    average_weights,
    evaluate,
    train_local,
    zero_weights,
)
from .secure_agg import (
    DHParams,
    FixedPointCodec,
    KeyPair,
    MaskedUpdate,
    SharedKey,
    derive_mask,
    derive_shared,
    keygen,
    mask_update,
    secure_aggregate,
)
from .shapley import (
    ContributionLedger,
    Grouping,
    RoundContribution,
    UtilityTable,
    accumulate,
    coalition_models,
    group_sv_round,
    grouping,
    native_sv,
    permutation,
    sv_permutation_oracle,
)

__version__ = "0.1.0"
