"""Hopfield network state laboratory.

Builds prototype-regime learning tasks, trains Hopfield networks on
them, harvests per-neuron energy profiles of prototype, learned, and
spurious states, and fits classifiers that tell those state kinds apart
from the profile alone.
"""

from hoplab.classifiers import (
    ClassWeights,
    DamModel,
    DeepModel,
    KernelModel,
    LabeledDataset,
    LinearModel,
    StabilityRatioModel,
    class_weights,
    decision_values,
    default_ratio_k,
    predict,
    predict_many,
    stability_ratio,
    train_dam,
    train_nn,
    train_stability_ratio,
    train_svm,
)
from hoplab.experiments import (
    COMBINED,
    ExperimentSpec,
    ResultRow,
    ResultsTable,
    Variant,
    build_combined,
    build_variant_pool,
    default_spec,
    default_variants,
    run_experiment,
    standard_variant,
    stratified_subsample,
)
from hoplab.harvest import (
    EnergyProfile,
    HarvestSet,
    ProbeStats,
    StateClass,
    energy_profile,
    harvest,
    label_state,
    normalize_profile,
    normalize_rows,
)
from hoplab.hopfield import (
    RelaxationCapError,
    RelaxInfo,
    ThermalParams,
    energy,
    hebbian_learn,
    is_stable,
    prototype_strength,
    relax,
    thermal_perceptron_learn,
    total_energy,
)
from hoplab.metrics import (
    ClassScores,
    ConfusionMatrix,
    ScoreReport,
    confuse,
    score,
)
from hoplab.tasks import (
    PrototypeTask,
    TaskConfig,
    build_task,
    generate_instances,
    generate_prototypes,
)
from hoplab.tsne import tsne_embed

__version__ = "0.1.0"
