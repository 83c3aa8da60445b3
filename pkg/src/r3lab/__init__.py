"""Desk-scale GAN training lab.

Relativistic pairing losses with zero-centered gradient penalties, cosine
burn-in hyperparameter schedules, small explicit-backprop networks, analytic
and synthetic testbeds, Fréchet-distance evaluation, and a class-rebalancing
pipeline, all behind a reproducible CLI.
"""

from .schedules import (
    ScheduleSpec,
    TrainingSchedule,
    HyperparamSnapshot,
    cosine_fraction,
    schedule_value,
    snapshot_at,
    load_preset,
    list_presets,
)
from .nets import (
    MlpNetwork,
    Layer,
    GradientBundle,
    init_mlp,
    forward,
    param_gradients,
    input_gradient,
    penalty_param_gradients,
    finite_difference_check,
)
from .losses import (
    PairedBatch,
    LossReport,
    rpgan_discriminator_loss,
    rpgan_generator_loss,
    zero_centered_penalty,
    discriminator_step_gradients,
    generator_step_gradients,
)
from .training import (
    ExperimentConfig,
    TrainState,
    adam_step,
    ema_update,
    apply_augmentation,
    train_step,
    run_training,
)
from .testbeds import (
    DiracState,
    dirac_r3_step,
    simulate_dirac,
    RingGmmSpec,
    sample_ring_gmm,
    RingImageSpec,
    render_cell_image,
    build_imbalanced_dataset,
)
from .metrics import (
    GaussianSummary,
    fit_gaussian,
    frechet_distance,
    proxy_fd,
    mode_coverage,
    classification_report,
)
from .rebalance import (
    RebalanceConfig,
    RebalanceReport,
    train_classifier,
    synthesize_minority,
    run_rebalance_experiment,
)

__version__ = "0.1.0"
